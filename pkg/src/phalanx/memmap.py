"""PE-visible address map.

IRAM is fetch-only and sits at address 0. CRAM, the NOC send window and the
control registers are decodable from the high address bits.
"""
from numba import njit

IRAM_BASE = 0x0000_0000
CRAM_BASE = 0x0001_0000
NOC_BASE = 0x4000_0000
NOC_WINDOW = 0x8000
CTRL_HALT = 0xFFFF_FFF0
CTRL_TRACE = 0xFFFF_FFF4
CTRL_PEID = 0xFFFF_FFF8

R_UNMAPPED = 0
R_IRAM = 1
R_CRAM = 2
R_NOC = 3
R_HALT = 4
R_TRACE = 5
R_PEID = 6

REGION_NAMES = {
    R_UNMAPPED: "unmapped",
    R_IRAM: "iram",
    R_CRAM: "cram",
    R_NOC: "noc",
    R_HALT: "halt",
    R_TRACE: "trace",
    R_PEID: "peid",
}


@njit(cache=True)
def region_of(addr, iram_bytes, cram_bytes):
    if addr < iram_bytes:
        return R_IRAM
    if CRAM_BASE <= addr < CRAM_BASE + cram_bytes:
        return R_CRAM
    if NOC_BASE <= addr < NOC_BASE + NOC_WINDOW:
        return R_NOC
    if addr == CTRL_HALT:
        return R_HALT
    if addr == CTRL_TRACE:
        return R_TRACE
    if addr == CTRL_PEID:
        return R_PEID
    return R_UNMAPPED
