"""Compiled per-cycle kernel for PE issue, shared-unit/CRAM arbitration and commit.

State is struct-of-arrays with a leading cluster axis so one call advances
phase 3 of every cluster. Field indices below are the layout contract with
``cluster.ClusterBank``.
"""
import numpy as np
from numba import njit, prange

from . import isa, memmap
from .isa import (ADD, EBREAK, ECALL, JAL, JALR, LB, LBU, LH, LHU, LW, MUL, SB, SH,
                  SLL, SLLI, SRA, SRAI, SRL, SRLI, SW, access_width, compute,
                  decode_fields, load_extract, store_merge, writes_rd)

# per-PE fields of pe[c, p, :]
F_PC = 0
F_HALTED = 1
F_RESET = 2
F_BUSY_UNIT = 3
F_BUSY_LOAD = 4
F_BUSY_FLUSH = 5
F_RETIRED = 6
F_ACTIVE = 7
F_ST_BANK = 8
F_ST_CONC = 9
F_ST_UNIT = 10
F_ST_SEND = 11
F_ST_FLUSH = 12
F_ST_LOAD = 13
F_FAULT = 14
F_FAULT_PC = 15
F_FAULT_ARG = 16
F_EVENT = 17
F_EVENT_ARG = 18
F_GRANTS = 19
F_GID = 20
N_PE_FIELDS = 21

STALL_FIELDS = {
    "bank_conflict": F_ST_BANK,
    "concentrator": F_ST_CONC,
    "shared_unit": F_ST_UNIT,
    "send_buffer": F_ST_SEND,
    "branch_flush": F_ST_FLUSH,
    "load_occupancy": F_ST_LOAD,
}

# per-cluster scalars cl[c, :]
C_PORTS_FREE = 0
C_OUT_BUSY = 1
C_SEND_LATCH = 2
C_SEND_BLOCK = 3
C_SEND_DESC = 4
C_SEND_PE = 5
C_CRAM_BYTES = 6
C_MEM_GRANTS = 7
C_MUL_PTR = 8
C_SEND_PTR = 9
C_UNIT_GRANTS = 10
C_MUL_GRANTS = 11
N_CL_FIELDS = 12

# scratch scr[c, p, :]
S_REQ = 0
S_KIND = 1
S_RD = 2
S_VAL = 3
S_NPC = 4
S_TAKEN = 5
S_ADDR = 6
S_REGION = 7
S_BANK = 8
S_UNIT = 9
S_SEND = 10
S_STALL = 11
N_SCRATCH = 12

UNIT_NONE = 0
UNIT_PAIR = 1
UNIT_MUL = 2

# params
P_NPES = 0
P_NBANKS = 1
P_IRAM_BYTES = 2
P_CRAM_BYTES = 3
P_STAGES = 4
P_HAS_MUL = 5
P_ROWS = 6
P_COLS = 7
N_PARAMS = 8

FAULT_NONE = 0
FAULT_ILLEGAL = 1
FAULT_MISALIGNED_ACCESS = 2
FAULT_MISALIGNED_FETCH = 3
FAULT_UNMAPPED = 4
FAULT_INVALID_DEST = 5
FAULT_INVALID_BLOCK = 6
FAULT_NAMES = {
    FAULT_ILLEGAL: "IllegalInstruction",
    FAULT_MISALIGNED_ACCESS: "MisalignedAccess",
    FAULT_MISALIGNED_FETCH: "MisalignedFetch",
    FAULT_UNMAPPED: "UnmappedAddress",
    FAULT_INVALID_DEST: "InvalidDestination",
    FAULT_INVALID_BLOCK: "InvalidBlock",
}

EV_NONE = 0
EV_HALT = 1
EV_FAULT = 2
EV_TRACE = 3
EV_SEND = 4
EVENT_NAMES = {EV_HALT: "halt", EV_FAULT: "fault", EV_TRACE: "trace", EV_SEND: "send"}

CAUSE_NONE = 0
CAUSE_CONC = 1
CAUSE_BANK = 2

CRAM_BASE = memmap.CRAM_BASE
NOC_BASE = memmap.NOC_BASE


@njit(cache=True)
def arbitrate_banks(req_bank, favor, bank_ptr, grant, cause):
    """Two-stage concentrator + crossbar arbitration for one cluster.

    ``req_bank[p]`` is the bank PE ``p`` wants (-1 for none). ``favor[k]``
    (0/1) picks which PE of pair ``k`` its 2:1 concentrator forwards when both
    request; ``bank_ptr[j]`` is bank ``j``'s round-robin pointer over
    concentrators. A second matching round lets a concentrator whose
    forwarded request lost offer its other PE to a still-idle bank, so the
    grant set is maximal. Pointers move only on contested grants.
    Fills ``grant`` (0/1) and ``cause`` for losers; returns the grant count.
    """
    P = req_bank.shape[0]
    NC = P // 2
    NB = bank_ptr.shape[0]
    owner = np.full(NB, -1, np.int64)
    prop = np.full(NC, -1, np.int64)
    proposed = np.zeros(P, np.bool_)
    matched = np.zeros(NC, np.bool_)
    for p in range(P):
        grant[p] = 0
        cause[p] = CAUSE_NONE
    n = 0
    for rnd in range(2):
        any_prop = False
        for k in range(NC):
            prop[k] = -1
            if matched[k]:
                continue
            a = 2 * k
            b = a + 1
            ca = req_bank[a] >= 0 and not proposed[a] and owner[req_bank[a]] < 0
            cb = req_bank[b] >= 0 and not proposed[b] and owner[req_bank[b]] < 0
            if ca and cb:
                q = a + favor[k]
            elif ca:
                q = a
            elif cb:
                q = b
            else:
                continue
            prop[k] = q
            proposed[q] = True
            any_prop = True
        if not any_prop:
            break
        for j in range(NB):
            if owner[j] >= 0:
                continue
            contenders = 0
            for k in range(NC):
                if prop[k] >= 0 and req_bank[prop[k]] == j:
                    contenders += 1
            if contenders == 0:
                continue
            win = -1
            for i in range(NC):
                k = (bank_ptr[j] + i) % NC
                if prop[k] >= 0 and req_bank[prop[k]] == j:
                    win = k
                    break
            owner[j] = win
            matched[win] = True
            grant[prop[win]] = 1
            n += 1
            if contenders >= 2:
                bank_ptr[j] = (win + 1) % NC
    for k in range(NC):
        a = 2 * k
        b = a + 1
        if req_bank[a] >= 0 and req_bank[b] >= 0 and matched[k]:
            favor[k] = 0 if grant[b] else 1
    for p in range(P):
        if req_bank[p] >= 0 and grant[p] == 0:
            cause[p] = CAUSE_BANK if proposed[p] else CAUSE_CONC
    return n


@njit(cache=True)
def _fault(pe, c, p, code, pc, arg):
    pe[c, p, F_FAULT] = code
    pe[c, p, F_FAULT_PC] = pc
    pe[c, p, F_FAULT_ARG] = arg
    pe[c, p, F_HALTED] = 1
    pe[c, p, F_EVENT] = EV_FAULT
    pe[c, p, F_EVENT_ARG] = code


@njit(cache=True)
def _issue(pe, regs, iram, scr, prm, c, p):
    """Fetch, decode and evaluate the next instruction; fill scratch. Returns
    False if the PE faulted."""
    iram_bytes = prm[P_IRAM_BYTES]
    cram_bytes = prm[P_CRAM_BYTES]
    pc = pe[c, p, F_PC]
    if pc >= iram_bytes:
        _fault(pe, c, p, FAULT_UNMAPPED, pc, pc)
        return False
    word = np.int64(iram[c, p >> 1, pc >> 2])
    kind, rd, rs1, rs2, imm = decode_fields(word, prm[P_HAS_MUL] != 0)
    if kind < 0:
        _fault(pe, c, p, FAULT_ILLEGAL, pc, word)
        return False
    a = regs[c, p, rs1]
    b = regs[c, p, rs2]
    value, npc, taken, addr = compute(kind, a, b, imm, pc)
    if npc & 3:
        _fault(pe, c, p, FAULT_MISALIGNED_FETCH, pc, npc)
        return False
    scr[c, p, S_REQ] = 1
    scr[c, p, S_KIND] = kind
    scr[c, p, S_RD] = rd
    scr[c, p, S_VAL] = value
    scr[c, p, S_NPC] = npc
    scr[c, p, S_TAKEN] = 1 if taken else 0
    scr[c, p, S_ADDR] = addr
    scr[c, p, S_REGION] = memmap.R_UNMAPPED
    scr[c, p, S_BANK] = -1
    scr[c, p, S_UNIT] = UNIT_NONE
    scr[c, p, S_SEND] = 0
    scr[c, p, S_STALL] = 0
    if kind == SLL or kind == SRL or kind == SRA or kind == SLLI or kind == SRLI or kind == SRAI:
        scr[c, p, S_UNIT] = UNIT_PAIR
    elif kind == MUL:
        scr[c, p, S_UNIT] = UNIT_MUL
    elif kind >= LB and kind <= SW:
        width = access_width(kind)
        if addr % width != 0:
            _fault(pe, c, p, FAULT_MISALIGNED_ACCESS, pc, addr)
            return False
        region = memmap.region_of(addr, iram_bytes, cram_bytes)
        is_load = kind <= LHU
        scr[c, p, S_REGION] = region
        if region == memmap.R_CRAM:
            scr[c, p, S_BANK] = ((addr - CRAM_BASE) >> 2) & (prm[P_NBANKS] - 1)
            if width != 4:
                scr[c, p, S_UNIT] = UNIT_PAIR
        elif width != 4 or region == memmap.R_UNMAPPED or region == memmap.R_IRAM:
            _fault(pe, c, p, FAULT_UNMAPPED, pc, addr)
            return False
        elif is_load and region != memmap.R_PEID:
            _fault(pe, c, p, FAULT_UNMAPPED, pc, addr)
            return False
        elif not is_load and region == memmap.R_PEID:
            _fault(pe, c, p, FAULT_UNMAPPED, pc, addr)
            return False
        elif region == memmap.R_NOC:
            desc = value
            if (desc >> 15) & 1 == 0:
                if (desc >> 24) & 0xFF >= prm[P_COLS] or (desc >> 16) & 0xFF >= prm[P_ROWS]:
                    _fault(pe, c, p, FAULT_INVALID_DEST, pc, desc)
                    return False
            if desc & 0x3FF >= cram_bytes // 32:
                _fault(pe, c, p, FAULT_INVALID_BLOCK, pc, desc)
                return False
            scr[c, p, S_SEND] = 1
    return True


@njit(cache=True)
def _commit(pe, regs, cram, cl, scr, prm, c, p):
    kind = scr[c, p, S_KIND]
    rd = scr[c, p, S_RD]
    value = scr[c, p, S_VAL]
    addr = scr[c, p, S_ADDR]
    region = scr[c, p, S_REGION]
    ev = EV_NONE
    if kind >= LB and kind <= LHU:
        if region == memmap.R_CRAM:
            word = np.int64(cram[c, (addr - CRAM_BASE) >> 2])
            value = load_extract(kind, word, addr)
        else:
            value = pe[c, p, F_GID]
        # load data returns one stage per pipeline stage past issue
        pe[c, p, F_BUSY_LOAD] = prm[P_STAGES] - 1
    elif kind >= SB and kind <= SW:
        if region == memmap.R_CRAM:
            idx = (addr - CRAM_BASE) >> 2
            cram[c, idx] = np.uint32(store_merge(kind, np.int64(cram[c, idx]), value, addr))
        elif region == memmap.R_HALT:
            pe[c, p, F_HALTED] = 1
            ev = EV_HALT
        elif region == memmap.R_TRACE:
            ev = EV_TRACE
            pe[c, p, F_EVENT_ARG] = value & 0xFF
        elif region == memmap.R_NOC:
            cl[c, C_SEND_LATCH] = 1
            cl[c, C_SEND_BLOCK] = ((addr - NOC_BASE) >> 5) & 0x3FF
            cl[c, C_SEND_DESC] = value
            cl[c, C_SEND_PE] = p
            cl[c, C_PORTS_FREE] = 0
            cl[c, C_CRAM_BYTES] += 32
            ev = EV_SEND
    elif kind == ECALL or kind == EBREAK:
        pe[c, p, F_HALTED] = 1
        ev = EV_HALT
    if region == memmap.R_CRAM:
        cl[c, C_CRAM_BYTES] += 4
        cl[c, C_MEM_GRANTS] += 1
        pe[c, p, F_GRANTS] += 1
    if rd != 0 and writes_rd(kind):
        regs[c, p, rd] = value
    if scr[c, p, S_TAKEN]:
        pe[c, p, F_BUSY_FLUSH] = prm[P_STAGES] - 1
    unit = scr[c, p, S_UNIT]
    if unit == UNIT_PAIR:
        pe[c, p, F_BUSY_UNIT] = isa.SHIFTER_LATENCY
    elif unit == UNIT_MUL:
        pe[c, p, F_BUSY_UNIT] = isa.MUL_LATENCY
    pe[c, p, F_PC] = scr[c, p, S_NPC]
    pe[c, p, F_RETIRED] += 1
    pe[c, p, F_ACTIVE] += 1
    if ev != EV_NONE:
        pe[c, p, F_EVENT] = ev
        return 1
    return 0


@njit(cache=True)
def _stall(pe, scr, c, p, field):
    scr[c, p, S_STALL] = 1
    pe[c, p, field] += 1
    pe[c, p, F_ACTIVE] += 1


@njit(cache=True)
def cluster_step(pe, regs, iram, cram, cl, favor, bank_ptr, unit_ptr, scr, grant,
                 cause, req, prm, c):
    """Phase 3 for cluster ``c``: issue, arbitrate, commit. Returns event count."""
    P = prm[P_NPES]
    nev = 0
    nreq = 0
    for p in range(P):
        pe[c, p, F_EVENT] = EV_NONE
        scr[c, p, S_REQ] = 0
        if pe[c, p, F_HALTED] != 0 or pe[c, p, F_RESET] != 0:
            continue
        if pe[c, p, F_BUSY_UNIT] > 0:
            pe[c, p, F_BUSY_UNIT] -= 1
            pe[c, p, F_ST_UNIT] += 1
            pe[c, p, F_ACTIVE] += 1
            continue
        if pe[c, p, F_BUSY_LOAD] > 0:
            pe[c, p, F_BUSY_LOAD] -= 1
            pe[c, p, F_ST_LOAD] += 1
            pe[c, p, F_ACTIVE] += 1
            continue
        if pe[c, p, F_BUSY_FLUSH] > 0:
            pe[c, p, F_BUSY_FLUSH] -= 1
            pe[c, p, F_ST_FLUSH] += 1
            pe[c, p, F_ACTIVE] += 1
            continue
        if _issue(pe, regs, iram, scr, prm, c, p):
            nreq += 1
        else:
            nev += 1
    if nreq == 0:
        return nev

    # shared units: one shifter/subword unit per PE pair, one multiplier per cluster
    for k in range(P // 2):
        a = 2 * k
        b = a + 1
        wa = scr[c, a, S_REQ] == 1 and scr[c, a, S_UNIT] == UNIT_PAIR
        wb = scr[c, b, S_REQ] == 1 and scr[c, b, S_UNIT] == UNIT_PAIR
        if wa and wb:
            loser = a if unit_ptr[c, k] == 1 else b
            unit_ptr[c, k] = 1 - unit_ptr[c, k]
            _stall(pe, scr, c, loser, F_ST_UNIT)
        if wa or wb:
            cl[c, C_UNIT_GRANTS] += 1
    nmul = 0
    for p in range(P):
        if scr[c, p, S_REQ] == 1 and scr[c, p, S_UNIT] == UNIT_MUL:
            nmul += 1
    if nmul > 0:
        win = -1
        for i in range(P):
            q = (cl[c, C_MUL_PTR] + i) % P
            if scr[c, q, S_REQ] == 1 and scr[c, q, S_UNIT] == UNIT_MUL:
                win = q
                break
        for p in range(P):
            if p != win and scr[c, p, S_REQ] == 1 and scr[c, p, S_UNIT] == UNIT_MUL:
                _stall(pe, scr, c, p, F_ST_UNIT)
        if nmul >= 2:
            cl[c, C_MUL_PTR] = (win + 1) % P
        cl[c, C_MUL_GRANTS] += 1

    # NOC send: one outgoing buffer, needs the whole 8-port side this cycle
    nsend = 0
    for p in range(P):
        if scr[c, p, S_REQ] == 1 and scr[c, p, S_STALL] == 0 and scr[c, p, S_SEND] == 1:
            nsend += 1
    if nsend > 0:
        if cl[c, C_OUT_BUSY] != 0 or cl[c, C_SEND_LATCH] != 0 or cl[c, C_PORTS_FREE] < 8:
            win = -1
        else:
            win = -1
            for i in range(P):
                q = (cl[c, C_SEND_PTR] + i) % P
                if scr[c, q, S_REQ] == 1 and scr[c, q, S_STALL] == 0 and scr[c, q, S_SEND] == 1:
                    win = q
                    break
            if nsend >= 2:
                cl[c, C_SEND_PTR] = (win + 1) % P
        for p in range(P):
            if p != win and scr[c, p, S_REQ] == 1 and scr[c, p, S_STALL] == 0 \
                    and scr[c, p, S_SEND] == 1:
                _stall(pe, scr, c, p, F_ST_SEND)

    # CRAM banks through the concentrators and crossbar
    nbank = 0
    for p in range(P):
        if scr[c, p, S_REQ] == 1 and scr[c, p, S_STALL] == 0 and scr[c, p, S_BANK] >= 0:
            req[c, p] = scr[c, p, S_BANK]
            nbank += 1
        else:
            req[c, p] = -1
    if nbank > 0:
        arbitrate_banks(req[c], favor[c], bank_ptr[c], grant[c], cause[c])
        for p in range(P):
            if req[c, p] >= 0 and grant[c, p] == 0:
                if cause[c, p] == CAUSE_BANK:
                    _stall(pe, scr, c, p, F_ST_BANK)
                else:
                    _stall(pe, scr, c, p, F_ST_CONC)

    for p in range(P):
        if scr[c, p, S_REQ] == 1 and scr[c, p, S_STALL] == 0:
            nev += _commit(pe, regs, cram, cl, scr, prm, c, p)
    return nev


@njit(cache=True)
def step_all(pe, regs, iram, cram, cl, favor, bank_ptr, unit_ptr, scr, grant, cause,
             req, prm):
    nev = 0
    for c in range(pe.shape[0]):
        nev += cluster_step(pe, regs, iram, cram, cl, favor, bank_ptr, unit_ptr, scr,
                            grant, cause, req, prm, c)
    return nev


def _step_all_parallel_py(pe, regs, iram, cram, cl, favor, bank_ptr, unit_ptr, scr,
                          grant, cause, req, prm):
    nev = 0
    for c in prange(pe.shape[0]):
        nev += cluster_step(pe, regs, iram, cram, cl, favor, bank_ptr, unit_ptr, scr,
                            grant, cause, req, prm, c)
    return nev


_parallel = None


def configure_threads(n):
    """Select the host thread count for ``step_all_parallel``."""
    import os
    import numba
    if "NUMBA_THREADING_LAYER" not in os.environ:
        # workqueue ships with numba; the driver calls from one thread only
        numba.config.THREADING_LAYER = "workqueue"
    numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))


def step_all_parallel(*args):
    """Same as :func:`step_all` with clusters spread over numba threads."""
    global _parallel
    if _parallel is None:
        _parallel = njit(parallel=True, cache=True)(_step_all_parallel_py)
    return _parallel(*args)


def arbitration_state(n_pes, n_banks):
    return (np.zeros(n_pes // 2, np.int64), np.zeros(n_banks, np.int64))
