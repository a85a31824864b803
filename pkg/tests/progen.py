"""Random message-free RV32I programs for differential testing.

Every program starts by pointing x31 at a private 4 KB CRAM window
(``0x10000 + (pe_id % 8) * 4096``), then runs a straight body whose control
transfers only go forward, so it always reaches the final halt. x30 is a
scratch base for ``auipc``/``jalr`` pairs; branch targets never land between
the two halves of a pair.
"""
import numpy as np

PROLOGUE = [
    0xFF802F83,  # lw   x31, -8(x0)
    0x007FFF93,  # andi x31, x31, 7
    0x00CF9F93,  # slli x31, x31, 12
    0x00010F37,  # lui  x30, 0x10
    0x01EF8FB3,  # add  x31, x31, x30
]
HALT_STORE = 0xFE002823  # sw x0, -16(x0)
ECALL = 0x00000073

R_OPS = [(0, 0), (0x20, 0), (0, 1), (0, 2), (0, 3), (0, 4), (0, 5), (0x20, 5), (0, 6), (0, 7)]
I_OPS = [0, 2, 3, 4, 6, 7]
LOADS = [(0, 1), (1, 2), (2, 4), (4, 1), (5, 2)]
STORES = [(0, 1), (1, 2), (2, 4)]
BRANCH_F3 = [0, 1, 4, 5, 6, 7]


def r_type(f7, rs2, rs1, f3, rd, op=0x33):
    return (f7 << 25) | (rs2 << 20) | (rs1 << 15) | (f3 << 12) | (rd << 7) | op


def i_type(imm, rs1, f3, rd, op):
    return ((imm & 0xFFF) << 20) | (rs1 << 15) | (f3 << 12) | (rd << 7) | op


def s_type(imm, rs2, rs1, f3):
    imm &= 0xFFF
    return ((imm >> 5) << 25) | (rs2 << 20) | (rs1 << 15) | (f3 << 12) | ((imm & 31) << 7) | 0x23


def b_type(imm, rs2, rs1, f3):
    imm &= 0x1FFF
    return ((((imm >> 12) & 1) << 31) | (((imm >> 5) & 63) << 25) | (rs2 << 20) | (rs1 << 15)
            | (f3 << 12) | (((imm >> 1) & 15) << 8) | (((imm >> 11) & 1) << 7) | 0x63)


def j_type(imm, rd):
    imm &= 0x1FFFFF
    return ((((imm >> 20) & 1) << 31) | (((imm >> 1) & 1023) << 21) | (((imm >> 11) & 1) << 20)
            | (((imm >> 12) & 255) << 12) | (rd << 7) | 0x6F)


def random_program(rng, n=1000, has_mul=False):
    """Return a list of instruction words with ``n`` body instructions."""
    rd = lambda: int(rng.integers(1, 30))  # noqa: E731
    rs = lambda: int(rng.integers(0, 32))  # noqa: E731
    body = []      # words, or ("b", f3, rs1, rs2) / ("j", rd) placeholders
    pair_second = set()
    while len(body) < n:
        u = rng.random()
        if u < 0.25:
            f7, f3 = R_OPS[rng.integers(len(R_OPS))]
            if has_mul and rng.random() < 0.15:
                f7, f3 = 1, 0
            body.append(r_type(f7, rs(), rs(), f3, rd()))
        elif u < 0.45:
            if rng.random() < 0.3:
                f3 = int(rng.choice([1, 5]))
                f7 = 0x20 if f3 == 5 and rng.random() < 0.5 else 0
                body.append(i_type((f7 << 5) | int(rng.integers(32)), rs(), f3, rd(), 0x13))
            else:
                f3 = I_OPS[rng.integers(len(I_OPS))]
                body.append(i_type(int(rng.integers(-2048, 2048)), rs(), f3, rd(), 0x13))
        elif u < 0.52:
            op = 0x37 if rng.random() < 0.5 else 0x17
            body.append((int(rng.integers(1 << 20)) << 12) | (rd() << 7) | op)
        elif u < 0.67:
            f3, w = LOADS[rng.integers(len(LOADS))]
            off = int(rng.integers(0, 2048 // w)) * w
            body.append(i_type(off, 31, f3, rd(), 0x03))
        elif u < 0.80:
            f3, w = STORES[rng.integers(len(STORES))]
            off = int(rng.integers(0, 2048 // w)) * w
            body.append(s_type(off, rs(), 31, f3))
        elif u < 0.90:
            body.append(("b", BRANCH_F3[rng.integers(len(BRANCH_F3))], rs(), rs()))
        elif u < 0.95:
            body.append(("j", int(rng.integers(0, 30))))
        elif u < 0.98 and len(body) < n - 2:
            # auipc x30, 0 ; jalr rd, 8+4k(x30)
            body.append((30 << 7) | 0x17)
            body.append(("r", rd()))
            pair_second.add(len(body) - 1)
        else:
            body.append(0x0FF0000F)  # fence iorw, iorw
    body = body[:n]
    end = len(body)  # index of the halt instruction within the body frame

    def forward(i):
        ks = [k for k in range(1, 9) if i + k <= end and (i + k) not in pair_second]
        return ks[int(rng.integers(len(ks)))] if ks else 1

    words = []
    for i, item in enumerate(body):
        if isinstance(item, int):
            words.append(item)
        elif item[0] == "b":
            words.append(b_type(4 * forward(i), item[3], item[2], item[1]))
        elif item[0] == "j":
            words.append(j_type(4 * forward(i), item[1]))
        else:
            # target relative to the auipc one slot back
            k = forward(i)
            words.append(i_type(4 * (k + 1), 30, 0, item[1], 0x67))
    halt = HALT_STORE if rng.random() < 0.8 else ECALL
    return PROLOGUE + words + [halt]
