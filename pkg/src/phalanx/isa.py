"""RV32I decode, execute and timing for one GRVI-style processing element.

The bit-level work lives in small ``@njit`` helpers so the cluster engine and
the pure-Python API below share one implementation.
"""
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional

from numba import njit

from . import memmap
from .errors import IllegalInstruction, MisalignedAccess, MisalignedFetch

MASK32 = 0xFFFFFFFF


class Op(IntEnum):
    LUI = 0
    AUIPC = 1
    JAL = 2
    JALR = 3
    BEQ = 4
    BNE = 5
    BLT = 6
    BGE = 7
    BLTU = 8
    BGEU = 9
    LB = 10
    LH = 11
    LW = 12
    LBU = 13
    LHU = 14
    SB = 15
    SH = 16
    SW = 17
    ADDI = 18
    SLTI = 19
    SLTIU = 20
    XORI = 21
    ORI = 22
    ANDI = 23
    SLLI = 24
    SRLI = 25
    SRAI = 26
    ADD = 27
    SUB = 28
    SLL = 29
    SLT = 30
    SLTU = 31
    XOR = 32
    SRL = 33
    SRA = 34
    OR = 35
    AND = 36
    FENCE = 37
    ECALL = 38
    EBREAK = 39
    MUL = 40


# plain ints so numba folds them as constants
LUI, AUIPC, JAL, JALR = 0, 1, 2, 3
BEQ, BNE, BLT, BGE, BLTU, BGEU = 4, 5, 6, 7, 8, 9
LB, LH, LW, LBU, LHU = 10, 11, 12, 13, 14
SB, SH, SW = 15, 16, 17
ADDI, SLTI, SLTIU, XORI, ORI, ANDI, SLLI, SRLI, SRAI = 18, 19, 20, 21, 22, 23, 24, 25, 26
ADD, SUB, SLL, SLT, SLTU, XOR, SRL, SRA, OR, AND = 27, 28, 29, 30, 31, 32, 33, 34, 35, 36
FENCE, ECALL, EBREAK, MUL = 37, 38, 39, 40

BRANCHES = frozenset(range(BEQ, BGEU + 1))
LOADS = frozenset(range(LB, LHU + 1))
STORES = frozenset(range(SB, SW + 1))
SHIFTS = frozenset((SLLI, SRLI, SRAI, SLL, SRL, SRA))

# shared functional units; latency is added on top of the base occupancy
UNIT_SHIFTER = "shifter"
UNIT_SUBWORD = "subword"
UNIT_MULTIPLIER = "multiplier"
UNIT_LATENCY = {UNIT_SHIFTER: 1, UNIT_SUBWORD: 1, UNIT_MULTIPLIER: 2}
SHIFTER_LATENCY = 1
SUBWORD_LATENCY = 1
MUL_LATENCY = 2


@njit(cache=True)
def sext(value, bits):
    value &= (1 << bits) - 1
    if value & (1 << (bits - 1)):
        return value - (1 << bits)
    return value


@njit(cache=True)
def to_signed(value):
    if value & 0x80000000:
        return value - 0x100000000
    return value


@njit(cache=True)
def decode_fields(word, has_mul):
    """Return ``(kind, rd, rs1, rs2, imm)``; ``kind == -1`` for illegal words."""
    w = word & 0xFFFFFFFF
    opcode = w & 0x7F
    rd = (w >> 7) & 31
    f3 = (w >> 12) & 7
    rs1 = (w >> 15) & 31
    rs2 = (w >> 20) & 31
    f7 = w >> 25
    if opcode == 0x37:
        return LUI, rd, 0, 0, to_signed(w & 0xFFFFF000)
    if opcode == 0x17:
        return AUIPC, rd, 0, 0, to_signed(w & 0xFFFFF000)
    if opcode == 0x6F:
        imm = (((w >> 31) & 1) << 20) | (((w >> 12) & 0xFF) << 12) \
            | (((w >> 20) & 1) << 11) | (((w >> 21) & 0x3FF) << 1)
        return JAL, rd, 0, 0, sext(imm, 21)
    if opcode == 0x67:
        if f3 != 0:
            return -1, 0, 0, 0, 0
        return JALR, rd, rs1, 0, sext(w >> 20, 12)
    if opcode == 0x63:
        imm = (((w >> 31) & 1) << 12) | (((w >> 7) & 1) << 11) \
            | (((w >> 25) & 0x3F) << 5) | (((w >> 8) & 0xF) << 1)
        if f3 == 0:
            k = BEQ
        elif f3 == 1:
            k = BNE
        elif f3 == 4:
            k = BLT
        elif f3 == 5:
            k = BGE
        elif f3 == 6:
            k = BLTU
        elif f3 == 7:
            k = BGEU
        else:
            return -1, 0, 0, 0, 0
        return k, 0, rs1, rs2, sext(imm, 13)
    if opcode == 0x03:
        if f3 == 0:
            k = LB
        elif f3 == 1:
            k = LH
        elif f3 == 2:
            k = LW
        elif f3 == 4:
            k = LBU
        elif f3 == 5:
            k = LHU
        else:
            return -1, 0, 0, 0, 0
        return k, rd, rs1, 0, sext(w >> 20, 12)
    if opcode == 0x23:
        if f3 == 0:
            k = SB
        elif f3 == 1:
            k = SH
        elif f3 == 2:
            k = SW
        else:
            return -1, 0, 0, 0, 0
        return k, 0, rs1, rs2, sext((f7 << 5) | rd, 12)
    if opcode == 0x13:
        if f3 == 1:
            if f7 != 0:
                return -1, 0, 0, 0, 0
            return SLLI, rd, rs1, 0, rs2
        if f3 == 5:
            if f7 == 0:
                return SRLI, rd, rs1, 0, rs2
            if f7 == 0x20:
                return SRAI, rd, rs1, 0, rs2
            return -1, 0, 0, 0, 0
        if f3 == 0:
            k = ADDI
        elif f3 == 2:
            k = SLTI
        elif f3 == 3:
            k = SLTIU
        elif f3 == 4:
            k = XORI
        elif f3 == 6:
            k = ORI
        else:
            k = ANDI
        return k, rd, rs1, 0, sext(w >> 20, 12)
    if opcode == 0x33:
        if f7 == 0:
            if f3 == 0:
                k = ADD
            elif f3 == 1:
                k = SLL
            elif f3 == 2:
                k = SLT
            elif f3 == 3:
                k = SLTU
            elif f3 == 4:
                k = XOR
            elif f3 == 5:
                k = SRL
            elif f3 == 6:
                k = OR
            else:
                k = AND
            return k, rd, rs1, rs2, 0
        if f7 == 0x20:
            if f3 == 0:
                return SUB, rd, rs1, rs2, 0
            if f3 == 5:
                return SRA, rd, rs1, rs2, 0
            return -1, 0, 0, 0, 0
        if f7 == 1 and f3 == 0 and has_mul:
            return MUL, rd, rs1, rs2, 0
        return -1, 0, 0, 0, 0
    if opcode == 0x0F:
        # plain FENCE only: fm=0, rd=rs1=0; imm keeps pred<<4 | succ
        if f3 == 0 and rd == 0 and rs1 == 0 and (w >> 28) == 0:
            return FENCE, 0, 0, 0, (w >> 20) & 0xFF
        return -1, 0, 0, 0, 0
    if opcode == 0x73:
        if w == 0x00000073:
            return ECALL, 0, 0, 0, 0
        if w == 0x00100073:
            return EBREAK, 0, 0, 0, 0
    return -1, 0, 0, 0, 0


@njit(cache=True)
def compute(kind, a, b, imm, pc):
    """Datapath for one instruction.

    Returns ``(value, next_pc, taken, addr)``. ``a``/``b`` are the unsigned
    rs1/rs2 values. ``value`` is the writeback for ALU/jump kinds and the store
    data for stores; ``addr`` is the effective address for memory kinds.
    """
    M = 0xFFFFFFFF
    npc = (pc + 4) & M
    immu = imm & M
    if kind >= ADDI and kind <= AND:
        if kind <= SRAI:
            b2 = immu
        else:
            b2 = b
        if kind == ADD or kind == ADDI:
            v = (a + b2) & M
        elif kind == SUB:
            v = (a - b2) & M
        elif kind == XOR or kind == XORI:
            v = a ^ b2
        elif kind == OR or kind == ORI:
            v = a | b2
        elif kind == AND or kind == ANDI:
            v = a & b2
        elif kind == SLT or kind == SLTI:
            v = 1 if to_signed(a) < to_signed(b2) else 0
        elif kind == SLTU or kind == SLTIU:
            v = 1 if a < b2 else 0
        elif kind == SLL or kind == SLLI:
            v = (a << (b2 & 31)) & M
        elif kind == SRL or kind == SRLI:
            v = a >> (b2 & 31)
        else:
            v = (to_signed(a) >> (b2 & 31)) & M
        return v, npc, False, 0
    if kind == LUI:
        return immu, npc, False, 0
    if kind == AUIPC:
        return (pc + imm) & M, npc, False, 0
    if kind == JAL:
        return npc, (pc + imm) & M, True, 0
    if kind == JALR:
        return npc, ((a + imm) & M) & 0xFFFFFFFE, True, 0
    if kind >= BEQ and kind <= BGEU:
        if kind == BEQ:
            t = a == b
        elif kind == BNE:
            t = a != b
        elif kind == BLT:
            t = to_signed(a) < to_signed(b)
        elif kind == BGE:
            t = to_signed(a) >= to_signed(b)
        elif kind == BLTU:
            t = a < b
        else:
            t = a >= b
        if t:
            return 0, (pc + imm) & M, True, 0
        return 0, npc, False, 0
    if kind >= LB and kind <= LHU:
        return 0, npc, False, (a + imm) & M
    if kind >= SB and kind <= SW:
        return b, npc, False, (a + imm) & M
    if kind == MUL:
        return (a * b) & M, npc, False, 0
    return 0, npc, False, 0


@njit(cache=True)
def access_width(kind):
    if kind == LB or kind == LBU or kind == SB:
        return 1
    if kind == LH or kind == LHU or kind == SH:
        return 2
    return 4


@njit(cache=True)
def load_extract(kind, word, addr):
    """Select and extend the loaded bytes from the aligned 32-bit word."""
    if kind == LW:
        return word & 0xFFFFFFFF
    if kind == LB or kind == LBU:
        byte = (word >> ((addr & 3) * 8)) & 0xFF
        if kind == LB:
            return sext(byte, 8) & 0xFFFFFFFF
        return byte
    half = (word >> ((addr & 2) * 8)) & 0xFFFF
    if kind == LH:
        return sext(half, 16) & 0xFFFFFFFF
    return half


@njit(cache=True)
def store_merge(kind, old, data, addr):
    if kind == SW:
        return data & 0xFFFFFFFF
    if kind == SB:
        sh = (addr & 3) * 8
        mask = 0xFF << sh
    else:
        sh = (addr & 2) * 8
        mask = 0xFFFF << sh
    return (old & (0xFFFFFFFF ^ mask)) | ((data << sh) & mask)


@njit(cache=True)
def writes_rd(kind):
    return not ((kind >= BEQ and kind <= BGEU) or (kind >= SB and kind <= SW)
                or kind >= FENCE and kind <= EBREAK)


# ---------------------------------------------------------------------------
# Python-facing types


@dataclass(frozen=True)
class Instr:
    kind: Op
    rd: int = 0
    rs1: int = 0
    rs2: int = 0
    imm: int = 0

    def __post_init__(self):
        for r in (self.rd, self.rs1, self.rs2):
            if not 0 <= r < 32:
                raise ValueError(f"register index {r} out of range")


@dataclass(frozen=True)
class PeConfig:
    stages: int = 2
    has_mul: bool = False
    pe_local_index: int = 0
    global_pe_id: int = 0

    def __post_init__(self):
        if self.stages not in (2, 3):
            raise ValueError("stages must be 2 or 3")


@dataclass
class PeState:
    pc: int = 0
    regs: list = field(default_factory=lambda: [0] * 32)
    stall_cycles_remaining: int = 0
    halted: bool = False
    retired: int = 0


@dataclass(frozen=True)
class MemRequest:
    op: str  # "load" | "store"
    address: int
    width: int
    data: Optional[int] = None
    rd: Optional[int] = None
    signed: bool = False
    pe: Optional[int] = None


@dataclass(frozen=True)
class ExecEffect:
    next_pc: int
    reg_write: Optional[tuple] = None
    branch_taken: bool = False
    mem_req: Optional[MemRequest] = None
    shared_unit_req: Optional[tuple] = None
    mmio_req: Optional[tuple] = None
    halt_req: bool = False


def decode(word, has_mul=False, pc=None):
    kind, rd, rs1, rs2, imm = decode_fields(word & MASK32, has_mul)
    if kind < 0:
        raise IllegalInstruction(word, pc)
    return Instr(Op(kind), rd, rs1, rs2, imm)


def _is_mmio(addr):
    return memmap.NOC_BASE <= addr < memmap.NOC_BASE + memmap.NOC_WINDOW \
        or addr >= memmap.CTRL_HALT


def execute(state, instr, load_data=None):
    """Evaluate ``instr`` against ``state`` without mutating it."""
    k = int(instr.kind)
    a = state.regs[instr.rs1] & MASK32
    b = state.regs[instr.rs2] & MASK32
    value, next_pc, taken, addr = compute(k, a, b, instr.imm, state.pc)
    if next_pc % 4:
        raise MisalignedFetch(next_pc, state.pc)

    if k in (ECALL, EBREAK):
        return ExecEffect(next_pc=next_pc, halt_req=True)
    if k in SHIFTS:
        return ExecEffect(next_pc=next_pc, reg_write=(instr.rd, value),
                          shared_unit_req=(UNIT_SHIFTER, (a, instr.imm if k < ADD else b)))
    if k == MUL:
        return ExecEffect(next_pc=next_pc, reg_write=(instr.rd, value),
                          shared_unit_req=(UNIT_MULTIPLIER, (a, b)))

    if k in LOADS or k in STORES:
        width = access_width(k)
        if addr % width:
            raise MisalignedAccess(addr, width, state.pc)
        unit = (UNIT_SUBWORD, (addr, width)) if width != 4 else None
        if k in LOADS:
            write = None
            if load_data is not None:
                write = (instr.rd, load_extract(k, load_data & MASK32, addr))
            if _is_mmio(addr):
                return ExecEffect(next_pc=next_pc, reg_write=write,
                                  mmio_req=(addr, None), shared_unit_req=unit)
            req = MemRequest("load", addr, width, rd=instr.rd, signed=k in (LB, LH))
            return ExecEffect(next_pc=next_pc, reg_write=write, mem_req=req,
                              shared_unit_req=unit)
        if _is_mmio(addr):
            return ExecEffect(next_pc=next_pc, mmio_req=(addr, value),
                              shared_unit_req=unit,
                              halt_req=addr == memmap.CTRL_HALT)
        req = MemRequest("store", addr, width, data=value)
        return ExecEffect(next_pc=next_pc, mem_req=req, shared_unit_req=unit)

    write = (instr.rd, value) if writes_rd(k) else None
    return ExecEffect(next_pc=next_pc, reg_write=write, branch_taken=taken)


def timing_cost(instr, effect, config):
    """Contention-free occupancy in cycles, excluding arbitration stalls."""
    k = int(instr.kind)
    if k in LOADS:
        cost = config.stages
    elif effect.branch_taken:
        cost = 1 + (config.stages - 1)
    else:
        cost = 1
    if effect.shared_unit_req is not None:
        cost += UNIT_LATENCY[effect.shared_unit_req[0]]
    return cost


def apply_effect(state, effect):
    """Commit ``effect`` into a new PeState (x0 stays zero)."""
    regs = list(state.regs)
    if effect.reg_write is not None:
        rd, value = effect.reg_write
        if rd:
            regs[rd] = value & MASK32
    return PeState(pc=effect.next_pc, regs=regs, halted=effect.halt_req,
                   retired=state.retired + 1)
