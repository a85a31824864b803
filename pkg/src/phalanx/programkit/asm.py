"""Two-pass RV32I mini-assembler and matching disassembler.

Grammar, one statement per line::

    label:                      # a label on its own (or before an instruction)
    addi x1, x0, 5              # instructions with ABI or xN register names
    lw   a0, 8(sp)
    .word 0xdeadbeef            # literal word, number or label
    # comment

Branch and jump operands are either a label or a numeric byte offset relative
to the instruction. Pseudo-ops: nop, j, li, mv, halt, beqz, bnez.
"""
import re

from .. import memmap
from ..errors import (AssemblerError, ImmediateOutOfRange, MisalignedTarget,
                      UndefinedLabel, UnknownMnemonic)
from ..isa import Instr, Op, decode_fields
from .image import KernelImage

ABI_NAMES = ("zero ra sp gp tp t0 t1 t2 s0 s1 a0 a1 a2 a3 a4 a5 a6 a7 "
             "s2 s3 s4 s5 s6 s7 s8 s9 s10 s11 t3 t4 t5 t6").split()
REGISTERS = {f"x{i}": i for i in range(32)}
REGISTERS.update({name: i for i, name in enumerate(ABI_NAMES)})
REGISTERS["fp"] = 8

# kind -> (format, opcode, funct3, funct7)
ENCODING = {
    Op.LUI: ("U", 0x37, 0, 0),
    Op.AUIPC: ("U", 0x17, 0, 0),
    Op.JAL: ("J", 0x6F, 0, 0),
    Op.JALR: ("JR", 0x67, 0, 0),
    Op.BEQ: ("B", 0x63, 0, 0),
    Op.BNE: ("B", 0x63, 1, 0),
    Op.BLT: ("B", 0x63, 4, 0),
    Op.BGE: ("B", 0x63, 5, 0),
    Op.BLTU: ("B", 0x63, 6, 0),
    Op.BGEU: ("B", 0x63, 7, 0),
    Op.LB: ("L", 0x03, 0, 0),
    Op.LH: ("L", 0x03, 1, 0),
    Op.LW: ("L", 0x03, 2, 0),
    Op.LBU: ("L", 0x03, 4, 0),
    Op.LHU: ("L", 0x03, 5, 0),
    Op.SB: ("S", 0x23, 0, 0),
    Op.SH: ("S", 0x23, 1, 0),
    Op.SW: ("S", 0x23, 2, 0),
    Op.ADDI: ("I", 0x13, 0, 0),
    Op.SLTI: ("I", 0x13, 2, 0),
    Op.SLTIU: ("I", 0x13, 3, 0),
    Op.XORI: ("I", 0x13, 4, 0),
    Op.ORI: ("I", 0x13, 6, 0),
    Op.ANDI: ("I", 0x13, 7, 0),
    Op.SLLI: ("SH", 0x13, 1, 0x00),
    Op.SRLI: ("SH", 0x13, 5, 0x00),
    Op.SRAI: ("SH", 0x13, 5, 0x20),
    Op.ADD: ("R", 0x33, 0, 0x00),
    Op.SUB: ("R", 0x33, 0, 0x20),
    Op.SLL: ("R", 0x33, 1, 0x00),
    Op.SLT: ("R", 0x33, 2, 0x00),
    Op.SLTU: ("R", 0x33, 3, 0x00),
    Op.XOR: ("R", 0x33, 4, 0x00),
    Op.SRL: ("R", 0x33, 5, 0x00),
    Op.SRA: ("R", 0x33, 5, 0x20),
    Op.OR: ("R", 0x33, 6, 0x00),
    Op.AND: ("R", 0x33, 7, 0x00),
    Op.MUL: ("R", 0x33, 0, 0x01),
    Op.FENCE: ("F", 0x0F, 0, 0),
    Op.ECALL: ("N", 0x73, 0, 0),
    Op.EBREAK: ("N", 0x73, 0, 0),
}
MNEMONICS = {op.name.lower(): op for op in ENCODING}
PSEUDO = {"nop", "j", "li", "mv", "halt", "beqz", "bnez"}

_FENCE_BITS = (("i", 8), ("o", 4), ("r", 2), ("w", 1))
_LABEL_RE = re.compile(r"^([A-Za-z_.$][\w.$]*):")
_MEM_RE = re.compile(r"^(.*)\((\s*\w+\s*)\)$")


def encode(instr):
    """Encode an Instr into its 32-bit word (fields assumed in range)."""
    fmt, opcode, f3, f7 = ENCODING[instr.kind]
    rd, rs1, rs2, imm = instr.rd, instr.rs1, instr.rs2, instr.imm
    if fmt == "R":
        return (f7 << 25) | (rs2 << 20) | (rs1 << 15) | (f3 << 12) | (rd << 7) | opcode
    if fmt in ("I", "L", "JR"):
        return ((imm & 0xFFF) << 20) | (rs1 << 15) | (f3 << 12) | (rd << 7) | opcode
    if fmt == "SH":
        return (f7 << 25) | ((imm & 31) << 20) | (rs1 << 15) | (f3 << 12) | (rd << 7) | opcode
    if fmt == "S":
        return (((imm >> 5) & 0x7F) << 25) | (rs2 << 20) | (rs1 << 15) | (f3 << 12) \
            | ((imm & 0x1F) << 7) | opcode
    if fmt == "B":
        return (((imm >> 12) & 1) << 31) | (((imm >> 5) & 0x3F) << 25) | (rs2 << 20) \
            | (rs1 << 15) | (f3 << 12) | (((imm >> 1) & 0xF) << 8) \
            | (((imm >> 11) & 1) << 7) | opcode
    if fmt == "U":
        return (imm & 0xFFFFF000) | (rd << 7) | opcode
    if fmt == "J":
        return (((imm >> 20) & 1) << 31) | (((imm >> 1) & 0x3FF) << 21) \
            | (((imm >> 11) & 1) << 20) | (((imm >> 12) & 0xFF) << 12) | (rd << 7) | opcode
    if fmt == "F":
        return ((imm & 0xFF) << 20) | opcode
    return 0x00100073 if instr.kind == Op.EBREAK else 0x00000073


# ---------------------------------------------------------------------------
# disassembler


def _reg(i):
    return f"x{i}"


def _fence_set(bits):
    return "".join(c for c, b in _FENCE_BITS if bits & b) or "0"


def format_instr(instr):
    k = instr.kind
    name = k.name.lower()
    fmt = ENCODING[k][0]
    rd, rs1, rs2, imm = _reg(instr.rd), _reg(instr.rs1), _reg(instr.rs2), instr.imm
    if fmt == "R":
        return f"{name} {rd}, {rs1}, {rs2}"
    if fmt in ("I", "SH"):
        return f"{name} {rd}, {rs1}, {imm}"
    if fmt in ("L", "JR"):
        return f"{name} {rd}, {imm}({rs1})"
    if fmt == "S":
        return f"{name} {rs2}, {imm}({rs1})"
    if fmt == "B":
        return f"{name} {rs1}, {rs2}, {imm}"
    if fmt == "U":
        return f"{name} {rd}, 0x{(imm >> 12) & 0xFFFFF:x}"
    if fmt == "J":
        return f"{name} {rd}, {imm}"
    if fmt == "F":
        return f"fence {_fence_set(imm >> 4)}, {_fence_set(imm & 15)}"
    return name


def disassemble(word, has_mul=True):
    """Render one word; anything undecodable becomes a ``.word`` literal."""
    kind, rd, rs1, rs2, imm = decode_fields(word & 0xFFFFFFFF, has_mul)
    if kind < 0:
        return f".word 0x{word & 0xFFFFFFFF:08x}"
    return format_instr(Instr(Op(kind), rd, rs1, rs2, imm))


def listing(image, has_mul=True):
    return "\n".join(f"{i * 4 + image.entry:04x}: {disassemble(w, has_mul)}"
                     for i, w in enumerate(image.words))


# ---------------------------------------------------------------------------
# assembler


def _strip(line):
    return line.split("#", 1)[0].strip()


def _split_operands(text):
    return [t.strip() for t in text.split(",")] if text.strip() else []


class _Statement:
    __slots__ = ("lineno", "mnemonic", "operands", "address", "size")

    def __init__(self, lineno, mnemonic, operands, address, size):
        self.lineno = lineno
        self.mnemonic = mnemonic
        self.operands = operands
        self.address = address
        self.size = size


def _parse_int(text, lineno):
    try:
        return int(text.replace("_", ""), 0)
    except ValueError:
        raise AssemblerError(f"bad integer {text!r}", lineno) from None


def _li_words(value):
    """Number of words ``li`` expands to for ``value``."""
    if -2048 <= value < 2048:
        return 1
    return 1 if value & 0xFFF == 0 else 2


class Assembler:
    def __init__(self, origin=0):
        self.origin = origin
        self.labels = {}

    # pass 1 ------------------------------------------------------------
    def _layout(self, source):
        stmts = []
        pc = self.origin
        for lineno, raw in enumerate(source.splitlines(), start=1):
            text = _strip(raw)
            while True:
                m = _LABEL_RE.match(text)
                if not m:
                    break
                name = m.group(1)
                if name in self.labels:
                    raise AssemblerError(f"duplicate label {name!r}", lineno)
                self.labels[name] = pc
                text = text[m.end():].strip()
            if not text:
                continue
            parts = text.split(None, 1)
            mnemonic = parts[0].lower()
            operands = _split_operands(parts[1] if len(parts) > 1 else "")
            if mnemonic == "li":
                if len(operands) != 2:
                    raise AssemblerError("li expects 2 operands", lineno)
                size = _li_words(_parse_int(operands[1], lineno))
            elif mnemonic in MNEMONICS or mnemonic in PSEUDO or mnemonic == ".word":
                size = 1
            else:
                raise UnknownMnemonic(f"unknown mnemonic {mnemonic!r}", lineno)
            stmts.append(_Statement(lineno, mnemonic, operands, pc, size))
            pc += 4 * size
        return stmts

    # operand helpers ---------------------------------------------------
    def _reg(self, text, lineno):
        r = REGISTERS.get(text.strip().lower())
        if r is None:
            raise AssemblerError(f"bad register {text!r}", lineno)
        return r

    def _imm(self, text, lo, hi, lineno):
        v = _parse_int(text, lineno)
        if not lo <= v <= hi:
            raise ImmediateOutOfRange(f"immediate {v} outside [{lo}, {hi}]", lineno)
        return v

    def _mem(self, text, lineno):
        m = _MEM_RE.match(text.strip())
        if not m:
            raise AssemblerError(f"expected offset(reg), got {text!r}", lineno)
        off = m.group(1).strip() or "0"
        return self._imm(off, -2048, 2047, lineno), self._reg(m.group(2), lineno)

    def _target(self, text, stmt, bits):
        text = text.strip()
        if re.match(r"^[-+]?(0x[0-9a-fA-F_]+|\d[\d_]*)$", text):
            off = _parse_int(text, stmt.lineno)
        else:
            if text not in self.labels:
                raise UndefinedLabel(f"undefined label {text!r}", stmt.lineno)
            off = self.labels[text] - stmt.address
        if off % 2:
            raise MisalignedTarget(f"target offset {off} is odd", stmt.lineno)
        lim = 1 << (bits - 1)
        if not -lim <= off < lim:
            raise ImmediateOutOfRange(f"target offset {off} out of range", stmt.lineno)
        return off

    def _expect(self, stmt, n):
        if len(stmt.operands) != n:
            raise AssemblerError(
                f"{stmt.mnemonic} expects {n} operands, got {len(stmt.operands)}",
                stmt.lineno)

    def _fence_bits(self, text, lineno):
        text = text.strip().lower()
        if text == "0":
            return 0
        bits = 0
        for ch in text:
            match = [b for c, b in _FENCE_BITS if c == ch]
            if not match:
                raise AssemblerError(f"bad fence set {text!r}", lineno)
            bits |= match[0]
        return bits

    # pass 2 ------------------------------------------------------------
    def _instructions(self, stmt):
        """Instrs (or raw ints for .word) emitted by one statement."""
        mn, ops, ln = stmt.mnemonic, stmt.operands, stmt.lineno
        if mn == ".word":
            self._expect(stmt, 1)
            text = ops[0]
            if text in self.labels:
                return [self.labels[text]]
            return [_parse_int(text, ln) & 0xFFFFFFFF]
        if mn == "nop":
            self._expect(stmt, 0)
            return [Instr(Op.ADDI)]
        if mn == "halt":
            self._expect(stmt, 0)
            return [Instr(Op.SW, 0, 0, 0, memmap.CTRL_HALT - (1 << 32))]
        if mn == "mv":
            self._expect(stmt, 2)
            return [Instr(Op.ADDI, self._reg(ops[0], ln), self._reg(ops[1], ln), 0, 0)]
        if mn == "j":
            self._expect(stmt, 1)
            return [Instr(Op.JAL, 0, 0, 0, self._target(ops[0], stmt, 21))]
        if mn in ("beqz", "bnez"):
            self._expect(stmt, 2)
            kind = Op.BEQ if mn == "beqz" else Op.BNE
            return [Instr(kind, 0, self._reg(ops[0], ln), 0, self._target(ops[1], stmt, 13))]
        if mn == "li":
            rd = self._reg(ops[0], ln)
            v = self._imm(ops[1], -(1 << 31), (1 << 32) - 1, ln)
            if -2048 <= v < 2048:
                return [Instr(Op.ADDI, rd, 0, 0, v)]
            v &= 0xFFFFFFFF
            lo = ((v & 0xFFF) ^ 0x800) - 0x800
            hi = ((v - lo) & 0xFFFFF000)
            hi_signed = hi - (1 << 32) if hi & 0x80000000 else hi
            out = [Instr(Op.LUI, rd, 0, 0, hi_signed)]
            if lo:
                out.append(Instr(Op.ADDI, rd, rd, 0, lo))
            return out

        kind = MNEMONICS[mn]
        fmt = ENCODING[kind][0]
        if fmt == "R":
            self._expect(stmt, 3)
            return [Instr(kind, self._reg(ops[0], ln), self._reg(ops[1], ln), self._reg(ops[2], ln))]
        if fmt == "I":
            self._expect(stmt, 3)
            return [Instr(kind, self._reg(ops[0], ln), self._reg(ops[1], ln), 0,
                          self._imm(ops[2], -2048, 2047, ln))]
        if fmt == "SH":
            self._expect(stmt, 3)
            return [Instr(kind, self._reg(ops[0], ln), self._reg(ops[1], ln), 0,
                          self._imm(ops[2], 0, 31, ln))]
        if fmt == "L":
            self._expect(stmt, 2)
            off, base = self._mem(ops[1], ln)
            return [Instr(kind, self._reg(ops[0], ln), base, 0, off)]
        if fmt == "S":
            self._expect(stmt, 2)
            off, base = self._mem(ops[1], ln)
            return [Instr(kind, 0, base, self._reg(ops[0], ln), off)]
        if fmt == "B":
            self._expect(stmt, 3)
            return [Instr(kind, 0, self._reg(ops[0], ln), self._reg(ops[1], ln),
                          self._target(ops[2], stmt, 13))]
        if fmt == "U":
            self._expect(stmt, 2)
            v = self._imm(ops[1], -(1 << 19), (1 << 20) - 1, ln) & 0xFFFFF
            imm = v << 12
            return [Instr(kind, self._reg(ops[0], ln), 0, 0, imm - (1 << 32) if v & 0x80000 else imm)]
        if fmt == "J":
            if len(ops) == 1:
                return [Instr(kind, 1, 0, 0, self._target(ops[0], stmt, 21))]
            self._expect(stmt, 2)
            return [Instr(kind, self._reg(ops[0], ln), 0, 0, self._target(ops[1], stmt, 21))]
        if fmt == "JR":
            if len(ops) == 1:
                return [Instr(kind, 1, self._reg(ops[0], ln), 0, 0)]
            if len(ops) == 2:
                off, base = self._mem(ops[1], ln)
                return [Instr(kind, self._reg(ops[0], ln), base, 0, off)]
            self._expect(stmt, 3)
            return [Instr(kind, self._reg(ops[0], ln), self._reg(ops[1], ln), 0,
                          self._imm(ops[2], -2048, 2047, ln))]
        if fmt == "F":
            if not ops:
                return [Instr(kind, imm=0xFF)]
            self._expect(stmt, 2)
            return [Instr(kind, imm=(self._fence_bits(ops[0], ln) << 4) | self._fence_bits(ops[1], ln))]
        self._expect(stmt, 0)
        return [Instr(kind)]

    def assemble(self, source):
        self.labels = {}
        words = []
        for stmt in self._layout(source):
            for item in self._instructions(stmt):
                words.append(item if isinstance(item, int) else encode(item))
        return KernelImage(words=words, entry=self.origin)


def assemble(source, origin=0):
    return Assembler(origin).assemble(source)


def parse_instruction(text):
    """Assemble a single label-free instruction line into its Instr."""
    stmt = Assembler()._layout(text)
    if len(stmt) != 1:
        raise AssemblerError("expected exactly one instruction")
    items = Assembler()._instructions(stmt[0])
    if len(items) != 1 or isinstance(items[0], int):
        raise AssemblerError("expected exactly one machine instruction")
    return items[0]
