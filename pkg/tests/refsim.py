"""Naive instruction-at-a-time RV32I interpreter used as a test oracle.

Shares no code with the package: its own field extraction, its own opcode
tables, Python ints everywhere. It knows the same memory map (IRAM at 0,
CRAM at 0x10000, halt/trace/PE-id words at the top of the address space) but
nothing about timing.
"""

M = 0xFFFFFFFF
CRAM = 0x10000
HALT, TRACE, PEID = 0xFFFFFFF0, 0xFFFFFFF4, 0xFFFFFFF8


class Fault(Exception):
    pass


def s32(v):
    v &= M
    return v - (1 << 32) if v & 0x80000000 else v


def sx(v, bits):
    v &= (1 << bits) - 1
    return v - (1 << bits) if v >> (bits - 1) else v


class RefPE:
    def __init__(self, program, pe_id=0, cram_bytes=32768, has_mul=False, cram=None):
        self.prog = list(program)
        self.pe_id = pe_id
        self.has_mul = has_mul
        self.x = [0] * 32
        self.pc = 0
        self.mem = cram if cram is not None else bytearray(cram_bytes)
        self.halted = False
        self.retired = 0
        self.trace = []

    # memory ----------------------------------------------------------------
    def _cram_off(self, addr, n):
        off = addr - CRAM
        if off < 0 or off + n > len(self.mem):
            raise Fault(f"unmapped 0x{addr:08x}")
        return off

    def load(self, addr, n, signed):
        if addr % n:
            raise Fault("misaligned load")
        if addr == PEID and n == 4:
            return self.pe_id
        off = self._cram_off(addr, n)
        v = int.from_bytes(self.mem[off:off + n], "little")
        return sx(v, 8 * n) & M if signed else v

    def store(self, addr, n, v):
        if addr % n:
            raise Fault("misaligned store")
        if addr == HALT and n == 4:
            self.halted = True
            return
        if addr == TRACE and n == 4:
            self.trace.append(v & 0xFF)
            return
        off = self._cram_off(addr, n)
        self.mem[off:off + n] = (v & ((1 << 8 * n) - 1)).to_bytes(n, "little")

    # execution -------------------------------------------------------------
    def step(self):
        if self.pc % 4 or self.pc // 4 >= len(self.prog):
            raise Fault(f"fetch 0x{self.pc:08x}")
        w = self.prog[self.pc // 4]
        op = w & 0x7F
        rd = (w >> 7) & 31
        f3 = (w >> 12) & 7
        r1 = self.x[(w >> 15) & 31]
        r2 = self.x[(w >> 20) & 31]
        f7 = w >> 25
        i_imm = sx(w >> 20, 12)
        s_imm = sx(((w >> 25) << 5) | ((w >> 7) & 31), 12)
        b_imm = sx((((w >> 31) & 1) << 12) | (((w >> 7) & 1) << 11)
                   | (((w >> 25) & 63) << 5) | (((w >> 8) & 15) << 1), 13)
        j_imm = sx((((w >> 31) & 1) << 20) | (((w >> 12) & 255) << 12)
                   | (((w >> 20) & 1) << 11) | (((w >> 21) & 1023) << 1), 21)
        nxt = (self.pc + 4) & M
        res = None

        if op == 0x37:
            res = w & 0xFFFFF000
        elif op == 0x17:
            res = (self.pc + (w & 0xFFFFF000)) & M
        elif op == 0x6F:
            res, nxt = nxt, (self.pc + j_imm) & M
        elif op == 0x67 and f3 == 0:
            res, nxt = nxt, (r1 + i_imm) & M & ~1
        elif op == 0x63:
            conds = {0: r1 == r2, 1: r1 != r2, 4: s32(r1) < s32(r2), 5: s32(r1) >= s32(r2),
                     6: r1 < r2, 7: r1 >= r2}
            if f3 not in conds:
                raise Fault("illegal")
            if conds[f3]:
                nxt = (self.pc + b_imm) & M
        elif op == 0x03:
            sizes = {0: (1, True), 1: (2, True), 2: (4, False), 4: (1, False), 5: (2, False)}
            if f3 not in sizes:
                raise Fault("illegal")
            n, sg = sizes[f3]
            res = self.load((r1 + i_imm) & M, n, sg)
        elif op == 0x23:
            if f3 > 2:
                raise Fault("illegal")
            self.store((r1 + s_imm) & M, 1 << f3, r2)
        elif op == 0x13:
            sh = (w >> 20) & 31
            if f3 == 0:
                res = r1 + i_imm
            elif f3 == 2:
                res = int(s32(r1) < i_imm)
            elif f3 == 3:
                res = int(r1 < (i_imm & M))
            elif f3 == 4:
                res = r1 ^ (i_imm & M)
            elif f3 == 6:
                res = r1 | (i_imm & M)
            elif f3 == 7:
                res = r1 & (i_imm & M)
            elif f3 == 1 and f7 == 0:
                res = r1 << sh
            elif f3 == 5 and f7 == 0:
                res = r1 >> sh
            elif f3 == 5 and f7 == 0x20:
                res = s32(r1) >> sh
            else:
                raise Fault("illegal")
        elif op == 0x33:
            sh = r2 & 31
            if f7 == 1 and f3 == 0 and self.has_mul:
                res = r1 * r2
            elif f7 == 0:
                res = {0: r1 + r2, 1: r1 << sh, 2: int(s32(r1) < s32(r2)), 3: int(r1 < r2),
                       4: r1 ^ r2, 5: r1 >> sh, 6: r1 | r2, 7: r1 & r2}[f3]
            elif f7 == 0x20 and f3 == 0:
                res = r1 - r2
            elif f7 == 0x20 and f3 == 5:
                res = s32(r1) >> sh
            else:
                raise Fault("illegal")
        elif op == 0x0F and f3 == 0 and rd == 0 and (w >> 15) & 31 == 0 and w >> 28 == 0:
            pass
        elif w == 0x00000073 or w == 0x00100073:
            self.halted = True
        else:
            raise Fault("illegal")

        if nxt % 4:
            raise Fault("misaligned fetch")
        if res is not None and rd:
            self.x[rd] = res & M
        self.pc = nxt
        self.retired += 1

    def run(self, limit=1_000_000):
        while not self.halted:
            if self.retired >= limit:
                raise Fault("step limit")
            self.step()
        return self
