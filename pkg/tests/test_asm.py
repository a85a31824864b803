import itertools

import pytest
from hypothesis import given, strategies as st

from phalanx.errors import (ImageTooLarge, ImmediateOutOfRange, MisalignedTarget,
                            UndefinedLabel, UnknownMnemonic)
from phalanx.isa import decode_fields
from phalanx.programkit import KernelImage, assemble, disassemble, listing

import progen


def words(src):
    return assemble(src).words


def test_nop_and_addi():
    assert words("nop") == [0x00000013]
    assert words("addi x1, x0, 5") == [0x00500093]
    assert disassemble(0x00500093) == "addi x1, x0, 5"
    assert disassemble(0x00000013) == "addi x0, x0, 0"
    assert disassemble(0xFFFFFFFF) == ".word 0xffffffff"


def test_labels_resolve_in_both_directions():
    src = """
    top:
        addi t0, t0, 1
        beq  t0, t1, done
        j    top
    done:
        halt
    """
    w = words(src)
    assert w[1] == progen.b_type(8, 6, 5, 0)
    assert w[2] == progen.j_type(-8, 0)
    assert w[3] == progen.s_type(-16, 0, 0, 2)


def test_pseudo_ops():
    assert words("mv a0, a1") == [progen.i_type(0, 11, 0, 10, 0x13)]
    assert words("li a0, -5") == [progen.i_type(-5, 0, 0, 10, 0x13)]
    # large immediates take lui + addi with the carry folded into lui
    w = words("li a0, 0x12345fff")
    assert len(w) == 2 and w[0] == (0x12346 << 12) | (10 << 7) | 0x37
    assert w[1] == progen.i_type(-1, 10, 0, 10, 0x13)
    assert words("beqz a0, 8\nbnez a0, -4") == [progen.b_type(8, 0, 10, 0),
                                                progen.b_type(-4, 0, 10, 1)]


def test_word_directive_and_comments():
    assert words(".word 0xdeadbeef  # literal\n# only a comment\n.word lab\nlab:") == \
        [0xDEADBEEF, 8]


def test_errors_carry_line_numbers():
    with pytest.raises(UndefinedLabel) as e:
        assemble("nop\nbeq x1, x2, loop\n")
    assert e.value.line == 2
    with pytest.raises(UnknownMnemonic) as e:
        assemble("frob x1\n")
    assert e.value.line == 1 and "line 1" in str(e.value)
    with pytest.raises(ImmediateOutOfRange):
        assemble("addi x1, x0, 4096")
    with pytest.raises(MisalignedTarget):
        assemble("beq x0, x0, 3")


def test_listing_has_addresses():
    text = listing(assemble("nop\naddi x1, x0, 5"))
    assert text.splitlines() == ["0000: addi x0, x0, 0", "0004: addi x1, x0, 5"]


def test_image_bytes_round_trip(tmp_path):
    img = assemble("nop\naddi x1, x0, 5")
    assert img.to_bytes() == bytes([0x13, 0, 0, 0, 0x93, 0, 0x50, 0])
    p = tmp_path / "k.bin"
    img.save(p)
    assert KernelImage.load(p).words == img.words
    with pytest.raises(ValueError):
        KernelImage.from_bytes(b"\x13\x00")
    with pytest.raises(ImageTooLarge):
        KernelImage([0] * 2048).check_fits(4096)


# one representative word per opcode-table row, over a grid of operands
GRID_REGS = [0, 1, 15, 31]
GRID_IMMS = [-2048, -1, 0, 1, 2047]


def _grid():
    for rd, rs1, rs2 in itertools.product(GRID_REGS, repeat=3):
        for f7, f3 in progen.R_OPS:
            yield progen.r_type(f7, rs2, rs1, f3, rd)
        yield progen.r_type(1, rs2, rs1, 0, rd)
        for imm in GRID_IMMS:
            for f3 in progen.I_OPS:
                yield progen.i_type(imm, rs1, f3, rd, 0x13)
            for f3, _ in progen.LOADS:
                yield progen.i_type(imm, rs1, f3, rd, 0x03)
            for f3, _ in progen.STORES:
                yield progen.s_type(imm, rs2, rs1, f3)
            yield progen.i_type(imm, rs1, 0, rd, 0x67)
            for f3 in progen.BRANCH_F3:
                yield progen.b_type(2 * imm, rs2, rs1, f3)
            yield progen.j_type(512 * imm, rd)
        for sh in (0, 1, 31):
            yield progen.i_type(sh, rs1, 1, rd, 0x13)
            yield progen.i_type(sh, rs1, 5, rd, 0x13)
            yield progen.i_type(0x400 | sh, rs1, 5, rd, 0x13)
        for up in (0, 1, 0xFFFFF):
            yield (up << 12) | (rd << 7) | 0x37
            yield (up << 12) | (rd << 7) | 0x17
    yield 0x0FF0000F
    yield 0x0000000F
    yield 0x00000073
    yield 0x00100073


def test_disassemble_assemble_identity_on_grid():
    n = 0
    for w in _grid():
        assert decode_fields(w, True)[0] >= 0
        assert words(disassemble(w)) == [w], hex(w)
        n += 1
    assert n > 5000


@given(st.integers(0, 0xFFFFFFFF))
def test_any_word_round_trips_through_its_text(w):
    # legal words reassemble to themselves; illegal ones come back via .word
    assert words(disassemble(w)) == [w]
