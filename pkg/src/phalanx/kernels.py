"""Assembly sources for the benchmark kernels, parameterised by machine shape."""

# CRAM block layout used by the echo kernel, as multiples of n_pes
_OUTBOX, _INBOX, _MAILBOX = 1, 2, 3


def echo_source(rows=10, cols=5, n_pes=8, rounds=1, cram_bytes=32768):
    """PE 0 serves; every other PE sends ``rounds`` requests, one at a time,
    and waits for each to be echoed back before sending the next.

    A request is the sender's 32 B outbox block ``[seq, reply descriptor,
    sender id, ...]`` delivered to mailbox block ``3*n_pes + id`` of cluster
    (0,0). PE 0 polls the mailboxes in id order and sends each block straight
    back using the reply descriptor, landing in the sender's inbox.
    """
    total = rows * cols * n_pes
    outbox, inbox, mailbox = _OUTBOX * n_pes, _INBOX * n_pes, _MAILBOX * n_pes
    if total < 2:
        raise ValueError("echo needs at least two PEs")
    if mailbox + total > cram_bytes // 32 or mailbox >= 2048:
        raise ValueError("machine too large for the echo mailbox layout")
    first_mail = (mailbox + 1) * 32
    return f"""\
# echo: PE 0 answers one request from every other PE, {rounds} round(s)
    lw   s0, -8(x0)          # global PE id
    lui  s1, 0x10            # CRAM base
    lui  s2, 0x40000         # NOC send window
    li   s3, {rounds}
    beqz s0, server
    mv   t0, s0              # t0 = id mod n_pes, t1 = cluster index
    li   t2, {n_pes}
    li   t1, 0
div_pe:
    blt  t0, t2, div_pe_done
    sub  t0, t0, t2
    addi t1, t1, 1
    j    div_pe
div_pe_done:
    li   t2, {cols}          # t1 = x, t3 = y
    li   t3, 0
div_col:
    blt  t1, t2, div_col_done
    sub  t1, t1, t2
    addi t3, t3, 1
    j    div_col
div_col_done:
    slli t1, t1, 24
    slli t3, t3, 16
    or   s4, t1, t3
    addi t4, t0, {inbox}
    or   s4, s4, t4          # reply descriptor (x, y, inbox block)
    slli t4, t4, 5
    add  s7, s1, t4          # inbox address
    addi t5, t0, {outbox}
    slli t5, t5, 5
    add  s5, s1, t5          # outbox address
    add  s6, s2, t5          # send address for the outbox block
    addi s8, s0, {mailbox}   # request descriptor (0, 0, mailbox + id)
    li   s9, 1
client_loop:
    sw   s9, 0(s5)
    sw   s4, 4(s5)
    sw   s0, 8(s5)
    sw   s8, 0(s6)
client_wait:
    lw   t0, 0(s7)
    bne  t0, s9, client_wait
    addi s9, s9, 1
    bge  s3, s9, client_loop
    halt
server:
    li   s9, 1
server_round:
    li   s10, 1
    li   t3, {first_mail}
    add  s11, s1, t3         # mailbox of PE 1
    add  t6, s2, t3
    li   t2, {total}
server_next:
    lw   t0, 0(s11)
    bne  t0, s9, server_next
    lw   t1, 4(s11)
    sw   t1, 0(t6)           # echo the request block back
    addi s11, s11, 32
    addi t6, t6, 32
    addi s10, s10, 1
    blt  s10, t2, server_next
    addi s9, s9, 1
    bge  s3, s9, server_round
    halt
"""


def cpi_mix_source(iterations=600):
    """Loop whose body is 70% ALU, 15% word loads, 15% taken branches."""
    if not 1 <= iterations < 2048:
        raise ValueError("iterations must be in [1, 2047]")
    return f"""\
# 20-instruction body: 14 ALU, 3 lw, 3 taken control transfers
    lui  s1, 0x10
    li   s2, {iterations}
loop:
    addi t0, t0, 1
    lw   t3, 0(s1)
    xor  t1, t0, t3
    add  t2, t1, t0
    beq  x0, x0, a
a:
    or   t4, t2, t1
    and  t5, t4, t0
    lw   t6, 4(s1)
    sub  a0, t5, t6
    slt  a1, a0, t0
    addi a2, a1, 3
    beq  x0, x0, b
b:
    sltu a3, a2, t1
    ori  a4, a3, 5
    lw   a5, 8(s1)
    andi a6, a4, 7
    xori a7, a6, 9
    add  s3, a7, a5
    addi s2, s2, -1
    bnez s2, loop
    halt
"""


def alu_source(n=10):
    lines = ["# straight-line ALU body followed by halt"]
    for i in range(n):
        lines.append(f"    addi x{1 + i % 30}, x{i % 30}, {i + 1}")
    lines.append("    halt")
    return "\n".join(lines) + "\n"
