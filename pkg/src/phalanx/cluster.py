"""One or more 8-PE clusters: paired IRAMs, banked CRAM, shared units, NOC port.

Every cluster cycle runs in a fixed phase order:

1. write an incoming flit's 32 B payload into CRAM (or IRAM for kernel loads),
2. run the accelerator hook on whatever 8-port bandwidth is left,
3. PE issue with shared-unit and CRAM arbitration, then commit,
4. latch an outgoing flit whose payload is the CRAM source block right now.

Phase 3 for all clusters is one call into the compiled engine.
"""
from dataclasses import dataclass

import numpy as np

from . import _engine as E
from . import memmap
from .config import ClusterConfig
from .errors import InvalidBlock, InvalidDestination
from .noc import Flit

PORTS_8 = 8


def bank_of(address, n_banks=4):
    """Bank holding a CRAM-relative byte address (word interleaved)."""
    return (address >> 2) & (n_banks - 1)


@dataclass(frozen=True)
class SendHeader:
    src_block: int
    dest_x: int
    dest_y: int
    multicast: bool
    dest_block: int


def encode_send(store_address, store_data, rows=10, cols=5, cram_bytes=32768):
    """Decode an MMIO send store into the flit header it produces."""
    if not memmap.NOC_BASE <= store_address < memmap.NOC_BASE + memmap.NOC_WINDOW:
        raise ValueError(f"0x{store_address:08x} is outside the NOC send window")
    d = store_data & 0xFFFFFFFF
    hdr = SendHeader(src_block=(store_address >> 5) & 0x3FF,
                     dest_x=(d >> 24) & 0xFF, dest_y=(d >> 16) & 0xFF,
                     multicast=bool((d >> 15) & 1), dest_block=d & 0x3FF)
    if not hdr.multicast and (hdr.dest_x >= cols or hdr.dest_y >= rows):
        raise InvalidDestination(
            f"destination ({hdr.dest_x},{hdr.dest_y}) outside {cols}x{rows} grid")
    if hdr.dest_block >= cram_bytes // 32:
        raise InvalidBlock(f"destination block {hdr.dest_block} >= {cram_bytes // 32}")
    return hdr


def send_descriptor(dest_x, dest_y, dest_block, multicast=False):
    if not (0 <= dest_x < 256 and 0 <= dest_y < 256 and 0 <= dest_block < 1024):
        raise ValueError("descriptor fields out of range")
    return (dest_x << 24) | (dest_y << 16) | (int(multicast) << 15) | dest_block


def arbitrate(requests, favor, bank_ptr):
    """Arbitrate one cycle of CRAM requests.

    ``requests`` is a length-``n_pes`` sequence of bank indices (``None`` or
    -1 for no request). ``favor`` and ``bank_ptr`` are the int64 round-robin
    state arrays and are updated in place. Returns ``(granted, stalled)`` PE
    index sets.
    """
    req = np.array([-1 if r is None else r for r in requests], np.int64)
    grant = np.zeros(len(req), np.int64)
    cause = np.zeros(len(req), np.int64)
    E.arbitrate_banks(req, favor, bank_ptr, grant, cause)
    granted = {p for p in range(len(req)) if grant[p]}
    stalled = {p for p in range(len(req)) if req[p] >= 0 and not grant[p]}
    return granted, stalled


class CramPorts:
    """Port-limited CRAM view handed to an accelerator each cycle."""

    def __init__(self, cram, budget):
        self._cram = cram
        self.budget = budget
        self.used = 0

    def _take(self):
        if self.used >= self.budget:
            raise RuntimeError("accelerator exceeded its CRAM port budget")
        self.used += 1

    def read(self, word_index):
        self._take()
        return int(self._cram[word_index])

    def write(self, word_index, value):
        self._take()
        self._cram[word_index] = value & 0xFFFFFFFF


class BlockSumAccelerator:
    """Sample accelerator: sums ``count`` CRAM words from ``start`` and stores
    the 32-bit sum at ``result``, using up to 8 ports per cycle."""

    def __init__(self, start, count, result):
        self.start = start
        self.count = count
        self.result = result
        self.pos = 0
        self.acc = 0
        self.done = False

    def __call__(self, ports, cycle):
        while not self.done and ports.used < ports.budget:
            if self.pos < self.count:
                self.acc = (self.acc + ports.read(self.start + self.pos)) & 0xFFFFFFFF
                self.pos += 1
            else:
                ports.write(self.result, self.acc)
                self.done = True


@dataclass
class ClusterEvent:
    cycle: int
    cluster: int
    pe: int  # global PE id
    kind: str
    arg: int = 0
    pc: int = 0
    error: str = ""
    flit: object = None

    def line(self):
        s = f"cycle={self.cycle} pe={self.pe} event={self.kind}"
        if self.kind == "fault":
            s += f" error={self.error} pc=0x{self.pc:08x} arg=0x{self.arg:08x}"
        elif self.kind == "trace":
            s += f" char={self.arg}"
        elif self.kind in ("send", "recv"):
            s += f" arg=0x{self.arg:08x}"
        return s


class ClusterBank:
    """State for ``n`` clusters laid out on a ``cols``-wide grid."""

    def __init__(self, config, n=1, rows=1, cols=1, stages=2, has_mul=False,
                 coords=None, parallel=False):
        config = config.validate() if isinstance(config, ClusterConfig) else config
        self.config = config
        self.n = n
        self.rows = rows
        self.cols = cols
        self.parallel = parallel
        P = config.n_pes
        self.coords = coords or [(i % cols, i // cols) for i in range(n)]
        self.pe = np.zeros((n, P, E.N_PE_FIELDS), np.int64)
        self.regs = np.zeros((n, P, 32), np.int64)
        self.iram = np.zeros((n, config.n_irams, config.iram_bytes // 4), np.uint32)
        self.cram = np.zeros((n, config.cram_bytes // 4), np.uint32)
        self.cl = np.zeros((n, E.N_CL_FIELDS), np.int64)
        self.favor = np.zeros((n, P // 2), np.int64)
        self.bank_ptr = np.zeros((n, config.n_banks), np.int64)
        self.unit_ptr = np.zeros((n, P // 2), np.int64)
        self.scr = np.zeros((n, P, E.N_SCRATCH), np.int64)
        self.grant = np.zeros((n, P), np.int64)
        self.cause = np.zeros((n, P), np.int64)
        self.req = np.zeros((n, P), np.int64)
        self.prm = np.array([P, config.n_banks, config.iram_bytes, config.cram_bytes,
                             stages, int(has_mul), rows, cols], np.int64)
        for c in range(n):
            for p in range(P):
                self.pe[c, p, E.F_GID] = c * P + p
        self.pe[:, :, E.F_RESET] = 1
        self.outgoing = [None] * n
        self.accelerators = [None] * n
        self.received = np.zeros(n, np.int64)
        self.sent = np.zeros(n, np.int64)
        self.responses_from = {}
        self.iram_writes = 0
        self.last_iram_write = -1
        self.cycle = 0

    # -- loading ---------------------------------------------------------
    def load_iram(self, words, clusters=None, irams=None, offset=0):
        words = np.asarray(words, np.uint32)
        cs = range(self.n) if clusters is None else clusters
        ks = range(self.config.n_irams) if irams is None else irams
        for c in cs:
            for k in ks:
                self.iram[c, k, offset:offset + len(words)] = words

    def release(self, pes=None, pc=0):
        """Take PEs out of reset; ``pes`` is an iterable of (cluster, local) pairs."""
        if pes is None:
            self.pe[:, :, E.F_RESET] = 0
            self.pe[:, :, E.F_PC] = pc
        else:
            for c, p in pes:
                self.pe[c, p, E.F_RESET] = 0
                self.pe[c, p, E.F_PC] = pc

    @property
    def all_halted(self):
        pe = self.pe
        return bool(np.all((pe[:, :, E.F_HALTED] != 0) | (pe[:, :, E.F_RESET] != 0)))

    # -- phases ------------------------------------------------------------
    def receive(self, c, flit):
        """Phase 1: write an arriving payload through the 8-port side."""
        words = np.frombuffer(flit.payload, dtype="<u4")
        b = flit.dest_block
        if flit.to_iram:
            self.iram[c, :, b * 8:b * 8 + 8] = words
            self.iram_writes += 1
            self.last_iram_write = self.cycle
            return
        self.cram[c, b * 8:b * 8 + 8] = words
        self.cl[c, E.C_PORTS_FREE] = 0
        self.cl[c, E.C_CRAM_BYTES] += 32
        self.received[c] += 1
        if flit.src_pe >= 0:
            self.responses_from[flit.src_pe] = self.responses_from.get(flit.src_pe, 0) + 1

    def _latch(self, c):
        """Phase 4: snapshot the CRAM source block into a new outgoing flit."""
        cl = self.cl
        blk = int(cl[c, E.C_SEND_BLOCK])
        desc = int(cl[c, E.C_SEND_DESC])
        x, y = self.coords[c]
        flit = Flit(dest_x=(desc >> 24) & 0xFF, dest_y=(desc >> 16) & 0xFF,
                    payload=self.cram[c, blk * 8:blk * 8 + 8].astype("<u4").tobytes(),
                    multicast=bool((desc >> 15) & 1), dest_block=desc & 0x3FF,
                    src_x=x, src_y=y,
                    src_pe=int(self.pe[c, cl[c, E.C_SEND_PE], E.F_GID]))
        cl[c, E.C_SEND_LATCH] = 0
        cl[c, E.C_OUT_BUSY] = 1
        self.outgoing[c] = flit
        self.sent[c] += 1
        return flit

    def injected(self, c):
        self.outgoing[c] = None
        self.cl[c, E.C_OUT_BUSY] = 0

    def step(self, incoming=None):
        """Advance every cluster one cycle.

        ``incoming`` maps cluster index to the flit delivered to it. Returns
        the list of ClusterEvents raised this cycle.
        """
        cl = self.cl
        cl[:, E.C_PORTS_FREE] = PORTS_8
        if incoming:
            for c, flit in incoming.items():
                self.receive(c, flit)
        for c, acc in enumerate(self.accelerators):
            if acc is not None:
                ports = CramPorts(self.cram[c], int(cl[c, E.C_PORTS_FREE]))
                acc(ports, self.cycle)
                cl[c, E.C_PORTS_FREE] -= ports.used
                cl[c, E.C_CRAM_BYTES] += 4 * ports.used
        step = E.step_all_parallel if self.parallel else E.step_all
        nev = step(self.pe, self.regs, self.iram, self.cram, cl, self.favor,
                   self.bank_ptr, self.unit_ptr, self.scr, self.grant, self.cause,
                   self.req, self.prm)
        events = []
        if nev:
            events = self._collect_events()
        self.cycle += 1
        return events

    def _collect_events(self):
        out = []
        P = self.config.n_pes
        cs, ps = np.nonzero(self.pe[:, :, E.F_EVENT])
        for c, p in zip(cs.tolist(), ps.tolist()):
            row = self.pe[c, p]
            kind = int(row[E.F_EVENT])
            ev = ClusterEvent(self.cycle, c, c * P + p, E.EVENT_NAMES[kind])
            if kind == E.EV_FAULT:
                ev.error = E.FAULT_NAMES[int(row[E.F_FAULT])]
                ev.pc = int(row[E.F_FAULT_PC])
                ev.arg = int(row[E.F_FAULT_ARG])
            elif kind == E.EV_TRACE:
                ev.arg = int(row[E.F_EVENT_ARG])
            elif kind == E.EV_SEND:
                flit = self._latch(c)
                ev.arg = int(self.cl[c, E.C_SEND_DESC])
                ev.flit = flit
            out.append(ev)
        return out

    # -- inspection --------------------------------------------------------
    def pe_field(self, field):
        return self.pe[:, :, field]

    def regs_of(self, c, p):
        return [int(v) for v in self.regs[c, p]]

    def cram_bytes(self, c):
        return self.cram[c].astype("<u4").tobytes()


class Cluster:
    """Single cluster with the ``cluster_cycle`` interface."""

    def __init__(self, config=None, stages=2, has_mul=False, rows=1, cols=1, coords=(0, 0)):
        config = config or ClusterConfig()
        self.bank = ClusterBank(config, 1, rows=rows, cols=cols, stages=stages,
                                has_mul=has_mul, coords=[coords])

    def load(self, words, pes=None):
        """Put ``words`` in every IRAM and release ``pes`` (default all local PEs)."""
        self.bank.load_iram(words)
        P = self.bank.config.n_pes
        self.bank.release([(0, p) for p in (range(P) if pes is None else pes)])

    def cycle(self, incoming=None):
        """Returns ``(outgoing flit or None, events)``; the caller drains the
        outgoing buffer with :meth:`injected` once the NOC accepts it."""
        events = self.bank.step({0: incoming} if incoming is not None else None)
        return self.bank.outgoing[0], events

    def injected(self):
        self.bank.injected(0)

    @property
    def cram(self):
        return self.bank.cram[0]

    def regs(self, p):
        return self.bank.regs_of(0, p)

    def field(self, p, f):
        return int(self.bank.pe[0, p, f])

    def set_accelerator(self, acc):
        self.bank.accelerators[0] = acc
