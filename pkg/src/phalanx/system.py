"""Full Phalanx: clusters on a torus NOC, the global cycle loop, metrics and
the closed-form peak model."""
import json
from collections import deque
from dataclasses import asdict, dataclass

import numpy as np

from . import _engine as E
from .cluster import ClusterBank
from .config import SystemConfig
from .errors import WatchdogExpired
from .noc import LINK_BITS, PAYLOAD_BITS, INTERFACE_BITS, Network, Topology

STATS_SCHEMA = "phalanx-stats/1"
CRAM_PORTS = 12  # 4 PE-side + 8 accelerator/NOC-side word ports per cluster
MODEL_CPI = {2: 1.3, 3: 1.6}
TRACE_KINDS = frozenset({"halt", "fault", "trace", "send", "inject", "deflect",
                         "turn", "deliver"})


@dataclass(frozen=True)
class AnalyticModel:
    n_clusters: int
    n_pes: int
    fclk_hz: float
    peak_mips: float
    derated_mips: float
    cram_gbps: float  # GB/s
    bisection_gbps: float  # Gb/s
    link_bits: int
    kernel_load_cycles: int
    kernel_load_us: float


def analytic_peaks(config):
    """Closed-form peak figures for a configuration (1 instruction/PE/cycle)."""
    config.validate()
    f = config.fclk_hz
    n_cl = config.n_clusters
    n_pes = config.n_pes
    peak = n_pes * f / 1e6
    load = config.cluster.iram_bytes // 4  # one word per cycle broadcast
    return AnalyticModel(
        n_clusters=n_cl,
        n_pes=n_pes,
        fclk_hz=f,
        peak_mips=peak,
        derated_mips=peak / MODEL_CPI[config.stages],
        cram_gbps=n_cl * CRAM_PORTS * 4 * f / 1e9,
        bisection_gbps=2 * min(config.rows, config.cols) * LINK_BITS * f / 1e9,
        link_bits=LINK_BITS,
        kernel_load_cycles=load,
        kernel_load_us=load / f * 1e6,
    )


class System:
    """Clusters plus NOC advanced by one driver.

    ``trace`` is a callable taking one formatted line; ``trace_kinds``
    restricts which events are reported. ``audit`` checks flit conservation
    every cycle. ``threads > 1`` evaluates clusters on numba threads; results
    are identical either way.
    """

    def __init__(self, config=None, threads=1, trace=None, trace_kinds=None, audit=False):
        config = (config or SystemConfig()).validate()
        self.config = config
        self.topo = Topology(config.rows, config.cols)
        self.trace = trace
        self.trace_kinds = TRACE_KINDS if trace_kinds is None else frozenset(trace_kinds)
        self.audit = audit
        self.threads = threads
        if threads > 1:
            E.configure_threads(threads)
        self.clusters = ClusterBank(config.cluster, config.n_clusters, rows=config.rows,
                                    cols=config.cols, stages=config.stages,
                                    has_mul=config.has_mul, parallel=threads > 1)
        want_noc_trace = trace is not None and self.trace_kinds & {"inject", "deflect", "turn", "deliver"}
        self.noc = Network(self.topo, trace=self._noc_event if want_noc_trace else None)
        self.cycle = 0
        self.pending = {}
        self.loader = deque()
        self.faults = []
        self.trace_chars = []
        self.halts = 0
        self.peak_cram_bytes = 0
        self._prev_cram = np.zeros(config.n_clusters, np.int64)

    @property
    def n_pes(self):
        return self.config.n_pes

    # -- loading -------------------------------------------------------------
    def load_kernel(self, image, pes=None, release=True):
        """Write ``image`` straight into every IRAM (no NOC traffic).

        ``pes`` lists global PE ids to release; default all.
        """
        self.clusters.load_iram(image.words)
        if release:
            self.release(pes, pc=image.entry)

    def release(self, pes=None, pc=0):
        if pes is None:
            self.clusters.release(pc=pc)
        else:
            P = self.config.cluster.n_pes
            self.clusters.release([(g // P, g % P) for g in pes], pc=pc)

    # -- stepping --------------------------------------------------------------
    def _emit(self, line):
        self.trace(line)

    def _noc_event(self, cycle, kind, xy, flit):
        if kind in self.trace_kinds:
            self._emit(f"cycle={cycle} pe={flit.src_pe} event={kind} router={xy[0]},{xy[1]}"
                       f" src={flit.src_x},{flit.src_y} dest={flit.dest_x},{flit.dest_y}"
                       f" msg={flit.msg_id} hops={flit.hop_count}")

    def step(self):
        cb = self.clusters
        events = cb.step(self.pending)
        for ev in events:
            if ev.kind == "fault":
                self.faults.append(ev)
            elif ev.kind == "halt":
                self.halts += 1
            elif ev.kind == "trace":
                self.trace_chars.append((ev.pe, ev.arg))
            if self.trace is not None and ev.kind in self.trace_kinds:
                self._emit(ev.line())
        cram = cb.cl[:, E.C_CRAM_BYTES]
        delta = int((cram - self._prev_cram).max())
        if delta > self.peak_cram_bytes:
            self.peak_cram_bytes = delta
        self._prev_cram[:] = cram

        injections = {c: f for c, f in enumerate(cb.outgoing) if f is not None} \
            if cb.cl[:, E.C_OUT_BUSY].any() else {}
        loader_flit = None
        if self.loader and 0 not in injections:
            loader_flit = self.loader[0]
            injections[0] = loader_flit
        deliveries, accepted = self.noc.step(injections)
        for c in accepted:
            if injections[c] is loader_flit:
                self.loader.popleft()
            else:
                cb.injected(c)
        self.pending = deliveries
        if self.audit:
            self.noc.audit()
        self.cycle += 1

    @property
    def quiescent(self):
        return self.noc.idle and not self.pending and not self.loader \
            and not any(f is not None for f in self.clusters.outgoing)

    def all_halted(self):
        return self.clusters.all_halted and self.quiescent

    def run(self, until=None, max_cycles=None):
        """Step until ``until`` holds.

        ``until`` is ``None`` (all PEs halted and the NOC drained), an int
        cycle limit, or a predicate over the system. Raises WatchdogExpired at
        ``max_cycles`` (default from the config).
        """
        limit = self.config.max_cycles if max_cycles is None else max_cycles
        if until is None:
            done = System.all_halted
        elif isinstance(until, int):
            stop_at = until
            done = lambda s: s.cycle >= stop_at  # noqa: E731
        else:
            done = until
        while not done(self):
            if self.cycle >= limit:
                raise WatchdogExpired(self.cycle, self.metrics())
            self.step()
        return self.metrics()

    # -- reporting ---------------------------------------------------------------
    def metrics(self):
        return measured_metrics(self)

    def stats(self):
        """JSON-ready report with measured and analytic sections."""
        return {
            "schema": STATS_SCHEMA,
            "config": self.config.to_dict(),
            "measured": self.metrics(),
            "analytic": asdict(analytic_peaks(self.config)),
            "faults": [{"cycle": f.cycle, "pe": f.pe, "error": f.error, "pc": f.pc,
                        "arg": f.arg} for f in self.faults],
        }

    def stats_json(self):
        return json.dumps(self.stats(), indent=2, sort_keys=True) + "\n"


def build(config=None, **kwargs):
    return System(config, **kwargs)


def measured_metrics(system):
    cb = system.clusters
    pe = cb.pe
    cfg = system.config
    cycles = system.cycle
    f = cfg.fclk_hz
    retired = pe[:, :, E.F_RETIRED].reshape(-1)
    active = pe[:, :, E.F_ACTIVE].reshape(-1)
    total_retired = int(retired.sum())
    total_active = int(active.sum())
    stalls = {name: int(pe[:, :, fld].sum()) for name, fld in E.STALL_FIELDS.items()}
    per_pe_cpi = [round(a / r, 6) if r else None for a, r in zip(active.tolist(), retired.tolist())]
    noc = system.noc.stats
    cram_total = int(cb.cl[:, E.C_CRAM_BYTES].sum())
    per_cycle = (lambda v: v / cycles) if cycles else (lambda v: 0.0)
    return {
        "cycles": cycles,
        "retired": total_retired,
        "active_cycles": total_active,
        "cpi": round(total_active / total_retired, 6) if total_retired else None,
        "achieved_mips": round(per_cycle(total_retired) * f / 1e6, 6),
        "stalls": stalls,
        "per_pe": {
            "retired": retired.tolist(),
            "active_cycles": active.tolist(),
            "cpi": per_pe_cpi,
            "cram_grants": pe[:, :, E.F_GRANTS].reshape(-1).tolist(),
        },
        "cram_bytes": cram_total,
        "cram_bytes_per_cycle": round(per_cycle(cram_total), 6),
        "cram_peak_bytes_per_cluster_cycle": system.peak_cram_bytes,
        "messages_sent": int(cb.sent.sum()),
        "messages_received": int(cb.received.sum()),
        "echo_responses": cb.responses_from.get(0, 0),
        "halts": system.halts,
        "faults": len(system.faults),
        "noc": {
            "injected": noc.injected,
            "delivered": noc.delivered,
            "in_flight": system.noc.in_flight(),
            "refused_injections": noc.refused,
            "deflections": noc.deflections,
            "deflection_rate": round(noc.deflections / noc.delivered, 6) if noc.delivered else 0.0,
            "mean_latency": round(noc.latency_sum / noc.delivered, 6) if noc.delivered else 0.0,
            "max_latency": noc.latency_max,
            "delivered_gbps": round(per_cycle(noc.delivered) * PAYLOAD_BITS * f / 1e9, 6),
            "bisection_flits": noc.bisection_flits,
            "bisection_gbps": round(per_cycle(noc.bisection_flits) * LINK_BITS * f / 1e9, 6),
            "payload_bits": PAYLOAD_BITS,
            "interface_bits": INTERFACE_BITS,
            "link_bits": LINK_BITS,
            "x_link_flits": list(system.noc.x_link),
            "y_link_flits": list(system.noc.y_link),
        },
    }
