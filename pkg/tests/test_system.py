import json

import numpy as np
import pytest

from phalanx import SystemConfig, analytic_peaks, build
from phalanx.config import ClusterConfig, config_from_dict
from phalanx.errors import ImageTooLarge, InvalidConfig, WatchdogExpired
from phalanx.kernels import alu_source, cpi_mix_source, echo_source
from phalanx.programkit import KernelImage, assemble, multicast_load, unicast_load

ONE = SystemConfig(rows=1, cols=1)


def test_build_shapes():
    s = build()
    assert s.n_pes == 400 and s.config.n_clusters == 50
    assert s.clusters.iram.shape == (50, 4, 1024)
    assert build(ONE).n_pes == 8
    with pytest.raises(InvalidConfig, match="rows"):
        build(SystemConfig(rows=0))
    with pytest.raises(InvalidConfig):
        build(SystemConfig(stages=4))


def test_config_rejects_unknown_keys():
    with pytest.raises(InvalidConfig, match="colz"):
        config_from_dict({"colz": 3})
    assert config_from_dict({"rows": 2, "cluster": {"n_pes": 4}}).n_pes == 2 * 5 * 4


def test_all_halted_at_cycle_zero():
    assert build(ONE).run()["cycles"] == 0


def test_straight_line_alu_kernel():
    s = build(ONE)
    s.load_kernel(assemble(alu_source(10)), pes=[0])
    m = s.run()
    assert m["retired"] == 11 and m["cpi"] == 1.0 and m["cycles"] == 11


def test_run_until_cycle_and_predicate():
    s = build(ONE)
    s.load_kernel(assemble("loop:\nj loop"))
    assert s.run(until=25)["cycles"] == 25
    s.run(until=lambda sys_: sys_.metrics()["retired"] >= 100)
    assert s.metrics()["retired"] >= 100


def test_watchdog_carries_metrics():
    s = build(ONE)
    s.load_kernel(assemble("loop:\nj loop"))
    with pytest.raises(WatchdogExpired) as e:
        s.run(max_cycles=50)
    assert e.value.cycles == 50 and e.value.metrics["cycles"] == 50


@pytest.mark.parametrize("stages,cpi", [(2, 1.3), (3, 1.6)])
def test_cpi_mix(stages, cpi):
    s = build(SystemConfig(rows=1, cols=1, stages=stages))
    s.load_kernel(assemble(cpi_mix_source(600)), pes=[0])
    m = s.run()
    assert m["retired"] >= 10_000
    assert abs(m["cpi"] - cpi) <= 0.02


def test_analytic_model_is_a_pure_function():
    a = analytic_peaks(SystemConfig())
    assert a == analytic_peaks(SystemConfig())
    assert a.peak_mips == 100_000 and a.cram_gbps == 600 and a.kernel_load_cycles == 1024
    assert analytic_peaks(ONE).peak_mips == 2000
    assert analytic_peaks(SystemConfig(fclk_hz=375e6)).peak_mips == 150_000


def test_multicast_load_fills_every_iram():
    s = build()
    rng = np.random.default_rng(5)
    img = KernelImage([int(w) for w in rng.integers(0, 1 << 32, 1024, dtype=np.uint64)])
    cram_before = s.clusters.cram.copy()
    cycles = multicast_load(s, img, release=False)
    assert (s.clusters.iram == np.array(img.words, np.uint32)).all()
    assert 128 <= cycles < 1024
    assert (s.clusters.cram == cram_before).all()
    s.noc.audit()
    # a second load of the same image changes nothing
    snap = s.clusters.iram.copy()
    multicast_load(s, img, release=False)
    assert (s.clusters.iram == snap).all()


def test_tiny_multicast_load():
    s = build(ONE)
    assert multicast_load(s, KernelImage([0x13] * 8)) == 2
    with pytest.raises(ImageTooLarge):
        multicast_load(s, KernelImage([0] * 2048))


def test_unicast_load_targets_one_cluster():
    s = build(SystemConfig(rows=2, cols=2))
    unicast_load(s, assemble("li a0, 9\nhalt"), 1, 1)
    assert (s.clusters.iram[3, :, 0] != 0).all() and (s.clusters.iram[:3] == 0).all()
    s.run()
    assert s.clusters.regs_of(3, 5)[10] == 9
    assert s.metrics()["halts"] == 8


def echo_system(rows, cols, **kw):
    cfg = SystemConfig(rows=rows, cols=cols)
    s = build(cfg, **kw)
    multicast_load(s, assemble(echo_source(rows, cols, 8, 1, cfg.cluster.cram_bytes)))
    return s


@pytest.mark.parametrize("rows,cols", [(1, 1), (2, 3), (4, 2)])
def test_small_echo(rows, cols):
    s = echo_system(rows, cols, audit=True)
    m = s.run()
    assert m["echo_responses"] == rows * cols * 8 - 1
    assert m["faults"] == 0 and m["noc"]["in_flight"] == 0


def test_stall_partition_and_cram_ceiling_on_echo():
    s = echo_system(3, 3)
    m = s.run()
    pe = s.clusters.pe
    from phalanx import _engine as E
    stalls = sum(pe[:, :, f] for f in E.STALL_FIELDS.values())
    assert (pe[:, :, E.F_ACTIVE] == pe[:, :, E.F_RETIRED] + stalls).all()
    assert m["active_cycles"] == m["retired"] + sum(m["stalls"].values())
    assert 0 < m["cram_peak_bytes_per_cluster_cycle"] <= 48
    assert max(m["noc"]["x_link_flits"] + m["noc"]["y_link_flits"]) <= m["cycles"]


def test_trace_lines_are_greppable():
    lines = []
    s = build(SystemConfig(rows=2, cols=2), trace=lines.append, trace_kinds={"halt", "deliver"})
    multicast_load(s, assemble(echo_source(2, 2, 8, 1)))
    s.run()
    assert lines and all(l.startswith("cycle=") and " pe=" in l and " event=" in l for l in lines)
    assert sum(" event=halt" in l for l in lines) == 32


def test_stats_json_is_stable():
    a = echo_system(2, 2)
    a.run()
    b = echo_system(2, 2, threads=2)
    b.run()
    assert a.stats_json() == b.stats_json()
    doc = json.loads(a.stats_json())
    assert set(doc) == {"schema", "config", "measured", "analytic", "faults"}
