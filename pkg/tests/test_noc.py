import numpy as np
import pytest
from hypothesis import given, strategies as st

from phalanx.noc import Flit, Network, Topology, route_select


def send_one(topo, src, dst, multicast=False):
    net = Network(topo)
    f = Flit(dst[0], dst[1], src_x=src[0], src_y=src[1], multicast=multicast)
    got = []
    _, acc = net.step({topo.index(*src): f})
    assert acc
    for _ in range(4 * topo.size + 4):
        if net.idle:
            break
        d, _ = net.step()
        got += list(d)
    net.audit()
    return net, got


def test_quiet_latency_is_manhattan_plus_one():
    topo = Topology(10, 5)
    rng = np.random.default_rng(3)
    for _ in range(100):
        src = (int(rng.integers(5)), int(rng.integers(10)))
        dst = (int(rng.integers(5)), int(rng.integers(10)))
        net = Network(topo)
        f = Flit(*dst, src_x=src[0], src_y=src[1])
        deliveries, _ = net.step({topo.index(*src): f})
        t = 0
        while not deliveries:
            deliveries, _ = net.step()
            t += 1
        dx, dy = topo.distance(src, dst)
        assert net.stats.latency_max == dx + dy + 1
        assert list(deliveries) == [topo.index(*dst)]
        assert f.hop_count == dx + dy


def test_priority_y_over_x_over_client():
    topo = Topology(3, 3)
    y_in = Flit(1, 2)
    x_in = Flit(1, 2)  # also wants to turn south here
    c = Flit(1, 2)
    r = route_select(1, 1, x_in, y_in, c, topo)
    assert r.y_out is y_in and r.x_out is x_in and r.deflected and not r.accepted


def test_delivery_port_takes_x_arrival_at_destination():
    topo = Topology(3, 3)
    r = route_select(1, 1, Flit(1, 1), None, None, topo)
    assert r.deliver is not None and r.x_out is None and not r.deflected


def test_blocked_turn_deflects_and_retries_after_a_lap():
    topo = Topology(2, 3)
    # a southbound Y flit at (1,0) takes y_out, so the X flit wanting to turn there laps
    r = route_select(1, 0, Flit(1, 1), Flit(1, 1), None, topo)
    assert r.deflected and r.x_out.dest_x == 1 and not r.turned
    net = Network(topo)
    net.step({topo.index(1, 1): Flit(1, 0, src_x=1, src_y=1),
              topo.index(0, 0): Flit(1, 1)})
    while not net.idle:
        net.step()
    assert net.stats.delivered == 2


@pytest.mark.parametrize("rows,cols", [(1, 1), (1, 5), (4, 1), (2, 3), (3, 3), (10, 5), (5, 10)])
def test_multicast_delivers_once_everywhere(rows, cols):
    topo = Topology(rows, cols)
    for src in [(0, 0), (cols - 1, rows - 1), (cols // 2, rows // 2)]:
        net, got = send_one(topo, src, (0, 0), multicast=True)
        assert sorted(got) == list(range(topo.size))


def test_self_send_loops_back():
    topo = Topology(10, 5)
    net = Network(topo)
    d, acc = net.step({7: Flit(2, 1)})
    assert 7 in acc and 7 in d and net.stats.latency_max == 1


def test_single_router_unicast():
    net = Network(Topology(1, 1))
    d, acc = net.step({0: Flit(0, 0)})
    assert d and acc


traffic = st.lists(st.tuples(st.integers(0, 2**16), st.booleans()), min_size=1, max_size=60)


@given(st.integers(1, 6), st.integers(1, 6), traffic)
def test_conservation_every_cycle_and_drain_bound(rows, cols, msgs):
    topo = Topology(rows, cols)
    net = Network(topo)
    pending = {}
    for i, (seed, mc) in enumerate(msgs):
        src = seed % topo.size
        dst = (seed >> 4) % topo.size
        pending.setdefault(src, []).append(Flit(*topo.coords(dst), multicast=mc and i % 5 == 0,
                                                 src_x=src % cols, src_y=src // cols))
    outstanding = len(msgs)
    expected = sum(topo.size if f.multicast else 1 for q in pending.values() for f in q)
    delivered = 0
    budget = topo.size * outstanding + 4 * topo.size + 8
    for cyc in range(budget):
        inj = {s: q[0] for s, q in pending.items() if q}
        d, acc = net.step(inj)
        for s in acc:
            pending[s].pop(0)
        delivered += len(d)
        net.audit()
        if net.idle and not any(pending.values()):
            break
    else:
        pytest.fail("network did not drain within rows*cols*outstanding")
    assert delivered == expected == net.stats.delivered


def test_links_carry_at_most_one_flit_per_cycle():
    topo = Topology(4, 4)
    net = Network(topo)
    rng = np.random.default_rng(0)
    cycles = 300
    for _ in range(cycles):
        inj = {i: Flit(int(rng.integers(4)), int(rng.integers(4))) for i in range(16)
               if rng.random() < 0.5}
        net.step(inj)
        net.audit()
    assert max(net.x_link + net.y_link) <= cycles


@pytest.mark.parametrize("rows,cols", [(1, 1), (2, 3), (10, 5)])
def test_quiet_multicast_latency(rows, cols):
    # the farthest copy crosses cols-1 X hops and a full Y lap back to its own row
    net, got = send_one(Topology(rows, cols), (0, 0), (0, 0), multicast=True)
    assert net.stats.latency_max == cols - 1 + rows + 1
    assert net.stats.latency_sum == sum(x + k + 1 for x in range(cols) for k in range(1, rows + 1))
