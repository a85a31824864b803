"""Hoplite-style deflection-routed unidirectional 2D torus.

Each router has an X (row) input, a Y (column) input and a client port, and
drives an X output, a Y output and a dedicated client-delivery output.
Routing is X-then-Y with priority Y input > X input > client. A flit that
cannot take its Y turn (or delivery) stays on the X ring for another lap; a
flit on the Y ring is never deflected. Only injection can be refused.
"""
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

from .errors import ConservationError

PAYLOAD_BYTES = 32
PAYLOAD_BITS = 256
DESCRIPTOR_BITS = 32
# client interface = payload + the 32-bit send descriptor
INTERFACE_BITS = PAYLOAD_BITS + DESCRIPTOR_BITS
# link width used for bandwidth math; payload + descriptor + routing state
LINK_BITS = 300


@dataclass(slots=True)
class Flit:
    dest_x: int
    dest_y: int
    payload: bytes = bytes(PAYLOAD_BYTES)
    multicast: bool = False
    dest_block: int = 0
    src_x: int = 0
    src_y: int = 0
    valid: bool = True
    to_iram: bool = False
    # instrumentation only
    hop_count: int = 0
    src_pe: int = -1
    inject_cycle: int = -1
    msg_id: int = -1
    # multicast bookkeeping: Y-ring copy flag and columns already spawned
    ycopy: bool = False
    spawned: int = 0

    def __post_init__(self):
        if len(self.payload) != PAYLOAD_BYTES:
            raise ValueError(f"payload must be {PAYLOAD_BYTES} bytes, got {len(self.payload)}")


@dataclass(frozen=True)
class Topology:
    rows: int = 10
    cols: int = 5

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("rows and cols must be >= 1")

    @property
    def size(self):
        return self.rows * self.cols

    def index(self, x, y):
        return y * self.cols + x

    def coords(self, i):
        return i % self.cols, i // self.cols

    def east(self, i):
        x, y = i % self.cols, i // self.cols
        return y * self.cols + (x + 1) % self.cols

    def south(self, i):
        x, y = i % self.cols, i // self.cols
        return ((y + 1) % self.rows) * self.cols + x

    def distance(self, src, dst):
        """Quiet-network hop counts (dx, dy) along the unidirectional rings."""
        return (dst[0] - src[0]) % self.cols, (dst[1] - src[1]) % self.rows


@dataclass(frozen=True)
class RouterState:
    x: int
    y: int
    x_reg: Optional[Flit] = None
    y_reg: Optional[Flit] = None


class Route(NamedTuple):
    x_out: Optional[Flit]
    y_out: Optional[Flit]
    deliver: Optional[Flit]
    accepted: bool
    deflected: bool = False
    turned: bool = False


def _mcast_advance(x, flit, y_free, cols):
    """Try to spawn this column's Y copy; return (x continuation, y copy)."""
    spawned = flit.spawned
    ycopy = None
    bit = 1 << x
    if not spawned & bit and y_free:
        ycopy = replace(flit, ycopy=True, spawned=0)
        spawned |= bit
    if spawned == (1 << cols) - 1:
        return None, ycopy
    if spawned == flit.spawned:
        return flit, ycopy
    return replace(flit, spawned=spawned), ycopy


def route_select(x, y, x_in, y_in, client_in, topo):
    """One router's combinational decision for one cycle."""
    x_out = y_out = deliver = None
    deflected = turned = False

    if y_in is not None:
        if y_in.multicast:
            deliver = y_in
            if y != y_in.src_y:
                y_out = y_in
        elif y_in.dest_y == y:
            deliver = y_in
        else:
            y_out = y_in

    if x_in is not None:
        if x_in.multicast:
            cont, ycopy = _mcast_advance(x, x_in, y_out is None, topo.cols)
            if ycopy is not None:
                y_out = ycopy
            elif not x_in.spawned & (1 << x):
                deflected = True
            x_out = cont
        elif x_in.dest_x != x:
            x_out = x_in
        elif x_in.dest_y == y:
            if deliver is None:
                deliver = x_in
            else:
                x_out = x_in
                deflected = True
        elif y_out is None:
            y_out = x_in
            turned = True
        else:
            x_out = x_in
            deflected = True

    accepted = False
    c = client_in
    if c is not None:
        if c.multicast:
            ok = x_out is None if topo.cols > 1 else y_out is None
            if ok:
                cont, ycopy = _mcast_advance(x, c, y_out is None, topo.cols)
                if ycopy is not None:
                    y_out = ycopy
                x_out = cont
                accepted = True
        elif c.dest_x == x and c.dest_y == y:
            if deliver is None:
                deliver = c
                accepted = True
        elif c.dest_x != x:
            if x_out is None:
                x_out = c
                accepted = True
        elif y_out is None:
            y_out = c
            accepted = True

    return Route(x_out, y_out, deliver, accepted, deflected, turned)


@dataclass
class NocStats:
    injected: int = 0
    delivered: int = 0
    deflections: int = 0
    refused: int = 0
    bisection_flits: int = 0
    latency_sum: int = 0
    latency_max: int = 0
    owed: int = 0  # delivery obligations created by accepted injections


class Network:
    """Synchronous whole-network stepping over sparse ring registers."""

    def __init__(self, topo, trace=None):
        self.topo = topo
        self.trace = trace
        self.x_reg = {}
        self.y_reg = {}
        self.x_link = [0] * topo.size
        self.y_link = [0] * topo.size
        self.cycle = 0
        self.stats = NocStats()
        self._next_id = 0
        mid = topo.rows // 2
        self._cut_rows = {mid - 1, topo.rows - 1} if topo.rows >= 2 else set()

    @property
    def idle(self):
        return not self.x_reg and not self.y_reg

    def in_flight(self):
        return len(self.x_reg) + len(self.y_reg)

    def routers(self):
        t = self.topo
        return [RouterState(*t.coords(i), self.x_reg.get(i), self.y_reg.get(i))
                for i in range(t.size)]

    def _emit(self, kind, i, flit):
        if self.trace is not None:
            self.trace(self.cycle, kind, self.topo.coords(i), flit)

    def step(self, injections=None):
        """Advance one cycle. Returns ``(deliveries, accepted)`` keyed by router index."""
        injections = injections or {}
        t = self.topo
        deliveries = {}
        accepted = set()
        if not self.x_reg and not self.y_reg and not injections:
            self.cycle += 1
            return deliveries, accepted
        active = sorted(self.x_reg.keys() | self.y_reg.keys() | injections.keys())
        nx, ny = {}, {}
        st = self.stats
        cols = t.cols
        for i in active:
            x, y = i % cols, i // cols
            client = injections.get(i)
            if client is not None:
                # stamp before routing so multicast copies inherit the stamp;
                # the injecting router is the source by definition
                client.src_x, client.src_y = x, y
                client.inject_cycle = self.cycle
                client.msg_id = self._next_id
            r = route_select(x, y, self.x_reg.get(i), self.y_reg.get(i), client, t)
            if r.accepted:
                self._next_id += 1
                st.injected += 1
                st.owed += t.size if client.multicast else 1
                accepted.add(i)
                self._emit("inject", i, client)
            elif client is not None:
                client.inject_cycle = client.msg_id = -1
                st.refused += 1
            if r.deflected:
                st.deflections += 1
                self._emit("deflect", i, self.x_reg.get(i))
            if r.turned:
                self._emit("turn", i, r.y_out)
            if r.x_out is not None:
                r.x_out.hop_count += 1
                nx[t.east(i)] = r.x_out
                self.x_link[i] += 1
            if r.y_out is not None:
                r.y_out.hop_count += 1
                ny[t.south(i)] = r.y_out
                self.y_link[i] += 1
                if y in self._cut_rows:
                    st.bisection_flits += 1
            if r.deliver is not None:
                f = r.deliver
                deliveries[i] = f
                st.delivered += 1
                lat = self.cycle - f.inject_cycle + 1
                st.latency_sum += lat
                if lat > st.latency_max:
                    st.latency_max = lat
                self._emit("deliver", i, f)
        self.x_reg, self.y_reg = nx, ny
        self.cycle += 1
        return deliveries, accepted

    # -- conservation audit --------------------------------------------
    def obligations(self):
        """Deliveries still owed by flits currently on the rings."""
        t = self.topo
        owed = 0
        for i, f in self.x_reg.items():
            if f.multicast:
                owed += t.rows * (t.cols - bin(f.spawned).count("1"))
            else:
                owed += 1
        for i, f in self.y_reg.items():
            if f.multicast:
                owed += (f.src_y - i // t.cols) % t.rows + 1
            else:
                owed += 1
        return owed

    def audit(self):
        st = self.stats
        in_flight = self.obligations()
        if st.owed != st.delivered + in_flight:
            raise ConservationError(
                f"cycle {self.cycle}: owed {st.owed} != delivered {st.delivered}"
                f" + in flight {in_flight}")
        return in_flight


def step_noc(network, injections):
    return network.step(injections)
