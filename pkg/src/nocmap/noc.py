"""Cycle-stepped virtual-channel wormhole mesh with credit-based flow control.

Each router has five input ports (local, north, east, south, west), each with
``vc_count`` VCs buffering up to ``vc_buffer_flits`` flits. A flit that
enters an input buffer at cycle ``t`` may cross the switch at ``t +
router_delay`` and lands in the downstream buffer ``link_delay`` cycles
later, so an uncontended hop costs ``router_delay + link_delay``.

One cycle of :meth:`Network.step` runs, in order:

1. link traversal: flits whose link delay has elapsed enter the downstream
   input buffer (a tail reaching its destination router completes the packet);
2. NI injection: one flit per node from the network-interface queue;
3. route computation, VC allocation (first free VC by index) and separable
   round-robin switch allocation, followed by switch traversal of the winners;
4. credit return and VC release, visible from the next cycle.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Callable, NamedTuple, TextIO

from .topology import LINK_DELAY, ROUTER_DELAY, Topology

LOCAL, NORTH, EAST, SOUTH, WEST = range(5)
OPPOSITE = (LOCAL, SOUTH, WEST, NORTH, EAST)
NUM_PORTS = 5


class PacketKind(Enum):
    REQUEST = "request"
    RESPONSE = "response"
    RESULT = "result"


class FlitKind(Enum):
    HEAD = "Head"
    BODY = "Body"
    TAIL = "Tail"
    HEAD_TAIL = "HeadTail"


class Flit(NamedTuple):
    packet_id: int
    kind: FlitKind
    src: int
    dst: int
    inject_cycle: int


class NocError(RuntimeError):
    pass


class LivelockError(NocError):
    pass


class InvariantViolation(NocError):
    pass


@dataclass(frozen=True)
class SimConfig:
    vc_count: int = 4
    vc_buffer_flits: int = 4
    noc_clock_ghz: float = 2.0
    pe_clock_mhz: float = 200.0
    router_delay: int = ROUTER_DELAY
    link_delay: int = LINK_DELAY
    ni_delay: int = 8        # packetization: enqueue to first possible injection
    arbitration: str = "round-robin"
    livelock_bound: int = 10**6

    def __post_init__(self):
        if self.vc_count < 1 or self.vc_buffer_flits < 1:
            raise ValueError("vc_count and vc_buffer_flits must be >= 1")
        if self.router_delay < 1 or self.link_delay < 1:
            raise ValueError("router_delay and link_delay must be >= 1")
        if self.ni_delay < 0:
            raise ValueError("ni_delay must be >= 0")
        if self.arbitration != "round-robin":
            raise ValueError(f"unsupported arbitration {self.arbitration!r}")
        ratio = self.noc_clock_ghz * 1000.0 / self.pe_clock_mhz
        if ratio < 1 or abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("NoC/PE clock ratio must be a positive integer")

    @property
    def clock_ratio(self) -> int:
        return int(round(self.noc_clock_ghz * 1000.0 / self.pe_clock_mhz))


class Packet:
    __slots__ = ("packet_id", "kind", "src", "dst", "flit_count", "payload",
                 "enqueue_cycle", "head_depart", "tail_arrive", "sent", "vc", "tag")

    def __init__(self, packet_id, kind, src, dst, flit_count=1, payload=None, tag=None):
        if flit_count < 1:
            raise ValueError("flit_count must be >= 1")
        if kind is not PacketKind.RESPONSE and flit_count != 1:
            raise ValueError(f"{kind.value} packets are single-flit")
        self.packet_id = packet_id
        self.kind = kind
        self.src = src
        self.dst = dst
        self.flit_count = flit_count
        self.payload = payload
        self.tag = tag
        self.enqueue_cycle = -1
        self.head_depart = -1
        self.tail_arrive = -1
        self.sent = 0
        self.vc = -1

    @property
    def latency(self) -> int:
        return self.tail_arrive - self.head_depart

    def __repr__(self):
        return (f"Packet({self.packet_id}, {self.kind.value}, {self.src}->{self.dst}, "
                f"{self.flit_count}f)")


class DeliveryEvent(NamedTuple):
    packet_id: int
    head_depart_cycle: int
    tail_arrive_cycle: int


def flit_kind(idx: int, count: int) -> FlitKind:
    if count == 1:
        return FlitKind.HEAD_TAIL
    if idx == 0:
        return FlitKind.HEAD
    return FlitKind.TAIL if idx == count - 1 else FlitKind.BODY


class Network:
    """A single simulation instance. Not thread-safe; one owner at a time."""

    def __init__(self, topology: Topology, config: SimConfig | None = None,
                 trace: TextIO | None = None, check_invariants: bool = False):
        self.topology = topology
        self.config = config = config or SimConfig()
        self.trace = trace
        self.check_invariants = check_invariants
        self.now = 0
        n = topology.num_nodes
        V = config.vc_count
        B = config.vc_buffer_flits
        self._V = V
        self._B = B
        self._rd = config.router_delay
        self._ld = config.link_delay
        self._ni_delay = config.ni_delay

        w = topology.width
        nbr = []
        for r in range(n):
            x, y = r % w, r // w
            nbr.append((
                -1,
                r - w if y > 0 else -1,
                r + 1 if x < w - 1 else -1,
                r + w if y < topology.height - 1 else -1,
                r - 1 if x > 0 else -1,
            ))
        self._nbr = nbr
        route = []
        for r in range(n):
            rx, ry = r % w, r // w
            row = []
            for d in range(n):
                dx, dy = d % w, d // w
                if dx > rx:
                    row.append(EAST)
                elif dx < rx:
                    row.append(WEST)
                elif dy > ry:
                    row.append(SOUTH)
                elif dy < ry:
                    row.append(NORTH)
                else:
                    row.append(LOCAL)
            route.append(row)
        self._route = route

        self._buf = [[[deque() for _ in range(V)] for _ in range(NUM_PORTS)] for _ in range(n)]
        self._out_port = [[[-1] * V for _ in range(NUM_PORTS)] for _ in range(n)]
        self._out_vc = [[[-1] * V for _ in range(NUM_PORTS)] for _ in range(n)]
        self._busy = [[[False] * V for _ in range(NUM_PORTS)] for _ in range(n)]
        # credits[r][o][v]: free slots in downstream VC v behind output port o;
        # for o == LOCAL this is the NI's view of the router's local input VCs.
        self._credits = [[[B] * V for _ in range(NUM_PORTS)] for _ in range(n)]
        self._port_count = [[0] * NUM_PORTS for _ in range(n)]
        self._count = [0] * n
        self._rr_in = [[0] * NUM_PORTS for _ in range(n)]
        self._rr_out = [[0] * NUM_PORTS for _ in range(n)]

        self._links: dict[int, list] = {}
        self._ni = [deque() for _ in range(n)]
        self._ni_active: set[int] = set()
        self._future: list = []
        self._seq = 0
        self._in_network = 0
        self._queued = 0
        self.delivered: list[DeliveryEvent] = []
        self.flits_injected = 0
        self.flits_delivered = 0
        self.last_delivery = 0
        self.max_occupancy = 0

    # ------------------------------------------------------------------ state

    @property
    def idle(self) -> bool:
        return self._in_network == 0 and self._queued == 0 and not self._future

    @property
    def flits_in_network(self) -> int:
        return self._in_network

    def next_injection_cycle(self) -> int | None:
        return self._future[0][0] if self._future else None

    def advance_to(self, cycle: int) -> None:
        """Jump the clock forward; only legal while nothing is in flight."""
        if cycle < self.now:
            raise NocError("cannot move the clock backwards")
        if self._in_network or self._queued:
            raise NocError("advance_to requires an empty network")
        if self._future and self._future[0][0] < cycle:
            raise NocError("advance_to would skip a scheduled injection")
        self.now = cycle

    # -------------------------------------------------------------- injection

    def enqueue_injection(self, packet: Packet, at_cycle: int | None = None) -> bool:
        """Hand ``packet`` to its source NI at ``at_cycle``.

        The head may leave the NI ``ni_delay`` cycles later (packetization).
        """
        at = self.now if at_cycle is None else at_cycle
        if at < self.now:
            raise NocError(f"injection at {at} is in the past (now={self.now})")
        packet.enqueue_cycle = at
        heapq.heappush(self._future, (at + self._ni_delay, self._seq, packet))
        self._seq += 1
        return True

    def _release_future(self, now):
        fut = self._future
        delivered = []
        while fut and fut[0][0] <= now:
            _, _, pkt = heapq.heappop(fut)
            if pkt.src == pkt.dst:
                pkt.head_depart = pkt.tail_arrive = now
                self.flits_injected += pkt.flit_count
                self.flits_delivered += pkt.flit_count
                self.delivered.append(DeliveryEvent(pkt.packet_id, now, now))
                delivered.append(pkt)
                continue
            self._ni[pkt.src].append(pkt)
            self._ni_active.add(pkt.src)
            self._queued += 1
        return delivered

    # ------------------------------------------------------------------- step

    def step(self) -> list[Packet]:
        """Advance one NoC cycle; return packets whose tail arrived this cycle."""
        now = self.now
        delivered = self._release_future(now) if self._future else []
        rd = self._rd
        trace = self.trace
        buf = self._buf
        port_count = self._port_count
        count = self._count

        # 1. link traversal
        arrivals = self._links.pop(now, None)
        if arrivals:
            for n, q, v, pkt, idx in arrivals:
                buf[n][q][v].append((now + rd, pkt, idx))
                port_count[n][q] += 1
                count[n] += 1
                if trace is not None:
                    trace.write(f"{now},{n},arrive,{pkt.packet_id},"
                                f"{flit_kind(idx, pkt.flit_count).value}\n")
                if n == pkt.dst and idx == pkt.flit_count - 1:
                    pkt.tail_arrive = now
                    self.flits_delivered += pkt.flit_count
                    self.delivered.append(DeliveryEvent(pkt.packet_id, pkt.head_depart, now))
                    self.last_delivery = now
                    delivered.append(pkt)

        # 2. NI injection
        if self._ni_active:
            self._inject(now)

        # 3. allocation and switch traversal; 4. deferred credits / VC release
        if self._in_network:
            self._allocate(now)

        if self.check_invariants:
            self._check(now)
        self.now = now + 1
        return delivered

    def _inject(self, now):
        V = self._V
        rd = self._rd
        done = []
        for r in sorted(self._ni_active):
            q = self._ni[r]
            pkt = q[0]
            credits = self._credits[r][LOCAL]
            if pkt.sent == 0:
                busy = self._busy[r][LOCAL]
                for v in range(V):
                    if not busy[v] and credits[v] > 0:
                        busy[v] = True
                        pkt.vc = v
                        break
                else:
                    continue
            v = pkt.vc
            if credits[v] <= 0:
                continue
            credits[v] -= 1
            idx = pkt.sent
            self._buf[r][LOCAL][v].append((now + rd, pkt, idx))
            self._port_count[r][LOCAL] += 1
            self._count[r] += 1
            self._in_network += 1
            self.flits_injected += 1
            if idx == 0:
                pkt.head_depart = now
            if self.trace is not None:
                self.trace.write(f"{now},{r},inject,{pkt.packet_id},"
                                 f"{flit_kind(idx, pkt.flit_count).value}\n")
            pkt.sent = idx + 1
            if pkt.sent == pkt.flit_count:
                q.popleft()
                self._queued -= 1
                if not q:
                    done.append(r)
        for r in done:
            self._ni_active.discard(r)

    def _allocate(self, now):
        V = self._V
        ld = self._ld
        nbr = self._nbr
        route = self._route
        buf = self._buf
        busy = self._busy
        credits = self._credits
        port_count = self._port_count
        count = self._count
        trace = self.trace
        links = self._links
        returns = []
        releases = []

        for r in range(len(count)):
            if not count[r]:
                continue
            rbuf = buf[r]
            r_out_port = self._out_port[r]
            r_out_vc = self._out_vc[r]
            r_credits = credits[r]
            r_port_count = port_count[r]
            rr_in = self._rr_in[r]
            requests = None
            for p in range(NUM_PORTS):
                if not r_port_count[p]:
                    continue
                pbuf = rbuf[p]
                start = rr_in[p]
                for k in range(V):
                    v = (start + k) % V
                    dq = pbuf[v]
                    if not dq:
                        continue
                    head = dq[0]
                    if head[0] > now:
                        continue
                    o = r_out_port[p][v]
                    if o < 0:
                        o = route[r][head[1].dst]
                        r_out_port[p][v] = o
                    if o != LOCAL:
                        ov = r_out_vc[p][v]
                        if ov < 0:
                            dbusy = busy[nbr[r][o]][OPPOSITE[o]]
                            for w in range(V):
                                if not dbusy[w]:
                                    dbusy[w] = True
                                    ov = w
                                    r_out_vc[p][v] = w
                                    break
                            else:
                                continue
                        if r_credits[o][ov] <= 0:
                            continue
                    if requests is None:
                        requests = {}
                    requests.setdefault(o, []).append((p, v))
                    break
            if requests is None:
                continue

            rr_out = self._rr_out[r]
            for o in sorted(requests):
                cands = requests[o]
                if len(cands) == 1:
                    p, v = cands[0]
                else:
                    base = rr_out[o]
                    p, v = min(cands, key=lambda c: (c[0] - base) % NUM_PORTS)
                rr_out[o] = (p + 1) % NUM_PORTS
                rr_in[p] = (v + 1) % V
                _, pkt, idx = rbuf[p][v].popleft()
                r_port_count[p] -= 1
                count[r] -= 1
                tail = idx == pkt.flit_count - 1
                if o == LOCAL:
                    self._in_network -= 1
                    if trace is not None:
                        trace.write(f"{now},{r},eject,{pkt.packet_id},"
                                    f"{flit_kind(idx, pkt.flit_count).value}\n")
                else:
                    ov = r_out_vc[p][v]
                    r_credits[o][ov] -= 1
                    links.setdefault(now + ld, []).append((nbr[r][o], OPPOSITE[o], ov, pkt, idx))
                    if trace is not None:
                        trace.write(f"{now},{r},depart,{pkt.packet_id},"
                                    f"{flit_kind(idx, pkt.flit_count).value}\n")
                if p == LOCAL:
                    returns.append((r, LOCAL, v))
                else:
                    returns.append((nbr[r][p], OPPOSITE[p], v))
                if tail:
                    r_out_port[p][v] = -1
                    r_out_vc[p][v] = -1
                    releases.append((r, p, v))

        for u, o, v in returns:
            credits[u][o][v] += 1
        for r, p, v in releases:
            busy[r][p][v] = False

    # ------------------------------------------------------------- checking

    def _check(self, now):
        B = self._B
        inflight: dict[tuple[int, int, int], int] = {}
        for items in self._links.values():
            for n, q, v, _, _ in items:
                inflight[(n, q, v)] = inflight.get((n, q, v), 0) + 1
        nbr = self._nbr
        for r, ports in enumerate(self._buf):
            for p, vcs in enumerate(ports):
                if p == LOCAL:
                    up, uo = r, LOCAL
                else:
                    up, uo = nbr[r][p], OPPOSITE[p]
                for v, dq in enumerate(vcs):
                    occ = len(dq)
                    if occ > B:
                        raise InvariantViolation(
                            f"cycle {now}: router {r} port {p} vc {v} holds {occ} > {B} flits")
                    self.max_occupancy = max(self.max_occupancy, occ)
                    if up < 0:
                        continue
                    total = self._credits[up][uo][v] + occ + inflight.get((r, p, v), 0)
                    if total != B:
                        raise InvariantViolation(
                            f"cycle {now}: credit mismatch at router {r} port {p} vc {v}: "
                            f"{total} != {B}")

    # ------------------------------------------------------------------ drain

    def drain(self, on_deliver: Callable[[Packet], None] | None = None) -> int:
        """Step until every queued and in-flight flit is delivered."""
        bound = self.config.livelock_bound
        progress = self.now
        while not self.idle:
            if self._in_network == 0 and self._queued == 0:
                self.now = max(self.now, self._future[0][0])
                progress = self.now
            got = self.step()
            if got:
                progress = self.now
                if on_deliver is not None:
                    for pkt in got:
                        on_deliver(pkt)
            elif self.now - progress > bound:
                raise LivelockError(f"no delivery for {bound} cycles (now={self.now})")
        return self.now
