"""PE and MC behaviour on top of the network, with per-task travel records.

Every PE works through a FIFO of task ids with one request outstanding:

    request (1 flit, PE -> nearest MC)
    -> MC memory access (FIFO, fractional occupancy)
    -> response (PE <- MC, flit count from the layer)
    -> compute (PE cycles x clock ratio)
    -> result (1 flit, PE -> MC) issued together with the next request.

Travel-time components are contiguous, so for each task
``t_req + t_memaccess + t_resp + t_compu`` spans request issue to compute end.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, TextIO

from .noc import LivelockError, Network, Packet, PacketKind, SimConfig
from .topology import Topology
from .workload import (
    FLIT_PAYLOAD_BYTES,
    MACS_PER_PE,
    MEMORY_CYCLES_PER_VALUE,
    LayerSpec,
    compute_cycles_for_task,
    flits_for_values,
    memory_delay_for_task,
    task_count,
)


class PlanError(ValueError):
    pass


class Phase(Enum):
    IDLE = "idle"
    AWAITING_RESPONSE = "awaiting"
    COMPUTING = "computing"


@dataclass
class TravelRecord:
    task_id: int
    pe_id: int
    t_req: int
    t_memaccess: int
    t_resp: int
    t_compu: int
    issue_cycle: int = 0
    req_arrive: int = -1
    result_arrive: int = -1

    @property
    def t_travel(self) -> int:
        return self.t_req + self.t_memaccess + self.t_resp + self.t_compu

    @property
    def end_to_end(self) -> int:
        """Request issue to result delivery at the MC."""
        return self.result_arrive - self.issue_cycle


@dataclass
class PEState:
    pe_id: int
    mc_id: int
    assigned_tasks: deque = field(default_factory=deque)
    phase: Phase = Phase.IDLE
    outstanding_task: int | None = None
    busy_accumulator: int = 0
    idle_since: int = 0


@dataclass
class MCState:
    mc_id: int
    busy_until: float = 0.0
    served: int = 0


def mc_service(mc: MCState, data_values: int, now: int,
               cycles_per_value: float = MEMORY_CYCLES_PER_VALUE) -> int:
    """Serve one request; returns the response injection cycle."""
    start = max(float(now), mc.busy_until)
    mc.busy_until = start + memory_delay_for_task(data_values, cycles_per_value)
    mc.served += 1
    return math.ceil(mc.busy_until)


def accumulate_busy(records: Iterable[TravelRecord]) -> int:
    return sum(r.t_travel for r in records)


@dataclass
class LayerRunResult:
    layer: LayerSpec
    records: dict[int, list[TravelRecord]]
    makespan: int
    strategy: str = ""
    phases: dict[str, int] = field(default_factory=dict)
    sampling: object = None

    @property
    def pe_ids(self) -> list[int]:
        return sorted(self.records)

    @property
    def accumulated(self) -> dict[int, int]:
        return {pe: accumulate_busy(recs) for pe, recs in sorted(self.records.items())}

    def mean_travel(self) -> dict[int, float]:
        return {pe: sum(r.t_travel for r in recs) / len(recs)
                for pe, recs in sorted(self.records.items()) if recs}

    @property
    def mean_end_to_end(self) -> dict[int, float]:
        return {pe: sum(r.end_to_end for r in recs) / len(recs)
                for pe, recs in sorted(self.records.items()) if recs}

    def task_counts(self) -> dict[int, int]:
        return {pe: len(recs) for pe, recs in sorted(self.records.items())}

    def iter_records(self):
        for pe in sorted(self.records):
            yield from self.records[pe]


@dataclass(frozen=True)
class DeviceConfig:
    """Per-device timing that sits outside the router model."""
    macs_per_pe: int = MACS_PER_PE
    memory_cycles_per_value: float = MEMORY_CYCLES_PER_VALUE
    flit_payload_bytes: int = FLIT_PAYLOAD_BYTES


class Accelerator:
    """One layer's worth of PEs and MCs driving a fresh :class:`Network`."""

    def __init__(self, topology: Topology, sim: SimConfig, layer: LayerSpec,
                 device: DeviceConfig | None = None, trace: TextIO | None = None,
                 check_invariants: bool = False):
        self.topology = topology
        self.sim = sim
        self.layer = layer
        self.device = device = device or DeviceConfig()
        self.net = Network(topology, sim, trace=trace, check_invariants=check_invariants)
        self.total_tasks = task_count(layer)
        self.data_values = layer.data_values
        self.response_flits = flits_for_values(layer.data_values, device.flit_payload_bytes)
        self.compute_noc_cycles = (compute_cycles_for_task(layer.mac_ops, device.macs_per_pe)
                                   * sim.clock_ratio)
        self.pes = {pe: PEState(pe, topology.nearest_mc(pe)) for pe in topology.pe_ids}
        self.mcs = {mc: MCState(mc) for mc in topology.mc_ids}
        self.records: dict[int, list[TravelRecord]] = {pe: [] for pe in topology.pe_ids}
        self._pending: dict[int, TravelRecord] = {}
        self._events: list = []
        self._pid = 0
        self._assigned: set[int] = set()
        self.results_delivered = 0
        self.last_result = 0
        # called with a PE id when its FIFO runs dry; may return more task ids
        self.refill: Callable[[int], list[int] | None] | None = None

    # ----------------------------------------------------------- assignment

    def _take(self, pe: int, tasks: Iterable[int]) -> None:
        if pe not in self.pes:
            raise PlanError(f"node {pe} is not a PE")
        tasks = list(tasks)
        for t in tasks:
            if not 0 <= t < self.total_tasks:
                raise PlanError(f"task {t} outside layer of {self.total_tasks} tasks")
            if t in self._assigned:
                raise PlanError(f"task {t} assigned twice")
            self._assigned.add(t)
        self.pes[pe].assigned_tasks.extend(tasks)

    def assign(self, plan: dict[int, Iterable[int]]) -> None:
        """Append task ids to PE FIFOs and wake idle PEs."""
        for pe, tasks in plan.items():
            self._take(pe, tasks)
        now = self.net.now
        for pe in self.topology.pe_ids:
            st = self.pes[pe]
            if st.phase is Phase.IDLE and st.assigned_tasks:
                self._issue(st, now)

    # ---------------------------------------------------------- PE protocol

    def _new_packet(self, kind, src, dst, flits, payload):
        self._pid += 1
        return Packet(self._pid, kind, src, dst, flits, payload)

    def _issue(self, st: PEState, at: int) -> None:
        task = st.assigned_tasks.popleft()
        st.phase = Phase.AWAITING_RESPONSE
        st.outstanding_task = task
        rec = TravelRecord(task, st.pe_id, 0, 0, 0, 0, issue_cycle=at)
        self._pending[task] = rec
        pkt = self._new_packet(PacketKind.REQUEST, st.pe_id, st.mc_id, 1, task)
        pkt.tag = rec
        self.net.enqueue_injection(pkt, at)

    def _on_deliver(self, pkt: Packet) -> None:
        now = pkt.tail_arrive
        rec: TravelRecord = pkt.tag
        if pkt.kind is PacketKind.REQUEST:
            rec.t_req = now - rec.issue_cycle
            mc = self.mcs[pkt.dst]
            ready = mc_service(mc, self.data_values, now, self.device.memory_cycles_per_value)
            resp = self._new_packet(PacketKind.RESPONSE, mc.mc_id, pkt.src,
                                    self.response_flits, pkt.payload)
            resp.tag = rec
            rec.req_arrive = now
            self.net.enqueue_injection(resp, ready)
        elif pkt.kind is PacketKind.RESPONSE:
            rec.t_memaccess = pkt.head_depart - rec.req_arrive
            rec.t_resp = pkt.tail_arrive - pkt.head_depart
            rec.t_compu = self.compute_noc_cycles
            st = self.pes[pkt.dst]
            st.phase = Phase.COMPUTING
            heapq.heappush(self._events, (now + self.compute_noc_cycles, pkt.dst))
        else:
            rec.result_arrive = now
            self.results_delivered += 1
            self.last_result = max(self.last_result, now)

    def _compute_done(self, pe: int, now: int) -> None:
        st = self.pes[pe]
        task = st.outstanding_task
        rec = self._pending.pop(task)
        self.records[pe].append(rec)
        st.busy_accumulator += rec.t_travel
        res = self._new_packet(PacketKind.RESULT, pe, st.mc_id, 1, task)
        res.tag = rec
        st.outstanding_task = None
        if not st.assigned_tasks and self.refill is not None:
            more = self.refill(pe)
            if more:
                self._take(pe, more)
        if st.assigned_tasks:
            self._issue(st, now)
        else:
            st.phase = Phase.IDLE
            st.idle_since = now
        self.net.enqueue_injection(res, now)

    # ----------------------------------------------------------------- loop

    def run(self, until: Callable[[], bool] | None = None) -> int:
        """Advance until ``until()`` holds (checked after compute events) or
        until the network drains with no PE work left."""
        net = self.net
        events = self._events
        bound = self.sim.livelock_bound
        progress = net.now
        while True:
            now = net.now
            if events and events[0][0] == now:
                while events and events[0][0] == now:
                    _, pe = heapq.heappop(events)
                    self._compute_done(pe, now)
                if until is not None and until():
                    return now
            if net.idle:
                if not events:
                    return now
                net.advance_to(events[0][0])
                progress = net.now
                continue
            if net.flits_in_network == 0 and not net._queued:
                nxt = net.next_injection_cycle()
                target = nxt if not events else min(nxt, events[0][0])
                if target > now:
                    net.advance_to(target)
                    progress = target
                    continue
            got = net.step()
            if got:
                progress = net.now
                for pkt in got:
                    self._on_deliver(pkt)
            elif net.now - progress > bound:
                raise LivelockError(f"no delivery for {bound} cycles (now={net.now})")

    def all_idle(self) -> bool:
        return all(st.phase is Phase.IDLE and not st.assigned_tasks
                   for st in self.pes.values())

    def result(self, strategy: str = "") -> LayerRunResult:
        if self._pending or any(st.assigned_tasks for st in self.pes.values()):
            raise PlanError("layer run is incomplete")
        return LayerRunResult(self.layer, self.records, self.last_result, strategy)


def run_layer(topology: Topology, sim: SimConfig, layer: LayerSpec,
              plan: dict[int, list[int]], strategy: str = "",
              device: DeviceConfig | None = None, trace: TextIO | None = None,
              check_invariants: bool = False) -> LayerRunResult:
    """Execute ``plan`` (PE id -> ordered task ids) and drain the network."""
    acc = Accelerator(topology, sim, layer, device, trace, check_invariants)
    assigned = sum(len(t) for t in plan.values())
    if assigned != acc.total_tasks:
        raise PlanError(f"plan covers {assigned} tasks, layer has {acc.total_tasks}")
    acc.assign(plan)
    acc.run()
    return acc.result(strategy)
