"""Task-count allocation strategies.

All uneven strategies share one solver: given a per-PE time ``w_i``, give PE
``i`` a share of the tasks proportional to ``1 / w_i`` so that
``count_i * w_i`` is equal across PEs, then round with largest remainders.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from statistics import median
from typing import Iterable, Mapping, Sequence

from .accelerator import Accelerator, DeviceConfig, LayerRunResult, run_layer
from .noc import SimConfig
from .topology import DistanceClass, Topology, classify_distances
from .workload import (
    LayerSpec,
    compute_cycles_for_task,
    flits_for_values,
    memory_delay_for_task,
    task_count,
)


class MappingError(ValueError):
    pass


@dataclass
class MappingPlan:
    assignments: dict[int, list[int]]
    strategy: str = ""

    @property
    def counts(self) -> dict[int, int]:
        return {pe: len(t) for pe, t in self.assignments.items()}

    @property
    def total(self) -> int:
        return sum(len(t) for t in self.assignments.values())

    def validate(self, total: int, pe_ids: Iterable[int] | None = None) -> None:
        seen = [t for tasks in self.assignments.values() for t in tasks]
        if len(seen) != total or set(seen) != set(range(total)):
            raise MappingError(f"plan does not partition {total} tasks")
        if pe_ids is not None:
            extra = set(self.assignments) - set(pe_ids)
            if extra:
                raise MappingError(f"plan assigns tasks to non-PE nodes {sorted(extra)}")


def _as_fraction(w) -> Fraction:
    return w if isinstance(w, Fraction) else Fraction(w)


def solve_inverse_time_allocation(weights: Sequence[float], total: int) -> list[int]:
    """Integer counts with ``count_i * weights[i]`` balanced and summing to ``total``.

    The real-valued shares ``total * (1/w_i) / sum_j(1/w_j)`` are computed in
    exact rational arithmetic, floored, and the leftover units go to the
    largest fractional parts; ties favour the lower index.
    """
    if total < 0:
        raise MappingError("total must be >= 0")
    if not weights:
        raise MappingError("need at least one weight")
    ws = [_as_fraction(w) for w in weights]
    if any(w <= 0 for w in ws):
        raise MappingError("weights must be positive")
    inv = [1 / w for w in ws]
    s = sum(inv)
    shares = [total * i / s for i in inv]
    counts = [math.floor(q) for q in shares]
    left = total - sum(counts)
    order = sorted(range(len(ws)), key=lambda i: (-(shares[i] - counts[i]), i))
    for i in order[:left]:
        counts[i] += 1
    return counts


def plan_from_counts(pe_ids: Sequence[int], counts: Sequence[int], first_task: int = 0,
                     strategy: str = "") -> MappingPlan:
    """Contiguous task-id blocks, handed out in PE order."""
    out, t = {}, first_task
    for pe, c in zip(pe_ids, counts):
        out[pe] = list(range(t, t + c))
        t += c
    return MappingPlan(out, strategy)


def map_row_major(pe_ids: Sequence[int], total: int, first_task: int = 0,
                  strategy: str = "row-major") -> MappingPlan:
    """One task per PE per mapping iteration, PEs in row order.

    The ``total mod N`` tail tasks land on the first PEs.
    """
    if total < 0:
        raise MappingError("total must be >= 0")
    n = len(pe_ids)
    out = {pe: [] for pe in pe_ids}
    for k in range(total):
        out[pe_ids[k % n]].append(first_task + k)
    return MappingPlan(out, strategy)


def allocate(pe_ids: Sequence[int], weights: Mapping[int, float] | Sequence[float],
             total: int, first_task: int = 0, strategy: str = "") -> MappingPlan:
    if isinstance(weights, Mapping):
        weights = [weights[pe] for pe in pe_ids]
    counts = solve_inverse_time_allocation(list(weights), total)
    return plan_from_counts(pe_ids, counts, first_task, strategy)


def map_distance_based(classes: Sequence[DistanceClass], total: int) -> MappingPlan:
    pe_ids = [c.pe_id for c in classes]
    return allocate(pe_ids, [c.distance for c in classes], total, strategy="distance")


# ---------------------------------------------------------------- static latency

@dataclass(frozen=True)
class StaticLatencyParams:
    t_link: float = 3.0      # cycles per hop; router_delay + link_delay by default
    t_flit: float = 1.0
    t_fixed: float = 2.0

    def __post_init__(self):
        if min(self.t_link, self.t_flit, self.t_fixed) < 0:
            raise MappingError("static latency parameters must be >= 0")

    @classmethod
    def for_sim(cls, sim: SimConfig, t_flit: float = 1.0, t_fixed: float = 2.0):
        return cls(float(sim.router_delay + sim.link_delay), t_flit, t_fixed)


def static_latency(t_compu: float, t_memaccess: float, distance: int, flit_num: int,
                   params: StaticLatencyParams) -> float:
    return (t_compu + t_memaccess
            + (distance * params.t_link + (flit_num - 1) * params.t_flit)
            + params.t_fixed)


def layer_static_latency(topology: Topology, pe: int, layer: LayerSpec, sim: SimConfig,
                         params: StaticLatencyParams,
                         device: DeviceConfig | None = None) -> float:
    device = device or DeviceConfig()
    t_compu = compute_cycles_for_task(layer.mac_ops, device.macs_per_pe) * sim.clock_ratio
    t_mem = memory_delay_for_task(layer.data_values, device.memory_cycles_per_value)
    flits = flits_for_values(layer.data_values, device.flit_payload_bytes)
    return static_latency(t_compu, t_mem, topology.distance(pe), flits, params)


def map_static_latency(topology: Topology, layer: LayerSpec, sim: SimConfig,
                       params: StaticLatencyParams | None = None, total: int | None = None,
                       device: DeviceConfig | None = None) -> MappingPlan:
    params = params or StaticLatencyParams.for_sim(sim)
    total = task_count(layer) if total is None else total
    weights = [Fraction(layer_static_latency(topology, pe, layer, sim, params, device))
               for pe in topology.pe_ids]
    return allocate(topology.pe_ids, weights, total, strategy="static-latency")


# ------------------------------------------------------------- travel time based

AGGREGATORS = {
    "mean": lambda xs: sum(xs) / len(xs),
    "median": median,
    "max": max,
    "last": lambda xs: xs[-1],
}


@dataclass
class TravelTimeSummary:
    times: dict[int, float]
    samples: dict[int, int]

    @classmethod
    def from_records(cls, records: Mapping[int, Sequence], aggregate: str = "mean"):
        agg = AGGREGATORS[aggregate]
        times, samples = {}, {}
        for pe, recs in sorted(records.items()):
            samples[pe] = len(recs)
            if recs:
                times[pe] = float(agg([r.t_travel for r in recs]))
        return cls(times, samples)

    def weights(self, pe_ids: Sequence[int]) -> list[float]:
        """Per-PE weights; PEs never observed get the mean observed time."""
        if not self.times:
            raise MappingError("no travel times observed")
        fill = sum(self.times.values()) / len(self.times)
        return [self.times.get(pe, fill) for pe in pe_ids]


def map_post_run(prior: LayerRunResult, total: int | None = None,
                 pe_ids: Sequence[int] | None = None, aggregate: str = "mean") -> MappingPlan:
    pe_ids = list(pe_ids if pe_ids is not None else prior.pe_ids)
    total = task_count(prior.layer) if total is None else total
    summary = TravelTimeSummary.from_records(prior.records, aggregate)
    return allocate(pe_ids, summary.weights(pe_ids), total, strategy="post-run")


def sampling_split(total: int, n_pe: int, window: int) -> int | None:
    """Tasks sampled up front, or ``None`` when the layer is too small to sample."""
    if window < 1:
        raise MappingError("window_length must be >= 1")
    if total < 2 * n_pe * window:
        return None
    return n_pe * window


@dataclass
class SamplingOutcome:
    sampled: int
    remaining: int
    sample_times: dict[int, float] = field(default_factory=dict)
    phase2: MappingPlan | None = None
    switch_cycle: int = 0


def settle_counts(weights: Sequence[float], total: int, floor: Sequence[int]) -> list[int]:
    """Inverse-time allocation of ``total`` where PE ``i`` already holds ``floor[i]``.

    PEs whose share falls below what they already hold keep exactly that and
    drop out; the rest is re-solved over the remaining PEs.
    """
    if sum(floor) > total:
        raise MappingError("PEs already hold more tasks than the total")
    fixed: dict[int, int] = {}
    while True:
        free = [i for i in range(len(weights)) if i not in fixed]
        left = total - sum(fixed.values())
        counts = solve_inverse_time_allocation([weights[i] for i in free], left) if free else []
        over = [i for i, c in zip(free, counts) if c < floor[i]]
        if not over:
            out = [0] * len(weights)
            for i, c in fixed.items():
                out[i] = c
            for i, c in zip(free, counts):
                out[i] = c
            return out
        for i in over:
            fixed[i] = floor[i]


class _SamplingController:
    """Switches a running accelerator from the sampling phase to the allocated phase.

    A PE that finishes its samples before the others pulls provisional tasks
    from the unsampled pool so it never idles; those tasks count against its
    share once the allocation is computed.
    """

    def __init__(self, acc: Accelerator, pe_ids: Sequence[int], window: int,
                 sampled: int, aggregate: str):
        self.acc = acc
        self.pe_ids = list(pe_ids)
        self.window = window
        self.aggregate = aggregate
        self.next_task = sampled
        self.sampled = sampled
        self.extra = {pe: 0 for pe in pe_ids}
        self.outcome: SamplingOutcome | None = None

    def sampling_done(self) -> bool:
        return all(len(self.acc.records[pe]) >= self.window for pe in self.pe_ids)

    def refill(self, pe: int) -> list[int] | None:
        if self.outcome is not None or self.next_task >= self.acc.total_tasks:
            return None
        t = self.next_task
        self.next_task += 1
        self.extra[pe] += 1
        return [t]

    def switch(self) -> SamplingOutcome:
        acc = self.acc
        samples = {pe: acc.records[pe][:self.window] for pe in self.pe_ids}
        summary = TravelTimeSummary.from_records(samples, self.aggregate)
        weights = summary.weights(self.pe_ids)
        remaining = acc.total_tasks - self.sampled
        floor = [self.extra[pe] for pe in self.pe_ids]
        counts = settle_counts(weights, remaining, floor)
        t = self.next_task
        plan = {}
        for pe, c, f in zip(self.pe_ids, counts, floor):
            plan[pe] = list(range(t, t + c - f))
            t += c - f
        self.outcome = SamplingOutcome(self.sampled, remaining, summary.times,
                                       MappingPlan(plan, f"sampling:{self.window}"),
                                       acc.net.now)
        acc.assign(plan)
        return self.outcome


def map_with_sampling_window(topology: Topology, sim: SimConfig, layer: LayerSpec,
                             window: int, device: DeviceConfig | None = None,
                             aggregate: str = "mean", trace=None,
                             check_invariants: bool = False) -> LayerRunResult:
    """Run ``layer`` with an on-the-fly travel-time mapping.

    Phase 1 maps ``window`` tasks to every PE row-major. When the last PE
    completes its samples, the ``total - PEs * window`` unsampled tasks are
    allocated against the sampled per-PE travel times and the run continues
    on the same network. Layers with fewer than ``2 * PEs * window`` tasks are
    mapped row-major.
    """
    strategy = f"sampling:{window}"
    pe_ids = list(topology.pe_ids)
    total = task_count(layer)
    sampled = sampling_split(total, len(pe_ids), window)
    if sampled is None:
        res = run_layer(topology, sim, layer, map_row_major(pe_ids, total).assignments,
                        strategy, device, trace, check_invariants)
        res.phases = {"sampled": 0, "remaining": total, "row_major_fallback": 1}
        return res

    acc = Accelerator(topology, sim, layer, device, trace, check_invariants)
    ctl = _SamplingController(acc, pe_ids, window, sampled, aggregate)
    acc.refill = ctl.refill
    acc.assign(map_row_major(pe_ids, sampled).assignments)
    acc.run(until=ctl.sampling_done)
    out = ctl.switch()
    acc.run()
    res = acc.result(strategy)
    res.phases = {"sampled": sampled, "remaining": out.remaining,
                  "switch_cycle": out.switch_cycle, "row_major_fallback": 0}
    res.sampling = out
    return res


# -------------------------------------------------------------------- strategies

STRATEGIES = ("row-major", "distance", "static-latency", "post-run", "sampling:<window>")


@dataclass(frozen=True)
class Strategy:
    name: str
    window: int | None = None

    def __str__(self):
        return f"sampling:{self.window}" if self.name == "sampling" else self.name


def parse_strategy(text: str) -> Strategy:
    text = str(text).strip()
    if text in ("row-major", "distance", "static-latency", "post-run"):
        return Strategy(text)
    if text.startswith("sampling:"):
        try:
            w = int(text.split(":", 1)[1])
        except ValueError:
            raise MappingError(f"bad sampling window in {text!r}") from None
        if w < 1:
            raise MappingError("sampling window must be >= 1")
        return Strategy("sampling", w)
    raise MappingError(f"unknown strategy {text!r}; expected one of {', '.join(STRATEGIES)}")


def run_strategy(topology: Topology, sim: SimConfig, layer: LayerSpec,
                 strategy: Strategy | str, device: DeviceConfig | None = None,
                 static_params: StaticLatencyParams | None = None,
                 aggregate: str = "mean", prior: LayerRunResult | None = None,
                 trace=None, check_invariants: bool = False) -> LayerRunResult:
    """Plan and simulate one layer.

    ``post-run`` needs a row-major record pass; pass ``prior`` to reuse one.
    """
    if isinstance(strategy, str):
        strategy = parse_strategy(strategy)
    label = str(strategy)
    pe_ids = list(topology.pe_ids)
    total = task_count(layer)
    kw = dict(device=device, trace=trace, check_invariants=check_invariants)
    if strategy.name == "sampling":
        return map_with_sampling_window(topology, sim, layer, strategy.window,
                                        aggregate=aggregate, **kw)
    if strategy.name == "row-major":
        plan = map_row_major(pe_ids, total)
    elif strategy.name == "distance":
        plan = map_distance_based(classify_distances(topology), total)
    elif strategy.name == "static-latency":
        plan = map_static_latency(topology, layer, sim, static_params, total, device)
    elif strategy.name == "post-run":
        if prior is None:
            prior = run_layer(topology, sim, layer, map_row_major(pe_ids, total).assignments,
                              "row-major", device)
        plan = map_post_run(prior, total, pe_ids, aggregate)
    else:
        raise MappingError(f"unknown strategy {strategy}")
    plan.validate(total, pe_ids)
    return run_layer(topology, sim, layer, plan.assignments, label, **kw)
