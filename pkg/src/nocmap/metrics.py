"""Unevenness, improvement percentages and report containers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .accelerator import LayerRunResult


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class UnevennessReport:
    t_max: float
    t_min: float
    rho: float


def unevenness(values: Iterable[float] | Mapping[int, float]) -> UnevennessReport:
    """``(max - min) / max`` over per-PE values."""
    if isinstance(values, Mapping):
        values = values.values()
    vals = list(values)
    if len(vals) < 2:
        raise MetricsError("unevenness needs at least two PEs")
    if any(v <= 0 for v in vals):
        raise MetricsError("per-PE values must be positive")
    hi, lo = max(vals), min(vals)
    return UnevennessReport(hi, lo, (hi - lo) / hi)


def improvement(baseline: float, candidate: float) -> float:
    """Percent reduction of ``candidate`` relative to ``baseline``."""
    if baseline <= 0:
        raise MetricsError("baseline must be positive")
    return (baseline - candidate) / baseline * 100.0


@dataclass
class LayerSummary:
    scenario: str
    layer: str
    strategy: str
    accumulated: dict[int, float]
    mean_end_to_end: dict[int, float]
    makespan: int
    rho: float
    improvement_pct: float | None = None

    @classmethod
    def from_run(cls, scenario: str, layer: str, run: LayerRunResult) -> "LayerSummary":
        acc = {pe: float(v) for pe, v in run.accumulated.items()}
        e2e = run.mean_end_to_end
        busy = {pe: v for pe, v in acc.items() if v > 0}
        rho = unevenness(busy).rho if len(busy) >= 2 else 0.0
        return cls(scenario, layer, run.strategy, acc, e2e, run.makespan, rho)


@dataclass
class ModelReport:
    """Per-layer summaries for any number of (scenario, strategy) pairs.

    Layers of one scenario run back to back with the network drained in
    between, so a strategy's whole-model time is the sum of its layer
    makespans.
    """

    layers: list[LayerSummary] = field(default_factory=list)
    baseline: str = "row-major"

    def add(self, summary: LayerSummary) -> None:
        self.layers.append(summary)

    def scenarios(self) -> list[str]:
        return list(dict.fromkeys(s.scenario for s in self.layers))

    def strategies(self, scenario: str | None = None) -> list[str]:
        return list(dict.fromkeys(s.strategy for s in self.layers
                                  if scenario is None or s.scenario == scenario))

    def get(self, scenario: str, layer: str, strategy: str) -> LayerSummary:
        for s in self.layers:
            if (s.scenario, s.layer, s.strategy) == (scenario, layer, strategy):
                return s
        raise KeyError((scenario, layer, strategy))

    def total(self, scenario: str, strategy: str) -> int:
        return sum(s.makespan for s in self.layers
                   if s.scenario == scenario and s.strategy == strategy)

    def total_improvement(self, scenario: str, strategy: str,
                          baseline: str | None = None) -> float:
        return improvement(self.total(scenario, baseline or self.baseline),
                           self.total(scenario, strategy))

    def fill_improvements(self) -> None:
        """Set each layer's improvement against the baseline strategy, when present."""
        base = {(s.scenario, s.layer): s.makespan for s in self.layers
                if s.strategy == self.baseline}
        for s in self.layers:
            b = base.get((s.scenario, s.layer))
            s.improvement_pct = improvement(b, s.makespan) if b else None

    def totals(self) -> list[tuple[str, str, int, float | None]]:
        rows = []
        for sc in self.scenarios():
            strategies = self.strategies(sc)
            for st in strategies:
                imp = (self.total_improvement(sc, st)
                       if self.baseline in strategies else None)
                rows.append((sc, st, self.total(sc, st), imp))
        return rows
