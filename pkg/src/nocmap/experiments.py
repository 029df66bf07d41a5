"""Scenario configs, sweep runner and CSV output.

A scenario config is a YAML mapping; see ``configs/README.md`` for the schema.
"""

from __future__ import annotations

import csv
import io
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Iterable

import yaml

from .accelerator import DeviceConfig, LayerRunResult, PlanError, run_layer
from .mapping import (
    MappingError,
    StaticLatencyParams,
    map_row_major,
    parse_strategy,
    run_strategy,
)
from .metrics import LayerSummary, ModelReport
from .noc import InvariantViolation, LivelockError, SimConfig
from .topology import ARCHITECTURES, Topology, TopologyConfig, TopologyError, build_topology
from .workload import (
    PRESETS,
    LayerSpec,
    WorkloadError,
    channel_variant,
    kernel_variant,
    task_count,
)

log = logging.getLogger(__name__)

CSV_HEADER = ["scenario", "layer", "strategy", "pe", "accumulated", "mean_end_to_end",
              "makespan", "rho", "improvement_pct"]
RECORD_HEADER = ["layer", "pe", "task", "t_req", "t_mem", "t_resp", "t_compu", "t_travel"]
SUMMARY_PE = "ALL"

SWEEP_AXES = ("none", "output_channels", "kernel_size", "architecture", "window")
SWEEP_DEFAULTS = {
    "output_channels": [3, 6, 12, 24, 48],
    "kernel_size": [1, 3, 5, 7, 9, 11, 13],
    "architecture": ["2MC", "4MC"],
    "window": [1, 5, 10, "post-run"],
}
ALL_STRATEGIES = ["row-major", "distance", "static-latency", "post-run", "sampling:10"]

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT, EXIT_LIVELOCK = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    device: DeviceConfig = field(default_factory=DeviceConfig)
    layers: list[LayerSpec] = field(default_factory=lambda: PRESETS["lenet"]())
    strategies: list[str] = field(default_factory=lambda: ["row-major"])
    aggregate: str = "mean"
    static_latency: dict[str, float] = field(default_factory=dict)
    sweep_axis: str = "none"
    sweep_points: list[Any] = field(default_factory=list)
    output: str | None = None
    deterministic: bool = True
    jobs: int = 1

    def static_params(self) -> StaticLatencyParams:
        base = StaticLatencyParams.for_sim(self.sim)
        return replace(base, **self.static_latency)


def _section(raw: dict, key: str) -> dict:
    val = raw.get(key) or {}
    if not isinstance(val, dict):
        raise ConfigError(f"section {key!r} must be a mapping")
    return val


def _build(cls, data: dict, where: str):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from None


def _layer(d: dict) -> LayerSpec:
    d = dict(d)
    if "input" in d:
        h, w = d.pop("input")
        d.setdefault("input_h", h)
        d.setdefault("input_w", w)
    if str(d.get("kind", "")).lower() == "pool":
        d.setdefault("out_channels", d.get("in_channels"))
    return _build(LayerSpec, d, "workload.layers[]")


def config_from_dict(raw: dict) -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    known = {"scenario", "topology", "sim", "device", "workload", "strategy", "strategies",
             "sampling", "static_latency", "sweep", "output", "deterministic", "jobs"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")

    topo = dict(_section(raw, "topology"))
    arch = topo.pop("architecture", None)
    if arch is not None:
        if arch not in ARCHITECTURES:
            raise ConfigError(f"unknown architecture {arch!r}")
        base = asdict(ARCHITECTURES[arch])
        base.update(topo)
        topo = base
    sim = dict(_section(raw, "sim"))
    # hop timing lives in the topology section; the simulator mirrors it
    for key in ("router_delay", "link_delay"):
        if key in sim and key in topo and sim[key] != topo[key]:
            raise ConfigError(f"{key} given in both topology and sim sections with different values")
        if key in sim:
            topo[key] = sim.pop(key)
    topo_cfg = _build(TopologyConfig, {**_topo_defaults(), **topo}, "topology")
    try:
        build_topology(topo_cfg)
    except TopologyError as e:
        raise ConfigError(f"topology: {e}") from None
    sim_cfg = _build(SimConfig, {**sim, "router_delay": topo_cfg.router_delay,
                                 "link_delay": topo_cfg.link_delay}, "sim")
    device = _build(DeviceConfig, _section(raw, "device"), "device")

    wl = _section(raw, "workload")
    if "layers" in wl and "preset" in wl:
        raise ConfigError("workload takes either 'preset' or 'layers', not both")
    if "layers" in wl:
        layers = [_layer(d) for d in wl["layers"]]
    else:
        preset = wl.get("preset", "lenet")
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}")
        layers = PRESETS[preset]()
    select = wl.get("select")
    if select:
        by_name = {l.name: l for l in layers}
        missing = [s for s in select if s not in by_name]
        if missing:
            raise ConfigError(f"workload.select names unknown layers {missing}")
        layers = [by_name[s] for s in select]
    if not layers:
        raise ConfigError("workload has no layers")
    for l in layers:
        task_count(l)

    if "strategy" in raw and "strategies" in raw:
        raise ConfigError("give 'strategy' or 'strategies', not both")
    strategies = raw.get("strategies") or [raw.get("strategy", "row-major")]
    if strategies == ["all"]:
        strategies = list(ALL_STRATEGIES)
    strategies = [str(parse_strategy(s)) for s in strategies]

    sampling = _section(raw, "sampling")
    aggregate = sampling.get("aggregate", "mean")
    from .mapping import AGGREGATORS
    if aggregate not in AGGREGATORS:
        raise ConfigError(f"unknown sampling aggregate {aggregate!r}")

    sweep = raw.get("sweep") or {}
    if isinstance(sweep, str):
        sweep = {"axis": sweep}
    axis = sweep.get("axis", "none")
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    points = list(sweep.get("points") or SWEEP_DEFAULTS.get(axis, []))
    if axis == "architecture":
        bad = [p for p in points if p not in ARCHITECTURES]
        if bad:
            raise ConfigError(f"unknown architectures {bad}")
    if axis == "window":
        for p in points:
            parse_strategy("post-run" if p == "post-run" else f"sampling:{p}")

    static = dict(_section(raw, "static_latency"))
    bad = set(static) - {"t_link", "t_flit", "t_fixed"}
    if bad:
        raise ConfigError(f"unknown static_latency keys {sorted(bad)}")
    static = {k: float(v) for k, v in static.items() if v is not None}

    return ScenarioConfig(
        name=str(raw.get("scenario", "scenario")),
        topology=topo_cfg, sim=sim_cfg, device=device, layers=layers,
        strategies=strategies, aggregate=aggregate, static_latency=static,
        sweep_axis=axis, sweep_points=points, output=raw.get("output"),
        deterministic=bool(raw.get("deterministic", True)), jobs=int(raw.get("jobs", 1)),
    )


def _topo_defaults() -> dict:
    sim = SimConfig()
    return {"router_delay": sim.router_delay, "link_delay": sim.link_delay}


def load_config(path: str | os.PathLike) -> ScenarioConfig:
    try:
        with open(path) as f:
            raw = yaml.safe_load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from None
    except yaml.YAMLError as e:
        raise ConfigError(f"bad YAML in {path}: {e}") from None
    try:
        return config_from_dict(raw)
    except (TopologyError, WorkloadError, MappingError) as e:
        raise ConfigError(str(e)) from None


# ------------------------------------------------------------------ running

def check_run(run: LayerRunResult, total: int) -> None:
    """Raise :class:`InvariantViolation` if a finished run is inconsistent."""
    seen = sorted(r.task_id for r in run.iter_records())
    if seen != list(range(total)):
        raise InvariantViolation(f"{run.strategy}: tasks executed != 0..{total - 1}")
    for r in run.iter_records():
        parts = (r.t_req, r.t_memaccess, r.t_resp, r.t_compu)
        if min(parts) < 0:
            raise InvariantViolation(f"negative travel component in task {r.task_id}")
        if r.result_arrive < 0:
            raise InvariantViolation(f"result of task {r.task_id} never delivered")
    acc = run.accumulated
    if acc and run.makespan < max(acc.values()):
        raise InvariantViolation("makespan below a PE's accumulated busy time")


def run_layer_strategies(cfg: ScenarioConfig, topo: Topology, layer: LayerSpec,
                         strategies: Iterable[str], trace=None) -> dict[str, LayerRunResult]:
    out: dict[str, LayerRunResult] = {}
    total = task_count(layer)
    prior = None
    for s in strategies:
        if s == "post-run" and prior is None:
            prior = out.get("row-major") or run_layer(
                topo, cfg.sim, layer, map_row_major(list(topo.pe_ids), total).assignments,
                "row-major", cfg.device)
        run = run_strategy(topo, cfg.sim, layer, s, cfg.device, cfg.static_params(),
                           cfg.aggregate, prior=prior, trace=trace)
        check_run(run, total)
        if run.phases.get("sampled"):
            log.info("%s %s: %d sampled, %d allocated", layer.name, s,
                     run.phases["sampled"], run.phases["remaining"])
        out[s] = run
    return out


@dataclass
class _Point:
    scenario: str
    cfg: ScenarioConfig
    layers: list[LayerSpec]
    strategies: list[str]


def _points(cfg: ScenarioConfig) -> list[_Point]:
    axis = cfg.sweep_axis
    if axis == "none":
        return [_Point(cfg.name, cfg, cfg.layers, cfg.strategies)]
    pts = []
    base_layer = cfg.layers[0]
    for p in cfg.sweep_points:
        name = f"{axis}={p}"
        if axis == "output_channels":
            pts.append(_Point(name, cfg, [channel_variant(int(p), base_layer)], cfg.strategies))
        elif axis == "kernel_size":
            pts.append(_Point(name, cfg, [kernel_variant(int(p), base_layer)], cfg.strategies))
        elif axis == "architecture":
            arch = ARCHITECTURES[p]
            topo = replace(cfg.topology, mc_nodes=arch.mc_nodes, width=arch.width,
                           height=arch.height)
            pts.append(_Point(name, replace(cfg, topology=topo), cfg.layers, cfg.strategies))
        elif axis == "window":
            s = "post-run" if p == "post-run" else f"sampling:{int(p)}"
            pts.append(_Point(name, cfg, cfg.layers, ["row-major", s]))
    return pts


def _run_point(pt: _Point, dump_records: str | None = None,
               trace_path: str | None = None) -> list[LayerSummary]:
    topo = build_topology(pt.cfg.topology)
    trace = open(trace_path, "a") if trace_path else None
    rows = []
    try:
        for layer in pt.layers:
            if trace is not None:
                trace.write(f"# scenario={pt.scenario} layer={layer.name}\n")
            runs = run_layer_strategies(pt.cfg, topo, layer, pt.strategies, trace)
            for s, run in runs.items():
                rows.append(LayerSummary.from_run(pt.scenario, layer.name, run))
                if dump_records:
                    write_records(run, Path(dump_records) / _safe(f"{pt.scenario}__{s}.csv"),
                                  append=True)
    finally:
        if trace is not None:
            trace.close()
    return rows


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_.=" else "_" for c in name)


def run_scenario(cfg: ScenarioConfig, dump_records: str | None = None,
                 trace_path: str | None = None, output: str | None = None) -> ModelReport:
    """Run every (point, layer, strategy) of ``cfg`` and optionally write CSV.

    Points run in worker processes when ``cfg.jobs > 1``; rows are assembled in
    point order either way, so output does not depend on scheduling.
    """
    pts = _points(cfg)
    if dump_records:
        Path(dump_records).mkdir(parents=True, exist_ok=True)
        for pt in pts:
            for s in pt.strategies:
                p = Path(dump_records) / _safe(f"{pt.scenario}__{s}.csv")
                if p.exists():
                    p.unlink()
    if trace_path and os.path.exists(trace_path):
        os.unlink(trace_path)
    if cfg.jobs > 1 and len(pts) > 1 and not trace_path:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as ex:
            chunks = list(ex.map(_run_point, pts, [dump_records] * len(pts)))
    else:
        chunks = [_run_point(pt, dump_records, trace_path) for pt in pts]
    report = ModelReport()
    for chunk in chunks:
        for row in chunk:
            report.add(row)
    report.fill_improvements()
    out = output or cfg.output
    if out:
        emit_csv(report, out)
        emit_totals(report, _totals_path(out))
    return report


def run_sweep(cfg: ScenarioConfig, **kw) -> ModelReport:
    if cfg.sweep_axis == "none":
        raise ConfigError("sweep requires a sweep axis")
    return run_scenario(cfg, **kw)


# ---------------------------------------------------------------------- CSV

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def report_rows(report: ModelReport) -> list[list[str]]:
    rows = []
    for s in report.layers:
        for pe in sorted(s.accumulated):
            rows.append([s.scenario, s.layer, s.strategy, str(pe), _fmt(s.accumulated[pe]),
                         _fmt(s.mean_end_to_end.get(pe)), "", "", ""])
        rows.append([s.scenario, s.layer, s.strategy, SUMMARY_PE, "", "", _fmt(s.makespan),
                     _fmt(s.rho), _fmt(s.improvement_pct)])
    return rows


def emit_csv(report: ModelReport, path: str | os.PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(CSV_HEADER)
        w.writerows(report_rows(report))
    return path


def _totals_path(path) -> Path:
    p = Path(path)
    return p.with_name(p.stem + "_totals.csv")


def emit_totals(report: ModelReport, path: str | os.PathLike) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["scenario", "strategy", "total_makespan", "improvement_pct"])
        for sc, st, tot, imp in report.totals():
            w.writerow([sc, st, tot, _fmt(imp)])
    return path


def _num(text: str):
    if text == "":
        return None
    return float(text)


def parse_csv(path_or_text: str | os.PathLike, text: bool = False) -> ModelReport:
    """Inverse of :func:`emit_csv`."""
    f = io.StringIO(path_or_text) if text else open(path_or_text, newline="")
    with f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise ValueError(f"unexpected header {header}")
        report = ModelReport()
        acc: dict[int, float] = {}
        e2e: dict[int, float] = {}
        for row in reader:
            sc, layer, strat, pe = row[:4]
            if pe == SUMMARY_PE:
                imp = _num(row[8])
                report.add(LayerSummary(sc, layer, strat, acc, e2e, int(row[6]),
                                        float(row[7]), imp))
                acc, e2e = {}, {}
            else:
                acc[int(pe)] = float(row[4])
                if row[5] != "":
                    e2e[int(pe)] = float(row[5])
    return report


def write_records(run: LayerRunResult, path: str | os.PathLike, append: bool = False) -> Path:
    path = Path(path)
    new = not (append and path.exists())
    with open(path, "w" if new else "a", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        if new:
            w.writerow(RECORD_HEADER)
        for r in run.iter_records():
            w.writerow([run.layer.name, r.pe_id, r.task_id, r.t_req, r.t_memaccess,
                        r.t_resp, r.t_compu, r.t_travel])
    return path


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, LivelockError):
        return EXIT_LIVELOCK
    if isinstance(exc, (InvariantViolation, PlanError, MappingError)):
        return EXIT_INVARIANT
    if isinstance(exc, (ValueError, OSError)):
        return EXIT_CONFIG
    raise exc
