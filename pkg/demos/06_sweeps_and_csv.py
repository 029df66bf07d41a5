"""Run a sweep from a config dict, write the CSV and read it back."""

import tempfile
from pathlib import Path

from nocmap.experiments import config_from_dict, parse_csv, run_scenario

cfg = config_from_dict({
    "scenario": "kernels",
    "workload": {"preset": "lenet", "select": ["C1"]},
    "strategies": ["row-major", "static-latency", "sampling:10"],
    "sweep": {"axis": "kernel_size", "points": [1, 5, 9]},
})

out = Path(tempfile.mkdtemp()) / "kernels.csv"
report = run_scenario(cfg, output=out)
for sc, strategy, total, gain in report.totals():
    print(f"{sc:15s} {strategy:15s} {total:7d} {gain:+7.2f}%")

print(out.read_text().splitlines()[0])
back = parse_csv(out)
print("round trip identical:", back.layers == report.layers)
print("totals file:", out.with_name("kernels_totals.csv").read_text().splitlines()[1])
