"""Five ways to split one layer across the PEs."""

from nocmap.mapping import run_strategy
from nocmap.metrics import improvement, unevenness
from nocmap.noc import SimConfig
from nocmap.topology import TopologyConfig, build_topology
from nocmap.workload import lenet_preset

mesh = build_topology(TopologyConfig())
sim = SimConfig()
layer = lenet_preset()[0]

base = run_strategy(mesh, sim, layer, "row-major")
print(f"{'strategy':15s} {'makespan':>8s} {'rho':>7s} {'gain':>7s}  tasks per PE")
for name in ("row-major", "distance", "static-latency", "post-run", "sampling:10"):
    # post-run reuses the row-major pass as its record run
    res = base if name == "row-major" else run_strategy(mesh, sim, layer, name, prior=base)
    counts = res.task_counts()
    print(f"{name:15s} {res.makespan:8d} {unevenness(res.accumulated).rho:7.2%} "
          f"{improvement(base.makespan, res.makespan):6.2f}%  "
          f"{min(counts.values())}..{max(counts.values())}")

# Distance-based mapping assumes time grows linearly with hops, which hands the
# nearest PEs three times the work of the farthest. Travel-time mapping
# measures instead of assuming.
