"""Travel-time mapping without a second pass: sample, then allocate the rest."""

from nocmap.mapping import run_strategy
from nocmap.metrics import improvement, unevenness
from nocmap.noc import SimConfig
from nocmap.topology import TopologyConfig, build_topology
from nocmap.workload import lenet_preset

mesh = build_topology(TopologyConfig())
sim = SimConfig()
layer = lenet_preset()[0]
base = run_strategy(mesh, sim, layer, "row-major")

for w in (1, 5, 10, 20):
    res = run_strategy(mesh, sim, layer, f"sampling:{w}")
    s = res.sampling
    times = sorted(s.sample_times.values())
    print(f"window {w:2d}: sampled {s.sampled}, switched at cycle {s.switch_cycle}, "
          f"T_s {times[0]:.1f}..{times[-1]:.1f}, rho {unevenness(res.accumulated).rho:.2%}, "
          f"gain {improvement(base.makespan, res.makespan):.2f}%")

# A layer too small to sample is mapped row-major.
small = lenet_preset()[5]
res = run_strategy(mesh, sim, small, "sampling:10")
print(small.name, res.phases)
