"""Where a task's time goes, and why row-major mapping leaves PEs uneven."""

from nocmap.accelerator import run_layer
from nocmap.mapping import map_row_major
from nocmap.metrics import unevenness
from nocmap.noc import SimConfig
from nocmap.topology import TopologyConfig, build_topology
from nocmap.workload import lenet_preset, task_count

mesh = build_topology(TopologyConfig())
sim = SimConfig()
layer = lenet_preset()[0]
plan = map_row_major(list(mesh.pe_ids), task_count(layer))
res = run_layer(mesh, sim, layer, plan.assignments, "row-major")

# Each record splits issue-to-compute-end into four back-to-back pieces.
r = res.records[0][5]
print(f"PE 0, task {r.task_id}: req {r.t_req} + mem {r.t_memaccess} + resp {r.t_resp} "
      f"+ compute {r.t_compu} = {r.t_travel}")

print("PE  dist  tasks  accumulated  mean end-to-end")
for pe in mesh.pe_ids:
    print(f"{pe:2d}  {mesh.distance(pe):4d}  {len(res.records[pe]):5d}  "
          f"{res.accumulated[pe]:11d}  {res.mean_end_to_end[pe]:8.2f}")

# Every PE got 336 tasks, but far PEs take longer per task.
print(f"accumulated unevenness {unevenness(res.accumulated).rho:.2%}, "
      f"end-to-end unevenness {unevenness(res.mean_end_to_end).rho:.2%}, "
      f"layer makespan {res.makespan} cycles")
