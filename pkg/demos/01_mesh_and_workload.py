"""The 4x4 mesh, its memory controllers, and how a LeNet layer becomes tasks."""

from nocmap.topology import ARCHITECTURES, build_topology, classify_distances, group_sizes
from nocmap.workload import lenet_preset, packet_spec, response_flit_count, task_count

# Two memory controllers sit in the middle row. Every other node is a PE and
# talks only to its nearest MC.
mesh = build_topology(ARCHITECTURES["2MC"])
print(mesh, "PEs:", list(mesh.pe_ids))

for y in range(mesh.height):
    row = []
    for x in range(mesh.width):
        n = y * mesh.width + x
        row.append(" MC " if n in mesh.mc_ids else f"d={mesh.distance(n)} ")
    print(" ".join(row))

# Hop distance decides how long requests and responses travel.
print("PEs per distance:", group_sizes(classify_distances(mesh)))
print("route 0 -> 9:", mesh.route(0, 9))

# One task computes one output pixel of one output channel. The response packet
# carries its inputs and weights, so bigger kernels mean longer packets.
for k in (1, 3, 5, 7, 9, 11, 13):
    print(f"kernel {k:2d}x{k:<2d} -> {response_flit_count(k)} flits")

total = 0
for layer in lenet_preset():
    n = task_count(layer)
    total += n
    spec = packet_spec(layer)
    print(f"{layer.name:4s} {layer.kind.value:5s} tasks={n:5d} response flits={spec.response_flits}")
print("whole model:", total, "tasks")
