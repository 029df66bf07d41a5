"""Zero-load latency and what happens when two packets want the same port."""

import io

from nocmap.noc import Network, Packet, PacketKind, SimConfig
from nocmap.topology import TopologyConfig, build_topology

mesh = build_topology(TopologyConfig())
sim = SimConfig()
hop = sim.router_delay + sim.link_delay
print(sim)

# On an empty network a packet needs hops * (router + link) cycles for its head
# and one more cycle per extra flit for the tail.
for src, dst, flits in [(0, 9, 1), (0, 9, 4), (15, 10, 22)]:
    net = Network(mesh, sim)
    p = Packet(1, PacketKind.RESPONSE if flits > 1 else PacketKind.REQUEST, src, dst, flits)
    net.enqueue_injection(p, 0)
    net.drain()
    print(f"{src:2d}->{dst:2d} {flits:2d} flits: latency {p.latency} "
          f"(formula {mesh.hops(src, dst) * hop + flits - 1}), "
          f"head left the NI at cycle {p.head_depart} after the {sim.ni_delay}-cycle NI delay")

# Two 4-flit packets converge on node 1's ejection port. Round-robin switch
# allocation interleaves them flit by flit.
trace = io.StringIO()
net = Network(mesh, SimConfig(ni_delay=0), trace=trace)
net.enqueue_injection(Packet(1, PacketKind.RESPONSE, 0, 1, 4), 0)
net.enqueue_injection(Packet(2, PacketKind.RESPONSE, 2, 1, 4), 0)
net.drain()
for line in trace.getvalue().splitlines():
    if ",eject," in line:
        print("  ", line)
