import io
import random

import pytest
from hypothesis import given, settings, strategies as st

from nocmap.noc import (
    InvariantViolation,
    LivelockError,
    Network,
    Packet,
    PacketKind,
    SimConfig,
)
from nocmap.topology import TopologyConfig, build_topology

TOPO = build_topology(TopologyConfig())


def packet(pid, src, dst, flits=1):
    kind = PacketKind.RESPONSE if flits > 1 else PacketKind.REQUEST
    return Packet(pid, kind, src, dst, flits)


def zero_load(hops, flits, rd, ld):
    return hops * (rd + ld) + flits - 1


@pytest.mark.parametrize("rd,ld", [(1, 1), (2, 1), (1, 2)])
def test_zero_load_latency_all_pairs(rd, ld):
    sim = SimConfig(router_delay=rd, link_delay=ld, ni_delay=0)
    for src in range(16):
        for dst in range(16):
            if src == dst:
                continue
            for flits in (1, 4, 22):
                net = Network(TOPO, sim)
                p = packet(1, src, dst, flits)
                net.enqueue_injection(p, 0)
                net.drain()
                assert p.head_depart == 0
                assert p.latency == zero_load(TOPO.hops(src, dst), flits, rd, ld)


def test_one_hop_hand_trace():
    sim = SimConfig(router_delay=1, link_delay=1, ni_delay=0)
    net = Network(TOPO, sim)
    a = packet(1, 0, 1)
    net.enqueue_injection(a, 0)
    net.drain()
    assert (a.head_depart, a.tail_arrive) == (0, 2)
    net = Network(TOPO, sim)
    b = packet(2, 0, 1, 4)
    net.enqueue_injection(b, 0)
    net.drain()
    assert b.tail_arrive - (b.head_depart + 2) == 3


def test_ni_delay_shifts_departure():
    net = Network(TOPO, SimConfig(ni_delay=8))
    p = packet(1, 0, 9)
    net.enqueue_injection(p, 5)
    net.drain()
    assert p.enqueue_cycle == 5 and p.head_depart == 13


def test_local_delivery():
    net = Network(TOPO, SimConfig(ni_delay=0))
    p = packet(1, 3, 3)
    net.enqueue_injection(p, 0)
    got = net.step()
    assert got == [p] and p.latency == 0


def test_empty_network():
    net = Network(TOPO)
    assert net.step() == [] and net.now == 1
    assert net.drain() == 1


def test_contention_alternates_and_saturates():
    sim = SimConfig(router_delay=1, link_delay=1, ni_delay=0)
    buf = io.StringIO()
    net = Network(TOPO, sim, trace=buf)
    net.enqueue_injection(packet(1, 0, 1, 4), 0)
    net.enqueue_injection(packet(2, 2, 1, 4), 0)
    net.drain()
    ejects = [line.split(",") for line in buf.getvalue().splitlines()
              if line.split(",")[2] == "eject"]
    cycles = [int(e[0]) for e in ejects]
    pids = [e[3] for e in ejects]
    assert len(ejects) == 8
    assert cycles == list(range(cycles[0], cycles[0] + 8))
    assert all(a != b for a, b in zip(pids, pids[1:]))


def test_livelock_guard():
    net = Network(TOPO, SimConfig(livelock_bound=1, ni_delay=0))
    net.enqueue_injection(packet(1, 0, 15), 0)
    with pytest.raises(LivelockError):
        net.drain()


def test_enqueue_in_the_past():
    net = Network(TOPO)
    net.step()
    with pytest.raises(Exception):
        net.enqueue_injection(packet(1, 0, 1), 0)


def test_multi_flit_only_for_responses():
    with pytest.raises(ValueError):
        Packet(1, PacketKind.REQUEST, 0, 1, 3)


def test_all_to_one():
    net = Network(TOPO, SimConfig(), check_invariants=True)
    n = 0
    for src in TOPO.pe_ids:
        for k in range(3):
            n += 1
            net.enqueue_injection(packet(n, src, 9), k)
    net.drain()
    assert len(net.delivered) == n


def random_traffic(seed, n, max_at=40, sim=None):
    rng = random.Random(seed)
    net = Network(TOPO, sim or SimConfig(), trace=io.StringIO(), check_invariants=True)
    sent = []
    for pid in range(1, n + 1):
        src, dst = rng.randrange(16), rng.randrange(16)
        flits = rng.choice([1, 1, 2, 4, 7, 11])
        p = packet(pid, src, dst, flits)
        net.enqueue_injection(p, rng.randrange(max_at))
        sent.append(p)
    net.drain()
    return net, sent


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 60))
def test_conservation_and_order_free_delivery(seed, n):
    net, sent = random_traffic(seed, n)
    assert sorted(e.packet_id for e in net.delivered) == [p.packet_id for p in sent]
    assert net.flits_injected == net.flits_delivered == sum(p.flit_count for p in sent)
    assert net.flits_in_network == 0
    assert net.max_occupancy <= SimConfig().vc_buffer_flits
    for p in sent:
        if p.src != p.dst:
            assert p.latency >= zero_load(TOPO.hops(p.src, p.dst), p.flit_count, 2, 1)


def test_twenty_packet_scenario():
    net, sent = random_traffic(20, 20)
    assert {e.packet_id for e in net.delivered} == {p.packet_id for p in sent}


def test_determinism_byte_identical_trace():
    a, _ = random_traffic(7, 80)
    b, _ = random_traffic(7, 80)
    assert a.trace.getvalue() == b.trace.getvalue()
    assert a.delivered == b.delivered


def test_invariant_checker_catches_corruption():
    net = Network(TOPO, SimConfig(ni_delay=0), check_invariants=True)
    net.enqueue_injection(packet(1, 0, 3, 4), 0)
    net.step()
    net._credits[0][2][0] += 1      # forge a credit on router 0's east output
    with pytest.raises(InvariantViolation):
        net.step()


@pytest.mark.parametrize("kw", [dict(vc_count=0), dict(router_delay=0), dict(ni_delay=-1),
                                dict(pe_clock_mhz=300.0), dict(arbitration="age")])
def test_bad_sim_config(kw):
    with pytest.raises(ValueError):
        SimConfig(**kw)


def test_clock_ratio():
    assert SimConfig().clock_ratio == 10
