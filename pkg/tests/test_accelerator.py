import math

import pytest

from nocmap.accelerator import (
    MCState,
    PlanError,
    TravelRecord,
    accumulate_busy,
    mc_service,
    run_layer,
)
from nocmap.mapping import map_row_major
from nocmap.noc import SimConfig
from nocmap.topology import TopologyConfig, build_topology, classify_distances
from nocmap.workload import LayerKind, LayerSpec, lenet_preset, task_count

SIM = SimConfig()


def rm_plan(topo, layer):
    return map_row_major(list(topo.pe_ids), task_count(layer)).assignments


def test_mc_service_idle():
    mc = MCState(9)
    assert mc_service(mc, 50, 100) == 104
    assert mc.busy_until == 103.125


def test_mc_back_to_back_unit_multiple():
    mc = MCState(9)
    mc_service(mc, 16, 0)
    first_end = mc.busy_until
    mc_service(mc, 16, 0)
    assert mc.busy_until - first_end == 1.0


def test_mc_busy_start():
    mc = MCState(9, busy_until=200.5)
    assert mc_service(mc, 8, 150) == math.ceil(200.5 + 0.5)


def test_accumulate_busy():
    assert accumulate_busy([]) == 0
    recs = [TravelRecord(i, 0, t, 0, 0, 0) for i, t in enumerate((60, 70, 80))]
    assert accumulate_busy(recs) == 210


def test_single_task_zero_load():
    sim = SimConfig(router_delay=2, link_delay=1, ni_delay=8)
    topo = build_topology(TopologyConfig(2, 1, (0,)))
    layer = LayerSpec(LayerKind.CONV, 1, 1, 1, 1, kernel=1)   # 2 values, 1 MAC
    res = run_layer(topo, sim, layer, {1: [0]})
    (rec,) = res.records[1]
    hop = sim.router_delay + sim.link_delay
    assert rec.t_req == sim.ni_delay + hop
    assert rec.t_memaccess == math.ceil(2 * 0.0625) + sim.ni_delay
    assert rec.t_resp == hop
    assert rec.t_compu == 1 * sim.clock_ratio
    assert rec.t_travel == 33
    assert rec.end_to_end == 33 + sim.ni_delay + hop
    assert res.makespan == rec.result_arrive == 44


def test_shared_mc_fifo():
    topo = build_topology(TopologyConfig(3, 1, (1,)))
    layer = LayerSpec(LayerKind.CONV, 2, 2, 1, 1, kernel=1)   # 4 tasks
    res = run_layer(topo, SIM, layer, {0: [0, 1], 2: [2, 3]})
    recs = sorted(res.iter_records(), key=lambda r: (r.req_arrive, r.task_id))
    assert len(recs) == 4
    pure = math.ceil(layer.data_values * 0.0625)
    for r in recs:
        assert r.t_memaccess >= pure + SIM.ni_delay
    # responses leave in request-arrival order
    departs = [r.req_arrive + r.t_memaccess for r in recs]
    assert departs == sorted(departs)


@pytest.fixture(scope="module")
def l1_row_major():
    topo = build_topology(TopologyConfig())
    layer = lenet_preset()[0]
    return topo, run_layer(topo, SIM, layer, rm_plan(topo, layer), "row-major")


def test_records_are_contiguous(l1_row_major):
    _, res = l1_row_major
    for pe, recs in res.records.items():
        assert len(recs) == 336
        for a, b in zip(recs, recs[1:]):
            # next request leaves at the previous task's compute end
            assert b.issue_cycle == a.issue_cycle + a.t_travel
        for r in recs:
            assert min(r.t_req, r.t_memaccess, r.t_resp, r.t_compu) >= 0
            assert r.result_arrive > r.issue_cycle + r.t_travel


def test_every_task_once(l1_row_major):
    _, res = l1_row_major
    assert sorted(r.task_id for r in res.iter_records()) == list(range(4704))


def test_three_tier_end_to_end(l1_row_major):
    topo, res = l1_row_major
    e2e = res.mean_end_to_end
    tiers = {}
    for c in classify_distances(topo):
        tiers.setdefault(c.distance, []).append(e2e[c.pe_id])
    means = [sum(v) / len(v) for _, v in sorted(tiers.items())]
    assert means[0] < means[1] < means[2]


def test_plan_errors():
    topo = build_topology(TopologyConfig())
    layer = LayerSpec(LayerKind.CONV, 2, 2, 1, 1, kernel=1)
    with pytest.raises(PlanError):
        run_layer(topo, SIM, layer, {0: [0, 1, 2]})
    with pytest.raises(PlanError):
        run_layer(topo, SIM, layer, {0: [0, 1], 1: [1, 2]})
    with pytest.raises(PlanError):
        run_layer(topo, SIM, layer, {9: [0, 1, 2, 3]})
    with pytest.raises(PlanError):
        run_layer(topo, SIM, layer, {0: [0, 1, 2, 7]})
