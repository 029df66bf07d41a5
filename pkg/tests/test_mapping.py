from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from nocmap.accelerator import LayerRunResult, TravelRecord
from nocmap.mapping import (
    MappingError,
    StaticLatencyParams,
    map_distance_based,
    map_post_run,
    map_row_major,
    map_static_latency,
    map_with_sampling_window,
    parse_strategy,
    sampling_split,
    settle_counts,
    solve_inverse_time_allocation,
    static_latency,
)
from nocmap.noc import SimConfig
from nocmap.topology import TopologyConfig, build_topology, classify_distances
from nocmap.workload import LayerKind, LayerSpec, kernel_variant, lenet_preset

from oracles import lcm_allocation

TOPO = build_topology(TopologyConfig())
SIM = SimConfig()

int_weights = st.lists(st.integers(1, 400), min_size=1, max_size=16)


@given(int_weights, st.integers(0, 10**5))
def test_allocation_matches_integer_oracle(ws, total):
    assert solve_inverse_time_allocation(ws, total) == lcm_allocation(ws, total)


@given(int_weights, st.integers(0, 10**5), st.integers(1, 50))
def test_allocation_scale_invariant(ws, total, k):
    assert solve_inverse_time_allocation(ws, total) == \
        solve_inverse_time_allocation([w * k for w in ws], total)


@given(int_weights, st.integers(0, 10**5))
def test_allocation_sum_monotone_and_balanced(ws, total):
    c = solve_inverse_time_allocation(ws, total)
    assert sum(c) == total
    for i in range(len(ws)):
        for j in range(len(ws)):
            if ws[i] < ws[j]:
                assert c[i] >= c[j]
    loads = [ci * wi for ci, wi in zip(c, ws)]
    assert max(loads) - min(loads) <= max(ws)


def test_allocation_examples():
    assert solve_inverse_time_allocation([5] * 7, 70) == [10] * 7
    assert solve_inverse_time_allocation([100, 200], 30) == [20, 10]
    ws = [1] * 6 + [2] * 6 + [3] * 2
    assert solve_inverse_time_allocation(ws, 58) == [6] * 6 + [3] * 6 + [2] * 2


def test_allocation_errors():
    with pytest.raises(MappingError):
        solve_inverse_time_allocation([1, 0], 5)
    with pytest.raises(MappingError):
        solve_inverse_time_allocation([], 5)
    with pytest.raises(MappingError):
        solve_inverse_time_allocation([1], -1)


def test_row_major_examples():
    pes = list(TOPO.pe_ids)
    assert set(map_row_major(pes, 4704).counts.values()) == {336}
    counts = map_row_major(pes, 30).counts
    assert [counts[p] for p in pes] == [3, 3] + [2] * 12
    assert all(not t for t in map_row_major(pes, 0).assignments.values())


@given(st.integers(1, 16), st.integers(0, 2000))
def test_row_major_tail_rule(n, total):
    pes = list(range(n))
    c = map_row_major(pes, total).counts
    extra = [p for p in pes if c[p] == total // n + 1]
    assert extra == pes[: total % n]
    assert sum(c.values()) == total


def test_distance_mapping():
    classes = classify_distances(TOPO)
    plan = map_distance_based(classes, 58)
    by_d = {}
    for cl in classes:
        by_d.setdefault(cl.distance, set()).add(plan.counts[cl.pe_id])
    assert by_d == {1: {6}, 2: {3}, 3: {2}}
    big = map_distance_based(classes, 4704)
    assert big.total == 4704
    k = Fraction(4704 * 3, 29)
    for cl in classes:
        assert abs(big.counts[cl.pe_id] - k / cl.distance) < 1
    plan.validate(58, TOPO.pe_ids)


def test_distance_uniform_is_even():
    t = build_topology(TopologyConfig(3, 1, (1,)))
    assert map_distance_based(classify_distances(t), 10).counts == {0: 5, 2: 5}


def test_static_latency_formula():
    p = StaticLatencyParams(t_link=2, t_flit=1, t_fixed=2)
    assert static_latency(10, 4, 1, 4, p) == 21
    assert static_latency(10, 4, 1, 1, p) == 18
    assert static_latency(10, 4, 3, 4, p) - static_latency(10, 4, 1, 4, p) == 2 * p.t_link


def test_static_mapping_ordering():
    plan = map_static_latency(TOPO, lenet_preset()[0], SIM)
    c = plan.counts
    far = [p for p in TOPO.pe_ids if TOPO.distance(p) == 3]
    assert max(c[p] for p in far) == min(c.values())


def test_static_spread_narrows_with_flits():
    def spread(k):
        c = map_static_latency(TOPO, kernel_variant(k), SIM).counts
        return (max(c.values()) - min(c.values())) / max(c.values())
    s = [spread(k) for k in (1, 5, 9, 13)]
    assert s == sorted(s, reverse=True)


def fake_run(means):
    records = {pe: [TravelRecord(i, pe, m, 0, 0, 0)] for i, (pe, m) in enumerate(means.items())}
    layer = LayerSpec(LayerKind.CONV, 7, 10, 1, 1)
    return LayerRunResult(layer, records, 0)


def test_post_run_examples():
    assert map_post_run(fake_run({0: 60, 1: 80}), 70).counts == {0: 40, 1: 30}
    assert map_post_run(fake_run({0: 50, 1: 50}), 70).counts == {0: 35, 1: 35}


def test_sampling_split():
    assert sampling_split(4704, 14, 10) == 140
    assert sampling_split(84, 14, 10) is None
    assert sampling_split(280, 14, 10) == 140
    assert sampling_split(279, 14, 10) is None
    with pytest.raises(MappingError):
        sampling_split(100, 14, 0)


@given(st.lists(st.integers(1, 100), min_size=1, max_size=8), st.data())
def test_settle_counts_respects_floor(ws, data):
    floor = [data.draw(st.integers(0, 20)) for _ in ws]
    total = sum(floor) + data.draw(st.integers(0, 500))
    c = settle_counts(ws, total, floor)
    assert sum(c) == total
    assert all(ci >= fi for ci, fi in zip(c, floor))
    if not any(floor):
        assert c == solve_inverse_time_allocation(ws, total)


@pytest.fixture(scope="module")
def sw10_small():
    layer = LayerSpec(LayerKind.CONV, 16, 16, 1, 4, kernel=3, name="small")
    return layer, map_with_sampling_window(TOPO, SIM, layer, 10)


def test_sampling_phases(sw10_small):
    layer, res = sw10_small
    assert res.phases["sampled"] == 140
    assert res.phases["remaining"] == 784 - 140
    assert sorted(r.task_id for r in res.iter_records()) == list(range(784))
    # phase one is the row-major prefix
    pes = list(TOPO.pe_ids)
    for i, pe in enumerate(pes):
        first = [r.task_id for r in res.records[pe][:10]]
        assert first == [i + 14 * k for k in range(10)]
    plan = res.sampling.phase2
    assert plan.total + sum(
        len(res.records[pe]) - len(plan.assignments[pe]) for pe in pes) == 784


def test_sampling_small_layer_row_major():
    layer = LayerSpec(LayerKind.FC, 1, 1, 120, 84)
    res = map_with_sampling_window(TOPO, SIM, layer, 10)
    assert res.phases["row_major_fallback"] == 1
    assert res.task_counts() == map_row_major(list(TOPO.pe_ids), 84).counts


@pytest.mark.parametrize("text,ok", [("row-major", True), ("sampling:10", True),
                                     ("sampling:0", False), ("sampling:x", False),
                                     ("greedy", False)])
def test_parse_strategy(text, ok):
    if ok:
        assert str(parse_strategy(text)) == text
    else:
        with pytest.raises(MappingError):
            parse_strategy(text)
