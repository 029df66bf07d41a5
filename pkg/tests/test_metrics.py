import pytest
from hypothesis import given, strategies as st

from nocmap.metrics import LayerSummary, MetricsError, ModelReport, improvement, unevenness


def test_unevenness_examples():
    r = unevenness([77.88, 60.0, 57.69, 70.1])
    assert r.rho == pytest.approx(0.2592, abs=5e-5)
    assert (r.t_max, r.t_min) == (77.88, 57.69)
    assert unevenness([5, 5, 5]).rho == 0
    assert unevenness({0: 100, 1: 50}).rho == 0.5


def test_unevenness_errors():
    with pytest.raises(MetricsError):
        unevenness([3])
    with pytest.raises(MetricsError):
        unevenness([3, 0])


@given(st.lists(st.floats(0.01, 1e6), min_size=2, max_size=20))
def test_unevenness_bounds(vals):
    assert 0 <= unevenness(vals).rho < 1


def test_improvement():
    assert improvement(1000, 900) == 10.0
    assert improvement(500, 500) == 0
    with pytest.raises(MetricsError):
        improvement(0, 1)


def summary(layer, strategy, makespan):
    return LayerSummary("s", layer, strategy, {0: 1.0, 1: 2.0}, {0: 1.0, 1: 2.0}, makespan, 0.5)


def test_report_totals():
    rep = ModelReport()
    for layer, (a, b) in {"L1": (100, 90), "L2": (50, 45)}.items():
        rep.add(summary(layer, "row-major", a))
        rep.add(summary(layer, "post-run", b))
    rep.fill_improvements()
    assert rep.total("s", "row-major") == 150
    assert rep.total_improvement("s", "post-run") == pytest.approx(10.0)
    assert rep.get("s", "L1", "post-run").improvement_pct == pytest.approx(10.0)
    assert rep.totals()[0] == ("s", "row-major", 150, 0.0)
