import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from drift_lab.errors import GridTooCoarse, InsufficientData, InvalidParams
from drift_lab.experiments import (ScanResult, allan_deviation, averaging_convergence,
                                   bloch_siegert_scan, default_taus, drift_experiment,
                                   loglog_slope, parabola_vertex, resonance_condition_report,
                                   stationary_report, worker_count)
from drift_lab.model import ModelParams


def brute_allan(y, m):
    """Two-sample deviation straight from the definition, in plain Python."""
    bins = len(y) // m
    means = [sum(y[k * m:(k + 1) * m]) / m for k in range(bins)]
    diffs = [(means[k + 1] - means[k]) ** 2 for k in range(bins - 1)]
    return math.sqrt(0.5 * sum(diffs) / len(diffs))


def series(y, dt=1.0):
    return np.column_stack([np.arange(len(y)) * dt, y])


# -------------------------------------------------------------- Bloch-Siegert

@pytest.mark.parametrize("w1", [0.25, 0.5, 1.0])
def test_bloch_siegert_location(w1):
    p = ModelParams(1.0, 1.0, 1.0, w1, 0.01)
    result = bloch_siegert_scan(p)
    expected = 0.01 * w1 ** 2 / 4
    assert result.summary["expected_shift"] == pytest.approx(expected)
    assert result.summary["delta_star"] == pytest.approx(expected, rel=0.05)


def test_bloch_siegert_quadratic_and_linear_laws():
    shift = lambda w1, eps: bloch_siegert_scan(
        ModelParams(2.0, 2.5, 1.0, w1, eps)).summary["delta_star"]
    assert 3.8 <= shift(1.0, 0.01) / shift(0.5, 0.01) <= 4.2
    assert 3.8 <= shift(2.0, 0.01) / shift(1.0, 0.01) <= 4.2
    ratios = [shift(1.0, e) / e for e in (0.02, 0.01, 0.005, 0.0025)]
    assert np.ptp(ratios) < 0.05 * np.mean(ratios)


def test_bloch_siegert_rejects_oversaturated_field():
    with pytest.raises(InvalidParams):
        bloch_siegert_scan(ModelParams(1.0, 1.0, 1.0, 1.5, 0.01))


def test_bloch_siegert_grid_must_bracket_maximum():
    p = ModelParams(1.0, 1.0, 1.0, 1.0, 0.01)
    with pytest.raises(GridTooCoarse):
        bloch_siegert_scan(p, np.linspace(0.01, 0.02, 11))
    with pytest.raises(GridTooCoarse):
        bloch_siegert_scan(p, [0.0, 0.01])


def test_bloch_siegert_validation_by_integration():
    p = ModelParams(1.0, 1.0, 1.0, 1.0, 0.01)
    result = bloch_siegert_scan(p, validate=True)
    val = result.summary["validation"]
    assert val["relative_difference"] < 0.05
    assert len(result.records) == 64


def test_parabola_vertex_exact():
    x = [0.0, 1.0, 3.0]
    y = [-(v - 1.3) ** 2 + 2 for v in x]
    assert parabola_vertex(x, y) == pytest.approx(1.3)


# -------------------------------------------------------------- averaging

def test_convergence_orders_small_grid():
    p = ModelParams(1.0, 1.0, 1.0, 1.0, 0.01).at_resonance()
    result = averaging_convergence(p, (0.02, 0.01, 0.005), horizon=2.0)
    assert 0.7 <= result.summary["slope_bare"] <= 1.3
    assert 1.7 <= result.summary["slope_first_order"] <= 2.3
    errs = result.column("err_first_order")
    assert np.all(np.diff(errs) < 0)


def test_convergence_printed_sign_drops_an_order():
    p = ModelParams(1.0, 1.0, 1.0, 1.0, 0.01).at_resonance()
    result = averaging_convergence(p, (0.02, 0.01, 0.005), horizon=2.0, g1_sign="reversed")
    assert result.summary["slope_first_order"] < 1.3


def test_convergence_without_field_hits_floor():
    p = ModelParams(1.0, 1.0, 1.0, 0.0, 0.01)
    result = averaging_convergence(p, (0.02, 0.01), horizon=1.0, initial=(0.5, 0.2, 0.3))
    assert max(result.column("err_bare")) < 1e-13
    assert max(result.column("err_first_order")) < 1e-13


def test_convergence_grid_checks():
    p = ModelParams(1.0, 1.0, 1.0, 1.0, 0.01)
    with pytest.raises(InvalidParams):
        averaging_convergence(p, (0.02, 0.01, 0.004))
    with pytest.raises(InvalidParams):
        averaging_convergence(p, (0.02,))


def test_loglog_slope():
    assert loglog_slope([1, 2, 4], [3, 12, 48]) == pytest.approx(2.0)
    assert loglog_slope([1, 2], [0.0, 1.0]) is None


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("DRIFT_LAB_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("DRIFT_LAB_THREADS", "0")
    assert worker_count() >= 1
    monkeypatch.setenv("DRIFT_LAB_THREADS", "many")
    with pytest.raises(InvalidParams):
        worker_count()


def test_parallel_convergence_matches_serial():
    p = ModelParams(1.0, 1.0, 1.0, 1.0, 0.01).at_resonance()
    a = averaging_convergence(p, (0.04, 0.02), horizon=1.0, workers=1)
    b = averaging_convergence(p, (0.04, 0.02), horizon=1.0, workers=2)
    assert a.records == b.records


# -------------------------------------------------------------- drift

def test_drift_zero_offset_has_no_first_order_drift():
    p = ModelParams(1.0, 1.0, 1.0, 1.0, 1e-3)
    result = drift_experiment(p, (0.0, 0.0, 0.0), horizon=2.0)
    dev = result.deviation[~np.isnan(result.deviation)]
    assert np.max(np.abs(dev)) < 2 * p.epsilon ** 2
    assert result.predicted_deviation == pytest.approx(0.0, abs=1e-18)


@pytest.mark.parametrize("offset", [0.05, 0.1, 0.2])
def test_drift_sign_and_antisymmetry(offset):
    p = ModelParams(1.0, 1.0, 1.0, 1.0, 1e-3)
    up = drift_experiment(p, (0.0, 0.0, offset), horizon=0.5).initial_deviation
    down = drift_experiment(p, (0.0, 0.0, -offset), horizon=0.5).initial_deviation
    assert up < 0 < down
    assert abs(up + down) < 0.05 * abs(up)
    assert up == pytest.approx(-p.epsilon * math.sin(offset), rel=0.1)


def test_drift_relaxes():
    p = ModelParams(1.0, 1.0, 1.0, 1.0, 0.01)
    result = drift_experiment(p, (0.0, 0.0, 0.1), horizon=10.0)
    assert result.relaxation_time is not None
    # linearized decay rate is epsilon per unit time
    assert 0.3 / p.epsilon < result.relaxation_time < 3.0 / p.epsilon
    summary = result.summary
    assert summary["relative_error"] < 0.2
    assert summary["params"]["delta"] == pytest.approx(p.epsilon / 4)


# -------------------------------------------------------------- Allan

def test_allan_constant_series():
    out = allan_deviation(series(np.full(64, 3.7)))
    assert [sigma for _, sigma in out] == [0.0] * len(out)
    assert [tau for tau, _ in out] == [1, 2, 4, 8, 16]


def test_allan_alternating_series():
    out = allan_deviation(series([0, 1] * 16), [1.0])
    assert out[0][1] == pytest.approx(1 / math.sqrt(2), abs=1e-15)


@pytest.mark.parametrize("m", [1, 2, 5, 10])
def test_allan_ramp(m):
    c, dt = 0.3, 0.5
    t = np.arange(200) * dt
    out = allan_deviation(np.column_stack([t, c * t]), [m * dt])
    assert out[0][1] == pytest.approx(c * m * dt / math.sqrt(2), rel=1e-12)


@given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=64), st.integers(1, 8))
def test_allan_matches_brute_force(y, m):
    if len(y) // m < 3:
        with pytest.raises(InsufficientData):
            allan_deviation(series(y), [float(m)])
        return
    got = allan_deviation(series(y), [float(m)])[0][1]
    want = brute_allan(y, m)
    assert abs(got - want) <= 1e-14 * max(1.0, want) * max(1.0, max(map(abs, y)))


def test_allan_errors():
    with pytest.raises(InvalidParams):
        allan_deviation(series(np.ones(30), 0.1), [0.15])
    with pytest.raises(InvalidParams):
        allan_deviation(np.column_stack([[0, 1, 3, 4], [1, 1, 1, 1]]), [1.0])
    with pytest.raises(InsufficientData):
        allan_deviation(series([1.0]))
    with pytest.raises(ValueError):
        allan_deviation(np.ones((5, 3)))
    assert default_taus(5, 0.5) == [0.5]


# -------------------------------------------------------------- reports

def test_report_zero_detuning_still_drifts():
    p = ModelParams(1.0, 1.0, 1.0, 1.0, 0.01, 0.0)
    rep = resonance_condition_report(p, (0.5, 0.5, 0.0))
    assert rep["necessary"]["satisfied"]
    assert not rep["sufficient"]["satisfied"]
    assert rep["drift_term"] == pytest.approx(-0.01)
    assert rep["phase_rate"] == pytest.approx(-0.01 - 0.01 ** 2 / 4)


def test_report_at_shifted_quadrature():
    p = ModelParams(1.0, 1.0, 1.0, 1.0, 0.01).at_resonance()
    rep = resonance_condition_report(p, (0.5, 0.5, -math.pi / 2))
    assert rep["sufficient"]["satisfied"]
    assert rep["corrected_necessary"]["satisfied"]
    assert not rep["necessary"]["satisfied"]


def test_stationary_report(p0):
    rep = stationary_report(p0)
    assert abs(rep["sufficient"]["residual"]) < 1e-12
    assert rep["corrected_necessary"]["satisfied"]
    detuned = stationary_report(p0.replace(delta=0.7))
    assert abs(detuned["sufficient"]["residual"]) < 1e-12


def test_scan_result_invariants():
    ScanResult("x", [1, 2, 3], [{}, {}, {}])
    ScanResult("x", [3, 2, 1], [{}, {}, {}])
    with pytest.raises(ValueError):
        ScanResult("x", [1, 1, 2], [{}, {}, {}])
    with pytest.raises(ValueError):
        ScanResult("x", [1, 2], [{}])
    d = ScanResult("x", [1, 2], [{"v": 1}, {"v": 2}]).to_json_dict()
    assert d["axis"] == {"name": "x", "values": [1, 2]}
