"""Experiment drivers: Bloch-Siegert scan, averaging order, drift, Allan deviation."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import reconstruct, rhs_averaged, rhs_standard, slow_from_fast
from .errors import GridTooCoarse, InsufficientData, InvalidParams
from .integrate import DEFAULT_DT, Trajectory, integrate
from .model import (ModelParams, SlowState, bloch_siegert_delta, check_amplitude,
                    effective_detuning, resonance_frequency_decomposition)
from .stationary import (frequency_series, period_average, stationary_general,
                         stationary_values)

DEFAULT_EPSILONS = (4e-3, 2e-3, 1e-3, 5e-4)
DEFAULT_CONVERGENCE_OFFSET = (0.2, -0.2, 0.5)


@dataclass
class ScanResult:
    """One record of named measurements per grid value of a swept parameter."""

    axis_name: str
    axis_values: list
    records: list
    meta: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.records) != len(self.axis_values):
            raise ValueError("one record per grid value is required")
        steps = np.diff(np.asarray(self.axis_values, dtype=float))
        if len(steps) and not (np.all(steps > 0) or np.all(steps < 0)):
            raise ValueError(f"grid for {self.axis_name!r} must be strictly monotone")

    def column(self, name) -> np.ndarray:
        return np.array([r[name] for r in self.records], dtype=float)

    def to_json_dict(self) -> dict:
        return {
            "axis": {"name": self.axis_name, "values": list(self.axis_values)},
            "records": self.records,
            "meta": self.meta,
            "summary": self.summary,
        }


def worker_count(workers=None) -> int:
    """Resolve a worker count; ``None`` reads ``DRIFT_LAB_THREADS`` (0 = auto)."""
    if workers is None:
        raw = os.environ.get("DRIFT_LAB_THREADS", "1")
        try:
            workers = int(raw)
        except ValueError:
            raise InvalidParams(f"DRIFT_LAB_THREADS must be an integer, got {raw!r}")
    if workers < 0:
        raise InvalidParams("worker count must be >= 0")
    if workers == 0:
        workers = os.cpu_count() or 1
    return workers


def _map(fn, items, workers):
    # results come back in submission order, so merges are deterministic
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


# --------------------------------------------------------------------------
# Bloch-Siegert shift
# --------------------------------------------------------------------------

def default_delta_grid(params: ModelParams, points=64):
    shift = bloch_siegert_delta(params)
    if shift <= 0:
        raise InvalidParams("omega1 must be positive for a Bloch-Siegert scan")
    return list(np.linspace(-4.0 * shift, 6.0 * shift, points))


def parabola_vertex(x, y):
    """Abscissa of the vertex of the parabola through three points."""
    (x0, x1, x2), (y0, y1, y2) = x, y
    num = (x1 - x0) ** 2 * (y1 - y2) - (x1 - x2) ** 2 * (y1 - y0)
    den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0)
    return x1 - 0.5 * num / den


def steady_amplitude(params: ModelParams, horizon=15.0, dt=DEFAULT_DT):
    """Period-averaged amplitude after integrating the full system to steady state.

    Starts at half the stationary amplitude so the approach is a genuine
    relaxation, runs ``horizon/epsilon`` and averages ``a`` over the final
    drive period.
    """
    a_s, z_s, theta_s = stationary_values(params)
    traj = integrate(lambda t, y: rhs_standard(t, y, params), (0.5 * a_s, z_s, theta_s),
                     0.0, horizon / params.epsilon, dt, label="standard")
    avg = period_average(traj.samples[:, 0], traj.dt)
    valid = avg[~np.isnan(avg)]
    return float(valid[-1])


def bloch_siegert_scan(params: ModelParams, delta_grid=None, validate=False,
                       dt=DEFAULT_DT) -> ScanResult:
    """Locate the detuning of maximal stationary amplitude.

    The amplitude is evaluated in closed form on the grid and the maximum is
    refined by a parabola through the three highest points.  The expected
    location is ``epsilon*omega1**2/4``.

    Above saturation (``omega1**2 > gamma1*gamma2``) the amplitude has a
    local minimum at the shifted resonance, flanked by two power-broadened
    peaks, so the scan is rejected with :class:`InvalidParams`.
    """
    if params.omega1 ** 2 > params.gamma1 * params.gamma2 * (1.0 + 1e-12):
        raise InvalidParams(
            "omega1**2 > gamma1*gamma2: the stationary amplitude is not maximal "
            "at the shifted resonance, so its location cannot measure the shift")
    if delta_grid is None:
        delta_grid = default_delta_grid(params)
    grid = [float(d) for d in delta_grid]
    if len(grid) < 3:
        raise GridTooCoarse("a scan needs at least three grid points")
    records = []
    for d in grid:
        a_s, z_s, theta_s = stationary_values(params.replace(delta=d))
        records.append({"a_s": a_s, "z_s": z_s, "theta_s": theta_s})
    amps = np.array([r["a_s"] for r in records])
    k = int(np.argmax(amps))
    if k == 0 or k == len(grid) - 1:
        raise GridTooCoarse(f"amplitude maximum at grid boundary delta={grid[k]}")
    delta_star = parabola_vertex(grid[k - 1:k + 2], amps[k - 1:k + 2])
    expected = bloch_siegert_delta(params)
    summary = {
        "delta_star": delta_star,
        "expected_shift": expected,
        "relative_error": abs(delta_star - expected) / expected,
        "grid_spacing": float(np.max(np.abs(np.diff(grid)))),
    }
    if validate:
        p_peak = params.replace(delta=grid[k])
        measured = steady_amplitude(p_peak, dt=dt)
        summary["validation"] = {
            "delta": grid[k],
            "integrated_amplitude": measured,
            "closed_form_amplitude": float(amps[k]),
            "relative_difference": abs(measured - amps[k]) / amps[k],
        }
    return ScanResult("delta", grid, records,
                      meta={"params": params.as_dict(), "dt": dt}, summary=summary)


# --------------------------------------------------------------------------
# Averaging order
# --------------------------------------------------------------------------

def _convergence_point(job):
    params, initial, horizon, dt, g1_sign = job
    t_end = horizon / params.epsilon
    full = integrate(lambda t, y: rhs_standard(t, y, params), initial, 0.0, t_end, dt,
                     label="standard")
    averaged = lambda t, y: rhs_averaged(y, params)
    bare = integrate(averaged, initial, 0.0, t_end, dt, label="averaged")
    y0 = slow_from_fast(initial, 0.0, params, g1_sign)
    slow = integrate(averaged, y0, 0.0, t_end, dt, label="averaged")
    rec = np.array([reconstruct(s, t, params, g1_sign)
                    for s, t in zip(slow.samples, slow.times)])
    err_bare = np.linalg.norm(full.samples - bare.samples, axis=1).max()
    err_rec = np.linalg.norm(full.samples - rec, axis=1).max()
    return {"err_bare": float(err_bare), "err_first_order": float(err_rec)}


def loglog_slope(x, y):
    """Least-squares slope of ``log y`` against ``log x``; ``None`` if any y is 0."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        return None
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def averaging_convergence(params: ModelParams, epsilon_grid=DEFAULT_EPSILONS,
                          horizon=5.0, initial=None, g1_sign="derived",
                          dt=DEFAULT_DT, workers=1) -> ScanResult:
    """Sup-error of the averaged approximations against the full system.

    For each ``epsilon`` the standard-form system is integrated to
    ``horizon/epsilon`` and compared with (i) the drift equations started
    from the same state and (ii) the first-order reconstruction started from
    the matching drift state.  ``initial`` defaults to the stationary point
    of ``params`` displaced by ``DEFAULT_CONVERGENCE_OFFSET``.
    """
    grid = [float(e) for e in epsilon_grid]
    if len(grid) < 2:
        raise InvalidParams("epsilon_grid needs at least two levels")
    ratios = np.array(grid[1:]) / np.array(grid[:-1])
    if not np.allclose(ratios, ratios[0], rtol=1e-9):
        raise InvalidParams("epsilon_grid must be geometric")
    if initial is None:
        base = stationary_values(params)
        initial = tuple(b + o for b, o in zip(base, DEFAULT_CONVERGENCE_OFFSET))
    initial = tuple(float(v) for v in initial)
    check_amplitude(initial[0])
    jobs = [(params.replace(epsilon=e), initial, horizon, dt, g1_sign) for e in grid]
    records = _map(_convergence_point, jobs, worker_count(workers))
    for e, r in zip(grid, records):
        r["epsilon"] = e
    slope_bare = loglog_slope(grid, [r["err_bare"] for r in records])
    slope_rec = loglog_slope(grid, [r["err_first_order"] for r in records])
    return ScanResult(
        "epsilon", grid, records,
        meta={"params": params.as_dict(), "dt": dt, "horizon": horizon,
              "initial": list(initial), "g1_sign": g1_sign},
        summary={"slope_bare": slope_bare, "slope_first_order": slope_rec},
    )


# --------------------------------------------------------------------------
# First-order drift
# --------------------------------------------------------------------------

@dataclass
class DriftResult:
    """Outcome of :func:`drift_experiment`.

    ``deviation`` is the period-averaged rate of the field-minus-atom phase
    minus the corrected detuning, i.e. the measured counterpart of
    ``resonance_frequency_decomposition``'s first term.  It is ``NaN`` for
    the half period at each end where the averaging window does not fit.
    """

    params: ModelParams
    trajectory: Trajectory
    times: np.ndarray
    frequency: np.ndarray
    slow_frequency: np.ndarray
    deviation: np.ndarray
    initial_deviation: float
    predicted_deviation: float
    relaxation_time: float

    @property
    def summary(self) -> dict:
        rel = abs(self.initial_deviation - self.predicted_deviation) \
            / abs(self.predicted_deviation) if self.predicted_deviation else None
        return {
            "params": self.params.as_dict(),
            "initial_state": list(self.trajectory.samples[0]),
            "initial_deviation": self.initial_deviation,
            "predicted_deviation": self.predicted_deviation,
            "relative_error": rel,
            "relaxation_time": self.relaxation_time,
            "final_state": list(self.trajectory.final),
        }


def drift_experiment(params: ModelParams, initial_offset=(0.0, 0.0, 0.0), horizon=20.0,
                     dt=DEFAULT_DT, stride=1) -> DriftResult:
    """Run the full system at zero corrected detuning from an offset stationary state.

    The detuning of ``params`` is replaced by the Bloch-Siegert value.  The
    run starts at ``stationary + initial_offset`` and lasts
    ``horizon/epsilon``.  The relaxation time is the time after which
    ``|deviation|`` stays below ``|initial_deviation|/e`` (``None`` if it
    never does).
    """
    res = params.at_resonance()
    base = stationary_values(res)
    x0 = tuple(b + o for b, o in zip(base, initial_offset))
    check_amplitude(x0[0])
    traj = integrate(lambda t, y: rhs_standard(t, y, res), x0, 0.0, horizon / res.epsilon,
                     dt, stride=stride, label="standard")
    times, inst, slow = frequency_series(traj, res)
    # phase-difference rate 1 - dpsi/dt, minus the (zero) corrected detuning
    deviation = (1.0 - slow) - res.epsilon * effective_detuning(res)
    valid = np.flatnonzero(~np.isnan(deviation))
    initial = float(deviation[valid[0]])
    predicted, _ = resonance_frequency_decomposition(SlowState(*x0), res)
    relaxation = None
    if initial != 0:
        above = np.flatnonzero(np.abs(deviation[valid]) > abs(initial) / math.e)
        if above.size and above[-1] < valid.size - 1:
            relaxation = float(times[valid[above[-1] + 1]])
    return DriftResult(res, traj, times, inst, slow, deviation, initial, predicted,
                       relaxation)


# --------------------------------------------------------------------------
# Allan deviation
# --------------------------------------------------------------------------

def _sample_interval(t):
    t = np.asarray(t, dtype=float)
    if t.size < 2:
        raise InsufficientData("need at least two samples")
    steps = np.diff(t)
    tau0 = float(steps.mean())
    if tau0 <= 0 or np.max(np.abs(steps - tau0)) > 1e-9 * max(tau0, abs(t[-1])):
        raise InvalidParams("frequency series must be uniformly sampled in time")
    return tau0


def default_taus(n_samples, tau0):
    """Octave-spaced averaging times with at least three bins each."""
    taus = []
    m = 1
    while n_samples // m >= 3:
        taus.append(m * tau0)
        m *= 2
    return taus


def allan_deviation(freq_series, taus=None):
    """Non-overlapping two-sample (Allan) deviation.

    Parameters
    ----------
    freq_series : (N, 2) array-like
        Rows of ``(t, y)`` with uniform ``t``.
    taus : sequence of float, optional
        Averaging times, each an integer multiple of the sample interval.
        Defaults to octaves of the sample interval.

    Returns
    -------
    list of (tau, sigma_y)
    """
    data = np.asarray(freq_series, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise ValueError("freq_series must be a sequence of (t, y) pairs")
    t, y = data[:, 0], data[:, 1]
    tau0 = _sample_interval(t)
    if taus is None:
        taus = default_taus(len(y), tau0)
    out = []
    for tau in taus:
        m = int(round(tau / tau0))
        if m < 1 or abs(m * tau0 - tau) > 1e-9 * tau:
            raise InvalidParams(f"tau={tau} is not an integer multiple of {tau0}")
        bins = len(y) // m
        if bins < 3:
            raise InsufficientData(f"tau={tau} leaves {bins} bins; at least 3 are needed")
        means = y[:bins * m].reshape(bins, m).mean(axis=1)
        out.append((float(tau), float(math.sqrt(0.5 * np.mean(np.diff(means) ** 2)))))
    return out


# --------------------------------------------------------------------------
# Resonance conditions
# --------------------------------------------------------------------------

def resonance_condition_report(params: ModelParams, state, tol=1e-12) -> dict:
    """Itemize the resonance conditions at a drift state.

    The phase-difference rate is split into the detuning term ``eps*delta``,
    the Bloch-Siegert term ``-eps**2*omega1**2/4`` and the first-order drift
    term; the sufficient condition is that their sum vanishes.
    """
    s = SlowState(*state)
    drift_term, bs_shift = resonance_frequency_decomposition(s, params)
    eps = params.epsilon
    detuning_term = eps * params.delta
    corrected = effective_detuning(params)
    rate = detuning_term - bs_shift + drift_term
    return {
        "detuning_term": detuning_term,
        "bloch_siegert_term": -bs_shift,
        "drift_term": drift_term,
        "phase_rate": rate,
        "necessary": {"delta": params.delta, "satisfied": abs(params.delta) <= tol},
        "corrected_necessary": {"delta_tilde": corrected,
                                "satisfied": abs(corrected) <= tol},
        "sufficient": {"residual": rate, "satisfied": abs(rate) <= tol},
    }


def stationary_report(params: ModelParams, tol=1e-12) -> dict:
    """Resonance report at the stationary point of ``params``."""
    sp = stationary_general(params)
    return resonance_condition_report(params, sp.state, tol)
