"""Stationary regimes of the drift equations and their linear stability."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import reconstruct, rhs_standard
from .errors import InvalidParams
from .integrate import DEFAULT_DT, integrate
from .model import A_MIN, ModelParams, SlowState, check_amplitude, effective_detuning

STABILITY_TOL = 1e-12

#: Default basin-probe horizon in slow-time units.
DEFAULT_HORIZON = 20.0


@dataclass
class StationaryPoint:
    a_s: float
    z_s: float
    theta_s: float
    eigenvalues: tuple
    stable: bool
    margin: float
    saturation_values: dict = field(default=None)
    saturation_relative_deviation: dict = field(default=None)

    @property
    def state(self) -> SlowState:
        return SlowState(self.a_s, self.z_s, self.theta_s)

    def to_json_dict(self) -> dict:
        return {
            "a_s": self.a_s,
            "z_s": self.z_s,
            "theta_s": self.theta_s,
            "eigenvalues": [[ev.real, ev.imag] for ev in self.eigenvalues],
            "stable": self.stable,
            "margin": self.margin,
            "saturation_values": self.saturation_values,
            "saturation_relative_deviation": self.saturation_relative_deviation,
        }


def _check_params(params: ModelParams):
    if params.lam == 0:
        raise InvalidParams("lambda must be non-zero for a stationary regime")
    if not params.gamma1 > 0:
        raise InvalidParams("gamma1 must be positive for a stationary regime")
    if not params.gamma2 > 0:
        raise InvalidParams("gamma2 must be positive for a stationary regime")
    if not params.omega1 > 0:
        raise InvalidParams("omega1 must be positive for a stationary regime")


def stationary_values(params: ModelParams):
    """Closed-form fixed point ``(a_s, z_s, theta_s)`` of the drift equations.

    For ``lambda > 0`` the phase lies on the branch ``(-pi, 0)``.  For
    ``lambda < 0`` the same formulas give a negative amplitude; it is
    reported as ``-a_s`` with the phase moved by ``pi`` into ``(0, pi)``,
    which is the same point of the polar chart.
    """
    _check_params(params)
    g1, g2, w1 = params.gamma1, params.gamma2, params.omega1
    dt = effective_detuning(params)
    # arccot(x) = atan2(1, x) on (0, pi)
    theta = -math.atan2(g1, dt)
    z = params.lam / (g2 + g1 * w1 * w1 / (g1 * g1 + dt * dt))
    a = -(w1 / g1) * z * math.sin(theta)
    if a < 0:
        a = -a
        theta += math.pi
    return a, z, theta


def jacobian_averaged(s, params: ModelParams) -> np.ndarray:
    """Partial derivatives of the drift equations per slow time ``eps*t``."""
    a, z, theta = s
    check_amplitude(a)
    g1, g2, w1 = params.gamma1, params.gamma2, params.omega1
    sn, cs = math.sin(theta), math.cos(theta)
    return np.array([
        [-g1, -w1 * sn, -w1 * z * cs],
        [w1 * sn, -g2, w1 * a * cs],
        [w1 * z * cs / (a * a), -w1 * cs / a, w1 * z * sn / a],
    ])


def _poly_coefficients(m):
    """Monic characteristic cubic ``x^3 + b x^2 + c x + d``."""
    m = np.asarray(m, dtype=float)
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    minors = (m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
              + m[0, 0] * m[2, 2] - m[0, 2] * m[2, 0]
              + m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
    det = (m[0, 0] * (m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
           - m[0, 1] * (m[1, 0] * m[2, 2] - m[1, 2] * m[2, 0])
           + m[0, 2] * (m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0]))
    return -tr, minors, -det


def characteristic_polynomial(m, x):
    b, c, d = _poly_coefficients(m)
    return ((x + b) * x + c) * x + d


def _newton_polish(x, b, c, d):
    f = ((x + b) * x + c) * x + d
    fp = (3.0 * x + 2.0 * b) * x + c
    if fp == 0:
        return x
    x_new = x - f / fp
    if abs(((x_new + b) * x_new + c) * x_new + d) < abs(f):
        return x_new
    return x


def eigenvalues_3x3(m):
    """Eigenvalues of a real 3x3 matrix from its characteristic cubic.

    The cubic is depressed and solved by Cardano's formula when it has a
    complex pair and by the trigonometric form when all roots are real.
    Roots get one Newton polish and are sorted by real part, descending;
    equal real parts list the complex pair first.
    """
    b, c, d = _poly_coefficients(m)
    shift = -b / 3.0
    p = c - b * b / 3.0
    q = 2.0 * b ** 3 / 27.0 - b * c / 3.0 + d
    scale = max(abs(b), abs(c) ** 0.5, abs(d) ** (1.0 / 3.0), 1e-300)
    if abs(p) <= 1e-15 * scale ** 2 and abs(q) <= 1e-15 * scale ** 3:
        roots = [complex(shift)] * 3
    else:
        disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
        if disc > 0:
            sq = math.sqrt(disc)
            # pick the sign that avoids cancellation, then v from u*v = -p/3
            u = float(np.cbrt(-q / 2.0 - math.copysign(sq, q)))
            v = -p / (3.0 * u) if u != 0 else 0.0
            real = u + v
            imag = math.sqrt(3.0) / 2.0 * (u - v)
            roots = [complex(shift + real),
                     complex(shift - real / 2.0, imag),
                     complex(shift - real / 2.0, -imag)]
        elif p * math.sqrt(max(-p, 0.0) / 3.0) == 0.0:
            # p underflowed; with disc <= 0 this forces q == 0 as well
            roots = [complex(shift)] * 3
        else:
            r = 2.0 * math.sqrt(-p / 3.0)
            arg = 3.0 * q / (p * r)
            phi = math.acos(max(-1.0, min(1.0, arg))) / 3.0
            roots = [complex(shift + r * math.cos(phi - 2.0 * math.pi * k / 3.0))
                     for k in range(3)]
    if roots[1].imag != 0.0:
        polished = [_newton_polish(roots[0], b, c, d), _newton_polish(roots[1], b, c, d)]
        polished.append(polished[1].conjugate())
    else:
        polished = [_newton_polish(x, b, c, d) for x in roots]
    # ties in the real part (up to round-off) put the complex pair first
    return tuple(sorted(polished, key=lambda x: (-round(x.real, 12), -abs(x.imag), -x.imag)))


def classify_stability(eigenvalues, tol=STABILITY_TOL):
    """``(stable, margin)`` with ``stable`` iff every real part is below ``-tol``."""
    max_re = max(ev.real for ev in eigenvalues)
    return max_re < -tol, -max_re


def _build_point(a, z, theta, params):
    evs = eigenvalues_3x3(jacobian_averaged((a, z, theta), params))
    stable, margin = classify_stability(evs)
    return StationaryPoint(a, z, theta, evs, stable, margin)


def stationary_general(params: ModelParams) -> StationaryPoint:
    a, z, theta = stationary_values(params)
    return _build_point(a, z, theta, params)


def stationary_resonance(params: ModelParams) -> StationaryPoint:
    """Stationary point with the detuning placed on the shifted resonance.

    Besides the general-formula values, reports the saturation values
    ``lambda/(2*gamma2)`` and ``lambda/(2*sqrt(gamma1*gamma2))`` and the
    relative deviation of the computed values from them; the two agree only
    when ``omega1**2 == gamma1*gamma2``.
    """
    res = params.at_resonance()
    sp = stationary_general(res)
    z_ref = params.lam / (2.0 * params.gamma2)
    a_ref = abs(params.lam) / (2.0 * math.sqrt(params.gamma1 * params.gamma2))
    theta_ref = -math.pi / 2.0 if params.lam > 0 else math.pi / 2.0
    sp.saturation_values = {"a_s": a_ref, "z_s": z_ref, "theta_s": theta_ref}
    sp.saturation_relative_deviation = {
        "a_s": abs(sp.a_s - a_ref) / abs(a_ref),
        "z_s": abs(sp.z_s - z_ref) / abs(z_ref),
        "theta_s": abs(sp.theta_s - theta_ref) / abs(theta_ref),
    }
    return sp


def _wrap(angle):
    return (angle + np.pi) % (2.0 * np.pi) - np.pi


def period_average(values, dt):
    """Centered moving average of a sampled series over one drive period.

    Uses trapezoid weights over ``round(2*pi/dt)`` intervals; the result is
    defined only where the window fits, and ``NaN`` elsewhere.
    """
    values = np.asarray(values, dtype=float)
    n = int(round(2.0 * math.pi / dt))
    if abs(n * dt - 2.0 * math.pi) > 1e-9 * 2.0 * math.pi:
        raise ValueError("dt must divide the drive period for period averaging")
    out = np.full(values.shape, np.nan)
    if len(values) <= n:
        return out
    ref = values[0]
    centred = values - ref
    csum = np.concatenate(([0.0], np.cumsum(centred)))
    # window [k, k+n] inclusive, ends weighted by 1/2
    k = np.arange(len(values) - n)
    inner = csum[k + n + 1] - csum[k]
    avg = ref + (inner - 0.5 * centred[k] - 0.5 * centred[k + n]) / n
    # odd n puts the centre between samples; it is assigned to the left one
    out[k + n // 2] = avg
    return out


def frequency_series(traj, params: ModelParams):
    """Instantaneous and period-averaged atomic frequency of a standard-chart run."""
    times = traj.times
    a, z, theta = traj.samples.T
    if np.any(a <= A_MIN):
        check_amplitude(float(a.min()))
    # vectorised form of dynamics.instantaneous_frequency with psi = t - theta
    inst = params.nu + params.epsilon * (2.0 * params.omega1 * z / a) * np.cos(times) \
        * np.cos(times - theta)
    return times, inst, period_average(inst, traj.dt)


def basin_probe(params: ModelParams, offsets, horizon=DEFAULT_HORIZON, dt=DEFAULT_DT):
    """Integrate the full standard-form system from offsets around the fixed point.

    For each ``(da, dz, dtheta)`` the run starts at the stationary point
    plus the offset and lasts ``horizon/epsilon``.  The recorded frequency
    deviation is the period-averaged atomic frequency minus ``nu``; the
    instantaneous one carries an order-``epsilon`` ripple at twice the drive
    frequency even in the stationary regime.  The transient duration is the
    time after which the state stays within ``epsilon`` of the stationary
    point (``None`` if it never settles).
    """
    from .experiments import ScanResult

    sp = stationary_general(params)
    eps = params.epsilon
    t_end = horizon / eps
    records = []
    for da, dz, dth in offsets:
        x0 = (sp.a_s + da, sp.z_s + dz, sp.theta_s + dth)
        traj = integrate(lambda t, y: rhs_standard(t, y, params), x0, 0.0, t_end, dt,
                         label="standard")
        times, _, slow = frequency_series(traj, params)
        valid = ~np.isnan(slow)
        dev = np.abs(slow[valid] - params.nu)
        diff = traj.samples - np.array([sp.a_s, sp.z_s, sp.theta_s])
        diff[:, 2] = _wrap(diff[:, 2])
        dist = np.linalg.norm(diff, axis=1)
        outside = np.flatnonzero(dist > eps)
        if outside.size == 0:
            transient = 0.0
        elif outside[-1] == len(dist) - 1:
            transient = None
        else:
            transient = float(times[outside[-1] + 1])
        records.append({
            "offset_a": float(da),
            "offset_z": float(dz),
            "offset_theta": float(dth),
            "initial_freq_dev": float(dev[0]),
            "peak_freq_dev": float(dev.max()),
            "mean_freq_dev": float(dev.mean()),
            "terminal_distance": float(dist[-1]),
            "transient_duration": transient,
        })
    return ScanResult(
        axis_name="offset_index",
        axis_values=list(range(len(records))),
        records=records,
        meta={"params": params.as_dict(), "dt": dt, "horizon": horizon,
              "stationary": sp.to_json_dict()},
    )


def reconstructed_stationary_start(params: ModelParams, t0=0.0, g1_sign="derived"):
    """Fast-variable state on the stationary orbit at ``t0`` (first order)."""
    sp = stationary_general(params)
    return reconstruct(sp.state, t0, params, g1_sign)
