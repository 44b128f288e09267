"""Right-hand sides of the driven two-level system in its four charts.

The drive is ``cos(t)`` with ``t`` the dimensionless drive phase.  All
derivatives are returned as plain 3-tuples of floats so the integrator's
inner loop avoids small-array overhead.
"""

from __future__ import annotations

import math
from typing import Callable, NamedTuple

import numpy as np

from .errors import NumericalError
from .model import ModelParams, SlowState, check_amplitude

#: Valid values of the ``g1_sign`` switch.
G1_SIGNS = ("derived", "reversed")

SYSTEMS = ("full", "polar", "standard", "averaged")


class CorrectionTriple(NamedTuple):
    u1: float
    v1: float
    g1: float


def rhs_full(t, b, params: ModelParams):
    r1, r2, r3 = b
    eps = params.epsilon
    nu = 1.0 - eps * params.delta
    drive = 2.0 * eps * params.omega1 * math.cos(t)
    g1 = eps * params.gamma1
    return (
        -g1 * r1 - nu * r2,
        -g1 * r2 + nu * r1 + drive * r3,
        eps * params.lam - eps * params.gamma2 * r3 - drive * r2,
    )


def full_system_matrix(t, params: ModelParams):
    """Affine form of :func:`rhs_full` as ``(A(t), b)`` with ``dR/dt = A R + b``."""
    eps = params.epsilon
    nu = params.nu
    drive = 2.0 * eps * params.omega1 * math.cos(t)
    g1 = eps * params.gamma1
    a = np.array([
        [-g1, -nu, 0.0],
        [nu, -g1, drive],
        [0.0, -drive, -eps * params.gamma2],
    ])
    b = np.array([0.0, 0.0, eps * params.lam])
    return a, b


def rhs_polar(t, p, params: ModelParams):
    a, z, psi = p
    check_amplitude(a)
    eps = params.epsilon
    drive = 2.0 * eps * params.omega1 * math.cos(t)
    s = math.sin(psi)
    return (
        -eps * params.gamma1 * a + drive * z * s,
        eps * params.lam - eps * params.gamma2 * z - drive * a * s,
        1.0 - eps * params.delta + drive * (z / a) * math.cos(psi),
    )


def rhs_standard(t, s, params: ModelParams):
    """Equations in the standard form, slow phase ``theta = t - psi``."""
    a, z, theta = s
    check_amplitude(a)
    eps = params.epsilon
    w1 = params.omega1
    sin_th = math.sin(theta)
    fast = 2.0 * t - theta
    sin_f = math.sin(fast)
    ratio = w1 * z / a
    return (
        eps * (-params.gamma1 * a - w1 * z * sin_th + w1 * z * sin_f),
        eps * (params.lam - params.gamma2 * z + w1 * a * sin_th - w1 * a * sin_f),
        eps * (params.delta - ratio * math.cos(theta) - ratio * math.cos(fast)),
    )


def rhs_averaged(s, params: ModelParams):
    """Drift equations, including the second-order Bloch-Siegert phase term."""
    a, z, theta = s
    check_amplitude(a)
    eps = params.epsilon
    w1 = params.omega1
    sin_th = math.sin(theta)
    return (
        eps * (-params.gamma1 * a - w1 * z * sin_th),
        eps * (params.lam - params.gamma2 * z + w1 * a * sin_th),
        eps * (params.delta - eps * w1 * w1 / 4.0) - eps * (w1 * z / a) * math.cos(theta),
    )


def _check_g1_sign(g1_sign):
    if g1_sign not in G1_SIGNS:
        raise ValueError(f"g1_sign must be one of {G1_SIGNS}, got {g1_sign!r}")


def corrections(s, t, params: ModelParams, g1_sign: str = "derived") -> CorrectionTriple:
    """First-order oscillating corrections at frozen slow variables.

    ``g1_sign="derived"`` uses the sign that integrates the oscillating part
    of the phase equation; ``"reversed"`` uses the opposite one.
    """
    _check_g1_sign(g1_sign)
    a, z, theta = s
    check_amplitude(a)
    w1 = params.omega1
    fast = 2.0 * t - theta
    c = math.cos(fast)
    g1 = (w1 * z / (2.0 * a)) * math.sin(fast)
    if g1_sign == "derived":
        g1 = -g1
    return CorrectionTriple(-0.5 * w1 * z * c, 0.5 * w1 * a * c, g1)


def reconstruct(s, t, params: ModelParams, g1_sign: str = "derived"):
    """Fast variables ``(a, z, theta)`` from drift variables to first order."""
    u1, v1, g1 = corrections(s, t, params, g1_sign)
    eps = params.epsilon
    return (s[0] + eps * u1, s[1] + eps * v1, s[2] + eps * g1)


def slow_from_fast(x, t, params: ModelParams, g1_sign: str = "derived",
                   tol: float = 1e-15, max_iter: int = 50) -> SlowState:
    """Invert :func:`reconstruct` by fixed-point iteration.

    The map contracts with a factor of order ``eps*omega1*|z|/a**2``, so a
    handful of iterations reach round-off when that is small.  Raises
    :class:`NumericalError` if the iteration has not settled after
    ``max_iter`` steps.
    """
    y = tuple(x)
    eps = params.epsilon
    for _ in range(max_iter):
        u1, v1, g1 = corrections(y, t, params, g1_sign)
        new = (x[0] - eps * u1, x[1] - eps * v1, x[2] - eps * g1)
        step = max(abs(n - o) for n, o in zip(new, y))
        y = new
        if step <= tol * max(1.0, *map(abs, y)):
            return SlowState(*y)
    raise NumericalError(
        f"slow_from_fast did not converge in {max_iter} iterations at {tuple(x)}; "
        "the correction is too large relative to the amplitude")


def instantaneous_frequency(t, p, params: ModelParams) -> float:
    """Exact atomic frequency ``d psi/dt`` in units of the drive frequency."""
    a, z, psi = p
    check_amplitude(a)
    eps = params.epsilon
    return params.nu + eps * (2.0 * params.omega1 * z / a) * math.cos(t) * math.cos(psi)


def system_rhs(system: str, params: ModelParams) -> Callable:
    """Bind ``params`` into an ``f(t, y)`` callable for the named chart."""
    if system == "full":
        return lambda t, y: rhs_full(t, y, params)
    if system == "polar":
        return lambda t, y: rhs_polar(t, y, params)
    if system == "standard":
        return lambda t, y: rhs_standard(t, y, params)
    if system == "averaged":
        return lambda t, y: rhs_averaged(y, params)
    raise ValueError(f"unknown system {system!r}; expected one of {SYSTEMS}")
