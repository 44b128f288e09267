"""Fixed-step RK4 integration, trajectories and phase/frequency extraction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AmbiguousUnwrap, InvalidParams, NonFiniteState
from .model import A_MIN, check_amplitude

#: Default integration step: 64 steps per drive period.
DEFAULT_DT = 2.0 * math.pi / 64

LABELS = ("bloch", "polar", "standard", "averaged")
SYSTEM_LABELS = {"full": "bloch", "polar": "polar", "standard": "standard",
                 "averaged": "averaged"}


@dataclass
class Trajectory:
    """Uniformly sampled solution of a 3-component system.

    ``dt`` is the spacing between stored samples, i.e. the integration step
    times ``stride``.  ``final`` is the state at ``t_end`` even when the
    decimation skips it.
    """

    t0: float
    dt: float
    samples: np.ndarray
    label: str
    stride: int = 1
    final: tuple = field(default=None)
    t_final: float = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.samples.ndim != 2 or self.samples.shape[1] != 3 or len(self.samples) == 0:
            raise ValueError("samples must be a non-empty (N, 3) array")
        if self.label not in LABELS:
            raise ValueError(f"label must be one of {LABELS}")
        if self.final is None:
            self.final = tuple(self.samples[-1])
            self.t_final = self.t0 + (len(self.samples) - 1) * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.samples))

    def __len__(self):
        return len(self.samples)

    def phase(self) -> np.ndarray:
        """Continuous atomic phase ``psi`` at each sample."""
        y = self.samples
        if self.label == "polar":
            return y[:, 2].copy()
        if self.label == "standard":
            return self.times - y[:, 2]
        if self.label == "bloch":
            return unwrap_phase(np.arctan2(y[:, 1], y[:, 0]))
        raise ValueError("averaged trajectories carry no fast phase")

    def amplitude(self) -> np.ndarray:
        y = self.samples
        if self.label == "bloch":
            return np.hypot(y[:, 0], y[:, 1])
        return y[:, 0].copy()


def rk4_step(rhs, t, y, dt):
    """One classical Runge-Kutta step; ``rhs(t, y)`` returns a 3-sequence."""
    h2 = 0.5 * dt
    try:
        k1 = rhs(t, y)
        k2 = rhs(t + h2, [a + h2 * b for a, b in zip(y, k1)])
        k3 = rhs(t + h2, [a + h2 * b for a, b in zip(y, k2)])
        k4 = rhs(t + dt, [a + dt * b for a, b in zip(y, k3)])
    except OverflowError as exc:
        raise NonFiniteState(f"overflow in right-hand side at t={t}: {exc}") from exc
    h6 = dt / 6.0
    y_next = tuple(a + h6 * (b1 + 2.0 * (b2 + b3) + b4)
                   for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4))
    # a non-finite stage always contaminates y_next
    if not all(map(math.isfinite, y_next)):
        raise NonFiniteState(f"non-finite state {y_next} after step at t={t}")
    return y_next


def step_count(t0, t_end, dt) -> int:
    if not dt > 0:
        raise InvalidParams(f"dt must be positive, got {dt}")
    if not t_end > t0:
        raise InvalidParams(f"t_end ({t_end}) must exceed t0 ({t0})")
    return int(math.floor((t_end - t0) / dt + 1e-9))


def integrate(rhs, y0, t0, t_end, dt=DEFAULT_DT, stride=1, label="bloch") -> Trajectory:
    """Integrate ``rhs`` from ``t0`` to ``t_end`` with a fixed RK4 step.

    Every ``stride``-th state is kept; the step times are ``t0 + k*dt``
    (never accumulated) so long runs carry no time drift.
    """
    if stride < 1:
        raise InvalidParams(f"stride must be >= 1, got {stride}")
    n_steps = step_count(t0, t_end, dt)
    n_keep = n_steps // stride + 1
    out = np.empty((n_keep, 3))
    y = tuple(float(v) for v in y0)
    out[0] = y
    j = 1
    for k in range(n_steps):
        y = rk4_step(rhs, t0 + k * dt, y, dt)
        if (k + 1) % stride == 0:
            out[j] = y
            j += 1
    return Trajectory(t0=t0, dt=dt * stride, samples=out, label=label, stride=stride,
                      final=y, t_final=t0 + n_steps * dt)


def rk4_affine_propagator(coeffs, t0, dt, n_steps, dtype=np.float64):
    """Compose ``n_steps`` RK4 steps of a linear system ``y' = A(t) y + b(t)``.

    ``coeffs(t)`` returns ``(A, b)``.  The result ``(P, q)`` maps the state
    at ``t0`` to the RK4 state at ``t0 + n_steps*dt`` exactly as repeated
    :func:`rk4_step` calls would, up to round-off.  For periodic coefficients
    and ``n_steps*dt`` equal to the period this is the one-period map, which
    lets very long runs be advanced period by period.
    """
    def augmented(t):
        a, b = coeffs(t)
        n = len(b)
        m = np.zeros((n + 1, n + 1), dtype=dtype)
        m[:n, :n] = a
        m[:n, n] = b
        return m

    n = None
    total = None
    for k in range(n_steps):
        t = t0 + k * dt
        m1 = augmented(t)
        m2 = augmented(t + 0.5 * dt)
        m4 = augmented(t + dt)
        if total is None:
            n = m1.shape[0]
            eye = np.eye(n, dtype=dtype)
            total = eye.copy()
        k1 = m1
        k2 = m2 @ (eye + (0.5 * dt) * k1)
        k3 = m2 @ (eye + (0.5 * dt) * k2)
        k4 = m4 @ (eye + dt * k3)
        step = eye + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        total = step @ total
    return total[:-1, :-1], total[:-1, -1]


def unwrap_phase(raw_phases, max_jump=math.pi):
    """Remove 2*pi jumps from a phase sequence.

    Each increment is shifted by the multiple of 2*pi that brings it closest
    to zero.  An increment that still has magnitude ``>= max_jump`` cannot be
    attributed to a unique branch and raises :class:`AmbiguousUnwrap`.
    """
    phases = np.asarray(raw_phases, dtype=float)
    if phases.size < 2:
        return phases.copy()
    steps = np.diff(phases)
    corrected = steps - 2.0 * np.pi * np.round(steps / (2.0 * np.pi))
    bad = np.flatnonzero(np.abs(corrected) >= max_jump)
    if bad.size:
        k = int(bad[0])
        raise AmbiguousUnwrap(
            f"phase jump {corrected[k]:.6g} between samples {k} and {k + 1} "
            f"is not below {max_jump:.6g}; reduce the step or the stride")
    out = np.empty_like(phases)
    out[0] = phases[0]
    out[1:] = phases[0] + np.cumsum(corrected)
    return out


def extract_frequency(traj: Trajectory):
    """Numerical ``d psi/dt`` of a trajectory.

    Central differences in the interior and second-order one-sided
    differences at both ends, so affine phase ramps are differentiated
    exactly.

    Returns
    -------
    times, freq : ndarray
    """
    if len(traj) < 3:
        raise ValueError("frequency extraction needs at least 3 samples")
    amp = traj.amplitude()
    if np.any(amp <= A_MIN):
        check_amplitude(float(amp.min()))
    psi = traj.phase()
    return traj.times, np.gradient(psi, traj.dt, edge_order=2)


def stroboscopic_orbit(coeffs, y0, period, steps_per_period, n_periods, t0=0.0,
                       dtype=np.longdouble):
    """States of a periodic linear system at ``t0 + k*period``, ``k = 0..n_periods``.

    The RK4 one-period map is built once by :func:`rk4_affine_propagator`
    and applied ``n_periods`` times, so arbitrarily long runs cost one
    matrix-vector product per period.  Extended precision (the default)
    keeps the accumulated round-off of ``10**4`` periods near ``1e-12``.
    """
    dt = period / steps_per_period
    pm, q = rk4_affine_propagator(coeffs, t0, dt, steps_per_period, dtype=dtype)
    out = np.empty((n_periods + 1, len(q)), dtype=dtype)
    out[0] = np.asarray(y0, dtype=dtype)
    for k in range(n_periods):
        out[k + 1] = pm @ out[k] + q
    return out
