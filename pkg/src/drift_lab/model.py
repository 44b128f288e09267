"""Parameters and state representations of the driven two-level system.

Everything is dimensionless: rates and frequencies are normalized by the
drive frequency, and time is measured in radians of drive phase.  Four
charts describe the same physical state:

* ``DensityState``  populations and coherence of the density matrix,
* ``BlochState``    ``(R1, R2, R3)``, the model of record,
* ``PolarState``    amplitude ``a``, population difference ``z``, phase ``psi``,
* ``SlowState``     drift variables ``(a_bar, z_bar, theta_bar)`` with
  ``theta = t - psi`` the field-minus-atom phase difference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

from .errors import DegenerateAmplitude, InvalidParams

#: Smallest coherence amplitude for which the phase is considered defined.
A_MIN = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Normalized parameters of the perturbed Bloch equations.

    Parameters
    ----------
    gamma1 : float
        Coherence (transverse) relaxation rate.
    gamma2 : float
        Population-difference (longitudinal) relaxation rate.
    lam : float
        Pumping difference ``(Lambda2 - Lambda1) / omega``.
    omega1 : float
        Rabi amplitude of the drive.
    epsilon : float
        Formal small parameter, ``0 <= epsilon < 1``.
    delta : float
        Scaled detuning, ``epsilon * delta = 1 - nu``.
    """

    gamma1: float
    gamma2: float
    lam: float
    omega1: float
    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        for name in ("gamma1", "gamma2", "lam", "omega1", "epsilon", "delta"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise InvalidParams(f"{name} must be a real number, got {value!r}")
            if not math.isfinite(value):
                raise InvalidParams(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, float(value))
        for name in ("gamma1", "gamma2", "omega1"):
            if getattr(self, name) < 0:
                raise InvalidParams(f"{name} must be >= 0, got {getattr(self, name)}")
        # epsilon == 0 is the unperturbed limit
        if not 0.0 <= self.epsilon < 1.0:
            raise InvalidParams(f"epsilon must lie in [0, 1), got {self.epsilon}")
        if self.nu <= 0:
            raise InvalidParams(
                f"nu = 1 - epsilon*delta must be positive, got {self.nu}")

    @property
    def nu(self) -> float:
        """Transition frequency in drive units."""
        return 1.0 - self.epsilon * self.delta

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def at_resonance(self) -> "ModelParams":
        """Copy with the detuning set so that the corrected detuning is zero."""
        return replace(self, delta=bloch_siegert_delta(self))

    def as_dict(self) -> dict:
        return {
            "gamma1": self.gamma1,
            "gamma2": self.gamma2,
            "lambda": self.lam,
            "omega1": self.omega1,
            "epsilon": self.epsilon,
            "delta": self.delta,
        }


@dataclass(frozen=True)
class DensityState:
    """Two-level density matrix: populations and the lower-left coherence."""

    rho11: float
    rho22: float
    rho21_re: float = 0.0
    rho21_im: float = 0.0

    def __post_init__(self):
        if self.rho11 < 0 or self.rho22 < 0:
            raise InvalidParams("populations must be non-negative")
        coherence_sq = self.rho21_re ** 2 + self.rho21_im ** 2
        if coherence_sq > self.rho11 * self.rho22 * (1 + 1e-12):
            raise InvalidParams("|rho21|^2 exceeds rho11*rho22 (not positive semidefinite)")


class BlochState(NamedTuple):
    r1: float
    r2: float
    r3: float


class PolarState(NamedTuple):
    a: float
    z: float
    psi: float


class SlowState(NamedTuple):
    a_bar: float
    z_bar: float
    theta_bar: float


def check_amplitude(a: float) -> None:
    if not a > A_MIN:
        raise DegenerateAmplitude(f"amplitude {a!r} <= {A_MIN}: phase undefined")


def density_to_bloch(d: DensityState) -> BlochState:
    return BlochState(2.0 * d.rho21_re, 2.0 * d.rho21_im, d.rho22 - d.rho11)


def bloch_to_polar(b: BlochState) -> PolarState:
    """Amplitude, population difference and principal-value phase in (-pi, pi]."""
    r1, r2, r3 = b
    a = math.hypot(r1, r2)
    check_amplitude(a)
    psi = math.atan2(r2, r1)
    if psi == -math.pi:
        psi = math.pi
    return PolarState(a, r3, psi)


def polar_to_bloch(p: PolarState) -> BlochState:
    a, z, psi = p
    if a < 0:
        raise InvalidParams(f"amplitude must be >= 0, got {a}")
    return BlochState(a * math.cos(psi), a * math.sin(psi), z)


def polar_to_slow(p: PolarState, t: float) -> SlowState:
    """Field-minus-atom phase representation ``theta = t - psi``."""
    return SlowState(p.a, p.z, t - p.psi)


def slow_to_polar(s: SlowState, t: float) -> PolarState:
    return PolarState(s.a_bar, s.z_bar, t - s.theta_bar)


def effective_detuning(params: ModelParams) -> float:
    """Detuning corrected for the Bloch-Siegert term, ``delta - eps*omega1**2/4``."""
    return params.delta - params.epsilon * params.omega1 ** 2 / 4.0


def bloch_siegert_delta(params: ModelParams) -> float:
    """Scaled detuning at which the corrected detuning vanishes."""
    return params.epsilon * params.omega1 ** 2 / 4.0


def resonance_frequency_decomposition(s: SlowState, params: ModelParams):
    """First-order drift correction and Bloch-Siegert shift of the resonance.

    Returns
    -------
    (delta_omega_1, delta_omega_2) : tuple of float
        ``-eps*(omega1*z/a)*cos(theta)`` and ``eps**2*omega1**2/4``, both in
        units of the drive frequency.
    """
    a, z, theta = s
    check_amplitude(a)
    eps = params.epsilon
    w1 = params.omega1
    d1 = -eps * (w1 * z / a) * math.cos(theta)
    d2 = eps * eps * w1 * w1 / 4.0
    return d1, d2
