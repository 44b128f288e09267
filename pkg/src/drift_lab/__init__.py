"""Resonance drift dynamics of a two-level system under weak harmonic drive."""

from .errors import (AmbiguousUnwrap, DegenerateAmplitude, DriftLabError, GridTooCoarse,
                     InsufficientData, InvalidParams, NonFiniteState)
from .model import (A_MIN, BlochState, DensityState, ModelParams, PolarState, SlowState,
                    bloch_to_polar, density_to_bloch, effective_detuning, polar_to_bloch,
                    resonance_frequency_decomposition)
from .stationary import StationaryPoint, stationary_general, stationary_resonance

__version__ = "0.1.0"
