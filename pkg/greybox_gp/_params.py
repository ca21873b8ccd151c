import dataclasses
import math
from typing import Tuple

import numpy as np

from ._exceptions import InvalidArgument

# The SDOF covariance divides by the damping ratio and by the damped frequency.
DAMPING_RATIO_BOUNDS = (1e-4, 0.999)


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0:
        raise InvalidArgument(f"{name} must be finite and > 0, got {value!r}")
    return value


@dataclasses.dataclass(frozen=True)
class SeParams:
    """
    Squared-exponential hyperparameters with a white-noise term.
    """

    signal_variance: float
    length_scales: Tuple[float, ...]
    noise_variance: float = 0.0

    def __post_init__(self):
        object.__setattr__(
            self, "signal_variance", _positive("signal_variance", self.signal_variance)
        )
        scales = np.atleast_1d(np.asarray(self.length_scales, dtype=float))
        if scales.ndim != 1 or scales.size == 0:
            raise InvalidArgument("length_scales must be a non-empty vector")
        object.__setattr__(
            self,
            "length_scales",
            tuple(_positive("length_scale", s) for s in scales),
        )
        noise = float(self.noise_variance)
        if not math.isfinite(noise) or noise < 0:
            raise InvalidArgument(f"noise_variance must be >= 0, got {noise!r}")
        object.__setattr__(self, "noise_variance", noise)

    @property
    def n_dims(self) -> int:
        return len(self.length_scales)


@dataclasses.dataclass(frozen=True)
class SdofParams:
    """
    Single degree-of-freedom oscillator under white-noise forcing.

    ``amplitude`` is σ²/(4m²): forcing variance and mass only ever appear
    through that ratio, so they are carried as one hyperparameter.
    """

    natural_frequency: float
    damping_ratio: float
    amplitude: float

    def __post_init__(self):
        object.__setattr__(
            self,
            "natural_frequency",
            _positive("natural_frequency", self.natural_frequency),
        )
        object.__setattr__(self, "amplitude", _positive("amplitude", self.amplitude))
        zeta = float(self.damping_ratio)
        lo, hi = DAMPING_RATIO_BOUNDS
        if not (lo <= zeta <= hi):
            raise InvalidArgument(
                f"damping_ratio must lie in [{lo}, {hi}], got {zeta!r}"
            )
        object.__setattr__(self, "damping_ratio", zeta)

    @property
    def damped_frequency(self) -> float:
        return self.natural_frequency * math.sqrt(1.0 - self.damping_ratio**2)

    @property
    def variance(self) -> float:
        """Stationary response variance, the covariance at zero lag."""
        return self.amplitude / (self.damping_ratio * self.natural_frequency**3)

    @classmethod
    def from_physical(
        cls, mass: float, damping: float, stiffness: float, forcing_variance: float
    ) -> "SdofParams":
        mass = _positive("mass", mass)
        stiffness = _positive("stiffness", stiffness)
        omega = math.sqrt(stiffness / mass)
        zeta = float(damping) / (2.0 * math.sqrt(stiffness * mass))
        return cls(omega, zeta, float(forcing_variance) / (4.0 * mass**2))


@dataclasses.dataclass(frozen=True)
class ModalSet:
    modes: Tuple[SdofParams, ...]

    def __post_init__(self):
        modes = tuple(self.modes)
        if not modes:
            raise InvalidArgument("a modal set needs at least one mode")
        freqs = [m.natural_frequency for m in modes]
        if any(b <= a for a, b in zip(freqs, freqs[1:])):
            raise InvalidArgument(
                f"natural frequencies must be strictly increasing, got {freqs}"
            )
        object.__setattr__(self, "modes", modes)

    def __len__(self) -> int:
        return len(self.modes)

    def __iter__(self):
        return iter(self.modes)
