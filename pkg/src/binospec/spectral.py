"""
Forward model for absorption spectra built from Gaussian peaks on a
constant background.

All functions accept scalar or array energies and broadcast with numpy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

DEFAULT_EPSILON = 1e-12


class InvalidParameterError(ValueError):
    """Raised when a model parameter lies outside its valid domain."""


@dataclass(frozen=True)
class PeakParams:
    """One peak: intensity ``a``, position ``mu`` and width ``sigma``."""

    a: float
    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise InvalidParameterError(f"peak width must be positive, got {self.sigma}")
        if not self.a >= 0:
            raise InvalidParameterError(f"peak intensity must be nonnegative, got {self.a}")


@dataclass(frozen=True)
class SpectrumParams:
    """Peaks plus a constant background ``B``.

    Peaks are kept in the order given. Use :meth:`sorted` for reporting.
    """

    peaks: tuple[PeakParams, ...]
    background: float

    def __post_init__(self):
        object.__setattr__(self, "peaks", tuple(self.peaks))

    @property
    def K(self) -> int:
        return len(self.peaks)

    @classmethod
    def from_arrays(cls, a: Sequence[float], mu: Sequence[float], sigma: Sequence[float],
                    background: float) -> "SpectrumParams":
        if not len(a) == len(mu) == len(sigma):
            raise InvalidParameterError("a, mu and sigma must have equal length")
        peaks = tuple(PeakParams(float(ai), float(mi), float(si)) for ai, mi, si in zip(a, mu, sigma))
        return cls(peaks, float(background))

    @classmethod
    def from_vector(cls, theta: Sequence[float]) -> "SpectrumParams":
        """Inverse of :meth:`to_vector`; layout is ``[a1, mu1, sigma1, ..., B]``."""
        theta = np.asarray(theta, dtype=float)
        if theta.ndim != 1 or (theta.size - 1) % 3:
            raise InvalidParameterError(f"parameter vector has invalid length {theta.size}")
        triples = theta[:-1].reshape(-1, 3)
        return cls.from_arrays(triples[:, 0], triples[:, 1], triples[:, 2], theta[-1])

    def to_vector(self) -> np.ndarray:
        out = np.empty(3 * self.K + 1)
        for k, p in enumerate(self.peaks):
            out[3 * k:3 * k + 3] = (p.a, p.mu, p.sigma)
        out[-1] = self.background
        return out

    @property
    def a(self) -> np.ndarray:
        return np.array([p.a for p in self.peaks])

    @property
    def mu(self) -> np.ndarray:
        return np.array([p.mu for p in self.peaks])

    @property
    def sigma(self) -> np.ndarray:
        return np.array([p.sigma for p in self.peaks])

    def sorted(self) -> "SpectrumParams":
        """Copy with peaks in ascending order of position."""
        return SpectrumParams(tuple(sorted(self.peaks, key=lambda p: p.mu)), self.background)


def gaussian_basis(x, mu: float, sigma: float):
    """Unnormalised Gaussian peak shape, equal to 1 at ``x == mu``."""
    if not sigma > 0:
        raise InvalidParameterError(f"sigma must be positive, got {sigma}")
    z = (np.asarray(x, dtype=float) - mu) / sigma
    return np.exp(-0.5 * z * z)


def signal(x, params: SpectrumParams):
    """Sum of the peak contributions, without background."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for p in params.peaks:
        out = out + p.a * gaussian_basis(x, p.mu, p.sigma)
    return out


def absorption_rate(x, params: SpectrumParams):
    """Unclipped absorption rate: peak signal plus background."""
    return signal(x, params) + params.background


def clip_probability(f, epsilon: float = DEFAULT_EPSILON):
    """Clamp raw rates into ``[epsilon, 1 - epsilon]``."""
    if not 0 < epsilon < 0.5:
        raise InvalidParameterError(f"epsilon must lie in (0, 0.5), got {epsilon}")
    return np.clip(f, epsilon, 1.0 - epsilon)


def clipped_rate(x, params: SpectrumParams, epsilon: float = DEFAULT_EPSILON):
    """Absorption rate clamped to a valid Bernoulli probability.

    Rates at or above 1 (saturation) map to ``1 - epsilon`` and rates at or
    below 0, reachable through a negative background, map to ``epsilon``,
    so binomial log-probabilities stay finite.
    """
    return clip_probability(absorption_rate(x, params), epsilon)
