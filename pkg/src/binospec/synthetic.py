"""
Synthetic absorption spectra with binomial photon-counting noise.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .likelihood import Dataset
from .spectral import (DEFAULT_EPSILON, InvalidParameterError, SpectrumParams, absorption_rate,
                       clipped_rate)

_BERNOULLI_MAX_N = 30


@dataclass(frozen=True)
class GenerationConfig:
    """Ground truth, energy grid and photon budget for one synthetic spectrum.

    The grid is either ``x`` (explicit) or ``M`` points evenly spaced over
    ``[x_min, x_max]``.
    """

    truth: SpectrumParams
    x_min: float = 0.0
    x_max: float = 1.0
    M: int = 256
    photons_per_point: int = 1
    seed: int = 0
    x: Optional[tuple] = None

    def __post_init__(self):
        if self.x is not None:
            object.__setattr__(self, "x", tuple(float(v) for v in self.x))
            if len(self.x) < 1:
                raise InvalidParameterError("explicit grid must be nonempty")
        else:
            if self.M < 1:
                raise InvalidParameterError(f"M must be >= 1, got {self.M}")
            if not self.x_min < self.x_max:
                raise InvalidParameterError(f"need x_min < x_max, got [{self.x_min}, {self.x_max}]")
        if self.photons_per_point < 1:
            raise InvalidParameterError(f"photons_per_point must be >= 1, got {self.photons_per_point}")

    def grid(self) -> np.ndarray:
        if self.x is not None:
            return np.asarray(self.x, dtype=float)
        return np.linspace(self.x_min, self.x_max, self.M)

    def with_photons(self, N: int, seed: Optional[int] = None) -> "GenerationConfig":
        return replace(self, photons_per_point=int(N), seed=self.seed if seed is None else int(seed))


def preset_observable() -> GenerationConfig:
    """Three small overlapping peaks; the structure is visible in the data."""
    truth = SpectrumParams.from_arrays(
        a=(0.0587, 0.1522, 0.1183),
        mu=(0.7016, 0.7426, 0.7838),
        sigma=(0.01705, 0.01375, 0.01300),
        background=0.01,
    )
    return GenerationConfig(truth=truth, x_min=0.5, x_max=1.0, M=256)


def preset_flattened() -> GenerationConfig:
    """Four-fold intensities on a large background; the rate saturates near the peaks."""
    truth = SpectrumParams.from_arrays(
        a=(0.2348, 0.6088, 0.4732),
        mu=(3.806, 3.970, 4.135),
        sigma=(0.0682, 0.0550, 0.0520),
        background=0.5,
    )
    return GenerationConfig(truth=truth, x_min=3.0, x_max=5.0, M=256)


PRESETS = {"observable": preset_observable, "flattened": preset_flattened}


def sample_binomial(N, p, rng: np.random.Generator):
    """Exact binomial variates, broadcasting over ``N`` and ``p``.

    Small counts (``N <= 30``) are drawn as sums of Bernoulli trials; larger
    ones use numpy's exact inversion / BTPE sampler.
    """
    p_arr = np.asarray(p, dtype=float)
    N_arr = np.asarray(N)
    if np.any(~((p_arr >= 0) & (p_arr <= 1))):
        raise ValueError("p must lie in [0, 1]")
    if np.any(N_arr < 0):
        raise ValueError("N must be nonnegative")
    N_arr, p_arr = np.broadcast_arrays(N_arr.astype(np.int64), p_arr)
    out = np.empty(N_arr.shape, dtype=np.int64)
    small = N_arr <= _BERNOULLI_MAX_N
    if np.any(small):
        Ns, ps = N_arr[small], p_arr[small]
        u = rng.random((Ns.size, _BERNOULLI_MAX_N))
        trials = np.arange(_BERNOULLI_MAX_N) < Ns[:, None]
        out[small] = np.sum((u < ps[:, None]) & trials, axis=1)
    if np.any(~small):
        out[~small] = rng.binomial(N_arr[~small], p_arr[~small])
    if out.ndim == 0:
        return int(out)
    return out


def generate(config: GenerationConfig, rng: Optional[np.random.Generator] = None,
             epsilon: float = DEFAULT_EPSILON) -> Dataset:
    """Draw absorbed-photon counts for every grid point of ``config``.

    Without an explicit ``rng`` the stream is seeded from ``config.seed``, so
    the same config always yields the same dataset.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    x = config.grid()
    p = clipped_rate(x, config.truth, epsilon)
    N = np.full(x.shape, config.photons_per_point, dtype=np.int64)
    n = sample_binomial(N, p, rng)
    return Dataset(x, N, np.atleast_1d(n))


def saturation_fraction(config: GenerationConfig) -> float:
    """Share of grid points whose raw absorption rate exceeds 1."""
    return float(np.mean(absorption_rate(config.grid(), config.truth) > 1.0))


def explicit_config(truth: SpectrumParams, x: Sequence[float], N: int, seed: int = 0) -> GenerationConfig:
    return GenerationConfig(truth=truth, x=tuple(x), photons_per_point=N, seed=seed)
