"""
Binomial photon-counting likelihood.

The energy is the negative mean log probability mass per measurement
point, so that ``exp(-M * energy)`` is the likelihood of the data.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .spectral import DEFAULT_EPSILON, SpectrumParams, clipped_rate


class InvalidDataError(ValueError):
    """Raised when photon counts violate ``0 <= n <= N`` or similar."""


@dataclass(frozen=True, eq=False)
class Dataset:
    """Measurement records ``(x_i, N_i, n_i)`` sorted by energy."""

    x: np.ndarray
    N: np.ndarray
    n: np.ndarray

    def __post_init__(self):
        x = np.ascontiguousarray(self.x, dtype=float)
        N = np.asarray(self.N)
        n = np.asarray(self.n)
        if x.ndim != 1 or x.shape != N.shape or x.shape != n.shape:
            raise InvalidDataError("x, N and n must be 1-d arrays of equal length")
        if x.size < 1:
            raise InvalidDataError("dataset must contain at least one record")
        for name, arr in (("N", N), ("n", n)):
            if not np.all(np.asarray(arr, dtype=float) == np.round(np.asarray(arr, dtype=float))):
                raise InvalidDataError(f"{name} must hold integer counts")
        N = np.ascontiguousarray(N, dtype=np.int64)
        n = np.ascontiguousarray(n, dtype=np.int64)
        if np.any(N < 1):
            raise InvalidDataError("incident photon counts N must be >= 1")
        bad = np.flatnonzero((n < 0) | (n > N))
        if bad.size:
            i = bad[0]
            raise InvalidDataError(f"record {i}: absorbed count n={n[i]} outside [0, N={N[i]}]")
        if not np.all(np.isfinite(x)):
            raise InvalidDataError("energies must be finite")
        if np.any(np.diff(x) <= 0):
            raise InvalidDataError("energies must be strictly increasing")
        for name, arr in (("x", x), ("N", N), ("n", n)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def M(self) -> int:
        return self.x.size

    def __len__(self):
        return self.M

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (np.array_equal(self.x, other.x) and np.array_equal(self.N, other.N)
                and np.array_equal(self.n, other.n))

    def log_binom_sum(self) -> float:
        """Parameter-independent term ``sum_i log C(N_i, n_i)``."""
        return float(np.sum(_log_binom(self.N, self.n)))

    def fingerprint(self) -> dict:
        h = hashlib.sha256()
        for arr in (self.x, self.N, self.n):
            h.update(np.ascontiguousarray(arr).tobytes())
        return {"M": self.M, "sha256": h.hexdigest()}


def _log_binom(N, n):
    N = np.asarray(N, dtype=float)
    n = np.asarray(n, dtype=float)
    return gammaln(N + 1) - gammaln(n + 1) - gammaln(N - n + 1)


def log_binomial_coeff(N: int, n: int) -> float:
    """``log C(N, n)`` through log-gamma."""
    if N < 0 or n < 0 or n > N:
        raise ValueError(f"need 0 <= n <= N, got N={N}, n={n}")
    return float(_log_binom(N, n))


def log_likelihood_terms(dataset: Dataset, p) -> np.ndarray:
    """Per-point ``n log p + (N - n) log(1 - p)`` without the binomial coefficient."""
    n = dataset.n
    m = dataset.N - dataset.n
    # 0 * log(p) must stay 0 even when p is tiny
    return np.where(n > 0, n * np.log(p), 0.0) + np.where(m > 0, m * np.log1p(-p), 0.0)


def energy(dataset: Dataset, params: SpectrumParams, epsilon: float = DEFAULT_EPSILON) -> float:
    """Negative mean binomial log-likelihood per measurement point."""
    p = clipped_rate(dataset.x, params, epsilon)
    total = np.sum(log_likelihood_terms(dataset, p)) + dataset.log_binom_sum()
    return float(-total / dataset.M)


def log_likelihood(dataset: Dataset, params: SpectrumParams, epsilon: float = DEFAULT_EPSILON) -> float:
    return -dataset.M * energy(dataset, params, epsilon)
