"""
Prior families for peak intensity, position, width and background.

Every family exposes ``logpdf``, ``sample``, ``mean`` and ``std``. The
``code``/``args`` pair is the flat representation consumed by the compiled
sampler kernels in :mod:`binospec._kernels`.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import exp, lgamma, log, pi, sqrt
from typing import Union

import numpy as np

from .spectral import InvalidParameterError, SpectrumParams

# family codes shared with the compiled kernels
BETA, GAMMA, UNIFORM, INV_SQ_GAMMA, GAUSSIAN = range(5)


def _check_positive(**kwargs):
    for name, value in kwargs.items():
        if not value > 0:
            raise InvalidParameterError(f"{name} must be positive, got {value}")


@dataclass(frozen=True)
class BetaPrior:
    shape_a: float
    shape_b: float

    code = BETA

    def __post_init__(self):
        _check_positive(shape_a=self.shape_a, shape_b=self.shape_b)

    @property
    def args(self):
        log_norm = lgamma(self.shape_a) + lgamma(self.shape_b) - lgamma(self.shape_a + self.shape_b)
        return (self.shape_a, self.shape_b, log_norm)

    def logpdf(self, v: float) -> float:
        if not 0.0 < v < 1.0:
            return -np.inf
        return (self.shape_a - 1) * log(v) + (self.shape_b - 1) * log(1 - v) - self.args[2]

    def sample(self, rng: np.random.Generator, size=None):
        return rng.beta(self.shape_a, self.shape_b, size)

    def mean(self) -> float:
        return self.shape_a / (self.shape_a + self.shape_b)

    def std(self) -> float:
        s = self.shape_a + self.shape_b
        return sqrt(self.shape_a * self.shape_b / (s * s * (s + 1)))


@dataclass(frozen=True)
class GammaPrior:
    """Gamma distribution with ``shape`` and ``rate`` (mean shape/rate)."""

    shape: float
    rate: float

    code = GAMMA

    def __post_init__(self):
        _check_positive(shape=self.shape, rate=self.rate)

    @property
    def args(self):
        return (self.shape, self.rate, self.shape * log(self.rate) - lgamma(self.shape))

    def logpdf(self, v: float) -> float:
        if not v > 0:
            return -np.inf
        return self.args[2] + (self.shape - 1) * log(v) - self.rate * v

    def sample(self, rng: np.random.Generator, size=None):
        return rng.gamma(self.shape, 1.0 / self.rate, size)

    def mean(self) -> float:
        return self.shape / self.rate

    def std(self) -> float:
        return sqrt(self.shape) / self.rate


@dataclass(frozen=True)
class UniformPrior:
    low: float
    high: float

    code = UNIFORM

    def __post_init__(self):
        if not self.low < self.high:
            raise InvalidParameterError(f"uniform prior needs low < high, got [{self.low}, {self.high}]")

    @property
    def args(self):
        return (self.low, self.high, -log(self.high - self.low))

    def logpdf(self, v: float) -> float:
        if not self.low <= v <= self.high:
            return -np.inf
        return self.args[2]

    def sample(self, rng: np.random.Generator, size=None):
        return rng.uniform(self.low, self.high, size)

    def mean(self) -> float:
        return 0.5 * (self.low + self.high)

    def std(self) -> float:
        return (self.high - self.low) / sqrt(12.0)


@dataclass(frozen=True)
class InverseSquareGammaPrior:
    """Width prior: the precision ``1/sigma**2`` is Gamma(shape, rate).

    ``logpdf`` is the density of ``sigma`` itself, so it carries the
    Jacobian ``2 / sigma**3`` of the map ``sigma -> 1/sigma**2``.
    """

    shape: float
    rate: float

    code = INV_SQ_GAMMA

    def __post_init__(self):
        _check_positive(shape=self.shape, rate=self.rate)

    @property
    def args(self):
        return (self.shape, self.rate, self.shape * log(self.rate) - lgamma(self.shape) + log(2.0))

    def logpdf(self, v: float) -> float:
        if not v > 0:
            return -np.inf
        tau = 1.0 / (v * v)
        return self.args[2] + (self.shape - 1) * log(tau) - self.rate * tau - 3 * log(v)

    def sample(self, rng: np.random.Generator, size=None):
        tau = rng.gamma(self.shape, 1.0 / self.rate, size)
        return tau ** -0.5

    def mean(self) -> float:
        # E[tau^-1/2] for tau ~ Gamma(shape, rate)
        return exp(lgamma(self.shape - 0.5) - lgamma(self.shape)) * sqrt(self.rate)

    def std(self) -> float:
        if self.shape <= 1:
            return self.mean()
        second = self.rate / (self.shape - 1)
        return sqrt(max(second - self.mean() ** 2, 0.0))


@dataclass(frozen=True)
class GaussianPrior:
    mean_: float
    sd: float

    code = GAUSSIAN

    def __post_init__(self):
        _check_positive(sd=self.sd)

    @property
    def args(self):
        return (self.mean_, self.sd, -log(self.sd * sqrt(2 * pi)))

    def logpdf(self, v: float) -> float:
        z = (v - self.mean_) / self.sd
        return self.args[2] - 0.5 * z * z

    def sample(self, rng: np.random.Generator, size=None):
        return rng.normal(self.mean_, self.sd, size)

    def mean(self) -> float:
        return self.mean_

    def std(self) -> float:
        return self.sd


IntensityPrior = Union[BetaPrior, GammaPrior]
BackgroundPrior = Union[GaussianPrior, BetaPrior]


@dataclass(frozen=True)
class PriorSpec:
    """Which prior family governs each parameter kind.

    ``background`` is normally Gaussian; a Beta background turns the
    ``K = 0`` model into the conjugate constant-rate model used to check
    evidence estimates.
    """

    intensity: IntensityPrior
    position: UniformPrior
    width: InverseSquareGammaPrior
    background: BackgroundPrior

    def families(self, K: int) -> list:
        """Prior family of every entry of the parameter vector for ``K`` peaks."""
        return [self.intensity, self.position, self.width] * K + [self.background]

    def kernel_tables(self, K: int) -> tuple[np.ndarray, np.ndarray]:
        fams = self.families(K)
        codes = np.array([f.code for f in fams], dtype=np.int64)
        args = np.array([f.args for f in fams], dtype=float)
        return codes, args

    def to_dict(self) -> dict:
        def one(f):
            d = {"family": type(f).__name__}
            d.update({k: v for k, v in f.__dict__.items()})
            return d
        return {name: one(getattr(self, name)) for name in ("intensity", "position", "width", "background")}

    @classmethod
    def from_dict(cls, d: dict) -> "PriorSpec":
        kinds = {c.__name__: c for c in (BetaPrior, GammaPrior, UniformPrior,
                                          InverseSquareGammaPrior, GaussianPrior)}

        def one(entry):
            entry = dict(entry)
            family = entry.pop("family")
            if family not in kinds:
                raise InvalidParameterError(f"unknown prior family {family!r}")
            return kinds[family](**entry)
        return cls(*(one(d[name]) for name in ("intensity", "position", "width", "background")))


def log_prior(params: SpectrumParams, spec: PriorSpec) -> float:
    """Log prior density of ``params``; ``-inf`` outside the support."""
    total = spec.background.logpdf(params.background)
    for p in params.peaks:
        total += spec.intensity.logpdf(p.a) + spec.position.logpdf(p.mu) + spec.width.logpdf(p.sigma)
    return float(total)


def log_prior_vector(theta: np.ndarray, spec: PriorSpec) -> float:
    """:func:`log_prior` on a flat ``[a1, mu1, sigma1, ..., B]`` vector."""
    K = (len(theta) - 1) // 3
    return float(sum(f.logpdf(v) for f, v in zip(spec.families(K), theta)))


def sample_prior_vector(spec: PriorSpec, K: int, rng: np.random.Generator) -> np.ndarray:
    if K < 0:
        raise InvalidParameterError(f"K must be nonnegative, got {K}")
    return np.array([f.sample(rng) for f in spec.families(K)], dtype=float)


def sample_prior(spec: PriorSpec, K: int, rng: np.random.Generator) -> SpectrumParams:
    """Draw one parameter set with every entry independent from its prior."""
    return SpectrumParams.from_vector(sample_prior_vector(spec, K, rng))


def observable_prior() -> PriorSpec:
    """Hyperparameters for the regime where peak structure is visible."""
    return PriorSpec(
        intensity=BetaPrior(2.0, 5.0),
        position=UniformPrior(0.5, 1.0),
        width=InverseSquareGammaPrior(10.0, 1.0 / 160.0),
        background=GaussianPrior(0.1, 0.01),
    )


def flattened_prior() -> PriorSpec:
    """Hyperparameters for the saturated regime."""
    return PriorSpec(
        intensity=GammaPrior(5.0, 0.1),
        position=UniformPrior(3.0, 5.0),
        width=InverseSquareGammaPrior(10.0, 1.0 / 10.0),
        background=GaussianPrior(0.5, 0.1),
    )


PRESET_PRIORS = {"observable": observable_prior, "flattened": flattened_prior}
