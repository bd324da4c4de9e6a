"""
Free energies from tempered samples and selection of the number of peaks.

The marginal likelihood ``z(1)`` telescopes over the ladder,

    log z(1) = sum_l log < exp(-M (beta_{l+1} - beta_l) E) >_{beta_l},

anchored at ``z(0) = 1`` (the first rung must be ``beta = 0``). The free
energy is ``F(K) = -log z(1)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

import numpy as np
from scipy.special import betaln, logsumexp

from . import emc
from .likelihood import Dataset
from .priors import PriorSpec, log_prior_vector
from .spectral import DEFAULT_EPSILON, InvalidParameterError, SpectrumParams

logger = logging.getLogger(__name__)


def log_mean_exp(v: np.ndarray) -> float:
    v = np.asarray(v, dtype=float)
    return float(logsumexp(v) - np.log(v.size))


def log_evidence(archive: emc.SampleArchive, M: int) -> tuple[float, float]:
    """Estimate ``log z(1)`` and its Monte Carlo standard error.

    Each ratio uses the plain sample mean over one replica's retained
    energies. The standard error sums delta-method variances of the
    per-ratio log means, treating samples and ratios as independent, so it
    understates the error of strongly autocorrelated chains.
    """
    betas = np.asarray(archive.ladder.betas)
    if archive.n_retained < 1:
        raise InvalidParameterError("archive holds no retained samples")
    if betas[0] != 0.0:
        raise InvalidParameterError("evidence telescoping needs a beta = 0 rung")
    E = archive.energies
    n = E.shape[0]
    total = 0.0
    var = 0.0
    for l in range(len(betas) - 1):
        w = -M * (betas[l + 1] - betas[l]) * E[:, l]
        lme = log_mean_exp(w)
        total += lme
        if n > 1:
            r = np.exp(w - lme)  # ratios to the mean, mean(r) == 1
            var += np.var(r, ddof=1) / n
    return total, float(np.sqrt(var))


def beta_binomial_log_evidence(dataset: Dataset, eta: float, lam: float) -> float:
    """Exact log evidence of the constant-rate model with a Beta(eta, lam) rate."""
    if not (eta > 0 and lam > 0):
        raise InvalidParameterError("Beta shape parameters must be positive")
    s = float(np.sum(dataset.n))
    f = float(np.sum(dataset.N - dataset.n))
    return dataset.log_binom_sum() + float(betaln(eta + s, lam + f) - betaln(eta, lam))


def posterior_over_k(free_energies: Mapping[int, float]) -> dict[int, float]:
    """``p(K | D)`` under a uniform prior on K: softmax of ``-F(K)``."""
    if not free_energies:
        raise InvalidParameterError("need at least one model")
    ks = sorted(free_energies)
    neg = -np.array([free_energies[k] for k in ks], dtype=float)
    w = np.exp(neg - neg.max())
    w /= w.sum()
    return {k: float(p) for k, p in zip(ks, w)}


def argmax_k(posterior: Mapping[int, float]) -> int:
    """Most probable K; ties go to the smaller K."""
    best = None
    for k in sorted(posterior):
        if best is None or posterior[k] > posterior[best]:
            best = k
    return best


def map_estimate(archive: emc.SampleArchive, spec: PriorSpec, M: int):
    """Retained beta = 1 sample with the highest posterior density.

    Returns ``(params sorted by position, energy, log posterior)``.
    """
    theta = archive.target_params
    E = archive.energies[:, -1]
    lp = np.array([log_prior_vector(t, spec) for t in theta])
    score = -M * E + lp
    i = int(np.argmax(score))
    return SpectrumParams.from_vector(theta[i]).sorted(), float(E[i]), float(score[i])


@dataclass
class ModelResult:
    K: int
    free_energy: float
    stderr: float
    map_params: SpectrumParams
    map_energy: float
    seed: int
    archive: Optional[emc.SampleArchive] = field(default=None, repr=False)


@dataclass
class ModelSelectionReport:
    results: dict
    posterior: dict
    selected_k: int

    @property
    def free_energies(self) -> dict:
        return {k: r.free_energy for k, r in self.results.items()}

    def to_dict(self) -> dict:
        out = {"selected_k": self.selected_k, "models": []}
        for k in sorted(self.results):
            r = self.results[k]
            out["models"].append({
                "K": k,
                "free_energy": r.free_energy,
                "free_energy_stderr": r.stderr,
                "posterior": self.posterior[k],
                "seed": r.seed,
                "map_energy": r.map_energy,
                "map": {
                    "a": r.map_params.a.tolist(),
                    "mu": r.map_params.mu.tolist(),
                    "sigma": r.map_params.sigma.tolist(),
                    "B": r.map_params.background,
                },
            })
        return out


def derive_seed(master: int, *keys: int) -> int:
    """Deterministic 63-bit child seed for a task identified by ``keys``."""
    ss = np.random.SeedSequence([int(master)] + [int(k) for k in keys])
    return int(ss.generate_state(2, np.uint64)[0] >> np.uint64(1))


def fit_model(dataset: Dataset, spec: PriorSpec, K: int, ladder: emc.TemperatureLadder,
              plan: emc.RunPlan, seed: int, epsilon: float = DEFAULT_EPSILON,
              keep_archive: bool = True) -> ModelResult:
    archive = emc.run(dataset, spec, K, ladder, plan, seed, epsilon)
    log_z, se = log_evidence(archive, dataset.M)
    params, e_map, _ = map_estimate(archive, spec, dataset.M)
    logger.debug("K=%d F=%.3f +- %.3f", K, -log_z, se)
    return ModelResult(K, -log_z, se, params, e_map, seed, archive if keep_archive else None)


def select_model(dataset: Dataset, spec: PriorSpec, K_range: Iterable[int] = range(1, 6),
                 ladder: Optional[emc.TemperatureLadder] = None,
                 plan: Optional[emc.RunPlan] = None, seed: int = 0,
                 epsilon: float = DEFAULT_EPSILON, keep_archives: bool = False,
                 executor=None) -> ModelSelectionReport:
    """Fit every K, compute free energies and pick the most probable K.

    Each K runs with its own seed derived from ``(seed, K)``, so runs may be
    distributed over ``executor`` (any ``concurrent.futures`` executor)
    without changing the result.
    """
    ks = sorted(set(int(k) for k in K_range))
    if not ks:
        raise InvalidParameterError("K_range is empty")
    ladder = ladder or emc.default_ladder()
    plan = plan or emc.RunPlan()
    seeds = {k: derive_seed(seed, k) for k in ks}
    if executor is None:
        results = {k: fit_model(dataset, spec, k, ladder, plan, seeds[k], epsilon, keep_archives)
                   for k in ks}
    else:
        futures = {k: executor.submit(fit_model, dataset, spec, k, ladder, plan, seeds[k], epsilon,
                                      keep_archives) for k in ks}
        results = {k: futures[k].result() for k in ks}
    posterior = posterior_over_k({k: r.free_energy for k, r in results.items()})
    return ModelSelectionReport(results, posterior, argmax_k(posterior))
