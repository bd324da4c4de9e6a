"""
Replica-exchange (exchange Monte Carlo) sampling of tempered posteriors.

Replica ``l`` targets ``exp(-M * beta_l * E(theta)) * prior(theta)``. Each
iteration runs a component-wise Gaussian random-walk Metropolis pass on
every replica, then attempts adjacent swaps l = 1 .. L-1 in order.
Retained samples from every temperature feed the evidence estimator in
:mod:`binospec.evidence`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .likelihood import Dataset
from .priors import PriorSpec, sample_prior_vector
from .spectral import DEFAULT_EPSILON, InvalidParameterError, SpectrumParams

logger = logging.getLogger(__name__)

STEP_MIN, STEP_MAX = 1e-8, 1e2


class ContractViolation(RuntimeError):
    """Raised when an operation is used outside its allowed phase."""


@dataclass(frozen=True)
class TemperatureLadder:
    """Inverse temperatures ``0 <= beta_1 < ... < beta_L = 1``."""

    betas: tuple

    def __post_init__(self):
        b = tuple(float(v) for v in self.betas)
        object.__setattr__(self, "betas", b)
        if len(b) < 2:
            raise InvalidParameterError("a ladder needs at least two temperatures")
        if b[-1] != 1.0:
            raise InvalidParameterError(f"last inverse temperature must be 1, got {b[-1]}")
        if b[0] < 0 or any(b2 <= b1 for b1, b2 in zip(b, b[1:])):
            raise InvalidParameterError("inverse temperatures must be nonnegative and strictly increasing")

    @property
    def L(self) -> int:
        return len(self.betas)

    def as_array(self) -> np.ndarray:
        return np.array(self.betas)


def make_ladder(L: int, beta_min: float, scheme: str = "geometric") -> TemperatureLadder:
    """Build an ``L``-rung ladder ending at 1.

    ``geometric`` gives ``beta_l = beta_min ** ((L - l) / (L - 1))``. With
    ``beta_min == 0`` the first rung is 0 (a prior-sampling replica) and the
    remaining ``L - 1`` rungs are geometric from ``1e-5``.
    """
    if L < 2:
        raise InvalidParameterError(f"L must be >= 2, got {L}")
    if not 0 <= beta_min < 1:
        raise InvalidParameterError(f"beta_min must lie in [0, 1), got {beta_min}")
    if scheme == "linear":
        betas = np.linspace(beta_min, 1.0, L)
    elif scheme == "geometric":
        if beta_min > 0:
            betas = beta_min ** ((L - 1 - np.arange(L)) / (L - 1))
        elif L == 2:
            betas = np.array([0.0, 1.0])
        else:
            betas = np.concatenate([[0.0], 1e-5 ** ((L - 2 - np.arange(L - 1)) / (L - 2))])
    else:
        raise InvalidParameterError(f"unknown ladder scheme {scheme!r}")
    betas[-1] = 1.0
    return TemperatureLadder(tuple(betas))


def default_ladder() -> TemperatureLadder:
    return make_ladder(48, 0.0, "geometric")


@dataclass(frozen=True)
class RunPlan:
    """Iteration budget. Samples from iterations ``burn_in < t <= iterations`` are kept."""

    burn_in: int = 20000
    iterations: int = 50000
    thinning: int = 1
    adapt_during_burn_in: bool = True
    target_rate: float = 0.3
    adapt_window: int = 100
    adapt_gain: float = 0.1
    store_all_params: bool = True

    def __post_init__(self):
        if not 0 <= self.burn_in < self.iterations:
            raise InvalidParameterError(
                f"need 0 <= burn_in < iterations, got {self.burn_in}, {self.iterations}")
        if self.thinning < 1:
            raise InvalidParameterError(f"thinning must be >= 1, got {self.thinning}")
        if self.adapt_window < 1:
            raise InvalidParameterError("adapt_window must be >= 1")

    @property
    def n_retained(self) -> int:
        return (self.iterations - self.burn_in) // self.thinning


def initial_step_sizes(spec: PriorSpec, K: int, ladder: TemperatureLadder,
                       dataset: Dataset) -> np.ndarray:
    """Per-replica, per-parameter random-walk scales before adaptation.

    Prior standard deviations shrunk by the square root of the tempered
    photon budget, a rough proxy for how much the data narrows each
    parameter at that temperature.
    """
    prior_sd = np.array([f.std() for f in spec.families(K)])
    info = np.asarray(ladder.betas)[:, None] * float(np.sum(dataset.N)) * 1e-2
    return np.clip(0.5 * prior_sd[None, :] / np.sqrt(1.0 + info), STEP_MIN, STEP_MAX)


class ReplicaEnsemble:
    """Replica states, cached energies, step sizes and per-replica random streams."""

    def __init__(self, dataset: Dataset, spec: PriorSpec, K: int, ladder: TemperatureLadder,
                 seed: int, epsilon: float = DEFAULT_EPSILON,
                 step_sizes: Optional[np.ndarray] = None,
                 initial_states: Optional[np.ndarray] = None):
        if K < 0:
            raise InvalidParameterError(f"K must be nonnegative, got {K}")
        self.dataset = dataset
        self.spec = spec
        self.K = K
        self.ladder = ladder
        self.seed = seed
        self.epsilon = epsilon
        L, P, M = ladder.L, 3 * K + 1, dataset.M
        self.P = P

        children = np.random.SeedSequence(seed).spawn(L + 1)
        self.rngs = [np.random.default_rng(c) for c in children[:L]]
        self.exchange_rng = np.random.default_rng(children[L])

        if initial_states is None:
            theta = np.array([sample_prior_vector(spec, K, rng) for rng in self.rngs])
        else:
            theta = np.array(initial_states, dtype=float).reshape(L, P)
        self.theta = np.ascontiguousarray(theta)
        self.perm = np.arange(L, dtype=np.int64)
        self.phi = np.zeros((L, K, M))
        self.f = np.zeros((L, M))
        self.ll = np.zeros((L, M))
        self.llsum = np.zeros(L)

        self._x = dataset.x
        self._n = dataset.n
        self._N = dataset.N
        self.logc_sum = dataset.log_binom_sum()
        self.codes, self.pargs = spec.kernel_tables(K)
        self.betas = ladder.as_array()

        if step_sizes is None:
            step_sizes = initial_step_sizes(spec, K, ladder, dataset)
        self.step_sizes = np.ascontiguousarray(np.broadcast_to(step_sizes, (L, P)), dtype=float).copy()
        self.accepts = np.zeros((L, P), dtype=np.int64)
        self.tries = 0
        self.swap_attempts = np.zeros(max(L - 1, 0), dtype=np.int64)
        self.swap_accepts = np.zeros(max(L - 1, 0), dtype=np.int64)
        self.total_accepts = np.zeros((L, P), dtype=np.int64)
        self.total_tries = 0
        self.iteration = 0
        self.burn_in: Optional[int] = None
        self.refresh()

    @property
    def L(self) -> int:
        return self.ladder.L

    @property
    def M(self) -> int:
        return self.dataset.M

    def refresh(self):
        """Rebuild cached rates and log-likelihood terms from the parameters."""
        for s in range(self.L):
            self.llsum[s] = _kernels.refresh_slot(self.theta[s], self.phi[s], self.f[s], self.ll[s],
                                                  self._x, self._n, self._N, self.epsilon)

    @property
    def states(self) -> np.ndarray:
        """Parameter vectors ordered by temperature (hottest first)."""
        return self.theta[self.perm].copy()

    @property
    def energies(self) -> np.ndarray:
        return -(self.llsum[self.perm] + self.logc_sum) / self.M

    def state(self, l: int) -> SpectrumParams:
        return SpectrumParams.from_vector(self.theta[self.perm[l]])

    def acceptance_rates(self) -> np.ndarray:
        """Per-replica, per-parameter acceptance since the last adaptation window."""
        return self.accepts / max(self.tries, 1)

    def draw(self, T: int):
        """Pre-draw the random numbers for ``T`` iterations from each replica's stream."""
        L, P = self.L, self.P
        normals = np.empty((T, L, P))
        unifs = np.empty((T, L, P))
        for l, rng in enumerate(self.rngs):
            normals[:, l, :] = rng.standard_normal((T, P))
            unifs[:, l, :] = rng.random((T, P))
        swap_u = self.exchange_rng.random((T, max(L - 1, 1)))
        return normals, unifs, swap_u

    def advance(self, T: int, exchange: bool = True, record_row=None, rec_theta=None,
                rec_energy=None, record_all: bool = True):
        normals, unifs, swap_u = self.draw(T)
        if record_row is None:
            record_row = np.full(T, -1, dtype=np.int64)
            rec_theta = np.empty((1, 1, self.P))
            rec_energy = np.empty((1, self.L))
        _kernels.advance(self.theta, self.phi, self.f, self.ll, self.llsum, self.perm,
                         self._x, self._n, self._N, self.betas, self.step_sizes,
                         self.codes, self.pargs, normals, unifs, swap_u, self.epsilon,
                         self.logc_sum, self.accepts, self.swap_attempts, self.swap_accepts,
                         exchange, record_row, rec_theta, rec_energy, record_all)
        self.tries += T
        self.iteration += T


def metropolis_sweep(ensemble: ReplicaEnsemble, dataset: Optional[Dataset] = None,
                     spec: Optional[PriorSpec] = None) -> ReplicaEnsemble:
    """One Metropolis pass over every parameter of every replica (no exchange)."""
    _check_same(ensemble, dataset, spec)
    ensemble.advance(1, exchange=False)
    return ensemble


def exchange_step(ensemble: ReplicaEnsemble, dataset: Optional[Dataset] = None) -> ReplicaEnsemble:
    """Attempt adjacent swaps l = 1 .. L-1 in order using the cached energies."""
    _check_same(ensemble, dataset, None)
    u = ensemble.exchange_rng.random(max(ensemble.L - 1, 1))
    _kernels.exchange_pass(ensemble.llsum, ensemble.perm, ensemble.betas, u, ensemble.logc_sum,
                           ensemble.M, ensemble.swap_attempts, ensemble.swap_accepts)
    return ensemble


def _check_same(ensemble, dataset, spec):
    if dataset is not None and dataset is not ensemble.dataset and dataset != ensemble.dataset:
        raise ContractViolation("ensemble was built for a different dataset")
    if spec is not None and spec != ensemble.spec:
        raise ContractViolation("ensemble was built for a different prior")


def swap_log_ratio(M: int, beta_lo: float, beta_hi: float, e_lo: float, e_hi: float) -> float:
    """log v for swapping the states held at ``beta_lo`` and ``beta_hi``."""
    return M * (beta_hi - beta_lo) * (e_hi - e_lo)


def adapt_step_sizes(ensemble: ReplicaEnsemble, target_rate: float = 0.3,
                     gain: float = 0.1) -> ReplicaEnsemble:
    """Scale each step size by ``exp(gain * (rate - target_rate))`` and reset the window.

    Only legal during burn-in; retained samples must come from a fixed kernel.
    """
    if ensemble.burn_in is not None and ensemble.iteration > ensemble.burn_in:
        raise ContractViolation(
            f"step sizes are frozen after burn-in (iteration {ensemble.iteration} > {ensemble.burn_in})")
    rates = ensemble.acceptance_rates()
    ensemble.step_sizes *= np.exp(gain * (rates - target_rate))
    np.clip(ensemble.step_sizes, STEP_MIN, STEP_MAX, out=ensemble.step_sizes)
    _reset_window(ensemble)
    return ensemble


def _reset_window(ensemble: ReplicaEnsemble):
    ensemble.total_accepts += ensemble.accepts
    ensemble.total_tries += ensemble.tries
    ensemble.accepts[:] = 0
    ensemble.tries = 0


@dataclass
class SampleArchive:
    """Retained samples of every replica.

    ``params`` has shape (n_retained, L, P), or (n_retained, 1, P) holding
    only the beta = 1 replica when the plan disables full storage.
    ``energies`` always has shape (n_retained, L).
    """

    K: int
    ladder: TemperatureLadder
    plan: RunPlan
    seed: int
    params: np.ndarray
    energies: np.ndarray
    dataset_fingerprint: dict
    swap_attempts: np.ndarray
    swap_accepts: np.ndarray
    acceptance: np.ndarray
    step_sizes: np.ndarray
    extra: dict = field(default_factory=dict)

    @property
    def n_retained(self) -> int:
        return self.energies.shape[0]

    @property
    def target_params(self) -> np.ndarray:
        """Retained parameter vectors of the beta = 1 replica."""
        return self.params[:, -1, :]

    @property
    def swap_rates(self) -> np.ndarray:
        return self.swap_accepts / np.maximum(self.swap_attempts, 1)


def run(dataset: Dataset, spec: PriorSpec, K: int, ladder: Optional[TemperatureLadder] = None,
        plan: Optional[RunPlan] = None, seed: int = 0, epsilon: float = DEFAULT_EPSILON,
        ensemble: Optional[ReplicaEnsemble] = None) -> SampleArchive:
    """Sample all tempered posteriors for a ``K``-peak model."""
    ladder = ladder or default_ladder()
    plan = plan or RunPlan()
    if ensemble is None:
        ensemble = ReplicaEnsemble(dataset, spec, K, ladder, seed, epsilon)
    ensemble.burn_in = plan.burn_in
    L, P = ladder.L, 3 * K + 1

    n_keep = plan.n_retained
    rec_energy = np.empty((n_keep, L))
    rec_theta = np.empty((n_keep, L if plan.store_all_params else 1, P))

    window = plan.adapt_window
    t = 0
    while t < plan.iterations:
        # chunk boundaries at every window during burn-in and at burn_in itself
        if t < plan.burn_in:
            T = min(window, plan.burn_in - t)
        else:
            T = min(window, plan.iterations - t)
        ts = np.arange(t + 1, t + T + 1)
        offset = ts - plan.burn_in
        rows = np.where((offset > 0) & (offset % plan.thinning == 0), offset // plan.thinning - 1, -1)
        ensemble.advance(T, True, rows.astype(np.int64), rec_theta, rec_energy, plan.store_all_params)
        t += T
        if t <= plan.burn_in and plan.adapt_during_burn_in and T == window:
            adapt_step_sizes(ensemble, plan.target_rate, plan.adapt_gain)
        elif t == plan.burn_in or t > plan.burn_in and ensemble.tries >= window:
            _reset_window(ensemble)
        ensemble.refresh()

    _reset_window(ensemble)
    acceptance = ensemble.total_accepts / max(ensemble.total_tries, 1)
    return SampleArchive(
        K=K, ladder=ladder, plan=plan, seed=seed, params=rec_theta, energies=rec_energy,
        dataset_fingerprint=dataset.fingerprint(), swap_attempts=ensemble.swap_attempts.copy(),
        swap_accepts=ensemble.swap_accepts.copy(), acceptance=acceptance,
        step_sizes=ensemble.step_sizes.copy(),
    )
