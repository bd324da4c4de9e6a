"""
Result tables and the model-selection frequency study.

``table1`` generates ``R`` datasets per photon budget, runs model selection
over K = 1..5 on each and counts how often every K wins. Every task seed
derives from the master seed and the task's (N, replicate) index, so the
matrix is identical however the tasks are scheduled.
"""

from __future__ import annotations

import logging
from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import emc, evidence
from .priors import PriorSpec
from .spectral import SpectrumParams, absorption_rate
from .synthetic import GenerationConfig, generate

logger = logging.getLogger(__name__)

TABLE1_PHOTONS = (10000, 1000, 100, 10)
TABLE1_K = (1, 2, 3, 4, 5)


def sorted_peak_samples(theta: np.ndarray) -> np.ndarray:
    """Reorder each sample's peaks by position. Shape (n, K, 3)."""
    n = theta.shape[0]
    K = (theta.shape[1] - 1) // 3
    tri = theta[:, :-1].reshape(n, K, 3)
    order = np.argsort(tri[:, :, 1], axis=1, kind="stable")
    return np.take_along_axis(tri, order[:, :, None], axis=1)


def samples_rows(archive: emc.SampleArchive):
    """Header and rows of the beta = 1 samples with peaks sorted by position."""
    K = archive.K
    theta = archive.target_params
    tri = sorted_peak_samples(theta)
    header = [f"{name}_{k + 1}" for k in range(K) for name in ("a", "mu", "sigma")] + ["B", "energy"]
    rows = np.column_stack([tri.reshape(len(theta), -1), theta[:, -1], archive.energies[:, -1]])
    return header, rows


def posterior_mean_params(archive: emc.SampleArchive) -> SpectrumParams:
    tri = sorted_peak_samples(archive.target_params).mean(axis=0)
    return SpectrumParams.from_arrays(tri[:, 0], tri[:, 1], tri[:, 2],
                                      archive.target_params[:, -1].mean())


def curve_rows(x: np.ndarray, archive: emc.SampleArchive, map_params: SpectrumParams,
               max_samples: int = 1000):
    """Fitted absorption rate: MAP curve, posterior mean curve and central 90% band."""
    theta = archive.target_params
    idx = np.unique(np.linspace(0, len(theta) - 1, min(max_samples, len(theta))).astype(int))
    curves = np.array([absorption_rate(x, SpectrumParams.from_vector(theta[i])) for i in idx])
    lo, hi = np.quantile(curves, [0.05, 0.95], axis=0)
    header = ["x", "map_rate", "mean_rate", "q05_rate", "q95_rate"]
    rows = np.column_stack([x, absorption_rate(x, map_params), curves.mean(axis=0), lo, hi])
    return header, rows


def mu_histogram_rows(archive: emc.SampleArchive, low: float, high: float, bins: int = 200):
    """Histograms of each sorted peak position over the beta = 1 samples."""
    tri = sorted_peak_samples(archive.target_params)
    edges = np.linspace(low, high, bins + 1)
    counts = [np.histogram(tri[:, k, 1], bins=edges)[0] for k in range(archive.K)]
    header = ["bin_low", "bin_high"] + [f"count_mu_{k + 1}" for k in range(archive.K)]
    rows = [[lo, hi] + [int(c[i]) for c in counts] for i, (lo, hi) in enumerate(zip(edges[:-1], edges[1:]))]
    return header, rows


@dataclass
class Table1Result:
    photon_counts: tuple
    k_values: tuple
    counts: np.ndarray  # (len(photon_counts), len(k_values))
    selected: dict  # N -> list of selected K per replicate
    seeds: dict  # N -> list of (data_seed, select_seed)
    free_energies: dict  # N -> list of {K: F}

    def to_dict(self) -> dict:
        return {
            "photon_counts": list(self.photon_counts),
            "k_values": list(self.k_values),
            "counts": self.counts.tolist(),
            "replicates": [
                {"N": N, "replicate": r, "data_seed": ds, "select_seed": ss, "selected_k": k,
                 "free_energies": {str(kk): v for kk, v in fe.items()}}
                for N in self.photon_counts
                for r, ((ds, ss), k, fe) in enumerate(zip(self.seeds[N], self.selected[N],
                                                         self.free_energies[N]))
            ],
        }


def _select_task(config: GenerationConfig, spec: PriorSpec, k_values, ladder, plan, select_seed, epsilon):
    dataset = generate(config)
    rep = evidence.select_model(dataset, spec, k_values, ladder, plan, select_seed, epsilon)
    return rep.selected_k, rep.free_energies


def table1(base: GenerationConfig, spec: PriorSpec, replicates: int,
           photon_counts: Sequence[int] = TABLE1_PHOTONS, k_values: Sequence[int] = TABLE1_K,
           ladder: Optional[emc.TemperatureLadder] = None, plan: Optional[emc.RunPlan] = None,
           seed: int = 0, epsilon: float = 1e-12, workers: int = 1,
           executor: Optional[Executor] = None) -> Table1Result:
    """Frequency with which each K is selected, per photon budget."""
    if replicates < 1:
        raise ValueError(f"replicates must be >= 1, got {replicates}")
    ladder = ladder or emc.default_ladder()
    plan = plan or emc.RunPlan(store_all_params=False)
    k_values = tuple(sorted(k_values))
    photon_counts = tuple(int(N) for N in photon_counts)
    tasks = {}
    for N in photon_counts:
        for r in range(replicates):
            data_seed = evidence.derive_seed(seed, N, r, 0)
            select_seed = evidence.derive_seed(seed, N, r, 1)
            tasks[N, r] = (base.with_photons(N, data_seed), select_seed)

    own = executor is None and workers > 1
    pool = ProcessPoolExecutor(workers) if own else executor
    try:
        if pool is None:
            results = {key: _select_task(cfg, spec, k_values, ladder, plan, ss, epsilon)
                       for key, (cfg, ss) in tasks.items()}
        else:
            futs = {key: pool.submit(_select_task, cfg, spec, k_values, ladder, plan, ss, epsilon)
                    for key, (cfg, ss) in tasks.items()}
            results = {key: f.result() for key, f in futs.items()}
    finally:
        if own:
            pool.shutdown()

    counts = np.zeros((len(photon_counts), len(k_values)), dtype=np.int64)
    selected, seeds, fes = {}, {}, {}
    for i, N in enumerate(photon_counts):
        selected[N], seeds[N], fes[N] = [], [], []
        for r in range(replicates):
            k, fe = results[N, r]
            counts[i, k_values.index(k)] += 1
            selected[N].append(k)
            seeds[N].append((tasks[N, r][0].seed, tasks[N, r][1]))
            fes[N].append(fe)
        logger.info("N=%d: %s", N, dict(zip(k_values, counts[i].tolist())))
    return Table1Result(photon_counts, k_values, counts, selected, seeds, fes)

