"""
Command-line entry point: ``binospec generate|fit|select|table1``.

Settings come from an optional JSON config (``--config``); any flag given
on the command line overrides the matching config field. Every result
bundle embeds the fully resolved config, including derived seeds.

Exit codes: 0 success, 2 validation or parse error, 3 I/O error,
4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import emc, evidence, experiments
from . import io as bio
from .likelihood import InvalidDataError
from .priors import PRESET_PRIORS, PriorSpec
from .spectral import DEFAULT_EPSILON, InvalidParameterError, SpectrumParams
from .synthetic import PRESETS, GenerationConfig, generate, saturation_fraction

logger = logging.getLogger("binospec")

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_INTERNAL = 0, 2, 3, 4
FULL_REPLICATES = 50


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    mode: str = "select"
    dataset: Optional[str] = None
    preset: Optional[str] = None
    truth: Optional[dict] = None
    grid: Optional[dict] = None
    photons: Optional[int] = None
    photon_counts: list = field(default_factory=lambda: list(experiments.TABLE1_PHOTONS))
    prior: Optional[dict] = None
    ladder: dict = field(default_factory=lambda: {"L": 48, "beta_min": 0.0, "scheme": "geometric"})
    plan: dict = field(default_factory=lambda: {"burn_in": 20000, "iterations": 50000, "thinning": 1})
    k: Optional[int] = None
    k_range: list = field(default_factory=lambda: [1, 5])
    seed: int = 0
    replicates: int = 10
    out: str = "results"
    workers: int = 1
    epsilon: float = DEFAULT_EPSILON
    hist_bins: int = 200

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {', '.join(sorted(unknown))}")
        cfg = cls()
        for k, v in d.items():
            if k in ("ladder", "plan"):
                v = {**getattr(cfg, k), **v}
            setattr(cfg, k, v)
        return cfg

    def to_dict(self) -> dict:
        # where results go and how many processes compute them do not change
        # the results, so they stay out of the embedded config
        d = asdict(self)
        del d["out"], d["workers"]
        if self.mode == "generate":
            del d["dataset"]  # an output location there
        return d

    # resolved pieces -------------------------------------------------

    def prior_spec(self) -> PriorSpec:
        if self.prior is not None:
            return PriorSpec.from_dict(self.prior)
        if self.preset is None:
            raise ConfigError("a prior is required: pass --preset or a 'prior' config entry")
        return PRESET_PRIORS[self.preset]()

    def generation_config(self) -> GenerationConfig:
        if self.preset is None and self.truth is None:
            raise ConfigError("generate needs --preset or an explicit 'truth'")
        base = PRESETS[self.preset]() if self.preset else GenerationConfig(SpectrumParams((), 0.0))
        if self.truth is not None:
            t = self.truth
            base = replace(base, truth=SpectrumParams.from_arrays(t.get("a", []), t.get("mu", []),
                                                                  t.get("sigma", []), t["B"]))
        if self.grid is not None:
            base = replace(base, **{k: self.grid[k] for k in ("x_min", "x_max", "M", "x") if k in self.grid})
        if self.photons is None:
            raise ConfigError("--photons is required")
        return base.with_photons(int(self.photons), int(self.seed))

    def ladder_obj(self) -> emc.TemperatureLadder:
        lad = self.ladder
        if "betas" in lad:
            return emc.TemperatureLadder(tuple(lad["betas"]))
        return emc.make_ladder(int(lad["L"]), float(lad["beta_min"]), lad.get("scheme", "geometric"))

    def plan_obj(self, store_all: bool = True) -> emc.RunPlan:
        p = self.plan
        return emc.RunPlan(burn_in=int(p["burn_in"]), iterations=int(p["iterations"]),
                           thinning=int(p.get("thinning", 1)), store_all_params=store_all)

    def k_values(self) -> list:
        if self.k is not None:
            return [int(self.k)]
        a, b = self.k_range
        if not 1 <= int(a) <= int(b):
            raise ConfigError(f"invalid K range {a}..{b}")
        return list(range(int(a), int(b) + 1))


def _k_range(text: str):
    try:
        a, b = text.split("..")
        return [int(a), int(b)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A..B, got {text!r}") from None


def _int_list(text: str):
    return [int(v) for v in text.split(",")]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="binospec", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="mode", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config file")
    common.add_argument("--dataset", help="dataset CSV (input for fit/select, output for generate)")
    common.add_argument("--preset", choices=sorted(PRESETS))
    common.add_argument("--photons", type=_int_list, help="photons per point (comma list for table1)")
    k = common.add_mutually_exclusive_group()
    k.add_argument("--k", type=int)
    k.add_argument("--k-range", type=_k_range, dest="k_range")
    common.add_argument("--replicas", type=int, help="number of temperatures L")
    common.add_argument("--beta-min", type=float, dest="beta_min")
    common.add_argument("--burn-in", type=int, dest="burn_in")
    common.add_argument("--iters", type=int, help="total iterations T2")
    common.add_argument("--thinning", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--replicates", type=int)
    common.add_argument("--full", action="store_true", help=f"table1 with {FULL_REPLICATES} replicates")
    common.add_argument("--workers", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")
    for name, text in [("generate", "write a synthetic dataset"), ("fit", "sample a fixed-K model"),
                       ("select", "compare K values by free energy"),
                       ("table1", "model-selection frequency study")]:
        sub.add_parser(name, parents=[common], help=text)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.from_dict(bio.read_json(args.config)) if args.config else RunConfig()
    cfg.mode = args.mode
    for name in ("dataset", "preset", "k", "k_range", "seed", "replicates", "out", "workers"):
        v = getattr(args, name)
        if v is not None:
            setattr(cfg, name, v)
    if args.k is not None:
        cfg.k_range = [args.k, args.k]
    if args.photons is not None:
        if args.mode == "table1":
            cfg.photon_counts = args.photons
        elif len(args.photons) != 1:
            raise ConfigError("--photons takes a single value outside table1")
        else:
            cfg.photons = args.photons[0]
    for flag, key in (("replicas", "L"), ("beta_min", "beta_min")):
        if getattr(args, flag) is not None:
            cfg.ladder = {**cfg.ladder, key: getattr(args, flag)}
    for flag, key in (("burn_in", "burn_in"), ("iters", "iterations"), ("thinning", "thinning")):
        if getattr(args, flag) is not None:
            cfg.plan = {**cfg.plan, key: getattr(args, flag)}
    if args.full:
        cfg.replicates = FULL_REPLICATES
    if cfg.mode in ("fit",) and cfg.k is None:
        raise ConfigError("fit needs --k")
    return cfg


# commands --------------------------------------------------------------

def cmd_generate(cfg: RunConfig) -> int:
    gen = cfg.generation_config()
    dataset = generate(gen, epsilon=cfg.epsilon)
    path = Path(cfg.dataset) if cfg.dataset else Path(cfg.out) / "dataset.csv"
    bio.write_dataset(path, dataset)
    meta = {"config": cfg.to_dict(), "truth": gen.truth.to_vector().tolist(),
            "saturation_fraction": saturation_fraction(gen), "fingerprint": dataset.fingerprint()}
    bio.write_json(path.with_suffix(".json"), meta)
    print(f"wrote {path}: M={dataset.M} N={gen.photons_per_point} "
          f"saturation_fraction={meta['saturation_fraction']:.4f}")
    return EXIT_OK


def _write_model_tables(out: Path, dataset, spec: PriorSpec, result: evidence.ModelResult, bins: int):
    arch = result.archive
    K = result.K
    header, rows = experiments.samples_rows(arch)
    bio.write_table(out / f"samples_K{K}.csv", header, rows)
    header, rows = experiments.curve_rows(dataset.x, arch, result.map_params)
    bio.write_table(out / f"curve_K{K}.csv", header, rows)
    if K > 0:
        header, rows = experiments.mu_histogram_rows(arch, spec.position.low, spec.position.high, bins)
        bio.write_table(out / f"hist_mu_K{K}.csv", header, rows)


def _summary(report: evidence.ModelSelectionReport) -> str:
    lines = [f"selected K = {report.selected_k}", "", "K  F(K)  stderr  p(K|D)"]
    for k in sorted(report.results):
        r = report.results[k]
        lines.append(f"{k}  {r.free_energy:.4f}  {r.stderr:.4f}  {report.posterior[k]:.6g}")
    lines.append("")
    for k in sorted(report.results):
        p = report.results[k].map_params
        lines.append(f"K={k} MAP: a={np.round(p.a, 5).tolist()} mu={np.round(p.mu, 5).tolist()} "
                     f"sigma={np.round(p.sigma, 5).tolist()} B={p.background:.5f}")
    return "\n".join(lines) + "\n"


def _run_models(cfg: RunConfig) -> int:
    if not cfg.dataset:
        raise ConfigError("--dataset is required")
    dataset = bio.read_dataset(cfg.dataset)
    spec = cfg.prior_spec()
    ks = cfg.k_values()
    report = evidence.select_model(dataset, spec, ks, cfg.ladder_obj(), cfg.plan_obj(), cfg.seed,
                                   cfg.epsilon, keep_archives=True)
    out = Path(cfg.out)
    for k in ks:
        _write_model_tables(out, dataset, spec, report.results[k], cfg.hist_bins)
    resolved = cfg.to_dict()
    resolved["derived_seeds"] = {str(k): report.results[k].seed for k in ks}
    body = report.to_dict()
    for m in body["models"]:
        arch = report.results[m["K"]].archive
        m["swap_acceptance"] = arch.swap_rates.tolist()
        m["target_acceptance"] = arch.acceptance[-1].tolist()
    bio.write_json(out / "report.json", {"config": resolved, "dataset": dataset.fingerprint(),
                                         "prior": spec.to_dict(), "result": body})
    text = _summary(report)
    bio.atomic_write_text(out / "summary.txt", text)
    print(text, end="")
    return EXIT_OK


def cmd_fit(cfg: RunConfig) -> int:
    return _run_models(cfg)


def cmd_select(cfg: RunConfig) -> int:
    return _run_models(cfg)


def cmd_table1(cfg: RunConfig) -> int:
    if cfg.replicates < 1:
        raise ConfigError("replicates must be >= 1")
    if cfg.replicates >= FULL_REPLICATES:
        warnings.warn(f"table1 with {cfg.replicates} replicates runs "
                      f"{cfg.replicates * len(cfg.photon_counts) * len(cfg.k_values())} samplers; "
                      "expect a very long runtime", RuntimeWarning, stacklevel=1)
    if cfg.preset is None:
        raise ConfigError("table1 needs --preset")
    cfg.photons = cfg.photons or 1
    base = cfg.generation_config()
    result = experiments.table1(base, cfg.prior_spec(), cfg.replicates, cfg.photon_counts, cfg.k_values(),
                                cfg.ladder_obj(), cfg.plan_obj(store_all=False), cfg.seed, cfg.epsilon,
                                workers=cfg.workers)
    out = Path(cfg.out)
    header = ["N"] + [f"K={k}" for k in result.k_values]
    rows = [[N] + result.counts[i].tolist() for i, N in enumerate(result.photon_counts)]
    if np.any(result.counts.sum(axis=1) != cfg.replicates):
        raise AssertionError("frequency rows do not sum to the replicate count")
    bio.write_table(out / "table1.csv", header, rows)
    bio.write_json(out / "table1.json", {"config": cfg.to_dict(), "result": result.to_dict()})
    print(bio.table_text(header, rows), end="")
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "fit": cmd_fit, "select": cmd_select, "table1": cmd_table1}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[cfg.mode](cfg)
    except (bio.ParseError, InvalidDataError, InvalidParameterError, ConfigError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (emc.ContractViolation, AssertionError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
