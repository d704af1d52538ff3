"""Command-line entry point.

Subcommands: fit, sample, compare, rates, verify.  Every command is a
deterministic function of (config, seed); per-task RNG streams are derived
from the run seed and the task name so that adding a task never perturbs the
others.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import data as bundled_data
from .bench import emit_report, error_table, rate_experiment, summarize
from .battery import exponential_rate_model
from .exceptions import ConfigError, SkewfitError
from .mcmc import McmcConfig, hmc_sample, rwm_sample
from .models import Family, GlmModel, load_dataset
from .skew import (
    SkewnessFactor,
    SkewSymmetricApproximation,
    save_samples_csv,
)
from .symmetric import (
    approx_from_dict,
    approx_to_dict,
    build_snp,
    fit_gep,
    fit_gvb,
    fit_laplace,
    GvbOptions,
)
from .verify import run_verification

EXIT_OK = 0
EXIT_SUITE_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_NUMERIC_FAILURE = 3

VALID_KINDS = ("laplace", "gvb", "gep", "snp")


def task_seed(seed: int, task: str) -> int:
    """Independent per-task stream: hash of (seed, task name)."""
    digest = hashlib.sha256(f"{seed}:{task}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def worker_cap() -> int:
    raw = os.environ.get("SKEWFIT_THREADS", "")
    if not raw:
        return 1
    try:
        cap = int(raw)
    except ValueError as exc:
        raise ConfigError(f"SKEWFIT_THREADS must be an integer, got {raw!r}") from exc
    if cap < 1:
        raise ConfigError("SKEWFIT_THREADS must be >= 1")
    return cap


@dataclass
class RunConfig:
    model: dict
    approximations: list
    mcmc: McmcConfig
    output_dir: Path
    seed: int
    n_draws: int = 10000
    rates: dict = field(default_factory=dict)


def _require(doc, key, context):
    if key not in doc:
        raise ConfigError(f"missing required field {key!r} in {context}")
    return doc[key]


def load_config(path, overrides=None) -> RunConfig:
    """Parse and validate a TOML or JSON run configuration."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_bytes()
    if path.suffix == ".json":
        doc = json.loads(text)
    else:
        try:
            doc = tomllib.loads(text.decode())
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config parse error: {exc}") from exc
    overrides = overrides or {}
    seed = overrides.get("seed", doc.get("seed"))
    if seed is None:
        raise ConfigError("missing required field 'seed'")
    out = overrides.get("out", doc.get("output_dir"))
    if out is None:
        raise ConfigError("missing required field 'output_dir'")

    model_doc = _require(doc, "model", "config")
    dataset = _require(model_doc, "dataset", "model")
    if not str(dataset).startswith("bundled:") and not Path(dataset).exists():
        raise ConfigError(f"dataset does not exist: {dataset}")
    fam = _require(model_doc, "family", "model")
    try:
        Family(fam)
    except ValueError as exc:
        raise ConfigError(f"unknown family {fam!r} in model") from exc

    approx_docs = overrides.get("approx") or doc.get("approximations", [])
    if isinstance(approx_docs, str):
        approx_docs = [{"kind": k} for k in approx_docs.split(",") if k]
    approx_docs = [{"kind": a} if isinstance(a, str) else a for a in approx_docs]
    for a in approx_docs:
        kind = _require(a, "kind", "approximations")
        if kind not in VALID_KINDS:
            raise ConfigError(
                f"invalid approximation kind {kind!r}; expected one of {VALID_KINDS}"
            )

    mcmc_doc = doc.get("mcmc", {})
    try:
        mcmc = McmcConfig(seed=task_seed(int(seed), "mcmc"), **mcmc_doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid mcmc section: {exc}") from exc

    return RunConfig(
        model=model_doc,
        approximations=approx_docs,
        mcmc=mcmc,
        output_dir=Path(out),
        seed=int(seed),
        n_draws=int(doc.get("n_draws", 10000)),
        rates=doc.get("rates", {}),
    )


def build_model(cfg: RunConfig) -> GlmModel:
    md = cfg.model
    dataset = md["dataset"]
    prior_var = float(md.get("prior_variance", 4.0))
    if dataset == "bundled:substance_use":
        return bundled_data.load_substance_use(prior_variance=prior_var)
    ds = load_dataset(
        dataset, md.get("response_column", "y"), bool(md.get("add_intercept", False))
    )
    d = ds.predictors.shape[1]
    return GlmModel(
        design=ds.predictors,
        response=ds.responses,
        family=Family(md["family"]),
        prior_mean=np.full(d, float(md.get("prior_mean", 0.0))),
        prior_cov_diag=np.full(d, prior_var),
        column_names=ds.column_names,
    )


def _fit_one(kind: str, model: GlmModel, seed: int):
    spec = model.as_spec()
    if kind == "laplace":
        return fit_laplace(spec, np.zeros(spec.d))
    if kind == "gvb":
        lap = fit_laplace(spec, np.zeros(spec.d))
        return fit_gvb(spec, init=lap, opts=GvbOptions(seed=seed))
    if kind == "gep":
        return fit_gep(model)
    if kind == "snp":
        lap = fit_laplace(spec, np.zeros(spec.d))
        return build_snp(spec, lap)
    raise ConfigError(f"invalid approximation kind {kind!r}")


def _skew_doc(kind: str) -> dict:
    return {"kind": f"skew-{kind}", "base_artifact": f"{kind}.json"}


def cmd_fit(cfg: RunConfig, quiet: bool = False) -> int:
    """Fit every requested approximation; write base + skew artifacts."""
    model = build_model(cfg)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    failures = []
    for a in cfg.approximations:
        kind = a["kind"]
        try:
            approx = _fit_one(kind, model, task_seed(cfg.seed, f"fit:{kind}"))
        except SkewfitError as exc:
            failures.append((kind, str(exc)))
            if not quiet:
                print(f"fit {kind}: FAILED ({exc})", file=sys.stderr)
            continue
        (cfg.output_dir / f"{kind}.json").write_text(
            json.dumps(approx_to_dict(approx), sort_keys=True)
        )
        (cfg.output_dir / f"skew-{kind}.json").write_text(
            json.dumps(_skew_doc(kind), sort_keys=True)
        )
        if not quiet:
            print(f"fit {kind}: ok (center {np.round(approx.center, 4).tolist()})")
    return EXIT_NUMERIC_FAILURE if failures else EXIT_OK


def _load_approx(cfg: RunConfig, model: GlmModel, name: str):
    """Load a fitted artifact by name ('laplace', 'skew-laplace', ...),
    fitting on demand when it is missing."""
    skew = name.startswith("skew-")
    base_kind = name[5:] if skew else name
    path = cfg.output_dir / f"{base_kind}.json"
    if path.exists():
        base = approx_from_dict(json.loads(path.read_text()))
    else:
        base = _fit_one(base_kind, model, task_seed(cfg.seed, f"fit:{base_kind}"))
    if not skew:
        return base
    factor = SkewnessFactor(model.as_spec(), base.center, glm=model)
    return SkewSymmetricApproximation(base, factor)


def cmd_sample(cfg: RunConfig, approx_name: str, n: int, quiet=False) -> int:
    model = build_model(cfg)
    approx = _load_approx(cfg, model, approx_name)
    rng = np.random.default_rng(task_seed(cfg.seed, f"sample:{approx_name}"))
    draws = approx.draw(rng, n)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    out = cfg.output_dir / f"samples_{approx_name}.csv"
    save_samples_csv(out, draws, model.column_names)
    if not quiet:
        print(f"wrote {n} draws to {out}")
    return EXIT_OK


def cmd_compare(cfg: RunConfig, quiet: bool = False) -> int:
    """Error table of each approximation (and its skewed form) vs MCMC."""
    model = build_model(cfg)
    spec = model.as_spec()
    sampler = hmc_sample if cfg.mcmc.algorithm == "hmc" else rwm_sample
    init = _fit_one("laplace", model, 0).center  # start chains at the MAP
    chains, diags = sampler(spec, cfg.mcmc, init=init)
    if np.any(np.nan_to_num(diags.r_hat, nan=1.0) > 1.05):
        print(
            f"baseline not converged: max R-hat {np.nanmax(diags.r_hat):.4f}",
            file=sys.stderr,
        )
        return EXIT_NUMERIC_FAILURE
    baseline = summarize(chains.reshape(-1, spec.d), model)
    summaries = {}
    for a in cfg.approximations:
        for name in (a["kind"], f"skew-{a['kind']}"):
            approx = _load_approx(cfg, model, name)
            rng = np.random.default_rng(task_seed(cfg.seed, f"draw:{name}"))
            summaries[name] = summarize(approx.draw(rng, cfg.n_draws), model)
    table = error_table(summaries, baseline)
    doc = emit_report(
        cfg.output_dir,
        tables={"compare": table},
        config={
            "seed": cfg.seed,
            "n_draws": cfg.n_draws,
            "mcmc": {
                "n_chains": cfg.mcmc.n_chains,
                "n_keep": cfg.mcmc.n_keep,
                "algorithm": cfg.mcmc.algorithm,
            },
            "diagnostics": {
                "max_r_hat": float(np.nanmax(diags.r_hat)),
                "min_ess": float(np.min(diags.ess)),
            },
        },
    )
    if not quiet:
        print(table.to_csv(), end="")
        for col in table.columns:
            print(f"best {col}: {table.best_in_column(col)}")
    return EXIT_OK


def cmd_rates(cfg: RunConfig, quiet: bool = False) -> int:
    rc = cfg.rates
    n_list = rc.get("sample_sizes", [25, 50, 100, 200, 400, 800, 1600, 3200, 6400])
    curves = rate_experiment(
        exponential_rate_model,
        n_list,
        variants=tuple(rc.get("variants", ("f1", "q1", "q2"))),
        n_replicates=int(rc.get("n_replicates", 20)),
        seed=task_seed(cfg.seed, "rates"),
        grid_points=int(rc.get("grid_points", 4096)),
    )
    emit_report(cfg.output_dir, curves=curves, config={"seed": cfg.seed, "rates": rc})
    if not quiet:
        for v, c in sorted(curves.items()):
            slope = "undefined" if c.fitted_slope is None else f"{c.fitted_slope:+.3f}"
            print(f"{v}: slope {slope} over n={c.sample_sizes}")
        if any(len(c.sample_sizes) < 2 for c in curves.values()):
            print("single sample size: slopes undefined, curves only")
    return EXIT_OK


def cmd_verify(cfg: RunConfig, quiet: bool = False) -> int:
    doc = run_verification(seed=task_seed(cfg.seed, "verify"))
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    (cfg.output_dir / "verify.json").write_text(json.dumps(doc, indent=2))
    if not quiet:
        for r in doc["results"]:
            status = "ok" if r["passed"] else "FAIL"
            print(f"{r['case']}: {r['check']}: {status}")
    return EXIT_OK if doc["passed"] else EXIT_SUITE_FAILURE


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="skewfit")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--approx", default=None, help="comma-separated kinds")
    p.add_argument("--quiet", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("fit")
    sp = sub.add_parser("sample")
    sp.add_argument("name", help="approximation artifact name, e.g. skew-laplace")
    sp.add_argument("--n", type=int, default=10000)
    sub.add_parser("compare")
    sub.add_parser("rates")
    sub.add_parser("verify")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        worker_cap()  # validate the env var before any compute
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.out is not None:
            overrides["out"] = args.out
        if args.approx is not None:
            overrides["approx"] = args.approx
        cfg = load_config(args.config, overrides)
        if args.command == "fit":
            return cmd_fit(cfg, args.quiet)
        if args.command == "sample":
            return cmd_sample(cfg, args.name, args.n, args.quiet)
        if args.command == "compare":
            return cmd_compare(cfg, args.quiet)
        if args.command == "rates":
            return cmd_rates(cfg, args.quiet)
        if args.command == "verify":
            return cmd_verify(cfg, args.quiet)
        raise AssertionError(args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except SkewfitError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC_FAILURE


if __name__ == "__main__":
    sys.exit(main())
