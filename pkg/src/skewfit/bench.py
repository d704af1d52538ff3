"""Benchmark harness: functional summaries, error tables against an MCMC
baseline, and the total-variation rate experiment on a shrinking 1D family.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .exceptions import DimensionError, DomainTooSmallError
from .divergences import GridSpec, grid_normalized, tv_grid
from .models import GlmModel, ModelSpec, glm_mean, log_unnorm_posterior
from .skew import SkewnessFactor, SkewSymmetricApproximation
from .symmetric import LaplaceOptions, build_snp, fit_laplace

Array = np.ndarray

FUNCTIONAL_COLUMNS = (
    "q1.theta",
    "median.theta",
    "q3.theta",
    "mean.theta",
    "q1.mu",
    "median.mu",
    "q3.mu",
    "mean.mu",
)


@dataclass
class FunctionalSummary:
    """Quartiles and means of theta coordinates and of the fitted means mu."""

    q1_theta: Array
    median_theta: Array
    q3_theta: Array
    mean_theta: Array
    q1_mu: Optional[Array]
    median_mu: Optional[Array]
    q3_mu: Optional[Array]
    mean_mu: Optional[Array]
    n_samples: int
    warnings: list = field(default_factory=list)


def summarize(samples: Array, model: Optional[GlmModel] = None) -> FunctionalSummary:
    """Empirical quartiles (linear-interpolation definition) and means.

    With a GLM, mu_i(theta) is evaluated per draw and the same summaries are
    taken over the induced draws, one set per observation.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2:
        raise DimensionError("samples must be a (n, d) array")
    notes = []
    if samples.shape[0] < 1000:
        notes.append(f"only {samples.shape[0]} samples; summaries are imprecise")
    q1, med, q3 = np.quantile(samples, [0.25, 0.5, 0.75], axis=0, method="linear")
    mean = samples.mean(axis=0)
    mu_stats = (None, None, None, None)
    if model is not None:
        mu = glm_mean(model.family, model.linpred(samples))  # (n_draws, n_obs)
        mq1, mmed, mq3 = np.quantile(mu, [0.25, 0.5, 0.75], axis=0, method="linear")
        mu_stats = (mq1, mmed, mq3, mu.mean(axis=0))
    return FunctionalSummary(
        q1, med, q3, mean, *mu_stats, n_samples=samples.shape[0], warnings=notes
    )


@dataclass
class ErrorTable:
    """Rows of averaged absolute errors, one per approximation name."""

    columns: tuple = FUNCTIONAL_COLUMNS
    rows: dict = field(default_factory=dict)

    def best_in_column(self, col: str) -> str:
        i = self.columns.index(col)
        return min(self.rows, key=lambda name: self.rows[name][i])

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(("approximation",) + self.columns)
        for name, vals in self.rows.items():
            wr.writerow([name] + [repr(v) for v in vals])
        return buf.getvalue()


def _summary_errors(approx: FunctionalSummary, base: FunctionalSummary):
    pairs = [
        (approx.q1_theta, base.q1_theta),
        (approx.median_theta, base.median_theta),
        (approx.q3_theta, base.q3_theta),
        (approx.mean_theta, base.mean_theta),
        (approx.q1_mu, base.q1_mu),
        (approx.median_mu, base.median_mu),
        (approx.q3_mu, base.q3_mu),
        (approx.mean_mu, base.mean_mu),
    ]
    out = []
    for a, b in pairs:
        if a is None or b is None:
            out.append(np.nan)
            continue
        a, b = np.asarray(a), np.asarray(b)
        if a.shape != b.shape:
            raise DimensionError("summary shapes differ between approx and baseline")
        out.append(float(np.mean(np.abs(a - b))))
    return out


def error_table(summaries: dict, baseline: FunctionalSummary) -> ErrorTable:
    """Averaged |approx - baseline| per functional, averaged over coordinates
    (theta columns) or observations (mu columns)."""
    table = ErrorTable()
    for name, s in summaries.items():
        table.rows[name] = _summary_errors(s, baseline)
    return table


# ---------------------------------------------------------------------------
# Rate experiment
# ---------------------------------------------------------------------------


@dataclass
class RateCurve:
    variant: str
    sample_sizes: list
    tv_values: list
    fitted_slope: Optional[float]
    slope_stderr: Optional[float]

    def __post_init__(self):
        n = np.asarray(self.sample_sizes)
        if np.any(np.diff(n) <= 0):
            raise ValueError("sample_sizes must be strictly increasing")

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "sample_sizes": list(map(int, self.sample_sizes)),
            "tv_values": list(map(float, self.tv_values)),
            "fitted_slope": self.fitted_slope,
            "slope_stderr": self.slope_stderr,
        }


def _fit_loglog(n_list, tv_values):
    if len(n_list) < 2:
        return None, None
    x = np.log(np.asarray(n_list, dtype=float))
    y = np.log(np.asarray(tv_values, dtype=float))
    A = np.stack([x, np.ones_like(x)], axis=1)
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    slope = float(coef[0])
    dof = len(x) - 2
    if dof <= 0 or res.size == 0:
        return slope, 0.0
    s2 = float(res[0]) / dof
    stderr = float(np.sqrt(s2 / np.sum((x - x.mean()) ** 2)))
    return slope, stderr


def _tv_with_shrink(model: ModelSpec, approx_logpdf, center, cov, points) -> float:
    """tv_grid against the normalized posterior, shrinking the grid if the
    posterior is so concentrated that the default box loses mass."""
    for width in (12.0, 12.0, 12.0):
        grid = GridSpec(
            tuple(np.atleast_1d(center) - width * np.sqrt(np.diag(np.atleast_2d(cov)))),
            tuple(np.atleast_1d(center) + width * np.sqrt(np.diag(np.atleast_2d(cov)))),
            points,
        )
        try:
            log_post = grid_normalized(
                lambda t: log_unnorm_posterior(model, t), grid
            )
            return tv_grid(log_post, approx_logpdf, grid).value
        except DomainTooSmallError:
            cov = cov * 0.25  # sd halves: the box follows the concentration
            continue
    raise DomainTooSmallError("grid mass deficit persisted after shrinking", deficit=np.nan)


def rate_experiment(
    model_family: Callable[[int, np.random.Generator], ModelSpec],
    n_list,
    variants=("f1", "q1", "q2"),
    n_replicates: int = 20,
    seed: int = 0,
    grid_points: int = 4096,
    glm_for: Optional[Callable] = None,
) -> dict:
    """Median-TV convergence curves for the symmetric Laplace base (f1), its
    skew perturbation (q1), and the skewed fourth-order base (q2).

    model_family(n, rng) must simulate data of size n and return a 1D (or 2D)
    spec with analytic third/fourth derivatives when 'q2' is requested.
    Replicates use per-(n, replicate) seeds so jobs are order-independent.
    """
    n_list = sorted(int(n) for n in n_list)
    per_variant = {v: [] for v in variants}
    for n in n_list:
        reps = {v: [] for v in variants}
        for r in range(n_replicates):
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=seed, spawn_key=(n, r))
            )
            model = model_family(n, rng)
            lap = fit_laplace(model, np.zeros(model.d), LaplaceOptions())
            factor = SkewnessFactor(model, lap.center)
            if "f1" in variants:
                reps["f1"].append(
                    _tv_with_shrink(model, lap.log_pdf, lap.center, lap.cov, grid_points)
                )
            if "q1" in variants:
                q1 = SkewSymmetricApproximation(lap, factor)
                reps["q1"].append(
                    _tv_with_shrink(model, q1.log_pdf, lap.center, lap.cov, grid_points)
                )
            if "q2" in variants:
                snp = build_snp(model, lap)
                q2 = SkewSymmetricApproximation(snp, factor)
                reps["q2"].append(
                    _tv_with_shrink(model, q2.log_pdf, lap.center, lap.cov, grid_points)
                )
        for v in variants:
            per_variant[v].append(float(np.median(reps[v])))
    curves = {}
    for v in variants:
        tv = per_variant[v]
        if max(tv) < 1e-13:
            # exactly symmetric family: the slope fit is meaningless
            curves[v] = RateCurve(v, n_list, tv, None, None)
            continue
        slope, stderr = _fit_loglog(n_list, tv)
        curves[v] = RateCurve(v, n_list, tv, slope, stderr)
    return curves


# ---------------------------------------------------------------------------
# Report emission
# ---------------------------------------------------------------------------

SCHEMA_VERSION = 1


def emit_report(
    out_dir,
    tables: Optional[dict] = None,
    curves: Optional[dict] = None,
    config: Optional[dict] = None,
    timestamp: Optional[str] = None,
) -> dict:
    """Write report.json plus one CSV per error table; returns the document.

    Everything except the timestamp field is a deterministic function of the
    inputs, so same-seed runs are byte-identical after stripping it.
    """
    tables = tables or {}
    curves = curves or {}
    if not tables and not curves:
        raise ValueError("need at least one table or curve")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "version": _version_string(),
        "timestamp": timestamp or "",
        "config": config or {},
        "tables": {
            name: {"columns": list(t.columns), "rows": t.rows}
            for name, t in tables.items()
        },
        "curves": [c.to_dict() for name, c in sorted(curves.items())],
    }
    (out_dir / "report.json").write_text(json.dumps(doc, indent=2, sort_keys=True))
    for name, t in tables.items():
        (out_dir / f"table_{name}.csv").write_text(t.to_csv())
    return doc


def load_table_csv(path) -> ErrorTable:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        table = ErrorTable(columns=tuple(header[1:]))
        for row in rd:
            table.rows[row[0]] = [float(v) for v in row[1:]]
    return table


def _version_string() -> str:
    try:
        from importlib.metadata import version

        return f"skewfit-{version('skewfit')}"
    except Exception:
        return "skewfit-unknown"
