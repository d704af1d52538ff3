"""Numerical verification suites: structural invariants, divergence
identities and inequalities, skewing-function optimality, and sampler checks.

Each suite returns a machine-readable record; run_verification aggregates
them into a JSON-ready document whose top-level `passed` flag is the gate.
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np
from scipy import stats

from .battery import BatteryCase, build_battery
from .divergences import (
    GridSpec,
    alpha_div_grid,
    default_grid,
    grid_normalized,
    kl_grid,
    symmetrize_logpdf,
    tv_grid,
)
from .models import log_unnorm_posterior
from .skew import mirror
from .symmetric import GaussianApproximation, SnpApproximation

Array = np.ndarray

ALPHA_BATTERY = (-1.0, 0.5, 2.0)

EQUALITY_TOL = 1e-6
INEQUALITY_TOL = 1e-8
OPTIMALITY_TOL = 1e-8


def _case_cov(case: BatteryCase) -> Array:
    sym = case.symmetric
    if isinstance(sym, SnpApproximation):
        return sym.gaussian.cov
    if isinstance(sym, GaussianApproximation):
        return sym.cov
    raise TypeError(type(sym).__name__)


def _case_grid(case: BatteryCase, points: Optional[int] = None) -> GridSpec:
    return default_grid(case.symmetric.center, _case_cov(case), points)


def _posterior_logpdf(case: BatteryCase, grid: GridSpec) -> Callable:
    return grid_normalized(lambda t: log_unnorm_posterior(case.model, t), grid)


def _divergence_battery(log_p, log_q, grid):
    out = {"tv": tv_grid(log_p, log_q, grid).value}
    for a in ALPHA_BATTERY:
        out[f"alpha_{a:g}"] = alpha_div_grid(log_p, log_q, a, grid).value
    out["kl_forward"] = kl_grid(log_p, log_q, "forward", grid).value
    out["kl_reverse"] = kl_grid(log_p, log_q, "reverse", grid).value
    return out


# ---------------------------------------------------------------------------
# Structural invariants
# ---------------------------------------------------------------------------


def check_symmetry(case: BatteryCase, rng: np.random.Generator, tol=1e-8) -> dict:
    """f(center + h) == f(center - h) on random displacements."""
    sd = np.sqrt(np.diag(_case_cov(case)))
    h = rng.standard_normal((200, case.d)) * (3.0 * sd)
    lp_plus = case.symmetric.log_pdf(case.symmetric.center + h)
    lp_minus = case.symmetric.log_pdf(case.symmetric.center - h)
    worst = float(np.max(np.abs(lp_plus - lp_minus)))
    return {"check": "symmetry", "case": case.name, "worst": worst,
            "passed": worst <= tol}


def check_weight_sum(case: BatteryCase, rng: np.random.Generator, tol=1e-12) -> dict:
    """w(theta) + w(2 center - theta) == 1."""
    sd = np.sqrt(np.diag(_case_cov(case)))
    theta = case.symmetric.center + rng.standard_normal((200, case.d)) * (4.0 * sd)
    w1 = case.factor.weight(theta)
    w2 = case.factor.weight(mirror(theta, case.symmetric.center))
    worst = float(np.max(np.abs(w1 + w2 - 1.0)))
    return {"check": "weight_sum", "case": case.name, "worst": worst,
            "passed": worst <= tol}


def check_normalization(case: BatteryCase, tol=1e-6) -> dict:
    """Skewed density integrates to 1 on the default grid (d <= 2)."""
    grid = _case_grid(case)
    pts, wts = grid.points_and_weights()
    mass = float(wts @ np.exp(case.skewed.log_pdf(pts)))
    worst = abs(mass - 1.0)
    return {"check": "normalization", "case": case.name, "worst": worst,
            "passed": worst <= tol}


# ---------------------------------------------------------------------------
# Divergence identities (the two guarantees and optimality)
# ---------------------------------------------------------------------------


def check_divergence_equality(case: BatteryCase, tol=EQUALITY_TOL) -> dict:
    """D(posterior || skewed) == D(symmetrized posterior || base), all kinds."""
    grid = _case_grid(case)
    log_post = _posterior_logpdf(case, grid)
    log_post_bar = symmetrize_logpdf(log_post, case.symmetric.center)
    left = _divergence_battery(log_post, case.skewed.log_pdf, grid)
    right = _divergence_battery(log_post_bar, case.symmetric.log_pdf, grid)
    diffs = {k: abs(left[k] - right[k]) for k in left}
    worst = max(diffs.values())
    return {"check": "divergence_equality", "case": case.name, "left": left,
            "right": right, "diffs": diffs, "worst": worst, "passed": worst <= tol}


def check_divergence_inequality(case: BatteryCase, tol=INEQUALITY_TOL) -> dict:
    """Both D(post || skewed) and D(sym. post || base) <= D(post || base)."""
    grid = _case_grid(case)
    log_post = _posterior_logpdf(case, grid)
    log_post_bar = symmetrize_logpdf(log_post, case.symmetric.center)
    to_base = _divergence_battery(log_post, case.symmetric.log_pdf, grid)
    to_skew = _divergence_battery(log_post, case.skewed.log_pdf, grid)
    bar_to_base = _divergence_battery(log_post_bar, case.symmetric.log_pdf, grid)
    margins = {}
    for k in to_base:
        margins[f"skew:{k}"] = to_skew[k] - to_base[k]
        margins[f"bar:{k}"] = bar_to_base[k] - to_base[k]
    worst = max(margins.values())
    return {"check": "divergence_inequality", "case": case.name,
            "margins": margins, "worst": worst, "passed": worst <= tol}


def _random_skewing_log_weight(case, rng):
    """A random valid skewing function: logistic of an odd cubic in the
    displacement, projected on a random direction."""
    u = rng.standard_normal(case.d)
    u /= np.linalg.norm(u)
    sd = float(np.sqrt(u @ _case_cov(case) @ u))
    c1 = rng.uniform(-2.0, 2.0) / sd
    c3 = rng.uniform(-1.0, 1.0) / sd**3
    center = case.symmetric.center

    def log_w(theta):
        t = np.atleast_2d(np.asarray(theta, dtype=float))
        z = (t - center) @ u
        arg = c1 * z + c3 * z**3
        out = np.where(arg >= 0, -np.log1p(np.exp(-np.abs(arg))),
                       arg - np.log1p(np.exp(-np.abs(arg))))
        return out if np.asarray(theta).ndim == 2 else out[0]

    return log_w


def check_optimality(case: BatteryCase, rng: np.random.Generator,
                     n_random: int = 50, tol=OPTIMALITY_TOL) -> dict:
    """TV to the posterior is minimized by the closed-form skewing factor."""
    grid = _case_grid(case)
    log_post = _posterior_logpdf(case, grid)
    best = tv_grid(log_post, case.skewed.log_pdf, grid).value
    log2 = np.log(2.0)
    worst_margin = np.inf
    for _ in range(n_random):
        log_w = _random_skewing_log_weight(case, rng)

        def log_q(theta, log_w=log_w):
            return log2 + case.symmetric.log_pdf(theta) + log_w(theta)

        rival = tv_grid(log_post, log_q, grid).value
        worst_margin = min(worst_margin, rival - best)
    return {"check": "optimality", "case": case.name, "tv_optimal": best,
            "worst_margin": float(worst_margin),
            "passed": worst_margin >= -tol}


# ---------------------------------------------------------------------------
# Sampler checks (1D cases)
# ---------------------------------------------------------------------------


def check_sampler(case: BatteryCase, rng: np.random.Generator,
                  n_draws: int = 100_000, p_threshold: float = 0.01) -> dict:
    """KS test of sampler draws against the grid CDF of the skewed density,
    plus flip-frequency calibration per decile bin of the factor value."""
    if case.d != 1:
        raise ValueError("sampler KS check is for 1D cases")
    grid = _case_grid(case)
    pts, _ = grid.points_and_weights()
    x = pts[:, 0]
    pdf = np.exp(case.skewed.log_pdf(pts))
    cdf = np.concatenate([[0.0], np.cumsum((pdf[1:] + pdf[:-1]) * 0.5 * np.diff(x))])
    cdf /= cdf[-1]

    samples, theta_tmp, flip = case.skewed.draw_instrumented(rng, n_draws)
    ks = stats.ks_1samp(samples[:, 0], lambda v: np.interp(v, x, cdf))

    w = case.factor.weight(theta_tmp)
    edges = np.quantile(w, np.linspace(0.0, 1.0, 11))
    edges[0] -= 1e-12
    edges[-1] += 1e-12
    bin_ok = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mask = (w > lo) & (w <= hi)
        m = int(mask.sum())
        if m < 100:
            continue
        expected = float(np.mean(1.0 - w[mask]))  # flip happens with prob 1-w
        observed = float(np.mean(flip[mask]))
        sigma = np.sqrt(max(expected * (1.0 - expected), 1e-12) / m)
        bin_ok.append(abs(observed - expected) <= 4.0 * sigma)
    passed = bool(ks.pvalue > p_threshold and all(bin_ok) and len(bin_ok) > 0)
    return {"check": "sampler", "case": case.name, "ks_pvalue": float(ks.pvalue),
            "flip_bins_ok": int(sum(bin_ok)), "flip_bins_total": len(bin_ok),
            "passed": passed}


# ---------------------------------------------------------------------------
# Aggregate runner
# ---------------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def run_verification(cases=None, seed: int = 0, n_sampler_draws: int = 100_000,
                     n_random_skews: int = 50) -> dict:
    """Run every suite on every battery case; returns a JSON-ready document."""
    cases = cases if cases is not None else build_battery()
    results = []
    for i, case in enumerate(cases):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(i,))
        )
        results.append(check_symmetry(case, rng))
        results.append(check_weight_sum(case, rng))
        results.append(check_normalization(case))
        results.append(check_divergence_equality(case))
        results.append(check_divergence_inequality(case))
        results.append(check_optimality(case, rng, n_random=n_random_skews))
        if case.d == 1:
            results.append(check_sampler(case, rng, n_draws=n_sampler_draws))
    return _jsonable({
        "seed": seed,
        "n_cases": len(cases),
        "results": results,
        "passed": all(bool(r["passed"]) for r in results),
    })
