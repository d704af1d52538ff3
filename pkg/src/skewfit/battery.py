"""Bundled verification battery: small 1D/2D posteriors paired with fitted
symmetric bases.  These models back the numerical theorem suites and the
sampler tests, so every case carries everything those suites need: the model,
an optional GLM view, a fitted symmetric approximation, and its skew
counterpart.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .models import Family, GlmModel, ModelSpec
from .skew import SkewnessFactor, SkewSymmetricApproximation
from .symmetric import (
    EpOptions,
    GvbOptions,
    LaplaceOptions,
    SymmetricApproximation,
    build_snp,
    fit_gep,
    fit_gvb,
    fit_laplace,
)

Array = np.ndarray


@dataclass
class BatteryCase:
    name: str
    model: ModelSpec
    base_kind: str
    symmetric: SymmetricApproximation
    skewed: SkewSymmetricApproximation
    glm: Optional[GlmModel] = None

    @property
    def d(self) -> int:
        return self.model.d

    @property
    def factor(self) -> SkewnessFactor:
        return self.skewed.factor


def conjugate_gaussian_glm(d: int = 1) -> GlmModel:
    """Gaussian-identity GLM: the posterior is exactly Gaussian, hence exactly
    symmetric — the degenerate case where w is identically 1/2."""
    rng = np.random.default_rng(7)
    n = 20
    X = rng.standard_normal((n, d))
    theta_true = np.linspace(0.4, -0.3, d)
    y = X @ theta_true + rng.standard_normal(n)
    return GlmModel(X, y, Family.GAUSSIAN_IDENTITY, np.zeros(d), np.full(d, 4.0))


def poisson_1d_glm() -> GlmModel:
    """Single Poisson count y=3 with unit covariate and a N(0, 4) prior."""
    return GlmModel(
        np.ones((1, 1)), np.array([3.0]), Family.POISSON_LOG,
        np.zeros(1), np.array([4.0]),
    )


def poisson_2d_glm() -> GlmModel:
    rng = np.random.default_rng(11)
    n = 25
    X = np.column_stack([np.ones(n), rng.uniform(-1.0, 1.0, n)])
    eta = X @ np.array([0.8, -0.5])
    y = rng.poisson(np.exp(eta)).astype(float)
    return GlmModel(X, y, Family.POISSON_LOG, np.zeros(2), np.full(2, 4.0))


def logistic_1d_glm() -> GlmModel:
    rng = np.random.default_rng(3)
    n = 30
    X = rng.standard_normal((n, 1))
    p = 1.0 / (1.0 + np.exp(-1.2 * X[:, 0]))
    y = (rng.uniform(size=n) < p).astype(float)
    return GlmModel(X, y, Family.BERNOULLI_LOGIT, np.zeros(1), np.array([4.0]))


def probit_2d_glm() -> GlmModel:
    """Probit rather than logit: the posterior keeps Gaussian tails, so every
    divergence in the battery (including alpha = 2 against a Gaussian base)
    stays finite and moderate."""
    rng = np.random.default_rng(5)
    n = 40
    X = np.column_stack([np.ones(n), rng.standard_normal(n)])
    eta = X @ np.array([-0.4, 1.0])
    y = (rng.uniform(size=n) < 1.0 / (1.0 + np.exp(-eta))).astype(float)
    return GlmModel(X, y, Family.BERNOULLI_PROBIT, np.zeros(2), np.full(2, 4.0))


def random_logistic_glm(seed: int, n: int, d: int) -> GlmModel:
    """Randomized logistic instance for equivalence/microbenchmark sweeps."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d)) / np.sqrt(d)
    theta_true = rng.standard_normal(d)
    p = 1.0 / (1.0 + np.exp(-X @ theta_true))
    y = (rng.uniform(size=n) < p).astype(float)
    return GlmModel(X, y, Family.BERNOULLI_LOGIT, np.zeros(d), np.full(d, 4.0))


def exponential_rate_model(
    n: int, rng: Optional[np.random.Generator] = None, prior_var: float = 100.0
) -> ModelSpec:
    """1D rate family: y_i ~ Exponential(e^theta) with a diffuse prior.

    Closed-form derivatives of every order: loglik = n*theta - e^theta * S.
    """
    rng = rng or np.random.default_rng(0)
    y = rng.exponential(scale=1.0, size=n)  # true theta = 0
    s = float(np.sum(y))

    def log_prior(th):
        th = np.asarray(th, dtype=float)
        return -0.5 * th[..., 0] ** 2 / prior_var - 0.5 * np.log(
            2.0 * np.pi * prior_var
        )

    def log_lik(th):
        t = np.asarray(th, dtype=float)[..., 0]
        return n * t - np.exp(t) * s

    def grad(th):
        t = np.asarray(th, dtype=float)[..., 0]
        return np.stack([n - np.exp(t) * s - t / prior_var], axis=-1)

    def hess(th):
        t = float(np.asarray(th, dtype=float)[0])
        return np.array([[-np.exp(t) * s - 1.0 / prior_var]])

    def deriv3(th):
        t = float(np.asarray(th, dtype=float)[0])
        return np.full((1, 1, 1), -np.exp(t) * s)

    def deriv4(th):
        t = float(np.asarray(th, dtype=float)[0])
        return np.full((1, 1, 1, 1), -np.exp(t) * s)

    return ModelSpec(
        d=1, log_prior=log_prior, log_lik=log_lik, grad=grad, hess=hess,
        deriv3=deriv3, deriv4=deriv4, name=f"exponential-rate-n{n}",
    )


def _case(name: str, glm: Optional[GlmModel], model: ModelSpec, base_kind: str) -> BatteryCase:
    lap = fit_laplace(model, np.zeros(model.d), LaplaceOptions())
    if base_kind == "laplace":
        sym = lap
    elif base_kind == "gvb":
        sym = fit_gvb(model, init=lap, opts=GvbOptions(n_iter=2000, seed=1))
    elif base_kind == "gep":
        sym = fit_gep(glm, EpOptions())
    elif base_kind == "snp":
        sym = build_snp(model, lap)
    else:
        raise ValueError(base_kind)
    factor = SkewnessFactor(model, sym.center, glm=glm)
    return BatteryCase(
        name=name, model=model, base_kind=base_kind, symmetric=sym,
        skewed=SkewSymmetricApproximation(sym, factor), glm=glm,
    )


def build_battery() -> list:
    """The default (model, base) pairs used by the verification suites."""
    cases = []
    g = conjugate_gaussian_glm(1)
    cases.append(_case("gaussian-1d/laplace", g, g.as_spec("gaussian-1d"), "laplace"))
    p1 = poisson_1d_glm()
    spec_p1 = p1.as_spec("poisson-1d")
    cases.append(_case("poisson-1d/laplace", p1, spec_p1, "laplace"))
    cases.append(_case("poisson-1d/snp", p1, spec_p1, "snp"))
    e = exponential_rate_model(25)
    cases.append(_case("exponential-rate-1d/laplace", None, e, "laplace"))
    l1 = logistic_1d_glm()
    cases.append(_case("logistic-1d/gvb", l1, l1.as_spec("logistic-1d"), "gvb"))
    p2d = probit_2d_glm()
    spec_p2d = p2d.as_spec("probit-2d")
    cases.append(_case("probit-2d/gep", p2d, spec_p2d, "gep"))
    # second d=2 pair: probit keeps alpha=2 against a Gaussian base finite,
    # unlike Poisson-log posteriors whose prior-scale tails dwarf the Laplace
    cases.append(_case("probit-2d/laplace", p2d, spec_p2d, "laplace"))
    return cases
