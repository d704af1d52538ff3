"""Target posteriors: generic model specs and GLM-structured models.

All log-density callables are vectorized: they accept a single parameter
vector of shape (d,) or a batch of shape (N, d), and return a scalar or an
(N,) array accordingly.  Log densities return -inf off support instead of
raising; downstream code treats -inf arithmetically.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import special

from .exceptions import DimensionError, UnsupportedModelError

Array = np.ndarray

# Central finite-difference steps: gradients trade truncation against
# cancellation at double precision; Hessians need a larger step.
FD_GRAD_STEP = 1e-5
FD_HESS_STEP = 1e-4


class Family(str, enum.Enum):
    POISSON_LOG = "poisson-log"
    BERNOULLI_LOGIT = "bernoulli-logit"
    BERNOULLI_PROBIT = "bernoulli-probit"
    GAUSSIAN_IDENTITY = "gaussian-identity"


#: families whose log-likelihood admits closed-form derivatives of any order
#: as weighted sums of x_i^{otimes k} (canonical links of exponential families)
CANONICAL_FAMILIES = frozenset(
    {Family.POISSON_LOG, Family.BERNOULLI_LOGIT, Family.GAUSSIAN_IDENTITY}
)


def _as_batch(theta: Array, d: int) -> tuple[Array, bool]:
    """Coerce theta to shape (N, d); return (batch, was_single)."""
    th = np.asarray(theta, dtype=float)
    if th.ndim == 1:
        if th.shape[0] != d:
            raise DimensionError(f"expected dimension {d}, got {th.shape[0]}")
        return th[None, :], True
    if th.ndim != 2 or th.shape[1] != d:
        raise DimensionError(f"expected shape (N, {d}), got {th.shape}")
    return th, False


def _unbatch(values: Array, single: bool):
    return values[0] if single else values


@dataclass
class ModelSpec:
    """A target posterior: log-prior, log-likelihood and derivative evaluators.

    grad/hess and the higher-order tensor evaluators are optional; when absent,
    finite differences are used (orders 3-4 only in d <= 2).  All evaluators
    refer to the *unnormalized log-posterior* log pi(theta) + loglik(theta)
    except log_prior/log_lik which give the two terms separately.
    """

    d: int
    log_prior: Callable[[Array], Array]
    log_lik: Callable[[Array], Array]
    grad: Optional[Callable[[Array], Array]] = None
    hess: Optional[Callable[[Array], Array]] = None
    deriv3: Optional[Callable[[Array], Array]] = None
    deriv4: Optional[Callable[[Array], Array]] = None
    support_indicator: Optional[Callable[[Array], Array]] = None
    name: str = "model"

    def in_support(self, theta: Array) -> Array:
        th, single = _as_batch(theta, self.d)
        if self.support_indicator is None:
            ok = np.ones(th.shape[0], dtype=bool)
        else:
            ok = np.asarray(self.support_indicator(th), dtype=bool)
        return _unbatch(ok, single)


def log_unnorm_posterior(model: ModelSpec, theta: Array) -> Array:
    """log pi(theta) + loglik(theta); -inf off support."""
    th, single = _as_batch(theta, model.d)
    out = np.full(th.shape[0], -np.inf)
    ok = np.atleast_1d(model.in_support(th))
    if np.any(ok):
        sub = th[ok]
        # extreme parameter values may overflow intermediates; the resulting
        # -inf log density is the intended answer
        with np.errstate(over="ignore"):
            out[ok] = np.asarray(model.log_prior(sub)) + np.asarray(model.log_lik(sub))
    return _unbatch(out, single)


def _fd_gradient(f: Callable[[Array], Array], theta: Array) -> Array:
    th = np.asarray(theta, dtype=float)
    g = np.empty_like(th)
    for j in range(th.size):
        h = FD_GRAD_STEP * (1.0 + abs(th[j]))
        up, dn = th.copy(), th.copy()
        up[j] += h
        dn[j] -= h
        g[j] = (f(up) - f(dn)) / (2.0 * h)
    return g


def _fd_hessian(f: Callable[[Array], Array], theta: Array) -> Array:
    th = np.asarray(theta, dtype=float)
    d = th.size
    H = np.empty((d, d))
    h = FD_HESS_STEP * (1.0 + np.abs(th))
    f0 = f(th)
    for j in range(d):
        up, dn = th.copy(), th.copy()
        up[j] += h[j]
        dn[j] -= h[j]
        H[j, j] = (f(up) - 2.0 * f0 + f(dn)) / h[j] ** 2
    for j in range(d):
        for k in range(j):
            pp, pm, mp, mm = th.copy(), th.copy(), th.copy(), th.copy()
            pp[[j, k]] += h[[j, k]]
            mm[[j, k]] -= h[[j, k]]
            pm[j] += h[j]
            pm[k] -= h[k]
            mp[j] -= h[j]
            mp[k] += h[k]
            H[j, k] = H[k, j] = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h[j] * h[k])
    return H


def posterior_derivatives(model: ModelSpec, theta: Array, order: int) -> Array:
    """Derivative tensor of the unnormalized log-posterior, orders 1-4.

    Analytic evaluators are used when available; otherwise central finite
    differences.  Orders 3-4 without analytic evaluators are refused in
    d > 2 (the FD cost and noise explode).
    """
    if order not in (1, 2, 3, 4):
        raise ValueError(f"order must be in 1..4, got {order}")
    th = np.asarray(theta, dtype=float)
    if th.shape != (model.d,):
        raise DimensionError(f"expected shape ({model.d},), got {th.shape}")

    def scalar_logpost(t):
        return float(log_unnorm_posterior(model, t))

    if order == 1:
        if model.grad is not None:
            return np.asarray(model.grad(th), dtype=float)
        return _fd_gradient(scalar_logpost, th)
    if order == 2:
        if model.hess is not None:
            return np.asarray(model.hess(th), dtype=float)
        return _fd_hessian(scalar_logpost, th)
    evaluator = model.deriv3 if order == 3 else model.deriv4
    if evaluator is not None:
        return np.asarray(evaluator(th), dtype=float)
    if model.d > 2:
        raise UnsupportedModelError(
            f"order-{order} derivatives need an analytic evaluator in d > 2"
        )
    # FD of the next-lower-order tensor; adequate in d <= 2.
    lower = lambda t: posterior_derivatives(model, t, order - 1)
    d = model.d
    out = np.empty((d,) * order)
    for j in range(d):
        h = FD_HESS_STEP * (1.0 + abs(th[j]))
        up, dn = th.copy(), th.copy()
        up[j] += h
        dn[j] -= h
        out[..., j] = (lower(up) - lower(dn)) / (2.0 * h)
    # symmetrize to kill FD asymmetry noise
    from itertools import permutations

    sym = np.zeros_like(out)
    perms = list(permutations(range(order)))
    for p in perms:
        sym += np.transpose(out, p)
    return sym / len(perms)


# ---------------------------------------------------------------------------
# GLM building blocks: per-observation log-density terms g(y, eta) and the
# derivatives of the cumulant b(eta) for canonical families.
# ---------------------------------------------------------------------------


def _logistic(eta: Array) -> Array:
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    e = np.exp(eta[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _softplus(eta: Array) -> Array:
    return np.logaddexp(0.0, eta)


def glm_obs_logpdf(family: Family, y: Array, eta: Array) -> Array:
    """g_i(y_i, eta_i): per-observation log density at linear predictor eta."""
    y = np.asarray(y, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if family is Family.POISSON_LOG:
        with np.errstate(over="ignore"):  # exp overflow -> -inf log density
            return y * eta - np.exp(eta) - special.gammaln(y + 1.0)
    if family is Family.BERNOULLI_LOGIT:
        return y * eta - _softplus(eta)
    if family is Family.BERNOULLI_PROBIT:
        z = 2.0 * y - 1.0
        return special.log_ndtr(z * eta)
    if family is Family.GAUSSIAN_IDENTITY:
        return -0.5 * (y - eta) ** 2 - 0.5 * np.log(2.0 * np.pi)
    raise ValueError(family)


def glm_mean(family: Family, eta: Array) -> Array:
    """Inverse link: E(y | eta) per observation."""
    eta = np.asarray(eta, dtype=float)
    if family is Family.POISSON_LOG:
        with np.errstate(over="ignore"):
            return np.exp(eta)
    if family is Family.BERNOULLI_LOGIT:
        return _logistic(eta)
    if family is Family.BERNOULLI_PROBIT:
        return special.ndtr(eta)
    if family is Family.GAUSSIAN_IDENTITY:
        return eta.copy()
    raise ValueError(family)


def _glm_dlogp_deta(family: Family, y: Array, eta: Array) -> Array:
    """d g / d eta."""
    if family is Family.BERNOULLI_PROBIT:
        z = 2.0 * y - 1.0
        # z * phi(z eta) / Phi(z eta), via exp(log phi - log Phi) for stability
        return z * np.exp(
            -0.5 * eta**2 - 0.5 * np.log(2.0 * np.pi) - special.log_ndtr(z * eta)
        )
    return np.asarray(y, dtype=float) - glm_mean(family, eta)


def _glm_b2(family: Family, y: Array, eta: Array) -> Array:
    """-d^2 g / d eta^2 (observation weight; >= 0)."""
    if family is Family.POISSON_LOG:
        return np.exp(eta)
    if family is Family.BERNOULLI_LOGIT:
        s = _logistic(eta)
        return s * (1.0 - s)
    if family is Family.GAUSSIAN_IDENTITY:
        return np.ones_like(np.asarray(eta, dtype=float))
    if family is Family.BERNOULLI_PROBIT:
        r = _glm_dlogp_deta(family, y, eta)
        return r * (r + eta)  # -g'' = r^2 + eta*r for probit
    raise ValueError(family)


def _glm_b3(family: Family, eta: Array) -> Array:
    """b'''(eta) for canonical families (third cumulant derivative)."""
    if family is Family.POISSON_LOG:
        return np.exp(eta)
    if family is Family.BERNOULLI_LOGIT:
        s = _logistic(eta)
        return s * (1.0 - s) * (1.0 - 2.0 * s)
    if family is Family.GAUSSIAN_IDENTITY:
        return np.zeros_like(np.asarray(eta, dtype=float))
    raise UnsupportedModelError(f"no analytic third derivative for {family.value}")


def _glm_b4(family: Family, eta: Array) -> Array:
    """b''''(eta) for canonical families."""
    if family is Family.POISSON_LOG:
        return np.exp(eta)
    if family is Family.BERNOULLI_LOGIT:
        s = _logistic(eta)
        return s * (1.0 - s) * (1.0 - 6.0 * s + 6.0 * s * s)
    if family is Family.GAUSSIAN_IDENTITY:
        return np.zeros_like(np.asarray(eta, dtype=float))
    raise UnsupportedModelError(f"no analytic fourth derivative for {family.value}")


@dataclass
class GlmModel:
    """GLM with independent Gaussian priors on the coefficients.

    The log-likelihood decomposes as sum_i g_i(y_i, x_i' theta), which enables
    the single-matvec evaluation path for the skewness factor.
    """

    design: Array
    response: Array
    family: Family
    prior_mean: Array
    prior_cov_diag: Array
    column_names: Optional[Sequence[str]] = None

    def __post_init__(self):
        self.design = np.asarray(self.design, dtype=float)
        self.response = np.asarray(self.response, dtype=float)
        self.prior_mean = np.asarray(self.prior_mean, dtype=float)
        self.prior_cov_diag = np.asarray(self.prior_cov_diag, dtype=float)
        if self.design.ndim != 2:
            raise DimensionError("design must be an (n, d) matrix")
        n, d = self.design.shape
        if self.response.shape != (n,):
            raise DimensionError("response length must match design rows")
        if self.prior_mean.shape != (d,) or self.prior_cov_diag.shape != (d,):
            raise DimensionError("prior parameters must have length d")
        if np.any(self.prior_cov_diag <= 0):
            raise ValueError("prior_cov_diag entries must be > 0")
        if not isinstance(self.family, Family):
            self.family = Family(self.family)

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def d(self) -> int:
        return self.design.shape[1]

    def linpred(self, theta: Array) -> Array:
        """X theta; batched theta (N, d) gives (N, n)."""
        return np.asarray(theta, dtype=float) @ self.design.T

    def log_prior(self, theta: Array) -> Array:
        th, single = _as_batch(theta, self.d)
        z = (th - self.prior_mean) / np.sqrt(self.prior_cov_diag)
        val = -0.5 * np.sum(z * z, axis=1) - 0.5 * np.sum(
            np.log(2.0 * np.pi * self.prior_cov_diag)
        )
        return _unbatch(val, single)

    def log_lik(self, theta: Array) -> Array:
        th, single = _as_batch(theta, self.d)
        eta = self.linpred(th)
        val = np.sum(glm_obs_logpdf(self.family, self.response, eta), axis=-1)
        return _unbatch(val, single)

    def grad(self, theta: Array) -> Array:
        th, single = _as_batch(theta, self.d)
        eta = self.linpred(th)
        # far outside the support the score can overflow; the resulting
        # non-finite gradient is meaningful (callers reject such states)
        with np.errstate(invalid="ignore", over="ignore"):
            score = _glm_dlogp_deta(self.family, self.response, eta)
            g = score @ self.design - (th - self.prior_mean) / self.prior_cov_diag
        return _unbatch(g, single)

    def hess(self, theta: Array) -> Array:
        th = np.asarray(theta, dtype=float)
        if th.shape != (self.d,):
            raise DimensionError(f"expected shape ({self.d},), got {th.shape}")
        eta = self.linpred(th)
        w = _glm_b2(self.family, self.response, eta)
        H = -(self.design.T * w) @ self.design
        H -= np.diag(1.0 / self.prior_cov_diag)
        return H

    def deriv3(self, theta: Array) -> Array:
        eta = self.linpred(np.asarray(theta, dtype=float))
        c = -_glm_b3(self.family, eta)
        X = self.design
        return np.einsum("i,ia,ib,ic->abc", c, X, X, X)

    def deriv4(self, theta: Array) -> Array:
        eta = self.linpred(np.asarray(theta, dtype=float))
        c = -_glm_b4(self.family, eta)
        X = self.design
        return np.einsum("i,ia,ib,ic,id->abcd", c, X, X, X, X)

    def as_spec(self, name: str = "glm") -> ModelSpec:
        """View this GLM through the generic ModelSpec contract."""
        canonical = self.family in CANONICAL_FAMILIES
        return ModelSpec(
            d=self.d,
            log_prior=self.log_prior,
            log_lik=self.log_lik,
            grad=self.grad,
            hess=self.hess,
            deriv3=self.deriv3 if canonical else None,
            deriv4=self.deriv4 if canonical else None,
            name=name,
        )


def mu_functional(model: GlmModel, theta: Array) -> Array:
    """Per-observation conditional means E(y_i | theta).

    Batched theta of shape (N, d) yields an (N, n) array.
    """
    th, single = _as_batch(theta, model.d)
    mu = glm_mean(model.family, model.linpred(th))
    return _unbatch(mu, single)


@dataclass
class Dataset:
    predictors: Array
    responses: Array
    column_names: Sequence[str] = field(default_factory=list)

    def __post_init__(self):
        self.predictors = np.asarray(self.predictors, dtype=float)
        self.responses = np.asarray(self.responses, dtype=float)
        if self.predictors.ndim != 2 or self.predictors.shape[0] < 1:
            raise ValueError("predictors must be a nonempty (n, d) matrix")
        if self.responses.shape != (self.predictors.shape[0],):
            raise ValueError("responses length must match predictor rows")
        if not (
            np.all(np.isfinite(self.predictors)) and np.all(np.isfinite(self.responses))
        ):
            raise ValueError("dataset contains missing or non-finite values")


def load_dataset(path, response_column: str, add_intercept: bool = False) -> Dataset:
    """Read a CSV with a header row into a Dataset.

    The named response column becomes the response; every other column is a
    predictor.  With add_intercept, a leading all-ones column is prepended.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    if response_column not in header:
        raise ValueError(f"response column {response_column!r} not in header {header}")
    data = np.asarray(rows, dtype=float)
    ri = header.index(response_column)
    responses = data[:, ri]
    predictors = np.delete(data, ri, axis=1)
    names = [h for i, h in enumerate(header) if i != ri]
    if add_intercept:
        predictors = np.hstack([np.ones((predictors.shape[0], 1)), predictors])
        names = ["intercept"] + names
    return Dataset(predictors=predictors, responses=responses, column_names=names)
