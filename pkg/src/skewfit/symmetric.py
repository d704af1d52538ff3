"""Symmetric approximations of the target posterior.

Four fitters share one contract: a density symmetric about a center point,
with a vectorized log-pdf and an exact sampler.

* Laplace: Gaussian at the MAP with covariance = inverse negative Hessian.
* Gaussian VB: full-covariance Gaussian maximizing a reparameterized
  stochastic ELBO estimate.
* Gaussian EP: scalar sites on the linear predictors, moment-matched via
  Gauss-Hermite quadrature (closed forms for probit/gaussian sites).
* SNP: the Laplace Gaussian times an even nonnegative quartic-expansion
  polynomial, normalized in closed form from Gaussian even moments.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg, special

from .exceptions import (
    DimensionError,
    IndefiniteCurvatureError,
    NonConvergenceError,
    StepSizeError,
    UnsupportedModelError,
)
from .models import (
    Family,
    GlmModel,
    ModelSpec,
    _as_batch,
    _unbatch,
    glm_obs_logpdf,
    log_unnorm_posterior,
    posterior_derivatives,
)

Array = np.ndarray


class SymmetricApproximation:
    """Common contract: center, kind, vectorized log_pdf, exact sampler."""

    center: Array
    kind: str

    def log_pdf(self, theta: Array) -> Array:
        raise NotImplementedError

    def draw(self, rng: np.random.Generator, n: int) -> Array:
        raise NotImplementedError

    @property
    def d(self) -> int:
        return self.center.shape[0]


class GaussianApproximation(SymmetricApproximation):
    """Multivariate Gaussian with cached Cholesky factors.

    cov_factor is the lower-triangular factor L with cov = L L'.
    """

    def __init__(self, mean: Array, cov: Array, kind: str = "laplace"):
        self.center = np.asarray(mean, dtype=float)
        self.cov = np.asarray(cov, dtype=float)
        d = self.center.shape[0]
        if self.cov.shape != (d, d):
            raise DimensionError("covariance shape must match mean")
        try:
            self.cov_factor = np.linalg.cholesky(self.cov)
        except np.linalg.LinAlgError as exc:
            raise IndefiniteCurvatureError(
                "covariance is not positive definite"
            ) from exc
        self.kind = kind
        self.log_norm_const = -0.5 * d * np.log(2.0 * np.pi) - np.sum(
            np.log(np.diag(self.cov_factor))
        )

    @property
    def precision(self) -> Array:
        eye = np.eye(self.d)
        inv_l = linalg.solve_triangular(self.cov_factor, eye, lower=True)
        return inv_l.T @ inv_l

    def log_pdf(self, theta: Array) -> Array:
        th, single = _as_batch(theta, self.d)
        z = linalg.solve_triangular(self.cov_factor, (th - self.center).T, lower=True)
        val = self.log_norm_const - 0.5 * np.sum(z * z, axis=0)
        return _unbatch(val, single)

    def draw(self, rng: np.random.Generator, n: int) -> Array:
        eps = rng.standard_normal((n, self.d))
        return self.center + eps @ self.cov_factor.T


# ---------------------------------------------------------------------------
# Laplace
# ---------------------------------------------------------------------------


@dataclass
class LaplaceOptions:
    grad_tol: float = 1e-8
    max_iter: int = 200
    armijo_c: float = 1e-4


def fit_laplace(
    model: ModelSpec, init: Array, opts: Optional[LaplaceOptions] = None
) -> GaussianApproximation:
    """Gaussian at the MAP via damped Newton with Armijo backtracking.

    Falls back to scaled gradient steps when the Hessian is indefinite.
    """
    opts = opts or LaplaceOptions()
    theta = np.asarray(init, dtype=float).copy()
    if theta.shape != (model.d,):
        raise DimensionError(f"init must have shape ({model.d},)")
    f = lambda t: float(log_unnorm_posterior(model, t))
    fval = f(theta)
    if not np.isfinite(fval):
        raise ValueError("init is outside the posterior support")
    for _ in range(opts.max_iter):
        g = posterior_derivatives(model, theta, 1)
        gnorm = np.linalg.norm(g)
        if gnorm <= opts.grad_tol * (1.0 + np.linalg.norm(theta)):
            break
        H = posterior_derivatives(model, theta, 2)
        try:
            L = np.linalg.cholesky(-H)
            step = linalg.cho_solve((L, True), g)
        except np.linalg.LinAlgError:
            step = g / max(gnorm, 1.0)
        # also stop when the attainable improvement (the Newton decrement)
        # is below the float resolution of the objective itself
        if float(g @ step) <= 4.0 * np.finfo(float).eps * (1.0 + abs(fval)):
            break
        # backtracking line search on the log-posterior (maximize)
        t = 1.0
        slope = float(g @ step)
        while t > 1e-14:
            cand = theta + t * step
            fc = f(cand)
            if np.isfinite(fc) and fc >= fval + opts.armijo_c * t * slope:
                theta, fval = cand, fc
                break
            t *= 0.5
        else:
            raise NonConvergenceError("line search failed", last_iterate=theta)
    else:
        raise NonConvergenceError(
            f"MAP search did not converge in {opts.max_iter} iterations",
            last_iterate=theta,
        )
    H = posterior_derivatives(model, theta, 2)
    try:
        L = np.linalg.cholesky(-H)
    except np.linalg.LinAlgError as exc:
        raise IndefiniteCurvatureError(
            "negative Hessian at the terminal point is not positive definite"
        ) from exc
    inv_l = linalg.solve_triangular(L, np.eye(model.d), lower=True)
    cov = inv_l.T @ inv_l
    cov = 0.5 * (cov + cov.T)
    return GaussianApproximation(theta, cov, kind="laplace")


# ---------------------------------------------------------------------------
# Gaussian VB
# ---------------------------------------------------------------------------


@dataclass
class GvbOptions:
    n_iter: int = 5000
    n_mc: int = 8
    lr: float = 0.05
    lr_decay_at: int = 1000  # iterations after which the step starts decaying
    seed: int = 0


def _softplus(x):
    return np.logaddexp(0.0, x)


def _inv_softplus(y):
    return y + np.log(-np.expm1(-y))


def fit_gvb(
    model: ModelSpec,
    init: Optional[GaussianApproximation] = None,
    opts: Optional[GvbOptions] = None,
) -> GaussianApproximation:
    """Full-covariance Gaussian VB via reparameterized stochastic gradients.

    Parameterization: mean + lower-triangular covariance factor with
    softplus-positive diagonal.  RMS-scaled fixed-step schedule with a
    polynomial decay after lr_decay_at iterations; deterministic given seed.
    The final iterate is returned with the ELBO trace attached.
    """
    opts = opts or GvbOptions()
    d = model.d
    rng = np.random.default_rng(opts.seed)
    if init is None:
        m = np.zeros(d)
        rho = np.full(d, _inv_softplus(1.0))
        off = np.zeros((d, d))
    else:
        m = init.center.copy()
        L0 = init.cov_factor
        rho = _inv_softplus(np.diag(L0))
        off = np.tril(L0, -1)

    def grad_logpost(th_batch):
        if model.grad is not None:
            return np.asarray(model.grad(th_batch), dtype=float)
        return np.stack([posterior_derivatives(model, t, 1) for t in th_batch])

    v_m = np.zeros(d)
    v_rho = np.zeros(d)
    v_off = np.zeros((d, d))
    elbo_trace = np.empty(opts.n_iter)
    tril_mask = np.tril(np.ones((d, d)), -1)
    for it in range(opts.n_iter):
        diag = _softplus(rho)
        L = off * tril_mask + np.diag(diag)
        eps = rng.standard_normal((opts.n_mc, d))
        th = m + eps @ L.T
        lp = np.asarray(log_unnorm_posterior(model, th), dtype=float)
        if not np.all(np.isfinite(lp)):
            raise StepSizeError(
                "ELBO diverged (non-finite log-posterior)",
                diagnostics={"iteration": it, "mean": m.copy()},
            )
        g = grad_logpost(th)
        g_m = g.mean(axis=0)
        g_L = (g.T @ eps) / opts.n_mc  # d/dL of E[log p], lower part used
        g_L = g_L * tril_mask + np.diag(np.diag(g_L))
        g_L[np.diag_indices(d)] += 1.0 / diag  # entropy gradient
        g_rho = np.diag(g_L) * special.expit(rho)
        g_off = g_L * tril_mask

        entropy = np.sum(np.log(diag)) + 0.5 * d * (1.0 + np.log(2.0 * np.pi))
        elbo_trace[it] = lp.mean() + entropy

        scale = opts.lr / max(1.0, (it / opts.lr_decay_at)) ** 0.75
        v_m = 0.9 * v_m + 0.1 * g_m**2
        v_rho = 0.9 * v_rho + 0.1 * g_rho**2
        v_off = 0.9 * v_off + 0.1 * g_off**2
        m = m + scale * g_m / (np.sqrt(v_m) + 1e-8)
        rho = rho + scale * g_rho / (np.sqrt(v_rho) + 1e-8)
        off = off + scale * g_off / (np.sqrt(v_off) + 1e-8)

    diag = _softplus(rho)
    L = off * tril_mask + np.diag(diag)
    approx = GaussianApproximation(m, L @ L.T, kind="gvb")
    approx.elbo_trace = elbo_trace
    return approx


# ---------------------------------------------------------------------------
# Gaussian EP
# ---------------------------------------------------------------------------


@dataclass
class EpOptions:
    damping: float = 0.5
    tol: float = 1e-8
    max_sweeps: int = 200
    n_quad: int = 64


@dataclass
class EpSiteSet:
    site_precisions: Array
    site_shifts: Array
    global_approx: GaussianApproximation
    clipped: bool = False

    def recompute_global(self, model: GlmModel) -> GaussianApproximation:
        """Rebuild the global Gaussian from the prior and the sites from scratch."""
        return _ep_global(model, self.site_precisions, self.site_shifts)


def _ep_global(
    model: GlmModel, tau: Array, nu: Array, kind: str = "gep"
) -> GaussianApproximation:
    prior_prec = np.diag(1.0 / model.prior_cov_diag)
    Q = prior_prec + (model.design.T * tau) @ model.design
    r = model.prior_mean / model.prior_cov_diag + model.design.T @ nu
    cov = np.linalg.inv(Q)
    cov = 0.5 * (cov + cov.T)
    return GaussianApproximation(cov @ r, cov, kind=kind)


def _tilted_moments(
    family: Family, y: float, mu: float, var: float, quad: tuple[Array, Array]
):
    """Mean and variance of the tilted density t(eta) N(eta; mu, var)."""
    if family is Family.GAUSSIAN_IDENTITY:
        # exact conjugate update with unit observation noise
        post_var = 1.0 / (1.0 / var + 1.0)
        post_mu = post_var * (mu / var + y)
        return post_mu, post_var
    if family is Family.BERNOULLI_PROBIT:
        z = 2.0 * y - 1.0
        s = np.sqrt(1.0 + var)
        u = z * mu / s
        r = np.exp(-0.5 * u * u - 0.5 * np.log(2.0 * np.pi) - special.log_ndtr(u))
        post_mu = mu + z * var * r / s
        post_var = var - var**2 * r * (u + r) / (1.0 + var)
        return post_mu, post_var
    nodes, logw = quad
    eta = mu + np.sqrt(2.0 * var) * nodes
    logf = logw + glm_obs_logpdf(family, y, eta)
    logz = special.logsumexp(logf)
    w = np.exp(logf - logz)
    post_mu = float(w @ eta)
    post_var = float(w @ (eta - post_mu) ** 2)
    return post_mu, post_var


def fit_gep(model: GlmModel, opts: Optional[EpOptions] = None) -> GaussianApproximation:
    """EP with one scalar site per observation on its linear predictor.

    Sequential sweeps in ascending site order with damping; tilted moments
    from 64-point Gauss-Hermite quadrature (closed forms for gaussian and
    probit sites).  Site precisions that would go negative are clipped to
    zero and flagged on the returned site set.
    """
    opts = opts or EpOptions()
    n = model.n
    tau = np.zeros(n)
    nu = np.zeros(n)
    nodes, wq = special.roots_hermite(opts.n_quad)
    quad = (nodes, np.log(wq) - 0.5 * np.log(np.pi))
    clipped = False
    g = _ep_global(model, tau, nu)
    cov, mean = g.cov, g.center
    X, y = model.design, model.response
    converged = False
    for _ in range(opts.max_sweeps):
        max_delta = 0.0
        for i in range(n):
            x = X[i]
            v = float(x @ cov @ x)
            mu = float(x @ mean)
            denom = 1.0 - tau[i] * v
            if denom <= 1e-12:
                continue  # cavity undefined; leave the site untouched this sweep
            v_cav = v / denom
            mu_cav = (mu / v - nu[i]) * v_cav
            t_mu, t_var = _tilted_moments(model.family, y[i], mu_cav, v_cav, quad)
            if t_var <= 0:
                continue
            tau_new = 1.0 / t_var - 1.0 / v_cav
            nu_new = t_mu / t_var - mu_cav / v_cav
            if tau_new < 0.0:
                tau_new, nu_new = 0.0, 0.0
                clipped = True
            d_tau = opts.damping * (tau_new - tau[i])
            d_nu = opts.damping * (nu_new - nu[i])
            max_delta = max(max_delta, abs(d_tau), abs(d_nu))
            tau[i] += d_tau
            nu[i] += d_nu
            # rank-one refresh of the global Gaussian
            cx = cov @ x
            cov = cov - np.outer(cx, cx) * (d_tau / (1.0 + d_tau * v))
            mean = cov @ (
                model.prior_mean / model.prior_cov_diag + X.T @ nu
            )
        # guard against drift from the incremental updates
        g = _ep_global(model, tau, nu)
        cov, mean = g.cov, g.center
        if max_delta < opts.tol:
            converged = True
            break
    sites = EpSiteSet(tau, nu, g, clipped=clipped)
    if not converged:
        err = NonConvergenceError(
            f"EP did not converge in {opts.max_sweeps} sweeps", last_iterate=g
        )
        err.sites = sites
        raise err
    g.sites = sites
    return g


# ---------------------------------------------------------------------------
# Semi-nonparametric fourth-order approximation
# ---------------------------------------------------------------------------


def _perfect_matchings(indices):
    if not indices:
        yield []
        return
    first, rest = indices[0], indices[1:]
    for k, partner in enumerate(rest):
        for sub in _perfect_matchings(rest[:k] + rest[k + 1 :]):
            yield [(first, partner)] + sub


def gaussian_expect_poly(tensor: Array, sigma: Array) -> float:
    """E[<T, h^{x k}>] for h ~ N(0, Sigma), k even, via Wick pairings.

    Exact for any symmetric tensor; intended for small d and k <= 8.
    """
    k = tensor.ndim
    if k % 2 != 0:
        return 0.0
    total = 0.0
    idx = list(range(k))
    d = sigma.shape[0]
    flat = tensor.reshape(-1)
    # precompute index tuples once
    grids = np.indices((d,) * k).reshape(k, -1)
    for matching in _perfect_matchings(idx):
        prod = np.ones(grids.shape[1])
        for a, b in matching:
            prod *= sigma[grids[a], grids[b]]
        total += float(flat @ prod)
    return total


def snp_polynomial_terms(l3: Array, l4: Array, h: Array):
    """a = <l4, h^x4>/24 and b = <l3, h^x3>/6 for batched displacements h."""
    a = np.einsum("ijkl,ni,nj,nk,nl->n", l4, h, h, h, h) / 24.0
    b = np.einsum("ijk,ni,nj,nk->n", l3, h, h, h) / 6.0
    return a, b


class SnpApproximation(SymmetricApproximation):
    """Gaussian times the even polynomial 1 + a + a^2/2 + b^2/2.

    a and b are the quartic and cubic Taylor terms of the log-posterior at the
    mode; since 1 + a + a^2/2 >= 1/2 the polynomial is strictly positive, so
    the density is proper.  Restricted to d <= 2 with analytic tensors.
    """

    kind = "snp"

    def __init__(self, mode: Array, precision: Array, l3: Array, l4: Array):
        self.center = np.asarray(mode, dtype=float)
        self.precision = np.asarray(precision, dtype=float)
        self.l3 = np.asarray(l3, dtype=float)
        self.l4 = np.asarray(l4, dtype=float)
        d = self.d
        if d > 2:
            raise UnsupportedModelError("SNP approximation is restricted to d <= 2")
        self.gaussian = GaussianApproximation(
            self.center, np.linalg.inv(self.precision), kind="snp-base"
        )
        sigma = self.gaussian.cov
        # closed-form normalizer: E[1 + a + a^2/2 + b^2/2] under N(0, Sigma)
        e_a = gaussian_expect_poly(self.l4, sigma) / 24.0
        e_a2 = gaussian_expect_poly(
            np.multiply.outer(self.l4, self.l4), sigma
        ) / 24.0**2
        e_b2 = gaussian_expect_poly(
            np.multiply.outer(self.l3, self.l3), sigma
        ) / 6.0**2
        self.poly_normalizer = 1.0 + e_a + 0.5 * e_a2 + 0.5 * e_b2
        self._sampler = None

    def log_poly(self, h: Array) -> Array:
        a, b = snp_polynomial_terms(self.l3, self.l4, h)
        return np.log(1.0 + a + 0.5 * a * a + 0.5 * b * b)

    def log_pdf(self, theta: Array) -> Array:
        th, single = _as_batch(theta, self.d)
        h = th - self.center
        val = (
            self.gaussian.log_pdf(th)
            + self.log_poly(h)
            - np.log(self.poly_normalizer)
        )
        return _unbatch(val, single)

    # -- sampling -----------------------------------------------------------

    def _build_sampler(self):
        if self.d == 1:
            sd = np.sqrt(self.gaussian.cov[0, 0])
            grid = self.center[0] + np.linspace(-10.0 * sd, 10.0 * sd, 4096)
            pdf = np.exp(self.log_pdf(grid[:, None]))
            cdf = np.concatenate(
                [[0.0], np.cumsum((pdf[1:] + pdf[:-1]) * 0.5 * np.diff(grid))]
            )
            cdf /= cdf[-1]
            self._sampler = ("grid", grid, cdf)
        else:
            inflate = 2.0
            prop = GaussianApproximation(
                self.center, self.gaussian.cov * inflate, kind="snp-proposal"
            )
            sd = np.sqrt(np.diag(self.gaussian.cov))
            axes = [
                self.center[j] + np.linspace(-12.0 * sd[j], 12.0 * sd[j], 257)
                for j in range(2)
            ]
            pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 2)
            log_ratio = self.log_pdf(pts) - prop.log_pdf(pts)
            log_m = float(np.max(log_ratio)) + np.log(1.2)
            self._sampler = ("rejection", prop, log_m)

    def draw(self, rng: np.random.Generator, n: int) -> Array:
        if self._sampler is None:
            self._build_sampler()
        if self._sampler[0] == "grid":
            _, grid, cdf = self._sampler
            u = rng.uniform(size=n)
            return np.interp(u, cdf, grid)[:, None]
        _, prop, log_m = self._sampler
        out = np.empty((n, 2))
        filled = 0
        while filled < n:
            m = max(n - filled, 64)
            cand = prop.draw(rng, m)
            acc = np.log(rng.uniform(size=m)) < (
                self.log_pdf(cand) - prop.log_pdf(cand) - log_m
            )
            got = cand[acc]
            take = min(len(got), n - filled)
            out[filled : filled + take] = got[:take]
            filled += take
        return out


def build_snp(model: ModelSpec, laplace: GaussianApproximation) -> SnpApproximation:
    """Fourth-order correction of a fitted Laplace Gaussian at its mode."""
    if model.deriv3 is None or model.deriv4 is None:
        raise UnsupportedModelError(
            "SNP approximation needs analytic third/fourth derivative tensors"
        )
    mode = laplace.center
    precision = laplace.precision
    l3 = posterior_derivatives(model, mode, 3)
    l4 = posterior_derivatives(model, mode, 4)
    return SnpApproximation(mode, precision, l3, l4)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def approx_to_dict(approx: SymmetricApproximation) -> dict:
    """JSON-ready document; round-trips log_pdf to machine precision."""
    if isinstance(approx, SnpApproximation):
        return {
            "kind": "snp",
            "center": approx.center.tolist(),
            "precision": approx.precision.tolist(),
            "l3": approx.l3.tolist(),
            "l4": approx.l4.tolist(),
        }
    if isinstance(approx, GaussianApproximation):
        return {
            "kind": approx.kind,
            "center": approx.center.tolist(),
            "cov_factor": approx.cov_factor.tolist(),
        }
    raise TypeError(f"cannot serialize {type(approx).__name__}")


def approx_from_dict(doc: dict) -> SymmetricApproximation:
    if doc["kind"] == "snp":
        return SnpApproximation(
            np.asarray(doc["center"]),
            np.asarray(doc["precision"]),
            np.asarray(doc["l3"]),
            np.asarray(doc["l4"]),
        )
    L = np.asarray(doc["cov_factor"], dtype=float)
    return GaussianApproximation(np.asarray(doc["center"]), L @ L.T, kind=doc["kind"])
