"""Ground-truth posterior samplers: adaptive random-walk Metropolis and
leapfrog HMC with dual-averaging step size, plus split-R-hat/ESS diagnostics.

Chains use independent RNG streams derived from (seed, chain index) and are
merged deterministically by chain index, so results are bitwise reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import StuckChainError
from .models import ModelSpec, log_unnorm_posterior, posterior_derivatives

Array = np.ndarray


@dataclass
class McmcConfig:
    n_chains: int = 4
    n_warmup: int = 1000
    n_keep: int = 10000
    seed: int = 0
    algorithm: str = "hmc"
    hmc_leapfrog_steps: int = 32
    target_accept: float = 0.8

    def __post_init__(self):
        if self.n_chains < 2:
            raise ValueError("need n_chains >= 2 for R-hat")
        if self.n_keep < 1000:
            raise ValueError("need n_keep >= 1000")
        if self.algorithm not in ("rwm", "hmc"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")


@dataclass
class ChainDiagnostics:
    r_hat: Array
    ess: Array
    accept_rate: Array
    divergent: int = 0
    warnings: list = field(default_factory=list)


def _chain_rng(seed: int, chain: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(chain,)))


# ---------------------------------------------------------------------------
# Random-walk Metropolis
# ---------------------------------------------------------------------------


def _rwm_chain(model: ModelSpec, init: Array, cfg: McmcConfig, chain: int):
    rng = _chain_rng(cfg.seed, chain)
    d = model.d
    theta = init.copy()
    lp = float(log_unnorm_posterior(model, theta))
    scale = 2.38**2 / d
    prop_chol = np.eye(d) * 0.1
    warm_hist = []
    accepted_warm = 0
    for it in range(cfg.n_warmup):
        prop = theta + np.sqrt(scale) * (prop_chol @ rng.standard_normal(d))
        lp_prop = float(log_unnorm_posterior(model, prop))
        if np.log(rng.uniform()) < lp_prop - lp:
            theta, lp = prop, lp_prop
            accepted_warm += 1
        warm_hist.append(theta.copy())
        # refresh the proposal covariance from the accumulated history
        if it >= 50 and (it + 1) % 100 == 0:
            emp = np.cov(np.asarray(warm_hist[len(warm_hist) // 2 :]).T).reshape(d, d)
            emp += 1e-8 * np.eye(d)
            try:
                prop_chol = np.linalg.cholesky(emp)
            except np.linalg.LinAlgError:
                pass
    if accepted_warm == 0:
        raise StuckChainError(f"chain {chain} accepted nothing during warmup")
    samples = np.empty((cfg.n_keep, d))
    accepted = 0
    for it in range(cfg.n_keep):
        prop = theta + np.sqrt(scale) * (prop_chol @ rng.standard_normal(d))
        lp_prop = float(log_unnorm_posterior(model, prop))
        if np.log(rng.uniform()) < lp_prop - lp:
            theta, lp = prop, lp_prop
            accepted += 1
        samples[it] = theta
    return samples, accepted / cfg.n_keep, 0


def rwm_sample(model: ModelSpec, cfg: McmcConfig, init: Optional[Array] = None):
    """Adaptive Gaussian-proposal Metropolis; adaptation frozen after warmup."""
    init = np.zeros(model.d) if init is None else np.asarray(init, dtype=float)
    per_chain = [_rwm_chain(model, init, cfg, c) for c in range(cfg.n_chains)]
    chains = np.stack([s for s, _, _ in per_chain])
    diags = diagnostics(chains)
    diags.accept_rate = np.array([a for _, a, _ in per_chain])
    return chains, diags


# ---------------------------------------------------------------------------
# Hamiltonian Monte Carlo
# ---------------------------------------------------------------------------


def _leapfrog(grad, theta, p, eps, n_steps, inv_mass):
    g = grad(theta)
    for _ in range(n_steps):
        p = p + 0.5 * eps * g
        theta = theta + eps * inv_mass * p
        if not np.all(np.isfinite(theta)):
            # diverged; the caller rejects via the non-finite Hamiltonian
            return theta, np.full_like(p, np.nan), g
        g = grad(theta)
        p = p + 0.5 * eps * g
    return theta, p, g


def _hmc_chain(model: ModelSpec, init: Array, cfg: McmcConfig, chain: int):
    rng = _chain_rng(cfg.seed, chain)
    d = model.d

    def logpost(t):
        return float(log_unnorm_posterior(model, t))

    def grad(t):
        return posterior_derivatives(model, t, 1)

    theta = init.copy()
    lp = logpost(theta)
    inv_mass = np.ones(d)  # inverse of the diagonal mass matrix

    class DualAveraging:
        """Step-size adaptation toward the target acceptance rate."""

        gamma, t0, kappa = 0.05, 10.0, 0.75

        def __init__(self, eps0):
            self.mu = np.log(10.0 * eps0)
            self.log_eps_bar = np.log(eps0)
            self.h_bar = 0.0
            self.count = 0
            self.eps = eps0

        def update(self, alpha):
            self.count += 1
            frac = 1.0 / (self.count + self.t0)
            self.h_bar = (1.0 - frac) * self.h_bar + frac * (
                cfg.target_accept - alpha
            )
            log_eps = self.mu - np.sqrt(self.count) / self.gamma * self.h_bar
            w = self.count ** (-self.kappa)
            self.log_eps_bar = w * log_eps + (1.0 - w) * self.log_eps_bar
            self.eps = float(np.exp(log_eps))

        def finalize(self):
            self.eps = float(np.exp(self.log_eps_bar))

    # warmup: phase 1 adapts the step under identity mass while collecting
    # variance estimates; phase 2 re-adapts the step under the new mass
    half = cfg.n_warmup // 2
    adapt = DualAveraging(0.1)
    warm_samples = []
    divergent = 0
    accepted = 0
    n_total = cfg.n_warmup + cfg.n_keep
    samples = np.empty((cfg.n_keep, d))
    for it in range(n_total):
        warming = it < cfg.n_warmup
        steps = max(1, int(round(cfg.hmc_leapfrog_steps * rng.uniform(0.8, 1.2))))
        p0 = rng.standard_normal(d) / np.sqrt(inv_mass)
        h0 = -lp + 0.5 * np.sum(inv_mass * p0**2)
        theta_new, p_new, _ = _leapfrog(grad, theta, p0, adapt.eps, steps, inv_mass)
        if np.all(np.isfinite(theta_new)):
            lp_new = logpost(theta_new)
            with np.errstate(over="ignore"):  # huge momentum -> certain reject
                h1 = -lp_new + 0.5 * np.sum(inv_mass * p_new**2)
            delta_h = h0 - h1
        else:
            delta_h = -np.inf
        if not np.isfinite(delta_h) or delta_h < -1000.0:
            alpha = 0.0
            if not warming:
                divergent += 1
        else:
            alpha = min(1.0, float(np.exp(delta_h)))
        if rng.uniform() < alpha:
            theta, lp = theta_new, lp_new
            if not warming:
                accepted += 1
        if warming:
            adapt.update(alpha)
            if it < half:
                if it >= half // 4:  # skip the earliest transient
                    warm_samples.append(theta.copy())
                if it + 1 == half and len(warm_samples) > 10:
                    var = np.var(np.asarray(warm_samples), axis=0)
                    inv_mass = np.maximum(var, 1e-12)
                    adapt = DualAveraging(adapt.eps)
            if it + 1 == cfg.n_warmup:
                adapt.finalize()
        else:
            samples[it - cfg.n_warmup] = theta
    return samples, accepted / cfg.n_keep, divergent


def hmc_sample(model: ModelSpec, cfg: McmcConfig, init: Optional[Array] = None):
    """Leapfrog HMC, identity mass rescaled by warmup variances, dual-averaged
    step size, Metropolis-corrected for exact invariance."""
    init = np.zeros(model.d) if init is None else np.asarray(init, dtype=float)
    per_chain = [_hmc_chain(model, init, cfg, c) for c in range(cfg.n_chains)]
    chains = np.stack([s for s, _, _ in per_chain])
    diags = diagnostics(chains)
    diags.accept_rate = np.array([a for _, a, _ in per_chain])
    diags.divergent = sum(v for _, _, v in per_chain)
    total = cfg.n_chains * cfg.n_keep
    if diags.divergent > 0.01 * total:
        diags.warnings.append(
            f"{diags.divergent} divergent transitions (> 1% of draws)"
        )
    return chains, diags


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


def _split_rhat(chains: Array) -> float:
    m, n = chains.shape
    half = n // 2
    splits = np.concatenate([chains[:, :half], chains[:, half : 2 * half]], axis=0)
    means = splits.mean(axis=1)
    within = splits.var(axis=1, ddof=1).mean()
    between = half * means.var(ddof=1)
    if within < 1e-300:
        return np.nan  # degenerate-variance convention: flagged undefined
    var_plus = (half - 1) / half * within + between / half
    return float(np.sqrt(var_plus / within))


def _ess_autocorr(chains: Array) -> float:
    """Autocorrelation ESS with Geyer's initial-monotone truncation."""
    m, n = chains.shape
    w = chains.var(axis=1, ddof=0).mean()
    if w < 1e-300:
        return float(m * n)  # constant chain: report the total draw count
    acov = np.zeros(n)
    for c in range(m):
        x = chains[c] - chains[c].mean()
        f = np.fft.rfft(x, 2 * n)
        ac = np.fft.irfft(f * np.conj(f))[:n] / n
        acov += ac / m
    rho = acov / acov[0]
    # pair sums; stop at the first negative, enforce monotone decrease
    tau = 1.0
    prev = np.inf
    for k in range(1, n // 2):
        pair = rho[2 * k - 1] + rho[2 * k]
        if pair < 0:
            break
        pair = min(pair, prev)
        prev = pair
        tau += 2.0 * pair
    ess = m * n / tau
    return float(min(ess, m * n))


def diagnostics(chains: Array) -> ChainDiagnostics:
    """Split-R-hat and autocorrelation ESS per coordinate.

    chains has shape (n_chains, n_draws, d).
    """
    chains = np.asarray(chains, dtype=float)
    if chains.ndim != 3 or chains.shape[0] < 2:
        raise ValueError("need (n_chains >= 2, n_draws, d) sample array")
    d = chains.shape[2]
    r_hat = np.array([_split_rhat(chains[:, :, j]) for j in range(d)])
    ess = np.array([_ess_autocorr(chains[:, :, j]) for j in range(d)])
    return ChainDiagnostics(
        r_hat=r_hat, ess=ess, accept_rate=np.full(chains.shape[0], np.nan)
    )
