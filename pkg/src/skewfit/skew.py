"""Skewness-inducing factor and skew-symmetric approximations.

The factor w(theta) is the posterior density's share at theta relative to the
mirror pair (theta, 2*center - theta).  It is computed exclusively in log
scale through a logistic of the log-density difference; the linear-scale
ratio overflows for realistic posteriors.  Perturbing any symmetric
approximation f by w gives the density q(theta) = 2 f(theta) w(theta), which
admits rejection-free i.i.d. sampling by mirror flipping.
"""

from __future__ import annotations

import struct
from typing import Optional, Sequence

import numpy as np

from .exceptions import DimensionError, StaleCacheError
from .models import (
    GlmModel,
    ModelSpec,
    _as_batch,
    _unbatch,
    glm_obs_logpdf,
    log_unnorm_posterior,
)
from .symmetric import SymmetricApproximation

Array = np.ndarray

#: running count of predictor multiplications, for the fast-path microbenchmark
flop_counter = {"naive": 0, "fast": 0}


def mirror(theta: Array, center: Array) -> Array:
    """Reflection 2*center - theta; an involution."""
    theta = np.asarray(theta, dtype=float)
    center = np.asarray(center, dtype=float)
    if theta.shape[-1] != center.shape[0]:
        raise DimensionError("theta and center dimensions differ")
    return 2.0 * center - theta


def _weight_from_delta(delta: Array) -> Array:
    """logistic(delta) with exact 0/1 saturation; delta may contain +-inf/nan.

    nan encodes the both-sides-off-support case and maps to 0.5.
    """
    delta = np.asarray(delta, dtype=float)
    out = np.empty_like(delta)
    both_zero = np.isnan(delta)
    pos = delta >= 0
    neg = ~pos & ~both_zero
    out[pos] = 1.0 / (1.0 + np.exp(-delta[pos]))
    e = np.exp(delta[neg])
    out[neg] = e / (1.0 + e)
    out[both_zero] = 0.5
    return out


def _log_weight_from_delta(delta: Array) -> Array:
    delta = np.asarray(delta, dtype=float)
    out = np.empty_like(delta)
    both_zero = np.isnan(delta)
    pos = delta >= 0
    neg = ~pos & ~both_zero
    out[pos] = -np.log1p(np.exp(-delta[pos]))
    out[neg] = delta[neg] - np.log1p(np.exp(delta[neg]))
    out[both_zero] = np.log(0.5)
    return out


class SkewnessFactor:
    """The closed-form skewing function of a posterior about a center point.

    For GLMs the linear predictors at the center are precomputed once at
    construction, enabling the single-matvec evaluation path.  The cache is
    fingerprinted by the center so stale state raises instead of corrupting
    results.
    """

    def __init__(
        self,
        model: ModelSpec,
        center: Array,
        glm: Optional[GlmModel] = None,
    ):
        self.model = model
        self.center = np.asarray(center, dtype=float)
        if self.center.shape != (model.d,):
            raise DimensionError(f"center must have shape ({model.d},)")
        self.glm = glm
        if glm is not None:
            if glm.d != model.d:
                raise DimensionError("GLM dimension differs from the model spec")
            self.precomputed_eta = glm.linpred(self.center)
            self._center_tag = self.center.tobytes()
        else:
            self.precomputed_eta = None
            self._center_tag = None

    # -- log-density difference between theta and its mirror ----------------

    def delta(self, theta: Array) -> Array:
        """lp(theta) - lp(mirror); nan where both sides are off support."""
        th, single = _as_batch(theta, self.model.d)
        lp1 = np.atleast_1d(log_unnorm_posterior(self.model, th))
        lp2 = np.atleast_1d(
            log_unnorm_posterior(self.model, mirror(th, self.center))
        )
        if np.any(np.isnan(lp1)) or np.any(np.isnan(lp2)):
            raise FloatingPointError("model evaluation produced NaN")
        out = np.where(
            np.isneginf(lp1) & np.isneginf(lp2), np.nan, _safe_sub(lp1, lp2)
        )
        flop_counter["naive"] += 2 * th.shape[0] * self.model.d * (
            self.glm.n if self.glm is not None else 1
        )
        return _unbatch(out, single)

    def delta_fast(self, theta: Array) -> Array:
        """Same difference via one linear-predictor evaluation (GLM only)."""
        if self.precomputed_eta is None:
            raise StaleCacheError("no precomputed linear predictors; need a GLM")
        if self.center.tobytes() != self._center_tag:
            raise StaleCacheError("center changed since eta precomputation")
        glm = self.glm
        th, single = _as_batch(theta, glm.d)
        eta_diff = glm.linpred(th - self.center)
        flop_counter["fast"] += th.shape[0] * glm.d * glm.n
        y = glm.response
        ll_plus = np.sum(
            glm_obs_logpdf(glm.family, y, self.precomputed_eta + eta_diff), axis=-1
        )
        ll_minus = np.sum(
            glm_obs_logpdf(glm.family, y, self.precomputed_eta - eta_diff), axis=-1
        )
        lp1 = np.atleast_1d(glm.log_prior(th)) + ll_plus
        lp2 = np.atleast_1d(glm.log_prior(mirror(th, self.center))) + ll_minus
        out = np.where(
            np.isneginf(lp1) & np.isneginf(lp2), np.nan, _safe_sub(lp1, lp2)
        )
        return _unbatch(out, single)

    # -- factor values ------------------------------------------------------

    def weight(self, theta: Array) -> Array:
        """w(theta) in [0, 1]; 0.5 where both mirror-pair densities vanish."""
        return _weight_from_delta(self.delta(theta))

    def weight_fast(self, theta: Array) -> Array:
        return _weight_from_delta(self.delta_fast(theta))

    def log_weight(self, theta: Array) -> Array:
        if self.precomputed_eta is not None:
            return _log_weight_from_delta(self.delta_fast(theta))
        return _log_weight_from_delta(self.delta(theta))


def _safe_sub(a: Array, b: Array) -> Array:
    """a - b with inf - inf treated as signed infinity of the finite side."""
    with np.errstate(invalid="ignore"):
        out = a - b
    out[np.isneginf(a) & np.isfinite(b)] = -np.inf
    out[np.isfinite(a) & np.isneginf(b)] = np.inf
    return out


def skew_factor(factor: SkewnessFactor, theta: Array) -> Array:
    """Two-evaluation route for w(theta)."""
    return factor.weight(theta)


def skew_factor_fast(factor: SkewnessFactor, model: GlmModel, theta: Array) -> Array:
    """Single-matvec route; identical to skew_factor within 1e-12."""
    if factor.glm is not model and factor.glm is not None:
        # allow an explicitly passed identical model
        pass
    return factor.weight_fast(theta)


class SkewSymmetricApproximation:
    """q(theta) = 2 f(theta) w(theta) for a symmetric f and its skew factor."""

    def __init__(self, symmetric: SymmetricApproximation, factor: SkewnessFactor):
        if not np.array_equal(symmetric.center, factor.center):
            raise ValueError("symmetric component and factor centers differ")
        self.symmetric = symmetric
        self.factor = factor

    @property
    def center(self) -> Array:
        return self.symmetric.center

    @property
    def d(self) -> int:
        return self.symmetric.d

    def log_pdf(self, theta: Array) -> Array:
        return (
            np.log(2.0)
            + self.symmetric.log_pdf(theta)
            + self.factor.log_weight(theta)
        )

    def draw(self, rng: np.random.Generator, n: int) -> Array:
        samples, _, _ = self.draw_instrumented(rng, n)
        return samples

    def draw_instrumented(self, rng: np.random.Generator, n: int):
        """Mirror-flip sampler; returns (samples, base draws, flip mask).

        Consumes exactly one uniform per draw after the base draw, so streams
        are reproducible across seeds.
        """
        theta_tmp = self.symmetric.draw(rng, n)
        u = rng.uniform(size=n)
        w = (
            self.factor.weight_fast(theta_tmp)
            if self.factor.precomputed_eta is not None
            else self.factor.weight(theta_tmp)
        )
        flip = u > w
        samples = np.where(flip[:, None], mirror(theta_tmp, self.center), theta_tmp)
        return samples, theta_tmp, flip


def sample_skew(
    q: SkewSymmetricApproximation, n_samples: int, rng: np.random.Generator
) -> Array:
    """i.i.d. draws from the skew-symmetric approximation (rejection-free)."""
    return q.draw(rng, n_samples)


def skew_logpdf(q: SkewSymmetricApproximation, theta: Array) -> Array:
    return q.log_pdf(theta)


# ---------------------------------------------------------------------------
# Sample containers
# ---------------------------------------------------------------------------

_BIN_MAGIC = b"SKWF"
_BIN_VERSION = 1


def save_samples_csv(path, samples: Array, column_names: Optional[Sequence[str]] = None):
    samples = np.asarray(samples, dtype=float)
    d = samples.shape[1]
    names = list(column_names) if column_names else [f"theta_{j}" for j in range(d)]
    if len(names) != d:
        raise ValueError("column name count must match sample dimension")
    header = ",".join(names)
    np.savetxt(path, samples, delimiter=",", header=header, comments="")


def load_samples_csv(path) -> tuple[Array, list[str]]:
    with open(path) as fh:
        names = fh.readline().strip().split(",")
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2), names


def save_samples_bin(path, samples: Array):
    """Column-major float64 container with a 16-byte (magic, version, n, d) header."""
    samples = np.ascontiguousarray(np.asarray(samples, dtype="<f8"))
    n, d = samples.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIII", _BIN_MAGIC, _BIN_VERSION, n, d))
        fh.write(samples.T.tobytes())


def load_samples_bin(path) -> Array:
    with open(path, "rb") as fh:
        magic, version, n, d = struct.unpack("<4sIII", fh.read(16))
        if magic != _BIN_MAGIC:
            raise ValueError("not a skewfit sample container")
        if version != _BIN_VERSION:
            raise ValueError(f"unsupported container version {version}")
        data = np.frombuffer(fh.read(8 * n * d), dtype="<f8")
    return data.reshape(d, n).T.copy()
