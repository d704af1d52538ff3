import numpy as np
import numpy.testing as npt
import pytest

from skewfit.exceptions import StaleCacheError
from skewfit.battery import poisson_1d_glm, random_logistic_glm
from skewfit.models import ModelSpec
from skewfit.skew import (
    SkewnessFactor,
    SkewSymmetricApproximation,
    flop_counter,
    load_samples_bin,
    load_samples_csv,
    mirror,
    save_samples_bin,
    save_samples_csv,
    skew_factor,
    skew_factor_fast,
)
from skewfit.symmetric import fit_laplace

# frozen from the log-posterior 3t - e^t - t^2/8 of the single-count model:
# at theta = MAP + 1 the mirror log-density difference and factor value are
POISSON_MAP = 1.0106337404425347
DELTA_AT_MAP_PLUS_1 = -0.9626750430316913
W_AT_MAP_PLUS_1 = 0.27634292649394826


def test_mirror_is_an_involution():
    center = np.array([1.5, -2.0])
    theta = np.array([[0.3, 0.4], [5.0, -1.0]])
    npt.assert_allclose(mirror(mirror(theta, center), center), theta, rtol=1e-15)


def test_factor_at_frozen_point():
    g = poisson_1d_glm()
    factor = SkewnessFactor(g.as_spec(), np.array([POISSON_MAP]), glm=g)
    theta = np.array([POISSON_MAP + 1.0])
    npt.assert_allclose(factor.delta(theta), DELTA_AT_MAP_PLUS_1, rtol=1e-10)
    npt.assert_allclose(factor.weight(theta), W_AT_MAP_PLUS_1, rtol=1e-10)


def test_weights_sum_to_one():
    g = poisson_1d_glm()
    factor = SkewnessFactor(g.as_spec(), np.array([POISSON_MAP]), glm=g)
    theta = np.linspace(-4, 6, 31)[:, None]
    w = factor.weight(theta)
    w_mirror = factor.weight(mirror(theta, factor.center))
    npt.assert_allclose(w + w_mirror, 1.0, atol=1e-12)


def test_extreme_delta_saturates_exactly():
    from skewfit.skew import _weight_from_delta

    w = _weight_from_delta(np.array([800.0, -800.0, np.inf, -np.inf]))
    npt.assert_array_equal(w, [1.0, 0.0, 1.0, 0.0])


def test_both_sides_off_support_gives_half():
    spec = ModelSpec(
        d=1,
        log_prior=lambda t: np.zeros(np.atleast_2d(t).shape[0]),
        log_lik=lambda t: -np.atleast_2d(t)[:, 0] ** 2,
        support_indicator=lambda t: np.abs(np.atleast_2d(t)[:, 0]) < 1.0,
    )
    factor = SkewnessFactor(spec, np.zeros(1))
    # theta and its mirror are both outside (-1, 1)
    npt.assert_allclose(factor.weight(np.array([5.0])), 0.5)
    # one-sided: only the mirror is off support
    spec2 = ModelSpec(
        d=1,
        log_prior=lambda t: np.zeros(np.atleast_2d(t).shape[0]),
        log_lik=lambda t: -np.atleast_2d(t)[:, 0] ** 2,
        support_indicator=lambda t: np.atleast_2d(t)[:, 0] > -1.0,
    )
    factor2 = SkewnessFactor(spec2, np.zeros(1))
    npt.assert_array_equal(factor2.weight(np.array([5.0])), 1.0)
    npt.assert_array_equal(factor2.weight(np.array([-5.0])), 0.0)


def test_fast_path_matches_naive():
    g = random_logistic_glm(seed=21, n=120, d=6)
    spec = g.as_spec()
    center = np.full(6, 0.1)
    factor = SkewnessFactor(spec, center, glm=g)
    theta = center + 0.5 * np.random.default_rng(3).standard_normal((40, 6))
    npt.assert_allclose(
        skew_factor_fast(factor, g, theta), skew_factor(factor, theta), atol=1e-12
    )


def test_fast_path_counts_half_the_predictor_flops():
    g = random_logistic_glm(seed=4, n=50, d=3)
    factor = SkewnessFactor(g.as_spec(), np.zeros(3), glm=g)
    theta = np.random.default_rng(0).standard_normal((10, 3))
    flop_counter["naive"] = flop_counter["fast"] = 0
    factor.weight(theta)
    factor.weight_fast(theta)
    assert flop_counter["naive"] == 2 * flop_counter["fast"]


def test_stale_cache_detected():
    g = poisson_1d_glm()
    factor = SkewnessFactor(g.as_spec(), np.array([1.0]), glm=g)
    factor.center[0] = 2.0  # mutate behind the cache's back
    with pytest.raises(StaleCacheError):
        factor.delta_fast(np.array([0.5]))


def test_sampler_consumes_one_uniform_per_draw():
    g = poisson_1d_glm()
    lap = fit_laplace(g.as_spec(), np.zeros(1))
    factor = SkewnessFactor(g.as_spec(), lap.center, glm=g)
    q = SkewSymmetricApproximation(lap, factor)

    samples = q.draw(np.random.default_rng(77), 500)
    # replay: same base draws, then exactly 500 uniforms decide the flips
    rng = np.random.default_rng(77)
    base = lap.draw(rng, 500)
    u = rng.uniform(size=500)
    w = factor.weight(base)
    expected = np.where((u > w)[:, None], mirror(base, lap.center), base)
    npt.assert_array_equal(samples, expected)


def test_skew_logpdf_mirror_identity():
    # q(theta) + q(mirror) = 2 f(theta) pointwise
    g = poisson_1d_glm()
    lap = fit_laplace(g.as_spec(), np.zeros(1))
    q = SkewSymmetricApproximation(lap, SkewnessFactor(g.as_spec(), lap.center, glm=g))
    theta = np.linspace(-2, 4, 25)[:, None]
    total = np.exp(q.log_pdf(theta)) + np.exp(q.log_pdf(mirror(theta, lap.center)))
    npt.assert_allclose(total, 2 * np.exp(lap.log_pdf(theta)), rtol=1e-10)


def test_csv_roundtrip(tmp_path):
    samples = np.random.default_rng(5).standard_normal((20, 3))
    path = tmp_path / "s.csv"
    save_samples_csv(path, samples, ["a", "b", "c"])
    back, names = load_samples_csv(path)
    assert names == ["a", "b", "c"]
    npt.assert_allclose(back, samples, rtol=1e-12)


def test_binary_roundtrip(tmp_path):
    samples = np.random.default_rng(6).standard_normal((17, 2))
    path = tmp_path / "s.bin"
    save_samples_bin(path, samples)
    npt.assert_array_equal(load_samples_bin(path), samples)
    assert path.read_bytes()[:4] == b"SKWF"


def test_binary_rejects_foreign_files(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"NOPE" + b"\0" * 12)
    with pytest.raises(ValueError):
        load_samples_bin(path)
