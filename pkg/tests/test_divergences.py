import numpy as np
import numpy.testing as npt
import pytest
from scipy import stats

from skewfit.exceptions import (
    DomainTooSmallError,
    SupportMismatchError,
    UnreliableEstimateError,
)
from skewfit.divergences import (
    GridSpec,
    alpha_div_grid,
    default_grid,
    grid_normalized,
    kl_grid,
    symmetrize_logpdf,
    tv_grid,
    tv_mc,
)

# closed forms for N(0,1) vs N(0.8,1):
# TV = 2*Phi(0.4) - 1, KL = 0.32 both ways,
# D_alpha = (1 - exp(-alpha(1-alpha) 0.32))/(alpha(1-alpha))
TV_GAUSS = 0.31084348322064836
KL_GAUSS = 0.32
ALPHA_GAUSS = {-1.0: 0.44824043965247584, 0.5: 0.307534614453457,
               2.0: 0.44824043965247584}


def _gauss_logpdf(mean, sd=1.0):
    def lp(theta):
        t = np.atleast_2d(np.asarray(theta, dtype=float))[:, 0]
        out = -0.5 * ((t - mean) / sd) ** 2 - np.log(sd * np.sqrt(2 * np.pi))
        return out if np.asarray(theta).ndim == 2 else out[0]
    return lp


@pytest.fixture
def grid():
    return GridSpec((-13.0,), (13.8,), 4096)


def test_gridspec_validation():
    with pytest.raises(ValueError):
        GridSpec((0.0,), (1.0,), 32)  # too coarse
    with pytest.raises(ValueError):
        GridSpec((1.0,), (0.0,), 128)  # inverted box
    with pytest.raises(ValueError):
        GridSpec((0.0,) * 3, (1.0,) * 3, 128)  # d > 2


def test_grid_weights_integrate_constants():
    g = GridSpec((0.0, 0.0), (2.0, 3.0), 101)
    _, wts = g.points_and_weights()
    npt.assert_allclose(wts.sum(), 6.0, rtol=1e-12)


def test_tv_between_gaussians(grid):
    # the kink of |p - q| limits the trapezoid rule to O(h^2) here
    est = tv_grid(_gauss_logpdf(0.0), _gauss_logpdf(0.8), grid)
    npt.assert_allclose(est.value, TV_GAUSS, atol=1e-5)
    assert abs(est.value - TV_GAUSS) < 5 * est.err_estimate


def test_kl_between_gaussians(grid):
    fwd = kl_grid(_gauss_logpdf(0.0), _gauss_logpdf(0.8), "forward", grid)
    rev = kl_grid(_gauss_logpdf(0.0), _gauss_logpdf(0.8), "reverse", grid)
    npt.assert_allclose(fwd.value, KL_GAUSS, atol=1e-10)
    npt.assert_allclose(rev.value, KL_GAUSS, atol=1e-10)


def test_alpha_between_gaussians(grid):
    for a, expected in ALPHA_GAUSS.items():
        est = alpha_div_grid(_gauss_logpdf(0.0), _gauss_logpdf(0.8), a, grid)
        npt.assert_allclose(est.value, expected, atol=1e-10)


def test_alpha_rejects_kl_limits(grid):
    with pytest.raises(ValueError):
        alpha_div_grid(_gauss_logpdf(0.0), _gauss_logpdf(0.8), 1.0, grid)
    with pytest.raises(ValueError):
        alpha_div_grid(_gauss_logpdf(0.0), _gauss_logpdf(0.8), 0.0, grid)


def test_identical_densities_give_zero(grid):
    lp = _gauss_logpdf(0.3)
    assert tv_grid(lp, lp, grid).value == 0.0
    assert kl_grid(lp, lp, "forward", grid).value == 0.0


def test_mass_deficit_raises():
    small = GridSpec((-1.0,), (1.0,), 128)
    with pytest.raises(DomainTooSmallError) as err:
        tv_grid(_gauss_logpdf(0.0), _gauss_logpdf(0.0), small)
    assert err.value.deficit > 1e-6


def test_kl_support_mismatch():
    def truncated(theta):
        t = np.atleast_2d(np.asarray(theta, dtype=float))[:, 0]
        out = np.where(t > 0, -0.5 * t**2 + np.log(2 / np.sqrt(2 * np.pi)), -np.inf)
        return out if np.asarray(theta).ndim == 2 else out[0]

    grid = GridSpec((-13.0,), (13.0,), 4096)
    with pytest.raises(SupportMismatchError):
        kl_grid(_gauss_logpdf(0.0), truncated, "forward", grid)


def test_grid_normalized_mass(grid):
    log_p = grid_normalized(lambda t: -np.atleast_2d(t)[:, 0] ** 2, grid)
    pts, wts = grid.points_and_weights()
    npt.assert_allclose(wts @ np.exp(log_p(pts)), 1.0, rtol=1e-12)


def test_quadrature_recovers_loggamma_moments():
    # diffuse-prior exponential-rate posterior: e^t ~ Gamma(n, S), so
    # E[t] = digamma(n) - log S and Var[t] = trigamma(n)
    n, S = 25, 27.3
    grid = GridSpec((-3.0,), (3.0,), 8192)
    log_p = grid_normalized(
        lambda t: n * np.atleast_2d(t)[:, 0] - S * np.exp(np.atleast_2d(t)[:, 0]),
        grid,
    )
    pts, wts = grid.points_and_weights()
    p = np.exp(log_p(pts))
    mean = wts @ (p * pts[:, 0])
    var = wts @ (p * (pts[:, 0] - mean) ** 2)
    npt.assert_allclose(mean, -0.10814418933894032, atol=1e-10)
    npt.assert_allclose(var, 0.04081066, atol=1e-6)


def test_symmetrize_produces_symmetric_density():
    center = np.array([0.4])
    log_pbar = symmetrize_logpdf(_gauss_logpdf(1.1), center)
    h = np.linspace(0.1, 3.0, 17)[:, None]
    npt.assert_allclose(log_pbar(center + h), log_pbar(center - h), rtol=1e-12)


def test_default_grid_spans_12_sd():
    g = default_grid(np.array([2.0]), np.array([[4.0]]))
    assert g.lo == (2.0 - 24.0,)
    assert g.hi == (2.0 + 24.0,)
    assert g.points_per_dim == 4096


def test_tv_mc_agrees_with_quadrature(grid):
    rng = np.random.default_rng(8)
    est = tv_mc(
        _gauss_logpdf(0.0),
        lambda r, n: r.normal(0.8, 1.0, size=(n, 1)),
        _gauss_logpdf(0.8),
        200_000,
        rng,
    )
    assert abs(est.value - TV_GAUSS) < 5 * est.err_estimate + 0.01


def test_tv_mc_rejects_tiny_ess():
    rng = np.random.default_rng(9)
    with pytest.raises(UnreliableEstimateError):
        tv_mc(
            _gauss_logpdf(0.0, sd=1.0),
            lambda r, n: r.normal(30.0, 0.1, size=(n, 1)),  # hopeless proposal
            _gauss_logpdf(30.0, sd=0.1),
            1000,
            rng,
        )
