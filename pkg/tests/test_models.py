import numpy as np
import numpy.testing as npt
import pytest

from skewfit.exceptions import DimensionError, UnsupportedModelError
from skewfit.models import (
    Family,
    GlmModel,
    ModelSpec,
    glm_mean,
    glm_obs_logpdf,
    load_dataset,
    log_unnorm_posterior,
    mu_functional,
    posterior_derivatives,
)
from skewfit.battery import poisson_1d_glm, poisson_2d_glm, logistic_1d_glm
from skewfit.data import load_substance_use


def _fd(f, theta, j, h=1e-6):
    up, dn = theta.copy(), theta.copy()
    up[j] += h
    dn[j] -= h
    return (f(up) - f(dn)) / (2 * h)


def test_single_and_batched_evaluation_agree():
    g = poisson_2d_glm()
    theta = np.array([0.3, -0.1])
    batch = np.stack([theta, theta + 0.5])
    single = g.log_lik(theta)
    vals = g.log_lik(batch)
    assert vals.shape == (2,)
    assert np.isclose(vals[0], single)


def test_dimension_mismatch_raises():
    g = poisson_1d_glm()
    with pytest.raises(DimensionError):
        g.log_lik(np.zeros(3))


def test_off_support_is_neg_inf():
    spec = ModelSpec(
        d=1,
        log_prior=lambda t: np.zeros(np.atleast_2d(t).shape[0]),
        log_lik=lambda t: -np.atleast_2d(t)[:, 0] ** 2,
        support_indicator=lambda t: np.atleast_2d(t)[:, 0] > 0,
    )
    assert log_unnorm_posterior(spec, np.array([-1.0])) == -np.inf
    assert np.isfinite(log_unnorm_posterior(spec, np.array([1.0])))


def test_glm_gradient_matches_finite_differences():
    g = poisson_2d_glm()
    theta = np.array([0.25, -0.4])
    f = lambda t: float(log_unnorm_posterior(g.as_spec(), t))
    grad = g.grad(theta)
    for j in range(2):
        npt.assert_allclose(grad[j], _fd(f, theta, j), rtol=1e-6)


def test_glm_hessian_matches_finite_differences():
    g = logistic_1d_glm()
    theta = np.array([0.7])
    grad_j = lambda t: g.grad(t)[0]
    npt.assert_allclose(g.hess(theta)[0, 0], _fd(grad_j, theta, 0), rtol=1e-6)


def test_higher_order_tensors_match_finite_differences():
    g = poisson_1d_glm()
    theta = np.array([0.5])
    hess_00 = lambda t: g.hess(t)[0, 0]
    npt.assert_allclose(g.deriv3(theta)[0, 0, 0], _fd(hess_00, theta, 0), rtol=1e-5)
    d3_000 = lambda t: g.deriv3(t)[0, 0, 0]
    npt.assert_allclose(g.deriv4(theta)[0, 0, 0, 0], _fd(d3_000, theta, 0), rtol=1e-5)


def test_posterior_derivatives_fd_fallback():
    # strip the analytic evaluators; FD should still agree in d=1
    g = poisson_1d_glm()
    spec = g.as_spec()
    bare = ModelSpec(d=1, log_prior=spec.log_prior, log_lik=spec.log_lik)
    theta = np.array([0.8])
    npt.assert_allclose(
        posterior_derivatives(bare, theta, 1), g.grad(theta), rtol=1e-6
    )
    npt.assert_allclose(
        posterior_derivatives(bare, theta, 2), g.hess(theta), rtol=1e-4
    )
    npt.assert_allclose(
        posterior_derivatives(bare, theta, 3), g.deriv3(theta), rtol=1e-2
    )


def test_high_order_fd_refused_above_2d():
    rngl = np.random.default_rng(0)
    X = rngl.standard_normal((10, 3))
    y = rngl.poisson(1.0, 10).astype(float)
    g = GlmModel(X, y, Family.POISSON_LOG, np.zeros(3), np.ones(3))
    spec = g.as_spec()
    bare = ModelSpec(d=3, log_prior=spec.log_prior, log_lik=spec.log_lik)
    with pytest.raises(UnsupportedModelError):
        posterior_derivatives(bare, np.zeros(3), 3)


def test_probit_curvature_matches_finite_differences():
    eta = np.array([0.3, -1.2, 2.0])
    y = np.array([1.0, 0.0, 1.0])
    h = 1e-5
    for k in range(3):
        up = glm_obs_logpdf(Family.BERNOULLI_PROBIT, y[k], eta[k] + h)
        dn = glm_obs_logpdf(Family.BERNOULLI_PROBIT, y[k], eta[k] - h)
        mid = glm_obs_logpdf(Family.BERNOULLI_PROBIT, y[k], eta[k])
        fd2 = (up - 2 * mid + dn) / h**2
        from skewfit.models import _glm_b2

        npt.assert_allclose(-fd2, _glm_b2(Family.BERNOULLI_PROBIT, y[k], eta[k]),
                            rtol=1e-4)


def test_glm_mean_values():
    npt.assert_allclose(glm_mean(Family.POISSON_LOG, np.array([0.0, 1.0])),
                        [1.0, np.e])
    npt.assert_allclose(glm_mean(Family.BERNOULLI_LOGIT, np.array([0.0])), [0.5])
    npt.assert_allclose(glm_mean(Family.BERNOULLI_PROBIT, np.array([0.0])), [0.5])


def test_mu_functional_fixed_theta_is_exact():
    g = logistic_1d_glm()
    theta = np.array([0.9])
    expected = 1.0 / (1.0 + np.exp(-g.design[:, 0] * 0.9))
    npt.assert_allclose(mu_functional(g, theta), expected, rtol=1e-12)


def test_load_dataset_roundtrip(tmp_path):
    path = tmp_path / "toy.csv"
    path.write_text("y,x1,x2\n1,0.5,2\n0,-1,3\n")
    ds = load_dataset(path, "y", add_intercept=True)
    assert ds.column_names == ["intercept", "x1", "x2"]
    npt.assert_allclose(ds.predictors, [[1, 0.5, 2], [1, -1, 3]])
    npt.assert_allclose(ds.responses, [1, 0])


def test_bundled_dataset_shape_and_total():
    model = load_substance_use()
    assert model.design.shape == (32, 16)
    assert model.response.sum() == 2276
    assert model.family is Family.POISSON_LOG
    # intercept column plus 0/1 factor columns
    npt.assert_allclose(model.design[:, 0], 1.0)
    assert set(np.unique(model.design[:, 1:])) <= {0.0, 1.0}
    # interaction columns really are products of the main effects
    names = list(model.column_names)
    assert names[0] == "intercept"
    for j, name in enumerate(names):
        if "_x_" in name:
            a, b = name.split("_x_")
            npt.assert_allclose(
                model.design[:, j],
                model.design[:, names.index(a)] * model.design[:, names.index(b)],
            )
