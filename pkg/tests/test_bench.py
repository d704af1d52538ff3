import json

import numpy as np
import numpy.testing as npt
import pytest

from skewfit.battery import exponential_rate_model, logistic_1d_glm
from skewfit.bench import (
    FUNCTIONAL_COLUMNS,
    ErrorTable,
    RateCurve,
    emit_report,
    error_table,
    load_table_csv,
    rate_experiment,
    summarize,
)


def test_summarize_degenerate_samples():
    s = summarize(np.full((2000, 2), 3.5))
    for stat in (s.q1_theta, s.median_theta, s.q3_theta, s.mean_theta):
        npt.assert_array_equal(stat, [3.5, 3.5])
    assert s.q1_mu is None


def test_summarize_normal_quantiles():
    draws = np.random.default_rng(0).standard_normal((1_000_000, 1))
    s = summarize(draws)
    npt.assert_allclose(s.q1_theta[0], -0.6744897501960817, atol=0.005)
    npt.assert_allclose(s.q3_theta[0], 0.6744897501960817, atol=0.005)


def test_summarize_quantiles_are_type7():
    samples = np.array([[1.0], [2.0], [3.0], [4.0]])
    s = summarize(samples)
    assert s.warnings  # too few draws for precision
    npt.assert_allclose(s.q1_theta[0], 1.75)  # linear interpolation definition
    npt.assert_allclose(s.median_theta[0], 2.5)


def test_summarize_mu_fixed_theta_exact():
    g = logistic_1d_glm()
    theta = np.full((2000, 1), 0.9)
    s = summarize(theta, g)
    expected = 1.0 / (1.0 + np.exp(-g.design[:, 0] * 0.9))
    for stat in (s.q1_mu, s.median_mu, s.q3_mu, s.mean_mu):
        npt.assert_allclose(stat, expected, rtol=1e-12)


def test_error_table_arithmetic():
    base = summarize(np.zeros((2000, 2)))
    approx = summarize(np.tile([0.1, -0.3], (2000, 1)))
    table = error_table({"shifted": approx, "same": base}, base)
    row = dict(zip(table.columns, table.rows["shifted"]))
    npt.assert_allclose(row["mean.theta"], 0.2)
    npt.assert_allclose(table.rows["same"][:4], 0.0)
    assert table.best_in_column("mean.theta") == "same"


def test_error_table_columns_fixed_order():
    assert FUNCTIONAL_COLUMNS == (
        "q1.theta", "median.theta", "q3.theta", "mean.theta",
        "q1.mu", "median.mu", "q3.mu", "mean.mu",
    )


def test_rate_curve_validation():
    with pytest.raises(ValueError):
        RateCurve("q1", [100, 50], [0.1, 0.2], None, None)


def test_slope_fit_on_exact_power_law():
    from skewfit.bench import _fit_loglog

    n = np.array([25, 50, 100, 200])
    slope, stderr = _fit_loglog(n, 0.7 * n**-1.5)
    npt.assert_allclose(slope, -1.5, atol=1e-12)
    assert stderr < 1e-10


def test_rate_experiment_exponential_family_slopes():
    curves = rate_experiment(
        exponential_rate_model, [25, 100, 400], n_replicates=5, seed=0
    )
    assert -1.25 < curves["q1"].fitted_slope < -0.80
    assert curves["q2"].fitted_slope < curves["q1"].fitted_slope < curves["f1"].fitted_slope


def test_emit_report_roundtrip(tmp_path):
    base = summarize(np.zeros((2000, 1)))
    approx = summarize(np.full((2000, 1), 0.37))
    table = error_table({"a": approx}, base)
    doc = emit_report(tmp_path, tables={"t": table}, config={"seed": 1})
    assert doc["schema_version"] == 1
    back = load_table_csv(tmp_path / "table_t.csv")
    npt.assert_allclose(back.rows["a"][:4], table.rows["a"][:4], rtol=1e-12)
    parsed = json.loads((tmp_path / "report.json").read_text())
    assert parsed["tables"]["t"]["rows"]["a"][:4] == table.rows["a"][:4]


def test_emit_report_requires_content(tmp_path):
    with pytest.raises(ValueError):
        emit_report(tmp_path)


def test_emit_report_curves_only(tmp_path):
    curve = RateCurve("q1", [10, 20], [0.2, 0.1], -1.0, 0.0)
    doc = emit_report(tmp_path, curves={"q1": curve})
    assert doc["curves"][0]["variant"] == "q1"
    assert doc["tables"] == {}
