#!/usr/bin/env python3
"""
Test script for principal-component regression and the Lasso
"""

import numpy as np
import pandas as pd
import pytest
import statsmodels.api as sm

import impute_pca
import regress
from check_runner import main
from errors import DidNotConverge, InvalidConfig, LengthMismatch
from stats_utils import format_p_value, significance_stars


def orthogonal_scores(n: int = 300, p: int = 4, seed: int = 0) -> pd.DataFrame:
    rng = np.random.default_rng(seed)
    data = rng.normal(size=(n, 6)) @ rng.normal(size=(6, 6))
    model = impute_pca.fit_pca(data, p)
    return pd.DataFrame(impute_pca.project(model, data), columns=model.component_names)


def test_pcr_planted_components():
    scores = orthogonal_scores()
    noise = np.random.default_rng(1).normal(0.0, 0.1, size=len(scores))
    y = 2.0 * scores["PC1"] - scores["PC3"] + noise
    report = regress.pcr(y, scores)
    assert report.terms == [regress.INTERCEPT, "PC1", "PC2", "PC3", "PC4"]
    assert abs(report.coefficient("PC1") - 2.0) < 0.05
    assert abs(report.coefficient("PC3") + 1.0) < 0.05
    assert abs(report.coefficient("PC2")) < 0.05
    assert report.p_value("PC1") < 1e-6 and report.p_value("PC3") < 1e-6
    assert report.n == 300 and not report.controls_included


def test_pcr_orthogonal_scores_decouple():
    scores = orthogonal_scores(seed=4)
    y = np.random.default_rng(5).normal(size=len(scores)) + scores["PC2"]
    full = regress.pcr(y, scores)
    alone = regress.pcr(y, scores[["PC2"]])
    assert full.coefficient("PC2") == pytest.approx(alone.coefficient("PC2"), rel=1e-9)


def test_pcr_with_controls():
    scores = orthogonal_scores(n=240, p=2, seed=2)
    rng = np.random.default_rng(3)
    country = np.array(["DE", "IT", "FR"] * 80)
    y = 2.0 * scores["PC1"] + np.where(country == "IT", 1.0, 0.0) + rng.normal(0.0, 0.1, size=240)
    report = regress.pcr(y, scores, {"country": country})
    assert report.controls_included
    assert "country_DE" not in report.terms
    assert abs(report.coefficient("country_IT") - 1.0) < 0.05
    assert abs(report.coefficient("country_FR")) < 0.05

    dummies = regress.dummy_columns(pd.DataFrame({"country": ["IT", "DE", "FR", "IT"]}))
    assert list(dummies.columns) == ["country_FR", "country_IT"]
    np.testing.assert_array_equal(dummies["country_IT"], [1.0, 0.0, 0.0, 1.0])

    table = regress.regression_table(report)
    assert list(table.columns) == ["Estimate", "Std. Error", "t value", "p-value", "Signif."]
    assert table.loc["PC1", "Signif."] == "***"
    with pytest.raises(LengthMismatch):
        regress.pcr(y[:10], scores)


def test_pcr_matches_statsmodels():
    for seed in range(5):
        rng = np.random.default_rng(30 + seed)
        scores = pd.DataFrame(rng.normal(size=(80, 3)), columns=["PC1", "PC2", "PC3"])
        sector = rng.choice(["A", "B", "C"], size=80)
        y = 0.3 * scores["PC1"] - 0.1 * scores["PC3"] + rng.normal(size=80)
        report = regress.pcr(y, scores, {"sector": sector})
        design = pd.concat([scores, regress.dummy_columns(pd.DataFrame({"sector": sector}))], axis=1)
        expected = sm.OLS(y.to_numpy(), sm.add_constant(design.to_numpy())).fit()
        np.testing.assert_allclose(report.coefficients, expected.params, rtol=1e-8, atol=1e-12)
        np.testing.assert_allclose(report.standard_errors, expected.bse, rtol=1e-8)
        np.testing.assert_allclose(report.p_values, expected.pvalues, rtol=1e-6, atol=1e-12)


def test_pcr_by_cluster():
    rng = np.random.default_rng(6)
    pc = rng.normal(size=(214, 2))
    labels = np.array([0] * 4 + [1] * 100 + [2] * 100 + [3] * 10)
    y = np.zeros(214)
    y[4:104] = 2.0 * pc[4:104, 0]
    y[104:204] = -2.0 * pc[104:204, 0]
    y[204:] = pc[204:, 1]
    y += rng.normal(0.0, 0.1, size=214)
    sector = np.array(["A", "B"] * 102 + ["s0", "s1", "s2", "s3", "s4", "s5", "s6", "s7", "s8", "s9"])

    reports = regress.pcr_by_cluster(y, pc, labels, {"sector": sector})
    assert len(reports) == 4
    assert reports[0].skipped and reports[0].skipped_reason == regress.INSUFFICIENT_SAMPLE
    assert reports[1].coefficient("PC1") > 1.5 and reports[1].controls_included
    assert reports[2].coefficient("PC1") < -1.5
    assert reports[3].note == regress.CONTROLS_NOTE and not reports[3].controls_included
    assert [r.subsample for r in reports] == [0, 1, 2, 3]


def test_soft_threshold():
    assert regress.soft_threshold(3.0, 1.0) == 2.0
    assert regress.soft_threshold(-3.0, 1.0) == -2.0
    assert regress.soft_threshold(0.5, 1.0) == 0.0


def test_lasso_zero_penalty_is_ols():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(100, 4))
    y = X @ np.array([1.0, -2.0, 0.5, 0.0]) + rng.normal(0.0, 0.3, size=100)
    beta = regress.lasso_coordinate_descent(X, y, 0.0, tol=1e-10)
    np.testing.assert_allclose(beta, np.linalg.lstsq(X, y, rcond=None)[0], atol=1e-6)


def test_lasso_max_penalty_zeroes():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(50, 5))
    y = rng.normal(size=50)
    beta = regress.lasso_coordinate_descent(X, y, 1.01 * regress.lambda_max(X, y))
    np.testing.assert_array_equal(beta, np.zeros(5))


def test_lasso_orthonormal_design():
    X = np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])
    y = X @ np.array([3.0, 0.5])
    beta = regress.lasso_coordinate_descent(X, y, 1.0)
    np.testing.assert_allclose(beta, [2.0, 0.0], atol=1e-12)


def test_lasso_errors():
    rng = np.random.default_rng(9)
    z = rng.normal(size=(60, 1))
    X = np.hstack([z, z + 0.01 * rng.normal(size=(60, 1)), rng.normal(size=(60, 2))])
    y = X[:, 0] + rng.normal(size=60)
    with pytest.raises(DidNotConverge):
        regress.lasso_coordinate_descent(X, y, 0.01, tol=1e-12, max_sweeps=1)
    with pytest.raises(InvalidConfig):
        regress.lasso_coordinate_descent(X, y, -1.0)
    with pytest.raises(InvalidConfig):
        regress.lasso_cv(X, y, folds=1)


def test_lasso_cv_recovers_sparse_signal():
    rng = np.random.default_rng(10)
    X = rng.normal(size=(200, 20))
    y = 3.0 * X[:, 0] - 2.0 * X[:, 1] + 1.5 * X[:, 2] + rng.normal(0.0, 0.5, size=200)
    result = regress.lasso_cv(X, y, folds=5, seed=1)
    print(f"   lambda {result.penalty:.4f}, kept {result.nonzero_terms}")
    assert {"x1", "x2", "x3"} <= set(result.nonzero_terms)
    assert len(result.nonzero_terms) <= 6
    assert abs(result.coefficients[0] - 3.0) < 0.5
    assert len(result.cv_mean) == len(result.lambda_grid) == 100
    np.testing.assert_allclose(result.cv_se, result.cv_sd / np.sqrt(5))
    assert np.all(np.diff(result.lambda_grid) < 0)


def test_lasso_recovers_planted_pair_over_seeds():
    recovered = 0
    for seed in range(20):
        rng = np.random.default_rng(200 + seed)
        X = rng.normal(size=(200, 20))
        y = 2.0 * X[:, 3] - 1.5 * X[:, 11] + rng.normal(size=200)
        result = regress.lasso_cv(X, y, folds=5, seed=seed)
        if {"x4", "x12"} <= set(result.nonzero_terms) and len(result.nonzero_terms) <= 6:
            recovered += 1
    print(f"   recovered in {recovered} of 20 seeds")
    assert recovered >= 18


def test_lasso_cv_noise_and_scale():
    rng = np.random.default_rng(11)
    noise = regress.lasso_cv(rng.normal(size=(150, 8)), rng.normal(size=150), folds=5, seed=2)
    assert len(noise.nonzero_terms) <= 2

    x1 = rng.normal(0.0, 10.0, size=120)
    frame = pd.DataFrame({"sales": x1, "cash": rng.normal(size=120)})
    fit = regress.lasso_cv(frame, 2.0 * x1 + 5.0, folds=4, seed=3, rule="min")
    assert fit.terms == ["sales", "cash"]
    assert abs(fit.coefficients[0] - 2.0) < 0.01
    assert abs(fit.intercept - 5.0) < 0.05


def test_lasso_cv_deterministic_and_table():
    rng = np.random.default_rng(12)
    X = rng.normal(size=(80, 4))
    y = X[:, 0] + rng.normal(0.0, 0.5, size=80)
    first = regress.lasso_cv(X, y, folds=4, seed=5, names=["a", "b", "c", "d"])
    second = regress.lasso_cv(X, y, folds=4, seed=5, names=["a", "b", "c", "d"])
    np.testing.assert_array_equal(first.cv_mean, second.cv_mean)
    assert first.penalty == second.penalty

    table = regress.lasso_table({"pre": first, "post": second})
    assert list(table.columns) == ["pre", "post"]
    assert list(table.index) == ["a", "b", "c", "d"]
    zeroed = [t for t, b in zip(first.terms, first.coefficients) if b == 0]
    for term in zeroed:
        assert table.loc[term, "pre"] == "."
    assert table.loc["a", "pre"] != "."
    curve = regress.cv_curve_frame(first)
    assert list(curve.columns) == ["lambda", "cv_mean", "cv_sd", "cv_se"]


def test_significance_formatting():
    assert significance_stars(0.0005) == "***"
    assert significance_stars(0.04) == "*"
    assert significance_stars(0.5) == ""
    assert format_p_value(1e-20) == "< 2.2e-16"
    assert format_p_value(0.01234) == "0.0123"
    assert format_p_value(float("nan")) == "-"


if __name__ == "__main__":
    main(globals(), "Testing PCR and Lasso...")
