#!/usr/bin/env python3
"""
Test script for the production-function estimators
"""

import functools

import numpy as np
import pandas as pd
import pytest
from scipy.optimize import OptimizeResult

import prodest
import synth_dgp
from check_runner import main
from errors import (DegreeTooHigh, InvalidConfig, NoConsecutivePeriods, NonPositiveValue, RankDeficient,
                    TooFewRows)
from panel_io import FirmPanel
from prodest import GmmSettings
from synth_dgp import DgpConfig


def test_polynomial_series():
    x = np.array([[1.0, 2.0], [3.0, 4.0], [0.5, -1.0]])
    series = prodest.polynomial_series(x, 2)
    assert series.shape == (3, 6)
    np.testing.assert_allclose(series[1], [1.0, 3.0, 4.0, 9.0, 12.0, 16.0])
    assert prodest.polynomial_terms(["a", "b"], 2) == ["1", "a", "b", "a*a", "a*b", "b*b"]
    with pytest.raises(DegreeTooHigh):
        prodest.polynomial_series(x, 6)


def test_ols_exact_and_errors():
    rng = np.random.default_rng(0)
    X = np.column_stack([np.ones(50), rng.normal(size=(50, 2))])
    y = X @ np.array([1.0, 2.0, -3.0])
    fit = prodest.ols(X, y)
    np.testing.assert_allclose(fit.coefficients, [1.0, 2.0, -3.0], atol=1e-10)
    assert fit.r_squared == pytest.approx(1.0)

    with pytest.raises(RankDeficient):
        prodest.ols(np.column_stack([X, X[:, 1] * 2.0]), y, ["1", "a", "b", "2a"])
    with pytest.raises(TooFewRows):
        prodest.ols(X[:3], y[:3])


def test_multistart_grid():
    starts = prodest.multistart_grid([0.5, 0.995], 5)
    assert len(starts) == 5
    np.testing.assert_allclose(starts[0], [0.5, 0.99])
    assert all(np.all((s >= 0.01) & (s <= 0.99)) for s in starts)


def test_minimize_derivative_free():
    x, value, diagnostics = prodest.minimize_derivative_free(lambda t: float(np.sum((t - [0.3, 0.6]) ** 2)),
                                                              [[0.1, 0.1], [0.9, 0.9]])
    np.testing.assert_allclose(x, [0.3, 0.6], atol=1e-4)
    assert value < 1e-8 and diagnostics.n_converged == 2


def test_minimize_keeps_lowest_value_over_all_starts():
    outcomes = iter([OptimizeResult(x=np.array([1.0]), fun=1.0, success=True, nit=10),
                     OptimizeResult(x=np.array([2.0]), fun=0.25, success=False, nit=50)])
    with pytest.MonkeyPatch.context() as patch:
        patch.setattr(prodest, "minimize", lambda *args, **kwargs: next(outcomes))
        x, value, diagnostics = prodest.minimize_derivative_free(lambda t: float(t[0] ** 2 + 4.0), [[1.0], [2.0]])
    assert value == 0.25 and x[0] == 2.0
    assert value <= min(diagnostics.start_values)
    assert diagnostics.n_converged == 1 and not diagnostics.best_converged


def test_ols_bias_and_acf_recovery():
    panel, _ = synth_dgp.simulate_panel(DgpConfig.acf_scenario(seed=7))
    ols = prodest.estimate(panel, "OLS")
    acf = prodest.estimate(panel, "ACF")
    ols_bias = ols.coefficients.beta_l - 0.6
    acf_bias = acf.coefficients.beta_l - 0.6
    print(f"   OLS beta_l {ols.coefficients.beta_l:.4f}, ACF beta_l {acf.coefficients.beta_l:.4f} "
          f"beta_k {acf.coefficients.beta_k:.4f}")
    assert ols_bias > 0.02
    assert abs(acf_bias) < abs(ols_bias)
    assert abs(acf_bias) < 0.08
    assert abs(acf.coefficients.beta_k - 0.3) < 0.08
    assert acf.diagnostics.converged and acf.diagnostics.n_pairs == 1000 * 9
    assert len(acf.tfp_growth) == len(panel)
    assert abs(acf.tfp_growth.mean()) < 1e-10


@functools.lru_cache(maxsize=None)
def monte_carlo_estimates(replications: int = 20) -> pd.DataFrame:
    """beta_l and beta_k of every method on independent endogenous-labor panels"""
    rows = []
    for seed in range(replications):
        panel, _ = synth_dgp.simulate_panel(DgpConfig.acf_scenario(seed=1000 + seed))
        row = {"seed": seed}
        for method in prodest.ESTIMATORS:
            coefficients = prodest.estimate(panel, method).coefficients
            row[f"{method}_beta_l"] = coefficients.beta_l
            row[f"{method}_beta_k"] = coefficients.beta_k
        rows.append(row)
    return pd.DataFrame(rows)


def test_acf_recovery_over_seeds():
    estimates = monte_carlo_estimates()
    beta_l, beta_k = estimates["ACF_beta_l"].mean(), estimates["ACF_beta_k"].mean()
    print(f"   ACF mean beta_l {beta_l:.4f}, beta_k {beta_k:.4f} over {len(estimates)} seeds")
    assert abs(beta_l - 0.6) < 0.05
    assert abs(beta_k - 0.3) < 0.05


def test_labor_bias_ordering_over_seeds():
    estimates = monte_carlo_estimates()
    bias = {method: estimates[f"{method}_beta_l"] - 0.6 for method in prodest.ESTIMATORS}
    print("   mean beta_l bias: " + ", ".join(f"{m} {b.mean():+.4f}" for m, b in bias.items()))
    ols_se = bias["OLS"].std(ddof=1) / np.sqrt(len(estimates))
    assert bias["OLS"].mean() > 2 * ols_se
    assert (bias["ACF"].abs() < bias["OLS"].abs()).mean() >= 0.9
    for method in ("OP", "LP", "ACF"):
        assert abs(bias[method].mean()) < bias["OLS"].mean()


def test_op_survival_correction_without_exit():
    for seed in range(5):
        panel, truth = synth_dgp.simulate_panel(DgpConfig(n_firms=200, n_periods=6, alpha_m=1e-9, seed=40 + seed))
        assert truth.survived.all()
        plain = prodest.op_estimate(panel, GmmSettings(survival_correction=False))
        corrected = prodest.op_estimate(panel, GmmSettings(survival_correction=True))
        assert abs(plain.coefficients.beta_k - corrected.coefficients.beta_k) < 1e-3
        assert plain.coefficients.beta_l == corrected.coefficients.beta_l


def test_tfp_invariant_to_currency_units():
    panel, _ = synth_dgp.simulate_panel(DgpConfig(n_firms=200, n_periods=6, seed=17))
    scale = 2.5
    frame = panel.frame.copy()
    for column in ("output", "capital", "intermediates", "investment"):
        frame[column] = frame[column] * scale
    rescaled = FirmPanel(frame)
    for method in ("OLS", "ACF"):
        base = prodest.estimate(panel, method)
        moved = prodest.estimate(rescaled, method)
        drift = (moved.tfp_growth - moved.tfp_growth.mean()) - (base.tfp_growth - base.tfp_growth.mean())
        assert np.max(np.abs(drift)) < 1e-8
        assert moved.coefficients.beta_l == pytest.approx(base.coefficients.beta_l, abs=1e-4)
        assert moved.coefficients.beta_k == pytest.approx(base.coefficients.beta_k, abs=1e-4)
    ols, moved = prodest.estimate(panel, "OLS"), prodest.estimate(rescaled, "OLS")
    elasticity = ols.coefficients.beta_k + ols.coefficients.beta_m
    assert moved.coefficients.beta_0 - ols.coefficients.beta_0 == pytest.approx(np.log(scale) * (1 - elasticity))


def test_op_recovery():
    # near-zero intermediates share keeps the investment proxy exact
    panel, _ = synth_dgp.simulate_panel(DgpConfig(n_firms=500, n_periods=8, alpha_m=1e-9, sigma_eta=0.0, seed=21))
    result = prodest.estimate(panel, "OP")
    print(f"   OP beta_l {result.coefficients.beta_l:.4f} beta_k {result.coefficients.beta_k:.4f}")
    assert abs(result.coefficients.beta_l - 0.6) < 0.01
    assert abs(result.coefficients.beta_k - 0.3) < 0.05
    second = prodest.op_second_stage(result.first_stage, panel)
    assert second.beta_k == pytest.approx(result.coefficients.beta_k)
    assert second.beta_l == result.coefficients.beta_l
    assert (second.beta_a is None) == (result.coefficients.beta_a is None)


def test_op_survival_correction():
    config = DgpConfig(n_firms=300, n_periods=6, alpha_m=1e-9, exit_threshold=-0.5, seed=13)
    panel, truth = synth_dgp.simulate_panel(config)
    assert not truth.survived.all()
    fit = prodest.op_first_stage(panel)
    probability = prodest.survival_probability(fit, panel)
    assert probability.shape == (len(fit.data),)
    assert np.all((probability >= 0) & (probability <= 1))
    result = prodest.op_estimate(panel, GmmSettings(survival_correction=True))
    assert np.isfinite(result.coefficients.beta_k)


def test_lp_labor_and_moments():
    panel, _ = synth_dgp.simulate_panel(DgpConfig(n_firms=300, n_periods=8, seed=5))
    result = prodest.lp_estimate(panel)
    print(f"   LP beta_l {result.coefficients.beta_l:.4f}, objective {result.diagnostics.gmm_objective:.2e}")
    assert abs(result.coefficients.beta_l - 0.6) < 0.03
    assert result.diagnostics.gmm_objective < 1e-4
    moments = prodest.lp_moments(result.first_stage, GmmSettings())
    g = moments(np.array([result.coefficients.beta_k, result.coefficients.beta_m]))
    assert float(g @ g) == pytest.approx(result.diagnostics.gmm_objective, rel=1e-6, abs=1e-12)


def test_first_difference_growth():
    panel, _ = synth_dgp.simulate_panel(DgpConfig(n_firms=50, n_periods=4, seed=2))
    result = prodest.ols_solow(panel, GmmSettings(first_difference=True))
    growth = result.tfp_frame()
    assert growth.loc[growth["period"] == 0, "tfp_growth"].isna().all()
    assert growth.loc[growth["period"] > 0, "tfp_growth"].notna().all()


def test_non_positive_and_gaps():
    panel, _ = synth_dgp.simulate_panel(DgpConfig(n_firms=60, n_periods=6, seed=8))
    even = panel.frame[panel.frame["period"] % 2 == 0].reset_index(drop=True)
    with pytest.raises(NoConsecutivePeriods):
        prodest.acf_estimate(FirmPanel(even))

    frame = pd.DataFrame({"firm_id": ["A", "A", "B", "B"], "period": [0, 1, 0, 1],
                          "output": [1.0, 2.0, 3.0, 4.0], "labor": [1.0, 2.0, 1.5, 2.5],
                          "capital": [2.0, 3.0, 1.0, 2.0], "intermediates": [1.0, 1.2, 0.9, 1.1]})
    bad = frame.assign(output=[1.0, 0.0, 3.0, 4.0])
    with pytest.raises(NonPositiveValue) as info:
        prodest.ols_solow(FirmPanel(bad))
    assert info.value.field == "output" and info.value.firm == "A"


def test_estimate_dispatch_and_round_trip(tmp_path):
    panel, _ = synth_dgp.simulate_panel(DgpConfig(n_firms=60, n_periods=4, seed=3))
    with pytest.raises(InvalidConfig):
        prodest.estimate(panel, "GMM")
    result = prodest.estimate(panel, "ols")
    json_path, sidecar = prodest.write_result(result, tmp_path / "estimates.json")
    assert sidecar.name == "estimates_tfp.csv"
    reloaded = prodest.load_tfp(sidecar)
    np.testing.assert_allclose(reloaded["tfp_growth"], result.tfp_growth, rtol=1e-12)
    assert reloaded["firm_id"].iloc[0] == panel.firms()[0]


if __name__ == "__main__":
    main(globals(), "Testing production-function estimators...")
