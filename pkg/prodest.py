#!/usr/bin/env python3
"""
Production Estimators - OLS Solow residuals and Olley-Pakes, Levinsohn-Petrin and ACF control-function estimators
"""

import itertools
import json
import logging
from pathlib import Path
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import statsmodels.api as sm
from pydantic import BaseModel, ConfigDict, Field
from scipy.linalg import qr, solve_triangular
from scipy.optimize import minimize

from errors import (DegreeTooHigh, InvalidConfig, NoConsecutivePeriods, NonPositiveValue,
                    OptimizerDidNotConverge, RankDeficient, TooFewRows, MissingEntries)
from panel_io import FirmPanel

logger = logging.getLogger(__name__)

MAX_DEGREE = 5
LOG_FIELDS = {"y": "output", "l": "labor", "k": "capital", "m": "intermediates", "i": "investment"}
Method = Literal["OLS", "OP", "LP", "ACF"]


class GmmSettings(BaseModel):
    """Tuning for the control-function estimators"""
    markov_poly_degree: int = 3
    series_degree: int = 3
    optimizer_tol: float = 1e-8
    max_iterations: int = 2000
    n_multistarts: int = 8
    survival_correction: bool = False
    first_difference: bool = False
    estimate_age: bool = True

    def check(self) -> "GmmSettings":
        for name in ("markov_poly_degree", "series_degree"):
            value = getattr(self, name)
            if value > MAX_DEGREE:
                raise DegreeTooHigh(value, MAX_DEGREE)
            if value < 1:
                raise InvalidConfig(name, "degree must be at least 1")
        if self.optimizer_tol <= 0:
            raise InvalidConfig("optimizer_tol", "must be positive")
        if self.max_iterations < 1 or self.n_multistarts < 1:
            raise InvalidConfig("max_iterations", "iteration and start counts must be positive")
        return self


class ProductionCoefficients(BaseModel):
    """Estimated Cobb-Douglas elasticities"""
    beta_0: Optional[float] = None
    beta_l: Optional[float] = None
    beta_k: Optional[float] = None
    beta_m: Optional[float] = None
    beta_a: Optional[float] = None


class OlsFit(BaseModel):
    """Least-squares fit with classical standard errors"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    coefficients: np.ndarray
    standard_errors: np.ndarray
    residuals: np.ndarray
    fitted: np.ndarray
    covariance: np.ndarray
    sigma2: float
    r_squared: float
    df_resid: int


class FirstStageFit(BaseModel):
    """Partially linear first stage: composite phi and ex-post shock eta"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    phi_hat: np.ndarray
    eta_hat: np.ndarray
    beta_l_first_stage: Optional[float] = None
    polynomial_degree: int
    r_squared: float
    data: pd.DataFrame = Field(description="rows used, in log units, sorted by firm and period")
    dropped: Dict[str, int] = Field(default_factory=dict)
    age_imputed: bool = False


class OptimizerDiagnostics(BaseModel):
    """What the multistart simplex search did"""
    n_starts: int
    n_converged: int
    best_converged: bool = True
    iterations: int
    best_iterations: int
    start_values: List[float]
    terminal_values: List[float]


class EstimatorDiagnostics(BaseModel):
    """Sample and optimizer bookkeeping for one estimation"""
    gmm_objective: Optional[float] = None
    iterations: int = 0
    sample_size: int
    n_pairs: int = 0
    n_starts: int = 0
    converged: bool = True
    dropped: Dict[str, int] = Field(default_factory=dict)


class EstimatorResult(BaseModel):
    """Coefficients, first stage and per-observation productivity for one method"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    method: Method
    coefficients: ProductionCoefficients
    first_stage: FirstStageFit
    omega_hat: np.ndarray
    tfp_growth: np.ndarray
    diagnostics: EstimatorDiagnostics

    def tfp_frame(self) -> pd.DataFrame:
        """tfp_growth and omega_hat keyed by (firm_id, period)"""
        frame = self.first_stage.data[["firm_id", "period"]].copy()
        frame["tfp_growth"] = self.tfp_growth
        frame["omega_hat"] = self.omega_hat
        return frame.reset_index(drop=True)

    def summary(self) -> dict:
        return {
            "method": self.method,
            "coefficients": self.coefficients.model_dump(),
            "first_stage": {
                "beta_l_first_stage": self.first_stage.beta_l_first_stage,
                "polynomial_degree": self.first_stage.polynomial_degree,
                "r_squared": self.first_stage.r_squared,
                "age_imputed": self.first_stage.age_imputed,
            },
            "diagnostics": self.diagnostics.model_dump(),
        }


# Design matrices and least squares

def polynomial_series(columns, degree: int) -> np.ndarray:
    """All monomials of total degree <= degree, intercept first, graded lexicographic order"""
    if degree > MAX_DEGREE:
        raise DegreeTooHigh(degree, MAX_DEGREE)
    if degree < 1:
        raise InvalidConfig("degree", "must be at least 1")
    values = np.asarray(columns, dtype=float)
    if values.ndim == 1:
        values = values.reshape(-1, 1)
    if np.isnan(values).any():
        raise MissingEntries("polynomial_series")
    n, c = values.shape
    terms = [np.ones(n)]
    for d in range(1, degree + 1):
        for combo in itertools.combinations_with_replacement(range(c), d):
            terms.append(np.prod(values[:, list(combo)], axis=1))
    return np.column_stack(terms)


def polynomial_terms(names: Sequence[str], degree: int) -> List[str]:
    """Labels matching polynomial_series columns"""
    labels = ["1"]
    for d in range(1, degree + 1):
        for combo in itertools.combinations_with_replacement(range(len(names)), d):
            labels.append("*".join(names[j] for j in combo))
    return labels


def _scaled(columns: Sequence[np.ndarray]) -> np.ndarray:
    """Z-score columns and drop constant ones; polynomial spans are unchanged"""
    values = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    mean = values.mean(axis=0)
    sd = values.std(axis=0)
    keep = sd > 1e-12 * np.maximum(1.0, np.abs(mean))
    return (values[:, keep] - mean[keep]) / sd[keep]


def ols(X, y, names: Optional[Sequence[str]] = None) -> OlsFit:
    """Least squares via pivoted QR with a rank check"""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    y = np.asarray(y, dtype=float).ravel()
    n, p = X.shape
    if n <= p:
        raise TooFewRows(n, p)

    Q, R, piv = qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    deficient = np.nonzero(diag <= 1e-10 * max(diag[0], np.finfo(float).tiny))[0]
    if deficient.size:
        column = int(piv[deficient[0]])
        raise RankDeficient(column, names[column] if names else None)

    beta = np.empty(p)
    beta[piv] = solve_triangular(R, Q.T @ y)
    fitted = X @ beta
    residuals = y - fitted
    df_resid = n - p
    sigma2 = float(residuals @ residuals) / df_resid
    r_inv = solve_triangular(R, np.eye(p))
    covariance = np.empty((p, p))
    covariance[np.ix_(piv, piv)] = sigma2 * (r_inv @ r_inv.T)
    centered = y - y.mean()
    total = float(centered @ centered)
    r_squared = 1.0 - float(residuals @ residuals) / total if total > 0 else 1.0
    return OlsFit(coefficients=beta, standard_errors=np.sqrt(np.clip(np.diag(covariance), 0.0, None)),
                  residuals=residuals, fitted=fitted, covariance=covariance, sigma2=sigma2,
                  r_squared=r_squared, df_resid=df_resid)


def _lstsq_residual(Z: np.ndarray, v: np.ndarray) -> np.ndarray:
    coef = np.linalg.lstsq(Z, v, rcond=None)[0]
    return v - Z @ coef


def _markov_innovation(current: np.ndarray, previous: np.ndarray, degree: int,
                       extra: Optional[np.ndarray] = None) -> np.ndarray:
    """Residual of current productivity on a polynomial of its lag"""
    columns = [previous] if extra is None else [previous, extra]
    return _lstsq_residual(polynomial_series(_centered(columns), degree), current)


def _centered(columns: Sequence[np.ndarray]) -> np.ndarray:
    values = np.column_stack(columns)
    sd = values.std(axis=0)
    sd[sd == 0] = 1.0
    return (values - values.mean(axis=0)) / sd


# Optimization

def minimize_derivative_free(objective: Callable[[np.ndarray], float], starts: Sequence[Sequence[float]],
                             tol: float = 1e-8, max_iter: int = 2000) -> Tuple[np.ndarray, float, OptimizerDiagnostics]:
    """Nelder-Mead from every start; the lowest terminal value over all starts wins"""
    def safe(x):
        value = float(objective(x))
        return value if np.isfinite(value) else np.inf

    start_values, results = [], []
    for start in starts:
        x0 = np.atleast_1d(np.asarray(start, dtype=float))
        value = safe(x0)
        if not np.isfinite(value):
            raise OptimizerDidNotConverge(f"Objective is not finite at start {x0.tolist()}")
        start_values.append(value)
        results.append(minimize(safe, x0, method="Nelder-Mead",
                                options={"xatol": tol, "fatol": tol, "maxiter": max_iter}))

    converged = [r for r in results if r.success]
    if not converged:
        raise OptimizerDidNotConverge(f"None of {len(results)} starts converged within {max_iter} iterations")
    best = min(results, key=lambda r: r.fun)
    if not best.success:
        logger.warning(f"Lowest objective {best.fun:.3g} comes from a start that hit the iteration limit")
    diagnostics = OptimizerDiagnostics(
        n_starts=len(results),
        n_converged=len(converged),
        iterations=int(sum(r.nit for r in results)),
        best_iterations=int(best.nit),
        best_converged=bool(best.success),
        start_values=start_values,
        terminal_values=[float(r.fun) for r in results],
    )
    return np.asarray(best.x, dtype=float), float(best.fun), diagnostics


def multistart_grid(center: Sequence[float], n_starts: int, spread: float = 0.1,
                    bounded: Optional[Sequence[bool]] = None,
                    bounds: Tuple[float, float] = (0.01, 0.99)) -> List[np.ndarray]:
    """Lattice of starts around a center, nearest points first; elasticities clipped to bounds"""
    center = np.asarray(center, dtype=float)
    d = center.size
    bounded = np.ones(d, dtype=bool) if bounded is None else np.asarray(bounded, dtype=bool)
    levels = [0, -1, 1, -2, 2, -3, 3, -4, 4]
    order = sorted(itertools.product(levels, repeat=d),
                   key=lambda step: (max(abs(s) for s in step), sum(abs(s) for s in step)))
    starts: List[np.ndarray] = []
    for step in order:
        point = center + spread * np.asarray(step, dtype=float)
        point = np.where(bounded, np.clip(point, *bounds), point)
        if not any(np.allclose(point, s) for s in starts):
            starts.append(point)
        if len(starts) == n_starts:
            break
    return starts


# Data preparation

def _prepare(panel: FirmPanel, fields: Sequence[str], strict: bool,
             with_age: bool = False) -> Tuple[pd.DataFrame, Dict[str, int], bool]:
    """Log the requested fields; drop missing rows and either raise or drop non-positive ones"""
    frame = panel.frame
    columns = [LOG_FIELDS[f] for f in fields]
    keep = ~frame[columns].isna().any(axis=1)
    dropped = {"missing": int((~keep).sum())}
    for field, column in zip(fields, columns):
        bad = keep & ~(frame[column] > 0)
        if bad.any():
            if strict:
                row = frame.loc[bad].iloc[0]
                raise NonPositiveValue(column, row["firm_id"], int(row["period"]))
            dropped[f"nonpositive_{column}"] = int(bad.sum())
            keep &= ~bad
    kept = frame.loc[keep]
    data = kept[["firm_id", "period"]].copy()
    for field, column in zip(fields, columns):
        data[field] = np.log(kept[column].to_numpy())

    age_imputed = False
    if with_age:
        age = kept["age"]
        if age.isna().any():
            age_imputed = True
            logger.warning("Age missing for some rows; using the period index as age")
            age = kept["period"].astype(float)
        data["a"] = age.to_numpy(dtype=float)

    data = data.reset_index(drop=True)
    total = sum(dropped.values())
    if total:
        logger.warning(f"Dropped {total} of {len(frame)} rows before estimation: {dropped}")
    if data.empty:
        raise TooFewRows(0, len(fields))
    return data, dropped, age_imputed


def _lag_pairs(data: pd.DataFrame) -> Tuple[np.ndarray, np.ndarray]:
    """Indices of (t, t-1) pairs within firms over consecutive periods"""
    firm = data["firm_id"].to_numpy()
    period = data["period"].to_numpy()
    mask = (firm[1:] == firm[:-1]) & (period[1:] == period[:-1] + 1)
    current = np.nonzero(mask)[0] + 1
    if current.size == 0:
        raise NoConsecutivePeriods()
    return current, current - 1


def _tfp_growth(data: pd.DataFrame, residuals: np.ndarray, first_difference: bool) -> np.ndarray:
    if not first_difference:
        return residuals - residuals.mean()
    current, previous = _lag_pairs(data)
    growth = np.full(residuals.shape, np.nan)
    growth[current] = residuals[current] - residuals[previous]
    return growth - np.nanmean(growth)


def _ols_start(data: pd.DataFrame, regressors: Sequence[str]) -> Dict[str, float]:
    design = np.column_stack([np.ones(len(data))] + [data[r].to_numpy() for r in regressors])
    fit = ols(design, data["y"].to_numpy())
    return dict(zip(regressors, fit.coefficients[1:]))


# OLS

def ols_solow(panel: FirmPanel, settings: Optional[GmmSettings] = None) -> EstimatorResult:
    """Log output on log labor, capital and intermediates; residuals are the Solow residual"""
    settings = (settings or GmmSettings()).check()
    data, dropped, _ = _prepare(panel, ("y", "l", "k", "m"), strict=True)
    design = np.column_stack([np.ones(len(data)), data["l"], data["k"], data["m"]])
    fit = ols(design, data["y"].to_numpy(), ["intercept", "l", "k", "m"])
    beta_0, beta_l, beta_k, beta_m = (float(b) for b in fit.coefficients)

    first_stage = FirstStageFit(
        phi_hat=fit.fitted - beta_l * data["l"].to_numpy(),
        eta_hat=fit.residuals,
        polynomial_degree=1,
        r_squared=fit.r_squared,
        data=data,
        dropped=dropped,
    )
    logger.info(f"OLS: beta_l={beta_l:.4f} beta_k={beta_k:.4f} beta_m={beta_m:.4f} (n={len(data)})")
    return EstimatorResult(
        method="OLS",
        coefficients=ProductionCoefficients(beta_0=beta_0, beta_l=beta_l, beta_k=beta_k, beta_m=beta_m),
        first_stage=first_stage,
        omega_hat=fit.residuals.copy(),
        tfp_growth=_tfp_growth(data, fit.residuals, settings.first_difference),
        diagnostics=EstimatorDiagnostics(sample_size=len(data), dropped=dropped),
    )


# Olley-Pakes

def op_first_stage(panel: FirmPanel, settings: Optional[GmmSettings] = None) -> FirstStageFit:
    """Log output on labor plus a polynomial in (log investment, age, log capital)"""
    settings = (settings or GmmSettings()).check()
    data, dropped, age_imputed = _prepare(panel, ("y", "l", "k", "i"), strict=False, with_age=True)
    poly = polynomial_series(_scaled([data["i"], data["a"], data["k"]]), settings.series_degree)
    labor = data["l"].to_numpy()
    fit = ols(np.column_stack([labor, poly]), data["y"].to_numpy())
    beta_l = float(fit.coefficients[0])
    return FirstStageFit(
        phi_hat=fit.fitted - beta_l * labor,
        eta_hat=fit.residuals,
        beta_l_first_stage=beta_l,
        polynomial_degree=settings.series_degree,
        r_squared=fit.r_squared,
        data=data,
        dropped=dropped,
        age_imputed=age_imputed,
    )


def survival_probability(fit: FirstStageFit, panel: FirmPanel) -> np.ndarray:
    """Probit of staying in the panel next period on a quadratic in (log i, log k, age)"""
    data = fit.data
    present = pd.MultiIndex.from_frame(panel.frame[["firm_id", "period"]])
    last_period = max(panel.periods())
    following = pd.MultiIndex.from_arrays([data["firm_id"], data["period"] + 1])
    survived = following.isin(present) | (data["period"].to_numpy() >= last_period)
    if survived.all():
        return np.ones(len(data))
    design = polynomial_series(_scaled([data["i"], data["k"], data["a"]]), 2)
    try:
        result = sm.Probit(survived.astype(float), design).fit(disp=0)
        return np.asarray(result.predict(design), dtype=float)
    except Exception as e:
        logger.warning(f"Survival probit failed ({e}); using the pooled survival rate")
        return np.full(len(data), float(survived.mean()))


def _op_second_stage(fit: FirstStageFit, panel: FirmPanel,
                     settings: GmmSettings) -> Tuple[ProductionCoefficients, float, OptimizerDiagnostics, int]:
    data = fit.data
    current, previous = _lag_pairs(data)
    y, labor, capital, age = (data[c].to_numpy() for c in ("y", "l", "k", "a"))
    phi = fit.phi_hat
    use_age = settings.estimate_age and not fit.age_imputed and np.ptp(age) > 0
    survival = survival_probability(fit, panel)[previous] if settings.survival_correction else None
    lhs_base = y[current] - fit.beta_l_first_stage * labor[current]

    def objective(theta: np.ndarray) -> float:
        beta_k = theta[0]
        beta_a = theta[1] if use_age else 0.0
        lhs = lhs_base - beta_k * capital[current] - beta_a * age[current]
        index = phi[previous] - beta_k * capital[previous] - beta_a * age[previous]
        resid = _markov_innovation(lhs, index, settings.markov_poly_degree, survival)
        return float(np.mean(resid ** 2))

    start = _ols_start(data, ["l", "k", "a"] if use_age else ["l", "k"])
    center = [start["k"], start["a"]] if use_age else [start["k"]]
    starts = multistart_grid(center, settings.n_multistarts, bounded=[True, False][:len(center)])
    theta, value, diagnostics = minimize_derivative_free(objective, starts, settings.optimizer_tol, settings.max_iterations)

    beta_k = float(theta[0])
    beta_a = float(theta[1]) if use_age else None
    level = phi - beta_k * capital - (beta_a or 0.0) * age
    coefficients = ProductionCoefficients(beta_0=float(level.mean()), beta_l=fit.beta_l_first_stage,
                                          beta_k=beta_k, beta_a=beta_a)
    return coefficients, value, diagnostics, len(current)


def op_second_stage(fit: FirstStageFit, panel: FirmPanel, settings: Optional[GmmSettings] = None) -> ProductionCoefficients:
    """Capital (and age) coefficients from the Markov law of motion by nonlinear least squares"""
    settings = (settings or GmmSettings()).check()
    coefficients, _, _, _ = _op_second_stage(fit, panel, settings)
    return coefficients


def op_estimate(panel: FirmPanel, settings: Optional[GmmSettings] = None) -> EstimatorResult:
    """Full Olley-Pakes estimation"""
    settings = (settings or GmmSettings()).check()
    fit = op_first_stage(panel, settings)
    coefficients, value, optimizer, n_pairs = _op_second_stage(fit, panel, settings)
    data = fit.data
    omega = (fit.phi_hat - coefficients.beta_k * data["k"].to_numpy()
             - (coefficients.beta_a or 0.0) * data["a"].to_numpy() - coefficients.beta_0)
    logger.info(f"OP: beta_l={coefficients.beta_l:.4f} beta_k={coefficients.beta_k:.4f} (pairs={n_pairs})")
    return _result("OP", coefficients, fit, omega, value, optimizer, n_pairs, settings)


def _result(method: str, coefficients: ProductionCoefficients, fit: FirstStageFit, omega: np.ndarray,
            value: float, optimizer: OptimizerDiagnostics, n_pairs: int, settings: GmmSettings) -> EstimatorResult:
    return EstimatorResult(
        method=method,
        coefficients=coefficients,
        first_stage=fit,
        omega_hat=omega,
        tfp_growth=_tfp_growth(fit.data, fit.eta_hat, settings.first_difference),
        diagnostics=EstimatorDiagnostics(
            gmm_objective=value,
            iterations=optimizer.iterations,
            sample_size=len(fit.data),
            n_pairs=n_pairs,
            n_starts=optimizer.n_starts,
            converged=optimizer.n_converged > 0,
            dropped=fit.dropped,
        ),
    )


# Levinsohn-Petrin and ACF

def _gmm(moments: Callable[[np.ndarray], np.ndarray], center: Sequence[float],
         settings: GmmSettings) -> Tuple[np.ndarray, float, OptimizerDiagnostics]:
    def objective(theta: np.ndarray) -> float:
        g = moments(theta)
        return float(g @ g)

    starts = multistart_grid(center, settings.n_multistarts)
    return minimize_derivative_free(objective, starts, settings.optimizer_tol, settings.max_iterations)


def lp_moments(fit: FirstStageFit, settings: GmmSettings) -> Callable[[np.ndarray], np.ndarray]:
    """Sample moments E[xi*k_t], E[xi*m_(t-1)] as a function of (beta_k, beta_m)"""
    data = fit.data
    current, previous = _lag_pairs(data)
    capital, inter = data["k"].to_numpy(), data["m"].to_numpy()

    def moments(theta: np.ndarray) -> np.ndarray:
        omega = fit.phi_hat - theta[0] * capital - theta[1] * inter
        xi = _markov_innovation(omega[current], omega[previous], settings.markov_poly_degree)
        return np.array([np.mean(xi * capital[current]), np.mean(xi * inter[previous])])

    return moments


def lp_estimate(panel: FirmPanel, settings: Optional[GmmSettings] = None) -> EstimatorResult:
    """Levinsohn-Petrin with intermediates as the proxy"""
    settings = (settings or GmmSettings()).check()
    data, dropped, _ = _prepare(panel, ("y", "l", "k", "m"), strict=False)
    poly = polynomial_series(_scaled([data["m"], data["k"]]), settings.series_degree)
    labor = data["l"].to_numpy()
    first = ols(np.column_stack([labor, poly]), data["y"].to_numpy())
    beta_l = float(first.coefficients[0])
    fit = FirstStageFit(phi_hat=first.fitted - beta_l * labor, eta_hat=first.residuals,
                        beta_l_first_stage=beta_l, polynomial_degree=settings.series_degree,
                        r_squared=first.r_squared, data=data, dropped=dropped)

    n_pairs = len(_lag_pairs(data)[0])
    start = _ols_start(data, ["l", "k", "m"])
    theta, value, optimizer = _gmm(lp_moments(fit, settings), [start["k"], start["m"]], settings)
    beta_k, beta_m = (float(t) for t in theta)
    level = fit.phi_hat - beta_k * data["k"].to_numpy() - beta_m * data["m"].to_numpy()
    coefficients = ProductionCoefficients(beta_0=float(level.mean()), beta_l=beta_l, beta_k=beta_k, beta_m=beta_m)
    logger.info(f"LP: beta_l={beta_l:.4f} beta_k={beta_k:.4f} beta_m={beta_m:.4f} (pairs={n_pairs})")
    return _result("LP", coefficients, fit, level - level.mean(), value, optimizer, n_pairs, settings)


def acf_moments(fit: FirstStageFit, settings: GmmSettings) -> Callable[[np.ndarray], np.ndarray]:
    """Sample moments E[xi*l_(t-1)], E[xi*k_t] as a function of (beta_l, beta_k)"""
    data = fit.data
    current, previous = _lag_pairs(data)
    labor, capital = data["l"].to_numpy(), data["k"].to_numpy()

    def moments(theta: np.ndarray) -> np.ndarray:
        omega = fit.phi_hat - theta[0] * labor - theta[1] * capital
        xi = _markov_innovation(omega[current], omega[previous], settings.markov_poly_degree)
        return np.array([np.mean(xi * labor[previous]), np.mean(xi * capital[current])])

    return moments


def acf_estimate(panel: FirmPanel, settings: Optional[GmmSettings] = None) -> EstimatorResult:
    """ACF: first stage recovers phi only, GMM identifies labor and capital"""
    settings = (settings or GmmSettings()).check()
    data, dropped, _ = _prepare(panel, ("y", "l", "k", "m"), strict=False)
    poly = polynomial_series(_scaled([data["l"], data["k"], data["m"]]), settings.series_degree)
    first = ols(poly, data["y"].to_numpy())
    fit = FirstStageFit(phi_hat=first.fitted, eta_hat=first.residuals,
                        polynomial_degree=settings.series_degree, r_squared=first.r_squared,
                        data=data, dropped=dropped)

    n_pairs = len(_lag_pairs(data)[0])
    start = _ols_start(data, ["l", "k", "m"])
    theta, value, optimizer = _gmm(acf_moments(fit, settings), [start["l"], start["k"]], settings)
    beta_l, beta_k = (float(t) for t in theta)
    level = fit.phi_hat - beta_l * data["l"].to_numpy() - beta_k * data["k"].to_numpy()
    coefficients = ProductionCoefficients(beta_0=float(level.mean()), beta_l=beta_l, beta_k=beta_k)
    logger.info(f"ACF: beta_l={beta_l:.4f} beta_k={beta_k:.4f} (pairs={n_pairs}, objective={value:.3g})")
    return _result("ACF", coefficients, fit, level - level.mean(), value, optimizer, n_pairs, settings)


ESTIMATORS = {"OLS": ols_solow, "OP": op_estimate, "LP": lp_estimate, "ACF": acf_estimate}


def estimate(panel: FirmPanel, method: str = "ACF", settings: Optional[GmmSettings] = None) -> EstimatorResult:
    """Run one estimator by name"""
    key = method.upper()
    if key not in ESTIMATORS:
        raise InvalidConfig("method", f"expected one of {sorted(ESTIMATORS)}, got {method}")
    return ESTIMATORS[key](panel, settings)


def write_result(result: EstimatorResult, json_path: Union[str, Path]) -> Tuple[Path, Path]:
    """Result JSON plus a CSV sidecar of tfp_growth keyed by (firm_id, period)"""
    json_path = Path(json_path)
    json_path.parent.mkdir(parents=True, exist_ok=True)
    sidecar = json_path.with_name(f"{json_path.stem}_tfp.csv")
    payload = result.summary()
    payload["tfp_csv"] = sidecar.name
    json_path.write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
    result.tfp_frame().to_csv(sidecar, index=False)
    return json_path, sidecar


def load_tfp(path: Union[str, Path]) -> pd.DataFrame:
    """Read a tfp_growth sidecar"""
    return pd.read_csv(path, dtype={"firm_id": str})
