#!/usr/bin/env python3
"""
Regress - principal-component regression with dummy controls, and Lasso by coordinate descent
"""

import logging
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from errors import DidNotConverge, InvalidConfig, LengthMismatch, RankDeficient, TooFewRows
from prodest import ols
from seeding import generator
from stats_utils import format_p_value, significance_stars, student_t_two_sided

logger = logging.getLogger(__name__)

INTERCEPT = "(Intercept)"
INSUFFICIENT_SAMPLE = "InsufficientSample"
CONTROLS_NOTE = "Sample observations are not enough for controls"
MIN_EXTRA_ROWS = 5


class RegressionReport(BaseModel):
    """OLS coefficients with classical standard errors and t-test p-values"""
    terms: List[str] = Field(default_factory=list)
    coefficients: List[float] = Field(default_factory=list)
    standard_errors: List[float] = Field(default_factory=list)
    t_stats: List[float] = Field(default_factory=list)
    p_values: List[float] = Field(default_factory=list)
    n: int = 0
    r_squared: Optional[float] = None
    subsample: Optional[int] = None
    controls_included: bool = False
    skipped_reason: Optional[str] = None
    note: Optional[str] = None

    @property
    def skipped(self) -> bool:
        return self.skipped_reason is not None

    def coefficient(self, term: str) -> float:
        return self.coefficients[self.terms.index(term)]

    def p_value(self, term: str) -> float:
        return self.p_values[self.terms.index(term)]


class LassoResult(BaseModel):
    """Selected penalty, original-scale coefficients and the cross-validation curve"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    penalty: float
    terms: List[str]
    coefficients: np.ndarray
    intercept: float
    nonzero_terms: List[str]
    lambda_grid: np.ndarray
    cv_mean: np.ndarray
    cv_sd: np.ndarray
    cv_se: np.ndarray
    selected_rule: Literal["min", "one-sd"]
    folds: int


Controls = Union[pd.DataFrame, Dict[str, Sequence]]


# Principal-component regression

def _score_frame(scores) -> pd.DataFrame:
    if isinstance(scores, pd.DataFrame):
        return scores.reset_index(drop=True).astype(float)
    values = np.asarray(scores, dtype=float)
    if values.ndim == 1:
        values = values.reshape(-1, 1)
    return pd.DataFrame(values, columns=[f"PC{j + 1}" for j in range(values.shape[1])])


def _control_frame(controls: Optional[Controls]) -> Optional[pd.DataFrame]:
    if controls is None:
        return None
    frame = controls if isinstance(controls, pd.DataFrame) else pd.DataFrame(dict(controls))
    return frame.reset_index(drop=True).astype(str)


def dummy_columns(controls: pd.DataFrame) -> pd.DataFrame:
    """0/1 columns for every level but the alphabetically first of each categorical"""
    blocks = []
    for name in controls.columns:
        levels = sorted(controls[name].unique())
        coded = pd.Categorical(controls[name], categories=levels)
        blocks.append(pd.get_dummies(coded, prefix=name, prefix_sep="_", drop_first=True, dtype=float))
    if not blocks:
        return pd.DataFrame(index=controls.index)
    return pd.concat(blocks, axis=1).set_axis(controls.index, axis=0)


def pcr(tfp_growth, scores, controls: Optional[Controls] = None) -> RegressionReport:
    """OLS of TFP growth on an intercept, the component scores and optional dummy controls"""
    y = np.asarray(tfp_growth, dtype=float).ravel()
    score_frame = _score_frame(scores)
    control_frame = _control_frame(controls)
    lengths = [len(y), len(score_frame)] + ([len(control_frame)] if control_frame is not None else [])
    if len(set(lengths)) > 1:
        raise LengthMismatch(*lengths)

    design = score_frame
    if control_frame is not None and len(control_frame.columns):
        design = pd.concat([score_frame, dummy_columns(control_frame)], axis=1)
    terms = [INTERCEPT, *[str(c) for c in design.columns]]
    X = np.column_stack([np.ones(len(y)), design.to_numpy(dtype=float)])
    fit = ols(X, y, terms)

    with np.errstate(divide="ignore", invalid="ignore"):
        t_stats = np.where(fit.standard_errors > 0, fit.coefficients / fit.standard_errors, np.nan)
    p_values = student_t_two_sided(t_stats, fit.df_resid)
    return RegressionReport(
        terms=terms,
        coefficients=[float(b) for b in fit.coefficients],
        standard_errors=[float(s) for s in fit.standard_errors],
        t_stats=[float(t) for t in np.atleast_1d(t_stats)],
        p_values=[float(p) for p in np.atleast_1d(p_values)],
        n=len(y),
        r_squared=float(fit.r_squared),
        controls_included=control_frame is not None and len(control_frame.columns) > 0,
    )


def pcr_by_cluster(tfp_growth, scores, labels, controls: Optional[Controls] = None,
                   k: Optional[int] = None) -> List[RegressionReport]:
    """One PCR per cluster; small clusters drop the controls or are skipped"""
    y = np.asarray(tfp_growth, dtype=float).ravel()
    labels = np.asarray(labels, dtype=int)
    score_frame = _score_frame(scores)
    control_frame = _control_frame(controls)
    lengths = [len(y), len(score_frame), len(labels)] + ([len(control_frame)] if control_frame is not None else [])
    if len(set(lengths)) > 1:
        raise LengthMismatch(*lengths)
    k = int(k if k is not None else labels.max() + 1)
    base_terms = 1 + score_frame.shape[1]

    reports = []
    for g in range(k):
        rows = np.nonzero(labels == g)[0]
        n = rows.size
        sub_y, sub_scores = y[rows], score_frame.iloc[rows]
        if n < base_terms + MIN_EXTRA_ROWS:
            logger.warning(f"Cluster {g + 1}: {n} rows for {base_terms} terms, skipped")
            reports.append(RegressionReport(n=n, subsample=g, skipped_reason=INSUFFICIENT_SAMPLE))
            continue

        report, note = None, None
        if control_frame is not None:
            sub_controls = control_frame.iloc[rows]
            needed = base_terms + dummy_columns(sub_controls).shape[1]
            if n >= needed + MIN_EXTRA_ROWS:
                try:
                    report = pcr(sub_y, sub_scores, sub_controls)
                except RankDeficient as e:
                    logger.warning(f"Cluster {g + 1}: controls alias the components ({e}); refitting without")
                    note = CONTROLS_NOTE
            else:
                note = CONTROLS_NOTE
        if report is None:
            try:
                report = pcr(sub_y, sub_scores)
            except (RankDeficient, TooFewRows) as e:
                logger.warning(f"Cluster {g + 1}: {e}")
                reports.append(RegressionReport(n=n, subsample=g, skipped_reason=type(e).__name__))
                continue
        reports.append(report.model_copy(update={"subsample": g, "note": note}))
    return reports


def regression_table(report: RegressionReport) -> pd.DataFrame:
    """Estimate, standard error, t value, p-value and stars per term"""
    table = pd.DataFrame({
        "Estimate": report.coefficients,
        "Std. Error": report.standard_errors,
        "t value": report.t_stats,
        "p-value": [format_p_value(p) for p in report.p_values],
        "Signif.": [significance_stars(p) for p in report.p_values],
    }, index=pd.Index(report.terms, name="Term"))
    return table


# Lasso

def soft_threshold(value: float, threshold: float) -> float:
    return float(np.sign(value) * max(abs(value) - threshold, 0.0))


def lasso_objective(X: np.ndarray, y: np.ndarray, beta: np.ndarray, lam: float) -> float:
    residual = y - X @ beta
    return float(residual @ residual) / (2 * len(y)) + lam * float(np.abs(beta).sum())


def lasso_coordinate_descent(X, y, lam: float, tol: float = 1e-7, max_sweeps: int = 10000,
                             start: Optional[np.ndarray] = None) -> np.ndarray:
    """Cyclic coordinate descent for (1/2n)||y - Xb||^2 + lam*||b||_1"""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if lam < 0:
        raise InvalidConfig("lambda", "must be non-negative")
    n, p = X.shape
    beta = np.zeros(p) if start is None else np.array(start, dtype=float)
    scale = (X ** 2).sum(axis=0) / n
    residual = y - X @ beta
    objective = lasso_objective(X, y, beta, lam)

    change = np.inf
    for _ in range(max_sweeps):
        change = 0.0
        for j in range(p):
            if scale[j] == 0:
                beta[j] = 0.0
                continue
            rho = X[:, j] @ residual / n + scale[j] * beta[j]
            updated = soft_threshold(rho, lam) / scale[j]
            delta = updated - beta[j]
            if delta != 0.0:
                residual -= X[:, j] * delta
                beta[j] = updated
                change = max(change, abs(delta))
        current = lasso_objective(X, y, beta, lam)
        assert current <= objective + 1e-12 * max(1.0, abs(objective)), \
            f"Coordinate descent increased the objective: {objective} -> {current}"
        objective = current
        if change < tol:
            return beta
    raise DidNotConverge(max_sweeps, change)


def lambda_max(X: np.ndarray, y: np.ndarray) -> float:
    """Smallest penalty at which every coefficient is zero"""
    return float(np.max(np.abs(X.T @ y)) / len(y))


def _standardize(X: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    mean = X.mean(axis=0)
    sd = X.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    return (X - mean) / sd, mean, sd


def _path(X: np.ndarray, y: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Warm-started solutions along a decreasing penalty grid"""
    beta = np.zeros(X.shape[1])
    out = np.empty((len(grid), X.shape[1]))
    for i, lam in enumerate(grid):
        beta = lasso_coordinate_descent(X, y, float(lam), start=beta)
        out[i] = beta
    return out


def lasso_cv(X, y, lambda_grid: Optional[Sequence[float]] = None, folds: int = 10, seed: int = 0,
             rule: Literal["min", "one-sd"] = "one-sd", names: Optional[Sequence[str]] = None) -> LassoResult:
    """K-fold cross-validated Lasso; coefficients returned on the original variable scale"""
    if folds < 2:
        raise InvalidConfig("folds", "need at least 2 folds")
    if rule not in ("min", "one-sd"):
        raise InvalidConfig("rule", f"expected 'min' or 'one-sd', got {rule}")
    if isinstance(X, pd.DataFrame):
        names = names or [str(c) for c in X.columns]
    values = np.asarray(X, dtype=float)
    target = np.asarray(y, dtype=float).ravel()
    n, p = values.shape
    if len(target) != n:
        raise LengthMismatch(n, len(target))
    if n < folds:
        raise TooFewRows(n, folds)
    names = list(names) if names is not None else [f"x{j + 1}" for j in range(p)]

    standardized, mean, sd = _standardize(values)
    centered = target - target.mean()
    if lambda_grid is None:
        top = lambda_max(standardized, centered)
        grid = np.geomspace(top, 1e-3 * top, 100) if top > 0 else np.zeros(1)
    else:
        grid = np.sort(np.asarray(lambda_grid, dtype=float))[::-1]

    assignment = generator(seed, "cv").permutation(np.arange(n) % folds)
    errors = np.empty((folds, len(grid)))
    for fold in range(folds):
        train, test = assignment != fold, assignment == fold
        x_train, mu, sigma = _standardize(values[train])
        y_mean = target[train].mean()
        path = _path(x_train, target[train] - y_mean, grid)
        predictions = y_mean + ((values[test] - mu) / sigma) @ path.T
        errors[fold] = np.mean((target[test][:, None] - predictions) ** 2, axis=0)

    cv_mean = errors.mean(axis=0)
    cv_sd = errors.std(axis=0, ddof=1)
    cv_se = cv_sd / np.sqrt(folds)
    best = int(np.argmin(cv_mean))
    if rule == "min":
        chosen = best
    else:
        chosen = int(np.nonzero(cv_mean <= cv_mean[best] + cv_se[best])[0][0])

    beta = _path(standardized, centered, grid[:chosen + 1])[-1]
    coefficients = beta / sd
    coefficients[beta == 0] = 0.0
    intercept = float(target.mean() - mean @ coefficients)
    nonzero = [name for name, b in zip(names, coefficients) if b != 0]
    logger.info(f"Lasso ({rule}, {folds} folds): lambda={grid[chosen]:.4g}, {len(nonzero)} of {p} terms kept")
    return LassoResult(penalty=float(grid[chosen]), terms=names, coefficients=coefficients, intercept=intercept,
                       nonzero_terms=nonzero, lambda_grid=grid, cv_mean=cv_mean, cv_sd=cv_sd, cv_se=cv_se,
                       selected_rule=rule, folds=folds)


def lasso_table(results: Dict[str, LassoResult]) -> pd.DataFrame:
    """Variable by period coefficients; zeroed entries shown as '.'"""
    terms: List[str] = []
    for result in results.values():
        terms.extend(t for t in result.terms if t not in terms)
    table = pd.DataFrame(".", index=pd.Index(terms, name="Variable"), columns=list(results))
    for label, result in results.items():
        for term, value in zip(result.terms, result.coefficients):
            if value != 0:
                table.loc[term, label] = f"{value:.4f}"
    return table


def cv_curve_frame(result: LassoResult) -> pd.DataFrame:
    return pd.DataFrame({"lambda": result.lambda_grid, "cv_mean": result.cv_mean,
                         "cv_sd": result.cv_sd, "cv_se": result.cv_se})
