#!/usr/bin/env python3
"""
Impute PCA - iterative regularized PCA imputation, principal components and loading correlations
"""

import logging
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict

from errors import AllMissingRow, ConstantColumn, MissingEntries, SchemaMismatch, TooManyComponents
from panel_io import Matrix, StandardizationParams

logger = logging.getLogger(__name__)

CORRELATION_COLUMNS = ["Var. Explained", "Top Positive Correlated Variables", "Top Negative Correlated Variables"]


class PcaModel(BaseModel):
    """Loadings and eigenvalues of a centered, standardized matrix"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    loadings: np.ndarray
    eigenvalues: np.ndarray
    variance_fractions: np.ndarray
    column_names: List[str]
    center: np.ndarray
    n_observations: int
    standardization: Optional[StandardizationParams] = None

    @property
    def n_components(self) -> int:
        return int(self.loadings.shape[1])

    @property
    def component_names(self) -> List[str]:
        return [f"PC{m + 1}" for m in range(self.n_components)]


class ImputationResult(BaseModel):
    """Completed matrix and convergence record"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    completed: Any
    n_iterations: int
    final_change: float
    rank: int
    converged: bool


class ComponentCorrelations(BaseModel):
    """Strongest positively and negatively correlated variables for one component"""
    component: str
    variance_fraction: float
    top_positive: List[Tuple[str, float]]
    top_negative: List[Tuple[str, float]]


def _values_and_names(matrix: Matrix) -> Tuple[np.ndarray, List[str]]:
    values = np.asarray(matrix, dtype=float)
    if values.ndim == 1:
        values = values.reshape(-1, 1)
    if isinstance(matrix, pd.DataFrame):
        return values, [str(c) for c in matrix.columns]
    return values, [f"x{j + 1}" for j in range(values.shape[1])]


def fit_pca(matrix: Matrix, n_components: int,
            standardization: Optional[StandardizationParams] = None) -> PcaModel:
    """Top right singular vectors of the centered matrix; largest loading of each component positive"""
    values, names = _values_and_names(matrix)
    if np.isnan(values).any():
        raise MissingEntries("fit_pca input")
    n, p = values.shape
    limit = min(n - 1, p)
    if not 1 <= n_components <= limit:
        raise TooManyComponents(n_components, limit)

    center = values.mean(axis=0)
    _, singular, vt = np.linalg.svd(values - center, full_matrices=False)
    eigenvalues = singular ** 2 / (n - 1)
    total = float(eigenvalues.sum())
    loadings = vt[:n_components].T.copy()
    for m in range(n_components):
        if loadings[np.argmax(np.abs(loadings[:, m])), m] < 0:
            loadings[:, m] = -loadings[:, m]
    fractions = eigenvalues[:n_components] / total if total > 0 else np.zeros(n_components)
    logger.info(f"PCA on {n}x{p}: first {n_components} components explain {fractions.sum():.1%}")
    return PcaModel(loadings=loadings, eigenvalues=eigenvalues[:n_components].copy(),
                    variance_fractions=fractions, column_names=names, center=center,
                    n_observations=n, standardization=standardization)


def project(model: PcaModel, matrix: Matrix) -> Matrix:
    """Scores of a matrix on the model's components"""
    values, names = _values_and_names(matrix)
    if isinstance(matrix, pd.DataFrame):
        if names != model.column_names:
            raise SchemaMismatch(model.column_names, names)
    elif values.shape[1] != len(model.column_names):
        raise SchemaMismatch(len(model.column_names), values.shape[1])
    scores = (values - model.center) @ model.loadings
    if isinstance(matrix, pd.DataFrame):
        return pd.DataFrame(scores, index=matrix.index, columns=model.component_names)
    return scores


def iterative_impute(matrix: Matrix, n_components: int = 8, tol: float = 1e-6,
                     max_iter: int = 1000) -> ImputationResult:
    """Fill missing cells by alternating rank-S reconstruction with shrunk singular values"""
    values, names = _values_and_names(matrix)
    values = values.copy()
    missing = np.isnan(values)
    n, p = values.shape
    if not 1 <= n_components <= p - 1:
        raise TooManyComponents(n_components, p - 1)
    for j in np.nonzero((~missing).sum(axis=0) < 2)[0]:
        raise ConstantColumn(names[j])
    empty_rows = np.nonzero(missing.all(axis=1))[0]
    if empty_rows.size:
        label = matrix.index[empty_rows[0]] if isinstance(matrix, pd.DataFrame) else int(empty_rows[0])
        raise AllMissingRow(label)

    if not missing.any():
        return ImputationResult(completed=_wrap(matrix, values), n_iterations=0, final_change=0.0,
                                rank=n_components, converged=True)

    values[missing] = np.take(np.nanmean(values, axis=0), np.nonzero(missing)[1])
    change = np.inf
    iteration = 0
    converged = False
    while iteration < max_iter:
        iteration += 1
        mean = values.mean(axis=0)
        u, singular, vt = np.linalg.svd(values - mean, full_matrices=False)
        trailing = singular[n_components:] ** 2
        sigma2 = float(trailing.mean()) if trailing.size else 0.0
        head = singular[:n_components]
        shrunk = np.where(head > 0, np.maximum(head - sigma2 / np.where(head > 0, head, 1.0), 0.0), 0.0)
        reconstruction = mean + (u[:, :n_components] * shrunk) @ vt[:n_components]
        change = float(np.sum((reconstruction[missing] - values[missing]) ** 2))
        values[missing] = reconstruction[missing]
        if change < tol:
            converged = True
            break

    if converged:
        logger.info(f"Imputed {int(missing.sum())} cells in {iteration} iterations (rank {n_components})")
    else:
        logger.warning(f"Imputation did not converge in {max_iter} iterations; last change {change:.3g}")
    return ImputationResult(completed=_wrap(matrix, values), n_iterations=iteration, final_change=change,
                            rank=n_components, converged=converged)


def _wrap(template: Matrix, values: np.ndarray) -> Matrix:
    if isinstance(template, pd.DataFrame):
        return pd.DataFrame(values, index=template.index, columns=template.columns)
    return values


def loading_correlations(model: PcaModel, matrix: Matrix, top: int = 3) -> List[ComponentCorrelations]:
    """Pearson correlation of every column with each score; top positive and negative per component"""
    values, _ = _values_and_names(matrix)
    scores = np.asarray(project(model, matrix), dtype=float)
    centered = values - values.mean(axis=0)
    norms = np.linalg.norm(centered, axis=0)
    out = []
    for m, name in enumerate(model.component_names):
        score = scores[:, m] - scores[:, m].mean()
        denominator = norms * np.linalg.norm(score)
        with np.errstate(invalid="ignore", divide="ignore"):
            corr = np.where(denominator > 0, centered.T @ score / denominator, np.nan)
        order_desc = np.argsort(-np.nan_to_num(corr, nan=0.0), kind="stable")
        order_asc = np.argsort(np.nan_to_num(corr, nan=0.0), kind="stable")
        positive = [(model.column_names[j], float(corr[j])) for j in order_desc if corr[j] > 1e-10][:top]
        negative = [(model.column_names[j], float(corr[j])) for j in order_asc if corr[j] < -1e-10][:top]
        out.append(ComponentCorrelations(component=name, variance_fraction=float(model.variance_fractions[m]),
                                         top_positive=positive, top_negative=negative))
    return out


def format_percent(fraction: float) -> str:
    return f"{100.0 * fraction:.1f}%"


def correlation_table(correlations: Sequence[ComponentCorrelations]) -> pd.DataFrame:
    """Var. Explained | Top Positive | Top Negative, one row per component"""
    def render(pairs):
        return ", ".join(f"{name} ({value:.2f})" for name, value in pairs)

    rows = {c.component: [format_percent(c.variance_fraction), render(c.top_positive), render(c.top_negative)]
            for c in correlations}
    table = pd.DataFrame.from_dict(rows, orient="index", columns=CORRELATION_COLUMNS)
    table.index.name = "Component"
    return table


def scree_table(model: PcaModel) -> pd.DataFrame:
    """Component, eigenvalue, variance fraction and cumulative fraction"""
    return pd.DataFrame({
        "component": model.component_names,
        "eigenvalue": model.eigenvalues,
        "fraction": model.variance_fractions,
        "cumulative": np.cumsum(model.variance_fractions),
    })
