#!/usr/bin/env python3
"""
SOM - online self-organizing map on a rectangular grid with U-matrix and component planes
"""

import logging
import math
from typing import Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.spatial.distance import cdist

from errors import DimensionMismatch, EmptyInput, InvalidConfig, MissingEntries

logger = logging.getLogger(__name__)


class SomConfig(BaseModel):
    """Grid shape and training schedule"""
    rows: int
    cols: int
    epochs: int = 200
    lr_start: float = 0.5
    lr_end: float = 0.01
    radius_start: Optional[float] = None
    radius_end: float = 0.5
    seed: int = 0
    topology: Literal["rectangular"] = "rectangular"

    @model_validator(mode="after")
    def _fill_radius(self) -> "SomConfig":
        if self.radius_start is None:
            self.radius_start = max(self.rows, self.cols) / 2.0
        return self

    def check(self) -> "SomConfig":
        if self.rows < 1 or self.cols < 1:
            raise InvalidConfig("rows", "grid dimensions must be at least 1")
        if self.epochs < 1:
            raise InvalidConfig("epochs", "must be at least 1")
        if not self.lr_start > self.lr_end > 0:
            raise InvalidConfig("lr_start", "need lr_start > lr_end > 0")
        if not self.radius_start >= self.radius_end > 0:
            raise InvalidConfig("radius_start", "need radius_start >= radius_end > 0")
        return self

    @property
    def n_nodes(self) -> int:
        return self.rows * self.cols


class SomModel(BaseModel):
    """Trained codebook and per-observation best-matching nodes"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    codebook: np.ndarray
    assignments: np.ndarray
    config: SomConfig
    input_dim: int
    initial_quantization_error: float
    quantization_error: float

    @property
    def rows(self) -> int:
        return self.config.rows

    @property
    def cols(self) -> int:
        return self.config.cols


def grid_coordinates(rows: int, cols: int) -> np.ndarray:
    """(row, col) of every node in row-major order"""
    r, c = np.divmod(np.arange(rows * cols), cols)
    return np.column_stack([r, c]).astype(float)


def default_grid(matrix: np.ndarray) -> Tuple[int, int]:
    """About 5*sqrt(n) nodes with the aspect ratio of the two leading eigenvalues"""
    values = np.asarray(matrix, dtype=float)
    n = values.shape[0]
    nodes = max(1, int(round(5.0 * math.sqrt(n))))
    ratio = 1.0
    if values.shape[1] >= 2 and n >= 3:
        eigen = np.sort(np.linalg.eigvalsh(np.cov(values, rowvar=False)))[::-1]
        if eigen[1] > 0:
            ratio = math.sqrt(eigen[0] / eigen[1])
    rows = max(1, int(round(math.sqrt(nodes * ratio))))
    cols = max(1, int(round(nodes / rows)))
    return rows, cols


def quantization_error(codebook: np.ndarray, matrix: np.ndarray) -> float:
    """Mean Euclidean distance from each row to its nearest codebook vector"""
    return float(np.sqrt(cdist(matrix, codebook, "sqeuclidean").min(axis=1)).mean())


def _assign(codebook: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    return np.argmin(cdist(matrix, codebook, "sqeuclidean"), axis=1)


def train_som(matrix: np.ndarray, config: SomConfig) -> SomModel:
    """Online Kohonen training with linearly decaying learning rate and radius"""
    config.check()
    data = np.asarray(matrix, dtype=float)
    if data.ndim != 2 or data.shape[0] == 0 or data.shape[1] == 0:
        raise EmptyInput()
    if np.isnan(data).any():
        raise MissingEntries("train_som input")
    n, d = data.shape
    rng = np.random.default_rng(config.seed)

    nodes = config.n_nodes
    codebook = data[rng.choice(n, size=nodes, replace=nodes > n)].copy()
    initial_error = quantization_error(codebook, data)
    coords = grid_coordinates(config.rows, config.cols)
    grid_sq = cdist(coords, coords, "sqeuclidean")

    span = max(config.epochs - 1, 1)
    for epoch in range(config.epochs):
        fraction = epoch / span
        lr = config.lr_start + (config.lr_end - config.lr_start) * fraction
        radius = config.radius_start + (config.radius_end - config.radius_start) * fraction
        for row in rng.permutation(n):
            x = data[row]
            bmu = int(np.argmin(np.sum((codebook - x) ** 2, axis=1)))
            distance = grid_sq[bmu]
            weight = np.where(distance <= radius ** 2, np.exp(-distance / (2.0 * radius ** 2)), 0.0) * lr
            codebook += weight[:, None] * (x - codebook)

    assignments = _assign(codebook, data)
    final_error = quantization_error(codebook, data)
    logger.info(f"SOM {config.rows}x{config.cols} trained on {n} rows: QE {initial_error:.4f} -> {final_error:.4f}")
    return SomModel(codebook=codebook, assignments=assignments, config=config, input_dim=d,
                    initial_quantization_error=initial_error, quantization_error=final_error)


def best_matching_unit(model: SomModel, vector) -> int:
    """Nearest node, lowest index on ties"""
    vector = np.asarray(vector, dtype=float).ravel()
    if vector.size != model.input_dim:
        raise DimensionMismatch(model.input_dim, vector.size)
    return int(np.argmin(np.sum((model.codebook - vector) ** 2, axis=1)))


def u_matrix(model: SomModel) -> np.ndarray:
    """Mean distance from each node to its existing 4-neighbours"""
    rows, cols = model.rows, model.cols
    grid = model.codebook.reshape(rows, cols, -1)
    out = np.zeros((rows, cols))
    for r in range(rows):
        for c in range(cols):
            distances = [np.linalg.norm(grid[r, c] - grid[rr, cc])
                         for rr, cc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1))
                         if 0 <= rr < rows and 0 <= cc < cols]
            out[r, c] = float(np.mean(distances)) if distances else 0.0
    return out


def component_planes(model: SomModel) -> Tuple[np.ndarray, np.ndarray]:
    """Per-variable codebook grids (d x rows x cols) and the node hit counts"""
    planes = model.codebook.T.reshape(model.input_dim, model.rows, model.cols).copy()
    counts = np.bincount(model.assignments, minlength=model.config.n_nodes).reshape(model.rows, model.cols)
    return planes, counts
