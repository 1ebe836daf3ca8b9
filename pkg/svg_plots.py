#!/usr/bin/env python3
"""
SVG Plots - scree charts and SOM grids rendered with matplotlib as reproducible SVG text
"""

import io
from pathlib import Path
from typing import Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed element ids and no timestamp keep identical figures byte-identical
plt.rcParams["svg.hashsalt"] = "tfp-toolkit"
plt.rcParams["svg.fonttype"] = "none"


def _to_svg(fig) -> str:
    buffer = io.StringIO()
    fig.savefig(buffer, format="svg", bbox_inches="tight", metadata={"Date": None})
    plt.close(fig)
    return buffer.getvalue()


def heatmap_svg(grid: np.ndarray, title: str, counts: Optional[np.ndarray] = None) -> str:
    """Grey-scale grid, darker for larger values; optional per-cell hit counts"""
    values = np.asarray(grid, dtype=float)
    rows, cols = values.shape
    fig, ax = plt.subplots(figsize=(max(2.0, 0.5 * cols + 1.5), max(2.0, 0.5 * rows + 1.0)))
    image = ax.imshow(values, cmap="Greys", interpolation="nearest")
    fig.colorbar(image, ax=ax, fraction=0.046, pad=0.04)
    if counts is not None:
        for r in range(rows):
            for c in range(cols):
                ax.text(c, r, str(int(counts[r, c])), ha="center", va="center", fontsize=7, color="tab:red")
    ax.set_title(title, fontsize=10)
    ax.set_xticks([])
    ax.set_yticks([])
    return _to_svg(fig)


def bar_chart_svg(labels: Sequence[str], values: Sequence[float], title: str) -> str:
    """Vertical bars, one per label"""
    labels = [str(label) for label in labels]
    fig, ax = plt.subplots(figsize=(max(3.0, 0.5 * len(labels) + 1.5), 3.0))
    ax.bar(range(len(labels)), [float(v) for v in values], color="#4a6fa5")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_title(title, fontsize=10)
    return _to_svg(fig)


def write_svg(svg: str, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(svg, encoding="utf-8")
    return path
