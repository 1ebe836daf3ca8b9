#!/usr/bin/env python3
"""
Cluster - k-means with elbow and gap selection, SOM label propagation and cluster diagnostics
"""

import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field
from scipy.spatial.distance import cdist

from errors import CurveTooShort, EmptyInput, InvalidConfig, KTooLarge, LengthMismatch, MissingEntries
from seeding import child_generators, generator, substream_seed
from som import SomModel
from stats_utils import student_t_two_sided

logger = logging.getLogger(__name__)


class KMeansModel(BaseModel):
    """Best of several seeded Lloyd runs"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    k: int
    centroids: np.ndarray
    labels: np.ndarray
    wss: float
    iterations: int
    seed: int
    n_init: int = 1
    wss_trace: List[float] = Field(default_factory=list)


class GapCurve(BaseModel):
    """Within-cluster dispersion against uniform reference data for k = 1..kmax"""
    ks: List[int]
    wss_k: List[float]
    gap_k: List[float]
    sd_k: List[float]
    selected_gap: int
    selected_elbow: Optional[int] = None
    selected_max_gap: int
    local_maxima: List[int]
    B: int


class ClusterProfile(BaseModel):
    """Per-cluster sizes and means (rows) by cluster (columns G1..Gk)"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    table: pd.DataFrame
    raw_absolute: Optional[pd.DataFrame] = None
    raw_per_worker: Optional[pd.DataFrame] = None


class TransitionTable(BaseModel):
    """Cluster membership counts between two labelings of the same firms"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    counts: pd.DataFrame
    excluded_a: int = 0
    excluded_b: int = 0


def group_names(k: int) -> List[str]:
    return [f"G{g + 1}" for g in range(k)]


def _checked(matrix) -> np.ndarray:
    data = np.asarray(matrix, dtype=float)
    if data.ndim == 1:
        data = data.reshape(-1, 1)
    if data.ndim != 2 or data.shape[0] == 0 or data.shape[1] == 0:
        raise EmptyInput()
    if np.isnan(data).any():
        raise MissingEntries("clustering input")
    return data


def _wss(data: np.ndarray, centroids: np.ndarray, labels: np.ndarray) -> float:
    return float(np.sum((data - centroids[labels]) ** 2))


def _plus_plus(data: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: first center uniform, the rest proportional to squared distance"""
    n = data.shape[0]
    chosen = [int(rng.integers(n))]
    nearest = np.sum((data - data[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = float(nearest.sum())
        if total > 0:
            index = int(rng.choice(n, p=nearest / total))
        else:
            index = int(rng.integers(n))
        chosen.append(index)
        nearest = np.minimum(nearest, np.sum((data - data[index]) ** 2, axis=1))
    return data[chosen].copy()


def _lloyd(data: np.ndarray, centroids: np.ndarray, max_iter: int) -> Tuple[np.ndarray, np.ndarray, int, List[float]]:
    k = centroids.shape[0]
    labels = None
    trace: List[float] = []
    iterations = 0
    for iterations in range(1, max_iter + 1):
        new_labels = np.argmin(cdist(data, centroids, "sqeuclidean"), axis=1)
        wss = _wss(data, centroids, new_labels)
        if trace:
            assert wss <= trace[-1] * (1 + 1e-9) + 1e-12, f"Lloyd step increased WSS: {trace[-1]} -> {wss}"
        trace.append(wss)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        counts = np.bincount(labels, minlength=k)
        for g in np.nonzero(counts)[0]:
            centroids[g] = data[labels == g].mean(axis=0)
        empty = np.nonzero(counts == 0)[0]
        if empty.size:
            distance = np.sum((data - centroids[labels]) ** 2, axis=1)
            farthest = np.argsort(-distance, kind="stable")[:empty.size]
            for g, row in zip(empty, farthest):
                centroids[g] = data[row]
    return new_labels, centroids, iterations, trace


def kmeans(matrix, k: int, seed: int = 0, max_iter: int = 300, n_init: int = 10) -> KMeansModel:
    """Lloyd's algorithm from k-means++ starts; the lowest WSS over n_init restarts wins"""
    data = _checked(matrix)
    n = data.shape[0]
    if not 1 <= k <= n:
        raise KTooLarge(k, n)
    if max_iter < 1 or n_init < 1:
        raise InvalidConfig("max_iter", "iteration and restart counts must be positive")

    best = None
    for rng in child_generators(seed, n_init):
        labels, centroids, iterations, trace = _lloyd(data, _plus_plus(data, k, rng), max_iter)
        counts = np.bincount(labels, minlength=k)
        for g in np.nonzero(counts)[0]:
            centroids[g] = data[labels == g].mean(axis=0)
        wss = _wss(data, centroids, labels)
        if best is None or wss < best.wss:
            best = KMeansModel(k=k, centroids=centroids, labels=labels, wss=wss, iterations=iterations,
                               seed=seed, n_init=n_init, wss_trace=trace)
    logger.debug(f"k-means k={k} on {n} rows: WSS {best.wss:.6g} after {best.iterations} iterations")
    return best


def elbow_select(wss_curve: Sequence[float]) -> int:
    """k (1-based) with the largest WSS drop, ignoring the drop from k=1 to k=2"""
    curve = [float(w) for w in wss_curve]
    if len(curve) < 3:
        raise CurveTooShort(len(curve))
    best_k, best_drop = 3, curve[1] - curve[2]
    for k in range(4, len(curve) + 1):
        drop = curve[k - 2] - curve[k - 1]
        if drop > best_drop:
            best_k, best_drop = k, drop
    return best_k


def _log_wss(value: float) -> float:
    return float(np.log(max(value, 1e-300)))


def _local_maxima(gap: Sequence[float]) -> List[int]:
    out = []
    for i, value in enumerate(gap):
        left = gap[i - 1] if i > 0 else -np.inf
        right = gap[i + 1] if i + 1 < len(gap) else -np.inf
        if value > left and value > right:
            out.append(i + 1)
    return out


def gap_statistic(matrix, kmax: int, B: int = 50, seed: int = 0, n_init: int = 10) -> GapCurve:
    """Gap curve against uniform draws over the data's bounding box, one-sd selection rule"""
    data = _checked(matrix)
    n = data.shape[0]
    if kmax < 2:
        raise InvalidConfig("kmax", "must be at least 2")
    if B < 1:
        raise InvalidConfig("B", "must be at least 1")
    kmax = min(kmax, n)
    ks = list(range(1, kmax + 1))

    wss = [kmeans(data, k, seed=substream_seed(seed, "kmeans", k), n_init=n_init).wss for k in ks]
    log_wss = np.array([_log_wss(w) for w in wss])

    low, high = data.min(axis=0), data.max(axis=0)
    rng = generator(seed, "gap")
    reference = np.empty((B, kmax))
    for b in range(B):
        draw = rng.uniform(low, high, size=data.shape)
        for j, k in enumerate(ks):
            fit = kmeans(draw, k, seed=substream_seed(seed, "gap", b, k), n_init=n_init)
            reference[b, j] = _log_wss(fit.wss)

    gap = reference.mean(axis=0) - log_wss
    sd = reference.std(axis=0) * np.sqrt(1.0 + 1.0 / B)

    selected = kmax
    for j in range(kmax - 1):
        if gap[j] >= gap[j + 1] - sd[j + 1]:
            selected = ks[j]
            break
    gap_list = [float(g) for g in gap]
    curve = GapCurve(
        ks=ks,
        wss_k=[float(w) for w in wss],
        gap_k=gap_list,
        sd_k=[float(s) for s in sd],
        selected_gap=selected,
        selected_elbow=elbow_select(wss) if kmax >= 3 else None,
        selected_max_gap=int(ks[int(np.argmax(gap))]),
        local_maxima=_local_maxima(gap_list),
        B=B,
    )
    logger.info(f"Gap statistic on {n} rows: k={curve.selected_gap} (elbow {curve.selected_elbow}, "
                f"max gap {curve.selected_max_gap})")
    return curve


def cluster_via_som(som_model: SomModel, k: int, seed: int = 0, n_init: int = 10) -> np.ndarray:
    """k-means on the codebook; each row inherits the cluster of its best-matching node"""
    fit = kmeans(som_model.codebook, k, seed=seed, n_init=n_init)
    return fit.labels[np.asarray(som_model.assignments, dtype=int)]


def _frame_or_named(values, prefix: str) -> pd.DataFrame:
    if isinstance(values, pd.DataFrame):
        return values.reset_index(drop=True)
    array = np.asarray(values, dtype=float)
    if array.ndim == 1:
        array = array.reshape(-1, 1)
    return pd.DataFrame(array, columns=[f"{prefix}{j + 1}" for j in range(array.shape[1])])


def _group_means(frame: pd.DataFrame, labels: np.ndarray, k: int) -> pd.DataFrame:
    means = frame.groupby(labels).mean().reindex(range(k))
    means.index = group_names(k)
    return means.T


def cluster_profiles(labels, tfp_growth, scores, raw: Optional[pd.DataFrame] = None,
                     labor=None, k: Optional[int] = None, tfp_label: str = "ACF_res") -> ClusterProfile:
    """N, mean TFP growth and mean scores per cluster, with optional raw-variable means"""
    labels = np.asarray(labels, dtype=int)
    tfp = np.asarray(tfp_growth, dtype=float).ravel()
    score_frame = _frame_or_named(scores, "PC")
    lengths = [len(labels), len(tfp), len(score_frame)]
    if raw is not None:
        lengths.append(len(raw))
    if labor is not None:
        lengths.append(len(labor))
    if len(set(lengths)) > 1:
        raise LengthMismatch(*lengths)
    k = int(k if k is not None else labels.max() + 1)

    counts = np.bincount(labels, minlength=k)[:k]
    body = pd.concat([pd.DataFrame({tfp_label: tfp}), score_frame], axis=1)
    table = pd.concat([pd.DataFrame([counts.astype(float)], index=["N"], columns=group_names(k)),
                       _group_means(body, labels, k)])
    table.index.name = "Variable"

    raw_absolute = raw_per_worker = None
    if raw is not None:
        raw = raw.reset_index(drop=True)
        raw_absolute = _group_means(raw, labels, k)
        raw_absolute.index.name = "Variable"
        if labor is not None:
            workers = np.asarray(labor, dtype=float)
            with np.errstate(divide="ignore", invalid="ignore"):
                per_worker = raw.drop(columns=[c for c in raw.columns if c == "labor"]).div(
                    np.where(workers > 0, workers, np.nan), axis=0)
            raw_per_worker = _group_means(per_worker, labels, k)
            raw_per_worker.index.name = "Variable"
    return ClusterProfile(table=table, raw_absolute=raw_absolute, raw_per_worker=raw_per_worker)


def welch_t_test(x1, x2) -> Tuple[float, float, float]:
    """Two-sided Welch test of equal means: (t, dof, p)"""
    a = np.asarray(x1, dtype=float).ravel()
    b = np.asarray(x2, dtype=float).ravel()
    n1, n2 = a.size, b.size
    if n1 < 2 or n2 < 2:
        return float("nan"), float("nan"), float("nan")
    v1, v2 = a.var(ddof=1) / n1, b.var(ddof=1) / n2
    diff = float(a.mean() - b.mean())
    spread = v1 + v2
    if spread == 0:
        if diff == 0:
            return 0.0, float(n1 + n2 - 2), 1.0
        return float(np.copysign(np.inf, diff)), float(n1 + n2 - 2), 0.0
    t = diff / np.sqrt(spread)
    dof = spread ** 2 / (v1 ** 2 / (n1 - 1) + v2 ** 2 / (n2 - 1))
    return float(t), float(dof), float(student_t_two_sided(t, dof))


def welch_matrix(labels, tfp_growth, k: Optional[int] = None) -> pd.DataFrame:
    """Symmetric matrix of pairwise Welch p-values; diagonal and undersized clusters missing"""
    labels = np.asarray(labels, dtype=int)
    tfp = np.asarray(tfp_growth, dtype=float).ravel()
    if len(labels) != len(tfp):
        raise LengthMismatch(len(labels), len(tfp))
    k = int(k if k is not None else labels.max() + 1)
    p_values = np.full((k, k), np.nan)
    for i in range(k):
        for j in range(i + 1, k):
            _, _, p = welch_t_test(tfp[labels == i], tfp[labels == j])
            p_values[i, j] = p_values[j, i] = p
    names = group_names(k)
    return pd.DataFrame(p_values, index=names, columns=names)


def transition_matrix(labels_a, labels_b, firm_ids_a, firm_ids_b=None,
                      k_a: Optional[int] = None, k_b: Optional[int] = None) -> TransitionTable:
    """Counts of firms by (cluster under a, cluster under b) over firms present in both"""
    firm_ids_b = firm_ids_a if firm_ids_b is None else firm_ids_b
    if len(labels_a) != len(firm_ids_a):
        raise LengthMismatch(len(labels_a), len(firm_ids_a))
    if len(labels_b) != len(firm_ids_b):
        raise LengthMismatch(len(labels_b), len(firm_ids_b))
    left = pd.Series(np.asarray(labels_a, dtype=int), index=pd.Index([str(f) for f in firm_ids_a]))
    right = pd.Series(np.asarray(labels_b, dtype=int), index=pd.Index([str(f) for f in firm_ids_b]))
    shared = left.index.intersection(right.index, sort=False)
    k_a = int(k_a if k_a is not None else left.max() + 1)
    k_b = int(k_b if k_b is not None else right.max() + 1)

    counts = pd.crosstab(left.loc[shared].to_numpy(), right.loc[shared].to_numpy())
    counts = counts.reindex(index=range(k_a), columns=range(k_b), fill_value=0).astype(int)
    counts.index = [f"Group {i + 1}" for i in range(k_a)]
    counts.columns = [f"Group {j + 1}" for j in range(k_b)]
    excluded_a, excluded_b = len(left) - len(shared), len(right) - len(shared)
    if excluded_a or excluded_b:
        logger.info(f"Transition matrix excludes {excluded_a} + {excluded_b} firms present in one labeling only")
    return TransitionTable(counts=counts, excluded_a=excluded_a, excluded_b=excluded_b)


def composition(labels, category) -> pd.DataFrame:
    """Share of each category value within each cluster, largest share first"""
    labels = np.asarray(labels, dtype=int)
    values = pd.Series(category).reset_index(drop=True).astype(str)
    if len(labels) != len(values):
        raise LengthMismatch(len(labels), len(values))
    frame = pd.DataFrame({"cluster": labels, "category": values})
    counts = frame.groupby(["cluster", "category"]).size().rename("count").reset_index()
    counts["share"] = counts["count"] / counts.groupby("cluster")["count"].transform("sum")
    counts = counts.sort_values(["cluster", "share", "category"], ascending=[True, False, True], kind="mergesort")
    return counts.reset_index(drop=True)


def composition_summary(table: pd.DataFrame) -> Dict[int, str]:
    """Most representative category per cluster"""
    return {int(c): str(group.iloc[0]["category"]) for c, group in table.groupby("cluster")}
