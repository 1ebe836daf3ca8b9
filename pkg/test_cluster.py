#!/usr/bin/env python3
"""
Test script for k-means, gap selection and cluster diagnostics
"""

import itertools
import math

import numpy as np
import pandas as pd
import pytest
from scipy import stats

import cluster
from check_runner import main
from errors import CurveTooShort, KTooLarge, LengthMismatch
from som import SomConfig, SomModel


def brute_force_wss(data: np.ndarray, k: int) -> float:
    best = math.inf
    for labels in itertools.product(range(k), repeat=len(data)):
        labels = np.array(labels)
        if len(set(labels)) < k:
            continue
        wss = sum(float(np.sum((data[labels == g] - data[labels == g].mean(axis=0)) ** 2)) for g in range(k))
        best = min(best, wss)
    return best


def test_kmeans_four_points():
    data = np.array([[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]])
    model = cluster.kmeans(data, 2, seed=0)
    assert model.wss == pytest.approx(1.0)
    assert model.labels[0] == model.labels[1] != model.labels[2] == model.labels[3]
    assert all(b <= a + 1e-12 for a, b in zip(model.wss_trace, model.wss_trace[1:]))


def test_kmeans_extremes():
    data = np.random.default_rng(1).normal(size=(12, 3))
    total = float(np.sum((data - data.mean(axis=0)) ** 2))
    assert cluster.kmeans(data, 1).wss == pytest.approx(total)
    assert cluster.kmeans(data, 12).wss == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(KTooLarge):
        cluster.kmeans(data, 13)


def test_kmeans_matches_brute_force():
    rng = np.random.default_rng(3)
    for n in (5, 7, 8):
        data = rng.normal(size=(n, 2))
        for k in (2, 3):
            model = cluster.kmeans(data, k, seed=n, n_init=20)
            assert model.wss == pytest.approx(brute_force_wss(data, k), rel=1e-9)


def test_kmeans_deterministic():
    data = np.random.default_rng(4).normal(size=(40, 2))
    first = cluster.kmeans(data, 3, seed=9)
    second = cluster.kmeans(data, 3, seed=9)
    np.testing.assert_array_equal(first.labels, second.labels)
    assert first.wss == second.wss


def test_elbow_select():
    assert cluster.elbow_select([100.0, 90.0, 40.0, 38.0, 37.0]) == 3
    # the k=2 drop never counts, ties go to the smaller k
    assert cluster.elbow_select([100.0, 20.0, 19.0, 18.0]) == 3
    assert cluster.elbow_select([100.0, 50.0, 20.0, 15.0, 14.0]) == 3
    assert cluster.elbow_select([100.0, 90.0, 85.0, 40.0, 38.0]) == 4
    assert cluster.elbow_select([10.0, 8.0, 6.0, 4.0]) == 3
    with pytest.raises(CurveTooShort):
        cluster.elbow_select([3.0, 1.0])


def test_gap_three_blobs():
    rng = np.random.default_rng(12)
    centers = np.array([[0.0, 0.0], [10.0, 0.0], [5.0, 8.0]])
    data = np.vstack([rng.normal(c, 0.5, size=(50, 2)) for c in centers])
    curve = cluster.gap_statistic(data, kmax=6, B=10, seed=1, n_init=5)
    print(f"   gap {np.round(curve.gap_k, 3).tolist()} -> k={curve.selected_gap}")
    assert curve.selected_gap == 3
    assert curve.ks == [1, 2, 3, 4, 5, 6]


def test_gap_recovers_three_blobs_over_seeds():
    centers = np.array([[0.0, 0.0], [20.0, 0.0], [10.0, 10.0 * math.sqrt(3.0)]])
    selected = []
    for seed in range(20):
        rng = np.random.default_rng(100 + seed)
        data = np.vstack([rng.normal(c, 1.0, size=(50, 2)) for c in centers])
        selected.append(cluster.gap_statistic(data, kmax=6, B=20, seed=seed, n_init=5).selected_gap)
    print(f"   selected k per seed: {selected}")
    assert sum(k == 3 for k in selected) >= 19


def test_gap_uniform_selects_one():
    data = np.random.default_rng(21).uniform(size=(300, 2))
    curve = cluster.gap_statistic(data, kmax=5, B=20, seed=2, n_init=5)
    print(f"   gap {np.round(curve.gap_k, 3).tolist()} -> k={curve.selected_gap}")
    assert curve.selected_gap == 1


def test_gap_single_reference():
    data = np.random.default_rng(5).normal(size=(30, 2))
    curve = cluster.gap_statistic(data, kmax=3, B=1, seed=0, n_init=2)
    assert curve.sd_k == [0.0, 0.0, 0.0]
    assert curve.B == 1


def test_cluster_via_som():
    config = SomConfig(rows=2, cols=2)
    codebook = np.array([[0.0, 0.0], [0.1, 0.0], [9.0, 9.0], [9.1, 9.0]])
    model = SomModel(codebook=codebook, assignments=np.array([0, 1, 2, 3, 3, 0]), config=config,
                     input_dim=2, initial_quantization_error=1.0, quantization_error=0.1)
    labels = cluster.cluster_via_som(model, 2, seed=0)
    assert labels[0] == labels[1] == labels[5]
    assert labels[2] == labels[3] == labels[4]
    assert labels[0] != labels[2]


def test_welch_textbook():
    a = math.sqrt(0.9)
    x1 = np.array([a, -a] * 5)
    t, dof, p = cluster.welch_t_test(x1, x1 + 1.0)
    assert t == pytest.approx(-math.sqrt(5.0))
    assert dof == pytest.approx(18.0)
    assert p == pytest.approx(2.0 * stats.t.sf(math.sqrt(5.0), 18), rel=1e-8)
    assert 0.035 < p < 0.042


def test_welch_matches_scipy():
    rng = np.random.default_rng(8)
    for n1, n2, shift, scale in [(5, 7, 0.5, 1.0), (12, 9, 1.0, 3.0), (30, 4, -0.2, 0.5),
                                 (8, 8, 0.0, 1.0), (50, 40, 0.3, 2.0)]:
        x1 = rng.normal(size=n1)
        x2 = rng.normal(shift, scale, size=n2)
        t, dof, p = cluster.welch_t_test(x1, x2)
        expected = stats.ttest_ind(x1, x2, equal_var=False)
        assert t == pytest.approx(expected.statistic, rel=1e-10)
        assert p == pytest.approx(expected.pvalue, rel=1e-6, abs=1e-12)
        v1, v2 = x1.var(ddof=1) / n1, x2.var(ddof=1) / n2
        assert dof == pytest.approx((v1 + v2) ** 2 / (v1 ** 2 / (n1 - 1) + v2 ** 2 / (n2 - 1)))


def test_welch_edge_cases():
    assert cluster.welch_t_test([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])[2] == pytest.approx(1.0)
    assert all(math.isnan(v) for v in cluster.welch_t_test([1.0], [1.0, 2.0]))
    assert cluster.welch_t_test([2.0, 2.0], [2.0, 2.0])[2] == 1.0
    assert cluster.welch_t_test([2.0, 2.0], [3.0, 3.0])[2] == 0.0

    labels = np.array([0, 0, 0, 1, 1, 1, 2])
    tfp = np.array([1.0, 1.2, 0.9, 3.0, 3.1, 2.8, 5.0])
    matrix = cluster.welch_matrix(labels, tfp)
    assert np.isnan(matrix.loc["G1", "G1"])
    assert matrix.loc["G1", "G2"] == matrix.loc["G2", "G1"] < 0.01
    assert np.isnan(matrix.loc["G1", "G3"])


def test_transition_matrix():
    table = cluster.transition_matrix([0, 0, 1, 1], [1, 0, 1], ["a", "b", "c", "d"], ["a", "b", "e"])
    counts = table.counts
    assert list(counts.index) == ["Group 1", "Group 2"]
    assert counts.loc["Group 1", "Group 2"] == 1
    assert counts.loc["Group 1", "Group 1"] == 1
    assert counts.to_numpy().sum() == 2
    assert (table.excluded_a, table.excluded_b) == (2, 1)


def test_composition():
    labels = [0, 0, 0, 0, 0, 1, 1, 1]
    countries = ["IT", "DE", "IT", "IT", "DE", "FR", "FR", "FR"]
    table = cluster.composition(labels, countries)
    first = table[table["cluster"] == 0]
    assert list(first["category"]) == ["IT", "DE"]
    np.testing.assert_allclose(first["share"], [0.6, 0.4])
    assert cluster.composition_summary(table) == {0: "IT", 1: "FR"}
    with pytest.raises(LengthMismatch):
        cluster.composition([0, 1], ["IT"])


def test_cluster_profiles():
    labels = [0, 0, 1]
    raw = pd.DataFrame({"sales": [10.0, 20.0, 30.0], "labor": [1.0, 2.0, 3.0]})
    profile = cluster.cluster_profiles(labels, [1.0, 3.0, 5.0], np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]),
                                       raw=raw, labor=raw["labor"])
    table = profile.table
    assert list(table.columns) == ["G1", "G2"]
    assert list(table.index) == ["N", "ACF_res", "PC1", "PC2"]
    assert table.loc["N"].tolist() == [2.0, 1.0]
    assert table.loc["ACF_res"].tolist() == [2.0, 5.0]
    assert table.loc["PC2"].tolist() == [3.0, 6.0]
    assert profile.raw_absolute.loc["sales", "G1"] == 15.0
    assert profile.raw_per_worker.loc["sales"].tolist() == [10.0, 10.0]
    with pytest.raises(LengthMismatch):
        cluster.cluster_profiles([0, 1], [1.0, 2.0, 3.0], np.zeros((2, 1)))


if __name__ == "__main__":
    main(globals(), "Testing clustering and diagnostics...")
