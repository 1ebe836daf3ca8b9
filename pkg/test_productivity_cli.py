#!/usr/bin/env python3
"""
Test script for the command line subcommands
"""

import json

import numpy as np
import pandas as pd
import pytest

import productivity_cli
from check_runner import main


def write_matrix(path, missing: bool = False):
    rng = np.random.default_rng(0)
    factors = rng.normal(size=(60, 2))
    values = factors @ rng.normal(size=(2, 5)) + 0.1 * rng.normal(size=(60, 5))
    frame = pd.DataFrame(values, columns=["sales", "cash", "inventory", "debt", "assets"],
                         index=pd.Index([f"F{i:03d}" for i in range(60)], name="firm_id"))
    frame["tfp_growth"] = factors[:, 0] + 0.1 * rng.normal(size=60)
    if missing:
        frame.iloc[3, 1] = np.nan
        frame.iloc[10, 4] = np.nan
    frame.to_csv(path)
    return path


def test_simulate_then_estimate(tmp_path):
    panel = tmp_path / "panel.csv"
    assert productivity_cli.main(["simulate", "--n-firms", "40", "--periods", "4", "--seed", "3",
                                  "--out", str(panel), "--truth", str(tmp_path / "truth.csv")]) == 0
    assert panel.is_file() and (tmp_path / "truth.csv").is_file()
    out = tmp_path / "estimates.json"
    assert productivity_cli.main(["estimate", str(panel), "--method", "OLS", "--out", str(out)]) == 0
    payload = json.loads(out.read_text(encoding="utf-8"))
    assert payload["method"] == "OLS"
    assert (tmp_path / "estimates_tfp.csv").is_file()

    acf = tmp_path / "acf.json"
    assert productivity_cli.main(["estimate", str(panel), "--method", "acf", "--series-degree", "2",
                                  "--markov-degree", "1", "--starts", "2", "--out", str(acf)]) == 0
    payload = json.loads(acf.read_text(encoding="utf-8"))
    assert payload["method"] == "ACF"
    assert payload["first_stage"]["polynomial_degree"] == 2
    assert (tmp_path / "acf_tfp.csv").is_file()


def test_estimate_rejects_unknown_method(tmp_path):
    with pytest.raises(SystemExit) as info:
        productivity_cli.main(["estimate", str(tmp_path / "panel.csv"), "--method", "gmm"])
    assert info.value.code == 2


def test_matrix_subcommands(tmp_path):
    source = write_matrix(tmp_path / "matrix.csv", missing=True)
    imputed = tmp_path / "imputed.csv"
    assert productivity_cli.main(["impute", str(source), "--rank", "2", "--out", str(imputed)]) == 0
    completed = pd.read_csv(imputed, index_col=0)
    assert not completed.isna().any().any()

    assert productivity_cli.main(["pca", str(imputed), "--n-components", "2", "--out-dir", str(tmp_path)]) == 0
    scores = pd.read_csv(tmp_path / "scores.csv", index_col=0)
    assert list(scores.columns) == ["PC1", "PC2"]
    scree = json.loads((tmp_path / "scree.json").read_text(encoding="utf-8"))
    assert [row["component"] for row in scree] == ["PC1", "PC2"]
    assert {"eigenvalue", "fraction"} <= set(scree[0])

    som_dir = tmp_path / "som"
    assert productivity_cli.main(["som", str(tmp_path / "scores.csv"), "--rows", "2", "--cols", "3",
                                  "--epochs", "3", "--out-dir", str(som_dir)]) == 0
    umatrix = pd.read_csv(som_dir / "umatrix.csv", index_col=0)
    assert umatrix.shape == (2, 3)
    for name in ("PC1", "PC2"):
        assert pd.read_csv(som_dir / f"plane_{name}.csv", index_col=0).shape == (2, 3)
        assert (som_dir / f"plane_{name}.svg").is_file()
    assert pd.read_csv(som_dir / "node_counts.csv", index_col=0).to_numpy().sum() == 60

    assert productivity_cli.main(["cluster", str(tmp_path / "scores.csv"), "--on", "raw", "--k", "2",
                                  "--out-dir", str(tmp_path)]) == 0
    labels = pd.read_csv(tmp_path / "labels.csv", index_col=0)
    assert set(labels["cluster"]) == {0, 1}

    combined = scores.assign(tfp_growth=completed["tfp_growth"], cluster=labels["cluster"])
    combined.to_csv(tmp_path / "combined.csv")
    assert productivity_cli.main(["pcr", str(tmp_path / "combined.csv"), "--labels-column", "cluster",
                                  "--out", str(tmp_path / "pcr.json")]) == 0
    payload = json.loads((tmp_path / "pcr.json").read_text(encoding="utf-8"))
    assert payload["full"]["terms"] == ["(Intercept)", "PC1", "PC2"]
    assert len(payload["by_cluster"]) == 2


def test_lasso_subcommand(tmp_path):
    source = write_matrix(tmp_path / "matrix.csv")
    out = tmp_path / "lasso.csv"
    assert productivity_cli.main(["lasso", str(source), "--folds", "4", "--out", str(out)]) == 0
    table = pd.read_csv(out, index_col=0)
    assert list(table.index) == ["sales", "cash", "inventory", "debt", "assets"]


def test_missing_input_exit_code(tmp_path):
    assert productivity_cli.main(["impute", str(tmp_path / "nope.csv")]) == 2


if __name__ == "__main__":
    main(globals(), "Testing the productivity CLI...")
