#!/usr/bin/env python3
"""
Productivity CLI - Command line interface for the firm productivity toolkit
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

import pandas as pd
from dotenv import load_dotenv
from pydantic import ValidationError

import cli_report
import cluster
import impute_pca
import panel_io
import prodest
import regress
import som
import synth_dgp
from errors import ConfigError, PipelineError, ProductivityError, StageFailure
from svg_plots import heatmap_svg, write_svg

load_dotenv()

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_STAGE_FAILURE, EXIT_CONFIG_ERROR = 0, 1, 2


def read_matrix(path: str, drop: Optional[List[str]] = None) -> pd.DataFrame:
    """Numeric CSV keyed by its first column"""
    if not Path(path).is_file():
        raise FileNotFoundError(path)
    frame = pd.read_csv(path, index_col=0)
    if drop:
        frame = frame.drop(columns=[c for c in drop if c in frame.columns])
    return frame.select_dtypes("number").astype(float)


def out_dir(path: Optional[str]) -> Path:
    directory = Path(path or os.getenv("TFP_OUTPUT_DIR") or "output")
    directory.mkdir(parents=True, exist_ok=True)
    return directory


class ProductivityCLI:
    """Command line interface for productivity estimation and clustering"""

    def print_coefficients(self, result: prodest.EstimatorResult):
        """Print estimated elasticities"""
        c = result.coefficients
        print(f"📈 {result.method} estimates (n = {result.diagnostics.sample_size}):")
        for name in ("beta_l", "beta_k", "beta_m", "beta_a"):
            value = getattr(c, name)
            if value is not None:
                print(f"   {name}: {value:.4f}")
        if result.diagnostics.gmm_objective is not None:
            print(f"   GMM objective: {result.diagnostics.gmm_objective:.3g}")

    def print_gap(self, curve: cluster.GapCurve):
        """Print the gap curve"""
        print(f"📊 Gap statistic (B = {curve.B}):")
        for k, gap, sd in zip(curve.ks, curve.gap_k, curve.sd_k):
            print(f"   k={k}: gap {gap:.4f} (sd {sd:.4f})")
        print(f"   Selected k: {curve.selected_gap} (elbow {curve.selected_elbow}, max gap {curve.selected_max_gap})")

    def print_report(self, report: regress.RegressionReport):
        """Print one regression"""
        if report.skipped:
            print(f"⚠️ Skipped: {report.skipped_reason} (n = {report.n})")
            return
        print(f"📐 n = {report.n}, R² = {report.r_squared:.4f}" + (f" ({report.note})" if report.note else ""))
        print(regress.regression_table(report).to_string())

    def print_written(self, paths):
        for path in paths:
            print(f"💾 {path}")

    # Subcommands

    def simulate(self, args) -> int:
        config = synth_dgp.DgpConfig()
        if args.config:
            config = synth_dgp.DgpConfig.model_validate_json(Path(args.config).read_text(encoding="utf-8"))
        overrides = {k: v for k, v in (("n_firms", args.n_firms), ("n_periods", args.periods), ("seed", args.seed)) if v is not None}
        config = config.model_copy(update=overrides)
        print(f"🏭 Simulating {config.n_firms} firms over {config.n_periods} periods (seed {config.seed})...")
        panel, truth = synth_dgp.simulate_panel(config)
        if args.accounting:
            panel = synth_dgp.simulate_accounting(panel, truth, synth_dgp.AccountingConfig(seed=config.seed))
        written = [panel_io.write_panel(panel, args.out)]
        if args.truth:
            written.append(synth_dgp.write_truth(truth, args.truth))
        print(f"✅ {len(panel)} observations")
        self.print_written(written)
        return EXIT_OK

    def estimate(self, args) -> int:
        schema = panel_io.load_schema(args.schema) if args.schema else None
        panel = panel_io.load_panel(args.panel, schema)
        settings = prodest.GmmSettings(survival_correction=args.survival, first_difference=args.first_difference,
                                       n_multistarts=args.starts, series_degree=args.series_degree,
                                       markov_poly_degree=args.markov_degree)
        print(f"🔍 Estimating {args.method} on {len(panel)} observations...")
        result = prodest.estimate(panel, args.method, settings)
        self.print_coefficients(result)
        self.print_written(prodest.write_result(result, args.out))
        return EXIT_OK

    def impute(self, args) -> int:
        matrix = read_matrix(args.input)
        standardized, params = panel_io.standardize(matrix)
        result = impute_pca.iterative_impute(standardized, args.rank, args.tol, args.max_iter)
        completed = params.invert(result.completed)
        completed.to_csv(args.out)
        status = "✅ Converged" if result.converged else "⚠️ Not converged"
        print(f"{status} after {result.n_iterations} iterations (last change {result.final_change:.3g})")
        self.print_written([args.out])
        return EXIT_OK

    def pca(self, args) -> int:
        matrix = read_matrix(args.input)
        standardized, params = panel_io.standardize(matrix)
        model = impute_pca.fit_pca(standardized, args.n_components, params)
        directory = out_dir(args.out_dir)
        scree = impute_pca.scree_table(model)
        scree.to_csv(directory / "scree.csv", index=False)
        (directory / "scree.json").write_text(json.dumps(scree.to_dict(orient="records"), indent=2), encoding="utf-8")
        impute_pca.project(model, standardized).to_csv(directory / "scores.csv")
        correlations = impute_pca.correlation_table(impute_pca.loading_correlations(model, standardized))
        correlations.to_csv(directory / "correlations.csv")
        pd.DataFrame(model.loadings, index=model.column_names, columns=model.component_names).to_csv(directory / "loadings.csv")
        print("📊 Variance explained:")
        for _, row in scree.iterrows():
            print(f"   {row['component']}: {impute_pca.format_percent(row['fraction'])}")
        self.print_written([directory / n for n in ("scree.json", "scree.csv", "scores.csv", "correlations.csv", "loadings.csv")])
        return EXIT_OK

    def _train_som(self, matrix: pd.DataFrame, args) -> som.SomModel:
        rows, cols = args.rows, args.cols
        if rows is None or cols is None:
            rows, cols = som.default_grid(matrix.to_numpy())
        config = som.SomConfig(rows=rows, cols=cols, epochs=args.epochs, seed=args.seed,
                               radius_end=min(0.5, max(rows, cols) / 2.0))
        return som.train_som(matrix.to_numpy(), config)

    def som(self, args) -> int:
        matrix = read_matrix(args.input)
        model = self._train_som(matrix, args)
        directory = out_dir(args.out_dir)
        pd.DataFrame(model.codebook, columns=matrix.columns).rename_axis("node").to_csv(directory / "codebook.csv")
        pd.DataFrame({"node": model.assignments}, index=matrix.index).to_csv(directory / "assignments.csv")
        planes, counts = som.component_planes(model)
        grid = som.u_matrix(model)
        pd.DataFrame(grid).to_csv(directory / "umatrix.csv", index_label="row")
        pd.DataFrame(counts).to_csv(directory / "node_counts.csv", index_label="row")
        write_svg(heatmap_svg(grid, "U-matrix", counts), directory / "umatrix.svg")
        for name, plane in zip(matrix.columns, planes):
            pd.DataFrame(plane).to_csv(directory / f"plane_{name}.csv", index_label="row")
            write_svg(heatmap_svg(plane, f"Component plane {name}"), directory / f"plane_{name}.svg")
        print(f"🗺️ {model.rows}x{model.cols} map: quantization error "
              f"{model.initial_quantization_error:.4f} -> {model.quantization_error:.4f}")
        written = ("codebook.csv", "assignments.csv", "umatrix.csv", "node_counts.csv", "umatrix.svg")
        self.print_written([directory / n for n in written])
        return EXIT_OK

    def cluster(self, args) -> int:
        matrix = read_matrix(args.input)
        directory = out_dir(args.out_dir)
        written = []
        som_model = self._train_som(matrix, args) if args.on == "som" else None
        target = som_model.codebook if som_model is not None else matrix.to_numpy()

        k = args.k
        if k == "auto":
            curve = cluster.gap_statistic(target, min(args.kmax, len(target) - 1), args.gap_B, args.seed)
            self.print_gap(curve)
            (directory / "gap.json").write_text(json.dumps(curve.model_dump(), indent=2, sort_keys=True), encoding="utf-8")
            written.append(directory / "gap.json")
            k = curve.selected_gap
        k = int(k)
        if som_model is not None:
            labels = cluster.cluster_via_som(som_model, k, args.seed)
        else:
            labels = cluster.kmeans(target, k, args.seed).labels
        pd.DataFrame({"cluster": labels}, index=matrix.index).to_csv(directory / "labels.csv")
        written.append(directory / "labels.csv")

        if args.tfp_column:
            growth = matrix[args.tfp_column].to_numpy()
            scores = matrix.drop(columns=[args.tfp_column])
            cluster.cluster_profiles(labels, growth, scores, k=k, tfp_label=args.tfp_column).table.to_csv(directory / "profiles.csv")
            cluster.welch_matrix(labels, growth, k).to_csv(directory / "welch.csv")
            written += [directory / "profiles.csv", directory / "welch.csv"]
        if args.previous:
            previous = pd.read_csv(args.previous, index_col=0)
            table = cluster.transition_matrix(previous["cluster"], labels, previous.index, matrix.index)
            table.counts.to_csv(directory / "transition.csv")
            written.append(directory / "transition.csv")
        print(f"🧩 {len(matrix)} rows in {k} clusters: sizes {list(pd.Series(labels).value_counts(sort=False).sort_index())}")
        self.print_written(written)
        return EXIT_OK

    def pcr(self, args) -> int:
        frame = pd.read_csv(args.input, index_col=0)
        components = [c for c in frame.columns if c.startswith(args.prefix)]
        controls = frame[args.controls] if args.controls else None
        growth = frame[args.target].to_numpy()
        payload = {"full": regress.pcr(growth, frame[components], controls).model_dump()}
        self.print_report(regress.RegressionReport.model_validate(payload["full"]))
        if args.labels_column:
            reports = regress.pcr_by_cluster(growth, frame[components], frame[args.labels_column].to_numpy(), controls)
            payload["by_cluster"] = [r.model_dump() for r in reports]
            for report in reports:
                print(f"🔹 Cluster G{report.subsample + 1}")
                self.print_report(report)
        Path(args.out).write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
        self.print_written([args.out])
        return EXIT_OK

    def lasso(self, args) -> int:
        frame = read_matrix(args.input)
        growth = frame[args.target].to_numpy()
        design, _ = panel_io.standardize(frame.drop(columns=[args.target]))
        result = regress.lasso_cv(design, growth, folds=args.folds, seed=args.seed, rule=args.rule)
        table = regress.lasso_table({"coefficient": result})
        table.to_csv(args.out)
        print(f"🎯 lambda = {result.penalty:.4g} ({result.selected_rule}); kept: {', '.join(result.nonzero_terms) or 'none'}")
        self.print_written([args.out])
        return EXIT_OK

    def pipeline(self, args) -> int:
        config = cli_report.load_config(args.config, seed=args.seed, output_dir=args.out_dir)
        print(f"🚀 Running pipeline ({config.estimator.method}, seed {config.seed}) into {config.output_dir}...")
        run = cli_report.run_pipeline(config)
        print(f"✅ {len(run.manifest['artifacts'])} artifacts, manifest {run.manifest_path}")
        if args.report:
            print(f"📝 {cli_report.render_report(run.manifest_path)}")
        return run.exit_status

    def report(self, args) -> int:
        path = cli_report.render_report(args.manifest, args.out)
        print(f"📝 Report written to {path}")
        return EXIT_OK


def k_value(text: str):
    if text == "auto":
        return text
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'auto' or an integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError("k must be at least 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Productivity CLI - TFP estimation, PCA, SOM and clustering of firms")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Simulate a synthetic firm panel")
    p.add_argument("--config", help="DGP config JSON")
    p.add_argument("--n-firms", type=int)
    p.add_argument("--periods", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--accounting", action="store_true", help="Attach accounting variables and categories")
    p.add_argument("--truth", help="Write latent productivity CSV here")
    p.add_argument("--out", default="synthetic_panel.csv")

    p = sub.add_parser("estimate", help="Estimate the production function")
    p.add_argument("panel")
    p.add_argument("--schema", help="Panel schema JSON")
    p.add_argument("--method", default="ACF", type=str.upper, choices=sorted(prodest.ESTIMATORS),
                   help="ols, op, lp or acf (default: acf)")
    p.add_argument("--series-degree", type=int, default=3, help="First-stage polynomial degree (default: 3)")
    p.add_argument("--markov-degree", type=int, default=3, help="Productivity law-of-motion degree (default: 3)")
    p.add_argument("--survival", action="store_true", help="Olley-Pakes survival correction")
    p.add_argument("--first-difference", action="store_true")
    p.add_argument("--starts", type=int, default=8, help="Optimizer starts (default: 8)")
    p.add_argument("--out", default="estimates.json")

    p = sub.add_parser("impute", help="Fill missing cells by iterative PCA")
    p.add_argument("input")
    p.add_argument("--rank", type=int, default=8)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--out", default="imputed.csv")

    p = sub.add_parser("pca", help="Principal components of a complete matrix")
    p.add_argument("input")
    p.add_argument("--n-components", type=int, default=8)
    p.add_argument("--out-dir")

    for name, help_text in (("som", "Train a self-organizing map"), ("cluster", "Cluster rows with k-means")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("input")
        p.add_argument("--rows", type=int)
        p.add_argument("--cols", type=int)
        p.add_argument("--epochs", type=int, default=200)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out-dir")
        if name == "cluster":
            p.add_argument("--k", type=k_value, default="auto", help="auto or a number of clusters")
            p.add_argument("--kmax", type=int, default=8)
            p.add_argument("--gap-B", dest="gap_B", type=int, default=50)
            p.add_argument("--on", choices=["som", "raw"], default="som")
            p.add_argument("--tfp-column", help="Column used for profiles and Welch tests")
            p.add_argument("--previous", help="Earlier labels CSV for a transition matrix")

    p = sub.add_parser("pcr", help="Regress TFP growth on component scores")
    p.add_argument("input")
    p.add_argument("--target", default="tfp_growth")
    p.add_argument("--prefix", default="PC", help="Component column prefix (default: PC)")
    p.add_argument("--controls", nargs="*", default=[])
    p.add_argument("--labels-column", help="Cluster column for per-cluster regressions")
    p.add_argument("--out", default="pcr.json")

    p = sub.add_parser("lasso", help="Cross-validated Lasso")
    p.add_argument("input")
    p.add_argument("--target", default="tfp_growth")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--rule", choices=["min", "one-sd"], default="one-sd")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="lasso.csv")

    p = sub.add_parser("pipeline", help="Run the full pipeline from a config file")
    p.add_argument("--config", default="pipeline-config.json")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir")
    p.add_argument("--report", action="store_true", help="Also render the Markdown report")

    p = sub.add_parser("report", help="Render a Markdown report from a manifest")
    p.add_argument("manifest")
    p.add_argument("--out")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI function"""
    logging.basicConfig(level=getattr(logging, os.getenv("TFP_LOG_LEVEL", "INFO").upper(), logging.INFO))
    args = build_parser().parse_args(argv)
    cli = ProductivityCLI()

    try:
        return getattr(cli, args.command)(args)
    except (ConfigError, ValidationError, FileNotFoundError) as e:
        print(f"❌ Configuration error: {e}")
        return EXIT_CONFIG_ERROR
    except StageFailure as e:
        print(f"❌ Stage '{e.stage}' failed: {e.cause}")
        return EXIT_STAGE_FAILURE
    except (PipelineError, ProductivityError) as e:
        print(f"❌ Error: {e}")
        return EXIT_STAGE_FAILURE


if __name__ == "__main__":
    sys.exit(main())
