#!/usr/bin/env python3
"""
CLI Report - end-to-end productivity pipeline with an artifact manifest and a Markdown report
"""

import contextlib
import hashlib
import json
import logging
import os
from pathlib import Path
from typing import Dict, Iterator, List, Literal, Optional, Union

import numpy as np
import pandas as pd
from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError, field_validator

import cluster
import impute_pca
import panel_io
import prodest
import regress
import som
from errors import ConfigError, IncompleteManifest, ProductivityError, StageFailure
from panel_io import FirmPanel, PanelSchema
from prodest import GmmSettings
from seeding import substream_seed
from svg_plots import bar_chart_svg, heatmap_svg, write_svg

load_dotenv()

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.json"
REPORT_NAME = "report.md"
REQUIRED_STAGES = ("ingest", "estimate", "pca", "cluster", "diagnostics", "pcr", "lasso")


class WindowSpec(BaseModel):
    """Named group of periods collapsed into one cross-section"""
    name: str
    periods: List[int]


class TransformSettings(BaseModel):
    """Per-worker, log and missing-data screen options"""
    per_worker: Optional[List[str]] = None
    log: List[str] = Field(default_factory=list)
    screen_threshold: float = 0.85
    per_worker_first: bool = False


Method = Literal["OLS", "OP", "LP", "ACF"]
METHOD_ORDER = ("OLS", "OP", "LP", "ACF")
COMPARISON_ROWS = ("beta_l", "beta_l_first_stage", "beta_k", "beta_m", "beta_a", "beta_0")


class EstimatorSettings(BaseModel):
    """Production-function estimator and its tuning.

    ``method`` supplies the TFP used downstream; every method in ``compare``
    is also estimated for the side-by-side coefficient table.
    """
    method: Method = "ACF"
    compare: List[Method] = Field(default_factory=lambda: list(METHOD_ORDER))
    gmm: GmmSettings = Field(default_factory=GmmSettings)

    def methods(self) -> List[str]:
        """Primary method plus the comparison set, in canonical order"""
        wanted = {self.method, *self.compare}
        return [m for m in METHOD_ORDER if m in wanted]


class PcaSettings(BaseModel):
    """Imputation rank and number of retained components"""
    n_components: int = 8
    impute_rank: int = 8
    tol: float = 1e-6
    max_iter: int = 1000


class SomSettings(BaseModel):
    """Map size (None picks the default grid) and schedule"""
    rows: Optional[int] = None
    cols: Optional[int] = None
    epochs: int = 200
    lr_start: float = 0.5
    lr_end: float = 0.01
    radius_end: float = 0.5


class ClusterSettings(BaseModel):
    """k selection and what k-means runs on"""
    k: Union[Literal["auto"], int] = "auto"
    kmax: int = 8
    gap_B: int = 50
    on: Literal["som", "raw"] = "som"
    selection: Literal["gap", "elbow"] = "gap"
    n_init: int = 10


class RegressionSettings(BaseModel):
    """Controls for PCR and Lasso cross-validation options"""
    controls: bool = True
    control_columns: Optional[List[str]] = None
    lasso_folds: int = 10
    lasso_rule: Literal["min", "one-sd"] = "one-sd"


class PipelineConfig(BaseModel):
    """Everything one pipeline run needs"""
    input_paths: List[str]
    panel_schema: PanelSchema = Field(default_factory=PanelSchema)
    windows: List[WindowSpec] = Field(default_factory=list)
    transforms: TransformSettings = Field(default_factory=TransformSettings)
    estimator: EstimatorSettings = Field(default_factory=EstimatorSettings)
    pca: PcaSettings = Field(default_factory=PcaSettings)
    som: SomSettings = Field(default_factory=SomSettings)
    cluster: ClusterSettings = Field(default_factory=ClusterSettings)
    regression: RegressionSettings = Field(default_factory=RegressionSettings)
    output_dir: str = "output"
    seed: int = 0

    @field_validator("input_paths")
    @classmethod
    def _inputs_exist(cls, paths: List[str]) -> List[str]:
        if not paths:
            raise ValueError("at least one input path is required")
        for path in paths:
            if not Path(path).is_file():
                raise ValueError(f"input file not found: {path}")
        return paths


class PipelineRun(BaseModel):
    """Outcome of a completed run"""
    exit_status: int
    manifest_path: str
    manifest: dict


def load_config(path: Union[str, Path], seed: Optional[int] = None, output_dir: Optional[str] = None) -> PipelineConfig:
    """Read a pipeline config; flags and TFP_OUTPUT_DIR override file values"""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
        if seed is not None:
            payload["seed"] = seed
        override = output_dir or os.getenv("TFP_OUTPUT_DIR")
        if override:
            payload["output_dir"] = override
        return PipelineConfig.model_validate(payload)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file {path} is not valid JSON: {e}") from e
    except ValidationError as e:
        raise ConfigError(f"Invalid pipeline config {path}: {e}") from e


def sha256_of(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@contextlib.contextmanager
def stage(name: str) -> Iterator[None]:
    """Tag any failure inside the block with the stage name"""
    try:
        yield
    except StageFailure:
        raise
    except Exception as e:
        logger.error(f"Stage {name} failed: {e}")
        raise StageFailure(name, e) from e


def method_comparison(results: Dict[str, prodest.EstimatorResult]) -> pd.DataFrame:
    """Coefficient by method, with the first-stage labor coefficient as its own row and the sample size last"""
    columns = {}
    for method, result in results.items():
        values = result.coefficients.model_dump()
        values["beta_l_first_stage"] = result.first_stage.beta_l_first_stage
        column = {row: values.get(row) for row in COMPARISON_ROWS}
        column["n"] = result.diagnostics.sample_size
        columns[method] = column
    table = pd.DataFrame(columns, index=[*COMPARISON_ROWS, "n"], dtype=float)
    return table.dropna(how="all").rename_axis("Coefficient")


def tfp_correlation(results: Dict[str, prodest.EstimatorResult]) -> pd.DataFrame:
    """Pearson correlation of tfp_growth across methods on the (firm_id, period) rows they share"""
    merged = None
    for method, result in results.items():
        frame = result.tfp_frame()[["firm_id", "period", "tfp_growth"]].rename(columns={"tfp_growth": method})
        merged = frame if merged is None else merged.merge(frame, on=["firm_id", "period"], how="inner")
    return merged[list(results)].corr().rename_axis("Method")


class PipelineRunner:
    """Runs every stage in order and records each artifact it writes"""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.out_dir = Path(config.output_dir)
        self.artifacts: List[dict] = []
        self.file_periods: Dict[str, List[int]] = {}
        self.window_labels: Dict[str, pd.DataFrame] = {}
        self.lasso_results: Dict[str, regress.LassoResult] = {}
        self.estimated_methods: List[str] = []

    # Artifact bookkeeping

    def _record(self, path: Path, stage_name: str, kind: str, window: Optional[str]) -> Path:
        self.artifacts.append({"file": path.name, "stage": stage_name, "kind": kind,
                               "window": window, "sha256": sha256_of(path)})
        return path

    def _name(self, kind: str, window: Optional[str], suffix: str) -> Path:
        stem = f"{window}_{kind}" if window else kind
        return self.out_dir / f"{stem}.{suffix}"

    def write_csv(self, frame: pd.DataFrame, stage_name: str, kind: str, window: Optional[str] = None,
                  index: bool = True) -> Path:
        path = self._name(kind, window, "csv")
        frame.to_csv(path, index=index)
        return self._record(path, stage_name, kind, window)

    def write_json(self, payload, stage_name: str, kind: str, window: Optional[str] = None) -> Path:
        path = self._name(kind, window, "json")
        path.write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
        return self._record(path, stage_name, kind, window)

    def write_svg(self, svg: str, stage_name: str, kind: str, window: Optional[str] = None) -> Path:
        return self._record(write_svg(svg, self._name(kind, window, "svg")), stage_name, kind, window)

    # Stages

    def ingest(self) -> FirmPanel:
        panels = [panel_io.load_panel(path, self.config.panel_schema) for path in self.config.input_paths]
        self.file_periods = {Path(path).stem: p.periods() for path, p in zip(self.config.input_paths, panels)}
        if len(panels) == 1:
            panel = panels[0]
        else:
            frame = pd.concat([p.frame for p in panels], ignore_index=True)
            panel = FirmPanel(frame, panels[0].variable_catalog, panels[0].categories)
        variables = [*[f for f in panel_io.CORE_FIELDS if panel.column(f).notna().any()], *panel.catalog_names]
        self.write_csv(panel_io.descriptive_stats(panel, variables), "ingest", "stats")
        return panel

    def windows(self, panel: FirmPanel) -> List[WindowSpec]:
        if self.config.windows:
            return self.config.windows
        if len(self.config.input_paths) == 1:
            return [WindowSpec(name="all", periods=panel.periods())]
        return [WindowSpec(name=name, periods=periods) for name, periods in self.file_periods.items()]

    def estimate(self, panel: FirmPanel) -> prodest.EstimatorResult:
        """Every configured method; a failing comparison method is skipped, a failing primary aborts"""
        settings = self.config.estimator
        results: Dict[str, prodest.EstimatorResult] = {}
        for method in settings.methods():
            try:
                result = prodest.estimate(panel, method, settings.gmm)
            except ProductivityError as e:
                if method == settings.method:
                    raise
                logger.warning(f"{method} left out of the method comparison: {e}")
                continue
            key = method.lower()
            json_path, sidecar = prodest.write_result(result, self._name(f"estimates_{key}", None, "json"))
            self._record(json_path, "estimate", f"coefficients_{key}", None)
            self._record(sidecar, "estimate", f"tfp_{key}", None)
            results[method] = result
        self.estimated_methods = list(results)
        self.write_csv(method_comparison(results), "estimate", "method_comparison")
        self.write_csv(tfp_correlation(results), "estimate", "tfp_correlation")
        return results[settings.method]

    def cross_section(self, panel: FirmPanel, tfp: pd.DataFrame, window: WindowSpec):
        transforms = self.config.transforms
        frame = panel.restrict(window.periods).frame.merge(tfp[["firm_id", "period", "tfp_growth"]],
                                                           on=["firm_id", "period"], how="left")
        long_panel = FirmPanel(frame, panel.variable_catalog, panel.categories)
        screening = panel_io.screen_missing(long_panel, transforms.screen_threshold)
        self.write_json(screening.model_dump(), "transforms", "screening", window.name)
        kept = screening.kept
        if len(kept) < 2:
            raise ConfigError(f"Only {len(kept)} variables pass the {transforms.screen_threshold:.2f} screen")

        requested = kept if transforms.per_worker is None else transforms.per_worker
        per_worker = [v for v in kept if v in requested]
        section = panel_io.cross_section(long_panel, window.periods, per_worker, transforms.per_worker_first)
        absolute = panel_io.cross_section(long_panel, window.periods).frame.set_index("firm_id")

        data = section.frame.set_index("firm_id")
        for name in transforms.log:
            values = data[name]
            bad = ~(values > 0) & values.notna()
            if bad.any():
                logger.warning(f"{name}: {int(bad.sum())} non-positive values set missing before log")
            data[name] = np.log(values.where(values > 0))

        usable = data["tfp_growth"].notna() & data[kept].notna().any(axis=1)
        if not usable.all():
            logger.warning(f"Window {window.name}: dropping {int((~usable).sum())} firms without TFP or data")
        data = data.loc[usable]
        self.write_csv(data, "transforms", "cross_section", window.name)
        return data, absolute.loc[data.index], kept

    def analyse_window(self, panel: FirmPanel, tfp: pd.DataFrame, window: WindowSpec, index: int) -> None:
        config, seed = self.config, self.config.seed
        with stage("transforms"):
            data, absolute, kept = self.cross_section(panel, tfp, window)
            growth = data["tfp_growth"].to_numpy()

        with stage("impute"):
            standardized, params = panel_io.standardize(data[kept])
            rank = min(config.pca.impute_rank, len(kept) - 1)
            if rank < config.pca.impute_rank:
                logger.warning(f"Window {window.name}: imputation rank clamped to {rank}")
            imputed = impute_pca.iterative_impute(standardized, rank, config.pca.tol, config.pca.max_iter)
            completed = imputed.completed
            self.write_csv(completed, "impute", "imputed", window.name)

        with stage("pca"):
            n_components = min(config.pca.n_components, len(kept), len(completed) - 1)
            if n_components < config.pca.n_components:
                logger.warning(f"Window {window.name}: keeping {n_components} components")
            model = impute_pca.fit_pca(completed, n_components, params)
            scores = impute_pca.project(model, completed)
            scree = impute_pca.scree_table(model)
            self.write_csv(scree, "pca", "scree", window.name, index=False)
            correlations = impute_pca.loading_correlations(model, completed)
            self.write_csv(impute_pca.correlation_table(correlations), "pca", "correlations", window.name)
            self.write_csv(scores, "pca", "scores", window.name)
            self.write_svg(bar_chart_svg(scree["component"], scree["fraction"], f"Scree ({window.name})"),
                           "pca", "scree_plot", window.name)

        with stage("som"):
            som_input, _ = panel_io.standardize(scores.assign(tfp_growth=growth))
            rows, cols = config.som.rows, config.som.cols
            if rows is None or cols is None:
                rows, cols = som.default_grid(som_input)
            som_config = som.SomConfig(rows=rows, cols=cols, epochs=config.som.epochs, lr_start=config.som.lr_start,
                                       lr_end=config.som.lr_end, radius_end=min(config.som.radius_end, max(rows, cols) / 2.0),
                                       seed=substream_seed(seed, "som", index))
            som_model = som.train_som(som_input.to_numpy(), som_config)
            codebook = pd.DataFrame(som_model.codebook, columns=list(som_input.columns))
            codebook.index.name = "node"
            self.write_csv(codebook, "som", "som_codebook", window.name)
            planes, counts = som.component_planes(som_model)
            self.write_svg(heatmap_svg(som.u_matrix(som_model), f"U-matrix ({window.name})", counts),
                           "som", "umatrix", window.name)
            self.write_svg(heatmap_svg(planes[-1], f"TFP growth plane ({window.name})"),
                           "som", "tfp_plane", window.name)

        with stage("cluster"):
            target = som_model.codebook if config.cluster.on == "som" else som_input.to_numpy()
            k = config.cluster.k
            if k == "auto":
                kmax = max(2, min(config.cluster.kmax, len(target) - 1))
                curve = cluster.gap_statistic(target, kmax, config.cluster.gap_B, substream_seed(seed, "gap", index),
                                              config.cluster.n_init)
                self.write_json(curve.model_dump(), "cluster", "gap", window.name)
                k = curve.selected_elbow if config.cluster.selection == "elbow" and curve.selected_elbow else curve.selected_gap
            kmeans_seed = substream_seed(seed, "kmeans", index)
            if config.cluster.on == "som":
                labels = cluster.cluster_via_som(som_model, k, kmeans_seed, config.cluster.n_init)
            else:
                labels = cluster.kmeans(target, k, kmeans_seed, n_init=config.cluster.n_init).labels
            label_frame = pd.DataFrame({"firm_id": data.index, "som_node": som_model.assignments,
                                        "cluster": labels, "group": [f"G{g + 1}" for g in labels]})
            self.write_csv(label_frame, "cluster", "labels", window.name, index=False)
            self.window_labels[window.name] = label_frame.assign(k=k)
            logger.info(f"Window {window.name}: {len(data)} firms in {k} clusters")

        with stage("diagnostics"):
            profile = cluster.cluster_profiles(labels, growth, scores, raw=absolute[kept],
                                               labor=absolute["labor"], k=k)
            self.write_csv(profile.table, "diagnostics", "profiles", window.name)
            self.write_csv(profile.raw_absolute, "diagnostics", "raw_profiles", window.name)
            self.write_csv(profile.raw_per_worker, "diagnostics", "raw_profiles_per_worker", window.name)
            self.write_csv(cluster.welch_matrix(labels, growth, k), "diagnostics", "welch", window.name)
            for name in panel.categories:
                table = cluster.composition(labels, data[name].fillna("unknown"))
                self.write_csv(table, "diagnostics", f"composition_{name}", window.name, index=False)

        with stage("pcr"):
            controls = None
            if config.regression.controls:
                columns = config.regression.control_columns if config.regression.control_columns is not None else panel.categories
                if columns:
                    controls = data[columns].fillna("unknown").reset_index(drop=True)
            payload = {"full": regress.pcr(growth, scores).model_dump()}
            if controls is not None:
                payload["controls"] = regress.pcr(growth, scores, controls).model_dump()
            payload["by_cluster"] = [r.model_dump() for r in regress.pcr_by_cluster(growth, scores, labels, controls, k)]
            self.write_json(payload, "pcr", "pcr", window.name)

        with stage("lasso"):
            result = regress.lasso_cv(completed, growth, folds=min(config.regression.lasso_folds, len(growth)),
                                      seed=substream_seed(seed, "cv", index), rule=config.regression.lasso_rule)
            self.lasso_results[window.name] = result
            self.write_json({"penalty": result.penalty, "rule": result.selected_rule, "folds": result.folds,
                             "intercept": result.intercept, "terms": result.terms,
                             "coefficients": [float(b) for b in result.coefficients],
                             "nonzero_terms": result.nonzero_terms}, "lasso", "lasso", window.name)
            self.write_csv(regress.cv_curve_frame(result), "lasso", "lasso_cv", window.name, index=False)

    def transition(self, windows: List[WindowSpec]) -> None:
        first, second = (self.window_labels[w.name] for w in windows[:2])
        table = cluster.transition_matrix(first["cluster"], second["cluster"], first["firm_id"], second["firm_id"],
                                          int(first["k"].iloc[0]), int(second["k"].iloc[0]))
        self.write_csv(table.counts, "transition", "transition")

    def run(self) -> PipelineRun:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        with stage("ingest"):
            panel = self.ingest()
            windows = self.windows(panel)
        with stage("estimate"):
            result = self.estimate(panel)
            tfp = result.tfp_frame()
        for index, window in enumerate(windows):
            logger.info(f"Analysing window {window.name} (periods {window.periods})")
            self.analyse_window(panel, tfp, window, index)
        if len(windows) >= 2:
            with stage("transition"):
                self.transition(windows)
        with stage("lasso"):
            table = regress.lasso_table(self.lasso_results)
            self.write_csv(table, "lasso", "lasso_table")

        manifest = {
            "version": MANIFEST_VERSION,
            "seed": self.config.seed,
            "method": self.config.estimator.method,
            "methods": self.estimated_methods,
            "windows": [w.name for w in windows],
            "artifacts": self.artifacts,
        }
        manifest_path = self.out_dir / MANIFEST_NAME
        manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
        logger.info(f"Pipeline wrote {len(self.artifacts)} artifacts to {self.out_dir}")
        return PipelineRun(exit_status=0, manifest_path=str(manifest_path), manifest=manifest)


def run_pipeline(config: PipelineConfig) -> PipelineRun:
    """Run every stage; a failing stage raises StageFailure"""
    return PipelineRunner(config).run()


# Report

def _format_cell(value, decimals: int) -> str:
    if isinstance(value, str):
        return value
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return "-"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.{decimals}f}"


def markdown_table(frame: pd.DataFrame, decimals: int = 4, index: bool = True) -> str:
    """Pipe table with fixed decimals; missing values shown as '-'"""
    columns = ([frame.index.name or ""] if index else []) + [str(c) for c in frame.columns]
    lines = ["| " + " | ".join(columns) + " |", "|" + "|".join("---" for _ in columns) + "|"]
    for label, row in frame.iterrows():
        cells = ([str(label)] if index else []) + [_format_cell(v, decimals) for v in row.tolist()]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines)


class ManifestReader:
    """Locates artifacts listed in a manifest"""

    def __init__(self, manifest_path: Union[str, Path]):
        self.path = Path(manifest_path)
        self.manifest = json.loads(self.path.read_text(encoding="utf-8"))
        self.base = self.path.parent
        stages = {a["stage"] for a in self.manifest["artifacts"]}
        for name in REQUIRED_STAGES:
            if name not in stages:
                raise IncompleteManifest(name)

    def find(self, kind: str, window: Optional[str] = None) -> Optional[Path]:
        for artifact in self.manifest["artifacts"]:
            if artifact["kind"] == kind and artifact["window"] == window:
                return self.base / artifact["file"]
        return None

    def csv(self, kind: str, window: Optional[str] = None, index_col=0) -> pd.DataFrame:
        path = self.find(kind, window)
        if path is None:
            raise IncompleteManifest(f"{kind} ({window})" if window else kind)
        return pd.read_csv(path, index_col=index_col)

    def json(self, kind: str, window: Optional[str] = None):
        path = self.find(kind, window)
        if path is None:
            raise IncompleteManifest(f"{kind} ({window})" if window else kind)
        return json.loads(path.read_text(encoding="utf-8"))


def _coefficient_section(reader: ManifestReader) -> List[str]:
    method = reader.manifest["method"]
    payload = reader.json(f"coefficients_{method.lower()}")
    comparison = reader.csv("method_comparison")
    sizes = ", ".join(f"{m} n = {int(n)}" for m, n in comparison.loc["n"].dropna().items())
    return ["## Production function coefficients", "",
            f"TFP downstream from {payload['method']} (n = {payload['diagnostics']['sample_size']})", "",
            markdown_table(comparison.drop(index="n"), 4), "", f"Sample sizes: {sizes}", "",
            "### TFP residual correlation across methods", "",
            markdown_table(reader.csv("tfp_correlation"), 4), ""]


def _pca_section(reader: ManifestReader, window: str) -> List[str]:
    scree = reader.csv("scree", window, index_col=None).set_index("component")
    scree["fraction"] = scree["fraction"].map(impute_pca.format_percent)
    scree["cumulative"] = scree["cumulative"].map(impute_pca.format_percent)
    scree.index.name = "Component"
    correlations = reader.csv("correlations", window).fillna("")
    return [f"### Principal components ({window})", "", markdown_table(scree, 4), "",
            markdown_table(correlations, 4), ""]


def _pcr_lines(report: regress.RegressionReport, title: str) -> List[str]:
    if report.skipped:
        return [f"**{title}**: skipped ({report.skipped_reason}, n = {report.n})", ""]
    lines = [f"**{title}** (n = {report.n}, R² = {report.r_squared:.4f})", ""]
    if report.note:
        lines += [f"_{report.note}_", ""]
    return lines + [markdown_table(regress.regression_table(report), 4), ""]


def _pcr_section(reader: ManifestReader, window: str) -> List[str]:
    payload = reader.json("pcr", window)
    lines = [f"### PC regressions ({window})", ""]
    lines += _pcr_lines(regress.RegressionReport.model_validate(payload["full"]), "Full sample")
    if "controls" in payload:
        lines += _pcr_lines(regress.RegressionReport.model_validate(payload["controls"]), "Full sample with controls")
    for item in payload["by_cluster"]:
        report = regress.RegressionReport.model_validate(item)
        lines += _pcr_lines(report, f"Cluster G{report.subsample + 1}")
    return lines


def render_report(manifest_path: Union[str, Path], out_path: Optional[Union[str, Path]] = None) -> Path:
    """Write one Markdown file with every table family of a completed run"""
    reader = ManifestReader(manifest_path)
    windows = reader.manifest["windows"]
    lines = ["# Firm productivity report", "",
             f"Seed {reader.manifest['seed']}, windows: {', '.join(windows)}", "",
             "## Descriptive statistics", "", markdown_table(reader.csv("stats"), 4), ""]
    lines += _coefficient_section(reader)

    for window in windows:
        lines += [f"## Window {window}", ""]
        lines += _pca_section(reader, window)
        profiles = reader.csv("profiles", window)
        lines += [f"### Cluster profiles ({window})", "", markdown_table(profiles, 4), ""]
        lines += [f"### Welch test p-values ({window})", "", markdown_table(reader.csv("welch", window), 4), ""]
        lines += _pcr_section(reader, window)

    lines += ["## Cluster transitions", ""]
    if reader.find("transition") is not None:
        lines += [markdown_table(reader.csv("transition"), 0), ""]
    else:
        lines += ["Transition matrix requires two periods.", ""]

    lines += ["## Lasso coefficients", "", markdown_table(reader.csv("lasso_table").fillna("."), 4), ""]

    out_path = Path(out_path) if out_path else reader.base / REPORT_NAME
    out_path.write_text("\n".join(lines), encoding="utf-8")
    logger.info(f"Report written to {out_path}")
    return out_path
