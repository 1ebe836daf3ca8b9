#!/usr/bin/env python3
"""
Panel IO - firm panel ingestion, per-worker transforms, missing-data screen and descriptive stats
"""

import json
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from errors import (ConstantColumn, DuplicateKey, EmptyPanel, InvalidConfig, InvalidPeriod,
                    MissingColumn, UnknownVariable, ZeroLabor)

logger = logging.getLogger(__name__)

KEY_COLUMNS = ("firm_id", "period")
CORE_FIELDS = ("output", "labor", "capital", "intermediates", "investment", "age")
REQUIRED_FIELDS = ("firm", "period", "output", "labor", "capital")
STATS_COLUMNS = ["N", "Mean", "Pctl.85", "Max", "Std.Dev"]

Matrix = Union[pd.DataFrame, np.ndarray]


class VariableSpec(BaseModel):
    """Accounting variable with its sign convention"""
    name: str
    sign: Literal["revenue", "expense"] = "revenue"


class FirmObservation(BaseModel):
    """One firm in one period"""
    firm_id: str
    period: int
    output: Optional[float] = None
    labor: Optional[float] = None
    capital: Optional[float] = None
    intermediates: Optional[float] = None
    investment: Optional[float] = None
    age: Optional[float] = None
    accounting: Dict[str, Optional[float]] = Field(default_factory=dict)
    categories: Dict[str, str] = Field(default_factory=dict)


class PanelSchema(BaseModel):
    """Mapping from canonical panel fields to CSV header names"""
    firm: str = "firm_id"
    period: str = "period"
    output: str = "output"
    labor: str = "labor"
    capital: str = "capital"
    intermediates: Optional[str] = "intermediates"
    investment: Optional[str] = "investment"
    age: Optional[str] = "age"
    accounting: Optional[List[str]] = None
    categories: List[str] = Field(default_factory=list)
    expense_like: List[str] = Field(default_factory=list)


class ScreeningReport(BaseModel):
    """Outcome of the observed-fraction screen"""
    kept: List[str]
    dropped: Dict[str, float]
    threshold: float
    observed_fraction: Dict[str, float] = Field(default_factory=dict)


class StandardizationParams(BaseModel):
    """Column means and sample standard deviations used to z-score a matrix"""
    columns: List[str]
    means: List[float]
    sds: List[float]

    def apply(self, matrix: Matrix) -> Matrix:
        """Standardize a matrix with these parameters"""
        values = _as_2d(matrix)
        out = (values - np.asarray(self.means)) / np.asarray(self.sds)
        return _like(matrix, out)

    def invert(self, matrix: Matrix) -> Matrix:
        """Map standardized values back to the original scale"""
        values = _as_2d(matrix)
        out = values * np.asarray(self.sds) + np.asarray(self.means)
        return _like(matrix, out)


class FirmPanel:
    """Long-format firm x period panel backed by a pandas DataFrame"""

    def __init__(self, frame: pd.DataFrame, variable_catalog: Sequence[VariableSpec] = (),
                 categories: Sequence[str] = (), per_worker: Iterable[str] = ()):
        frame = frame.copy()
        for column in KEY_COLUMNS:
            if column not in frame.columns:
                raise MissingColumn(column)
        self.variable_catalog: List[VariableSpec] = list(variable_catalog)
        self.categories: List[str] = list(categories)
        self.per_worker: Tuple[str, ...] = tuple(per_worker)

        names = self.catalog_names
        for field in CORE_FIELDS:
            if field not in frame.columns:
                frame[field] = np.nan
        for name in names + self.categories:
            if name not in frame.columns:
                raise UnknownVariable(name)

        frame["firm_id"] = frame["firm_id"].astype(str)
        frame["period"] = frame["period"].astype("int64")
        for column in (*CORE_FIELDS, *names):
            frame[column] = frame[column].astype(float)

        duplicated = frame.duplicated(list(KEY_COLUMNS), keep="first")
        if duplicated.any():
            row = frame.loc[duplicated].iloc[0]
            raise DuplicateKey(row["firm_id"], int(row["period"]))

        known = [*KEY_COLUMNS, *CORE_FIELDS, *names, *self.categories]
        extra = [c for c in frame.columns if c not in known]
        frame = frame[known + extra].sort_values(list(KEY_COLUMNS), kind="mergesort")
        self._frame = frame.reset_index(drop=True)

    @classmethod
    def from_observations(cls, observations: Sequence[FirmObservation],
                          variable_catalog: Optional[Sequence[VariableSpec]] = None) -> "FirmPanel":
        """Build a panel from observation records"""
        records, accounting_names, category_names = [], [], []
        for obs in observations:
            row = obs.model_dump(exclude={"accounting", "categories"})
            for name, value in obs.accounting.items():
                row[name] = np.nan if value is None else value
                if name not in accounting_names:
                    accounting_names.append(name)
            for name, value in obs.categories.items():
                row[name] = value
                if name not in category_names:
                    category_names.append(name)
            records.append(row)
        frame = pd.DataFrame.from_records(records, columns=[*KEY_COLUMNS, *CORE_FIELDS, *accounting_names, *category_names])
        for column in (*CORE_FIELDS, *accounting_names):
            frame[column] = pd.to_numeric(frame[column], errors="coerce")
        catalog = list(variable_catalog) if variable_catalog is not None else [VariableSpec(name=n) for n in accounting_names]
        return cls(frame, catalog, category_names)

    @property
    def frame(self) -> pd.DataFrame:
        """Copy of the underlying table"""
        return self._frame.copy()

    @property
    def catalog_names(self) -> List[str]:
        return [spec.name for spec in self.variable_catalog]

    @property
    def columns(self) -> List[str]:
        return list(self._frame.columns)

    def __len__(self) -> int:
        return len(self._frame)

    def firms(self) -> List[str]:
        return list(self._frame["firm_id"].unique())

    def periods(self) -> List[int]:
        return sorted(int(p) for p in self._frame["period"].unique())

    def column(self, name: str) -> pd.Series:
        if name not in self._frame.columns:
            raise UnknownVariable(name)
        return self._frame[name].copy()

    def matrix(self, names: Sequence[str]) -> pd.DataFrame:
        """Selected numeric columns indexed by (firm_id, period)"""
        for name in names:
            if name not in self._frame.columns:
                raise UnknownVariable(name)
        return self._frame.set_index(list(KEY_COLUMNS))[list(names)].astype(float)

    def with_columns(self, **columns) -> "FirmPanel":
        """New panel with row-aligned columns added or replaced"""
        frame = self._frame.copy()
        for name, values in columns.items():
            frame[name] = np.asarray(values)
        return FirmPanel(frame, self.variable_catalog, self.categories, self.per_worker)

    def restrict(self, periods: Iterable[int]) -> "FirmPanel":
        """New panel holding only the given periods"""
        wanted = set(int(p) for p in periods)
        frame = self._frame[self._frame["period"].isin(wanted)]
        if frame.empty:
            raise EmptyPanel(f"periods {sorted(wanted)}")
        return FirmPanel(frame, self.variable_catalog, self.categories, self.per_worker)

    def observations(self) -> List[FirmObservation]:
        """Rows as FirmObservation records"""
        out = []
        names = self.catalog_names
        for row in self._frame.to_dict("records"):
            core = {f: _optional(row[f]) for f in CORE_FIELDS}
            out.append(FirmObservation(
                firm_id=row["firm_id"],
                period=int(row["period"]),
                accounting={n: _optional(row[n]) for n in names},
                categories={c: str(row[c]) for c in self.categories if isinstance(row[c], str)},
                **core,
            ))
        return out


def _optional(value) -> Optional[float]:
    return None if value is None or (isinstance(value, float) and np.isnan(value)) else float(value)


def _as_2d(matrix: Matrix) -> np.ndarray:
    values = np.asarray(matrix, dtype=float)
    return values.reshape(-1, 1) if values.ndim == 1 else values


def _like(template: Matrix, values: np.ndarray) -> Matrix:
    if isinstance(template, pd.DataFrame):
        return pd.DataFrame(values, index=template.index, columns=template.columns)
    return values


def _to_numeric(series: pd.Series) -> pd.Series:
    values = pd.to_numeric(series.astype(str).str.strip(), errors="coerce").astype(float)
    return values.where(np.isfinite(values))


def load_schema(path: Union[str, Path]) -> PanelSchema:
    """Read a column mapping from JSON"""
    return PanelSchema.model_validate_json(Path(path).read_text(encoding="utf-8"))


def load_panel(path: Union[str, Path], schema: Optional[PanelSchema] = None) -> FirmPanel:
    """Read a long-format panel CSV; blank or unparseable numeric cells become missing"""
    schema = schema or PanelSchema()
    path = Path(path)
    raw = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    header = list(raw.columns)

    for field in REQUIRED_FIELDS:
        if getattr(schema, field) not in header:
            raise MissingColumn(getattr(schema, field))
    for name in schema.categories:
        if name not in header:
            raise MissingColumn(name)
    if raw.empty:
        raise EmptyPanel(path)

    mapped = {getattr(schema, f) for f in ("firm", "period", *CORE_FIELDS) if getattr(schema, f)}
    if schema.accounting is None:
        accounting = [c for c in header if c not in mapped and c not in schema.categories]
    else:
        accounting = list(schema.accounting)
        for name in accounting:
            if name not in header:
                raise MissingColumn(name)
    clashes = [n for n in accounting if n in (*KEY_COLUMNS, *CORE_FIELDS)]
    if clashes:
        raise InvalidConfig("accounting", f"column names clash with canonical fields: {clashes}")

    frame = pd.DataFrame({"firm_id": raw[schema.firm].astype(str).str.strip()})
    periods = _to_numeric(raw[schema.period])
    bad = periods.isna() | (periods != np.floor(periods))
    if bad.any():
        first = bad.idxmax()
        raise InvalidPeriod(frame.loc[first, "firm_id"], raw.loc[first, schema.period])
    frame["period"] = periods.astype("int64")

    for field in CORE_FIELDS:
        column = getattr(schema, field)
        if column and column in header:
            frame[field] = _to_numeric(raw[column])
        else:
            frame[field] = np.nan
    for name in accounting:
        frame[name] = _to_numeric(raw[name])
    for name in schema.categories:
        frame[name] = raw[name].astype(str).str.strip().replace("", np.nan)

    catalog = [VariableSpec(name=n, sign="expense" if n in schema.expense_like else "revenue") for n in accounting]
    panel = FirmPanel(frame, catalog, schema.categories)
    _warn_sign_violations(panel)
    logger.info(f"Loaded {len(panel)} observations for {len(panel.firms())} firms from {path}")
    return panel


def _warn_sign_violations(panel: FirmPanel) -> None:
    frame = panel._frame
    for spec in panel.variable_catalog:
        values = frame[spec.name]
        wrong = (values > 0) if spec.sign == "expense" else (values < 0)
        if wrong.any():
            logger.warning(f"{spec.name}: {int(wrong.sum())} values break the {spec.sign} sign convention")


def write_panel(panel: FirmPanel, path: Union[str, Path]) -> Path:
    """Write the panel as CSV with canonical column names"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    panel.frame.to_csv(path, index=False)
    return path


def per_worker_transform(panel: FirmPanel, variables: Sequence[str]) -> FirmPanel:
    """Divide each listed variable by labor"""
    frame = panel.frame
    for name in variables:
        if name not in frame.columns or name in (*KEY_COLUMNS, "labor", *panel.categories):
            raise UnknownVariable(name)
    labor = frame["labor"]
    bad = ~(labor > 0)
    if bad.any():
        row = frame.loc[bad].iloc[0]
        raise ZeroLabor(row["firm_id"], int(row["period"]))
    for name in variables:
        frame[name] = frame[name] / labor
    return FirmPanel(frame, panel.variable_catalog, panel.categories, (*panel.per_worker, *variables))


def screen_missing(panel: FirmPanel, threshold: float,
                   variables: Optional[Sequence[str]] = None) -> ScreeningReport:
    """Keep variables whose observed fraction reaches the threshold"""
    if not 0 < threshold <= 1:
        raise InvalidConfig("threshold", f"must lie in (0, 1], got {threshold}")
    names = list(variables) if variables is not None else panel.catalog_names
    frame = panel._frame
    rows = len(frame)
    kept, dropped, fractions = [], {}, {}
    for name in names:
        if name not in frame.columns:
            raise UnknownVariable(name)
        fraction = float(frame[name].notna().sum()) / rows if rows else 0.0
        fractions[name] = fraction
        if fraction >= threshold:
            kept.append(name)
        else:
            dropped[name] = fraction
    if dropped:
        logger.info(f"Screen at {threshold:.2f} dropped {len(dropped)} of {len(names)} variables")
    return ScreeningReport(kept=kept, dropped=dropped, threshold=threshold, observed_fraction=fractions)


def standardize(matrix: Matrix) -> Tuple[Matrix, StandardizationParams]:
    """Z-score every column over its non-missing entries"""
    values = _as_2d(matrix)
    names = [str(c) for c in matrix.columns] if isinstance(matrix, pd.DataFrame) else [str(j) for j in range(values.shape[1])]
    means, sds = [], []
    for j, name in enumerate(names):
        observed = values[:, j][~np.isnan(values[:, j])]
        if observed.size < 2:
            raise ConstantColumn(name)
        mean = float(observed.mean())
        sd = float(observed.std(ddof=1))
        if not np.isfinite(sd) or sd <= 1e-12 * max(1.0, abs(mean)):
            raise ConstantColumn(name)
        means.append(mean)
        sds.append(sd)
    params = StandardizationParams(columns=names, means=means, sds=sds)
    return params.apply(matrix), params


def descriptive_stats(panel: FirmPanel, variables: Sequence[str]) -> pd.DataFrame:
    """N, mean, 85th percentile (linear interpolation), max and sample sd per variable"""
    rows = {}
    for name in variables:
        if name not in panel._frame.columns or name in KEY_COLUMNS or name in panel.categories:
            raise UnknownVariable(name)
        values = panel._frame[name].dropna()
        n = len(values)
        rows[name] = [
            n,
            float(values.mean()) if n else np.nan,
            float(values.quantile(0.85, interpolation="linear")) if n else np.nan,
            float(values.max()) if n else np.nan,
            float(values.std(ddof=1)) if n > 1 else np.nan,
        ]
    table = pd.DataFrame.from_dict(rows, orient="index", columns=STATS_COLUMNS)
    table["N"] = table["N"].astype(int)
    table.index.name = "Variable"
    return table


def table_records(table: pd.DataFrame) -> List[dict]:
    """DataFrame rows as JSON-safe dicts (missing → null)"""
    records = []
    for index, row in table.iterrows():
        record = {table.index.name or "index": index if not isinstance(index, np.generic) else index.item()}
        for column, value in row.items():
            if isinstance(value, (float, np.floating)):
                record[str(column)] = None if np.isnan(value) else float(value)
            elif isinstance(value, np.integer):
                record[str(column)] = int(value)
            else:
                record[str(column)] = value
        records.append(record)
    return records


def write_stats(table: pd.DataFrame, csv_path: Union[str, Path], json_path: Optional[Union[str, Path]] = None) -> List[Path]:
    """Emit a stats table as CSV and optionally JSON"""
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(csv_path)
    written = [csv_path]
    if json_path is not None:
        json_path = Path(json_path)
        json_path.write_text(json.dumps(table_records(table), indent=2, sort_keys=True), encoding="utf-8")
        written.append(json_path)
    return written


def cross_section(panel: FirmPanel, periods: Optional[Iterable[int]] = None,
                  per_worker_vars: Sequence[str] = (), per_worker_first: bool = False) -> FirmPanel:
    """Average a window of periods into one row per firm

    By default raw values are averaged first and then divided by average labor;
    ``per_worker_first`` divides period by period before averaging.
    """
    source = panel.restrict(periods) if periods is not None else panel
    if per_worker_first and per_worker_vars:
        source = per_worker_transform(source, per_worker_vars)
    frame = source._frame
    numeric = [c for c in frame.columns if c not in (*KEY_COLUMNS, *panel.categories)]
    grouped = frame.groupby("firm_id", sort=True)
    averaged = grouped[numeric].mean()
    averaged["period"] = grouped["period"].max()
    for name in panel.categories:
        averaged[name] = grouped[name].last()

    if per_worker_vars and not per_worker_first:
        labor = averaged["labor"]
        bad = ~(labor > 0)
        if bad.any():
            firm = bad.idxmax()
            raise ZeroLabor(firm, int(averaged.loc[firm, "period"]))
        for name in per_worker_vars:
            averaged[name] = averaged[name] / labor

    averaged = averaged.reset_index()
    logger.info(f"Cross-section over periods {source.periods()}: {len(averaged)} firms")
    return FirmPanel(averaged, panel.variable_catalog, panel.categories, (*panel.per_worker, *per_worker_vars))
