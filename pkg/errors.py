#!/usr/bin/env python3
"""
Errors - exception hierarchy for the firm productivity toolkit
"""

from typing import Any, Optional


class ProductivityError(Exception):
    """Base class for every error raised by the toolkit"""


# Panel ingestion and transforms

class PanelError(ProductivityError):
    """Problem with panel data"""


class MissingColumn(PanelError):
    """A required column is absent from the input"""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"Missing required column: {name}")


class DuplicateKey(PanelError):
    """The same (firm, period) pair appears twice"""

    def __init__(self, firm: str, period: int):
        self.firm = firm
        self.period = period
        super().__init__(f"Duplicate observation for firm {firm} in period {period}")


class EmptyPanel(PanelError):
    """The input holds no observations"""

    def __init__(self, source: Any = None):
        self.source = source
        super().__init__(f"Panel has no observations{f' ({source})' if source else ''}")


class InvalidPeriod(PanelError):
    """A period cell cannot be read as an integer"""

    def __init__(self, firm: str, raw: Any):
        self.firm = firm
        self.raw = raw
        super().__init__(f"Unparseable period {raw!r} for firm {firm}")


class ZeroLabor(PanelError):
    """Per-worker transform requested where labor is not positive"""

    def __init__(self, firm: str, period: int):
        self.firm = firm
        self.period = period
        super().__init__(f"Labor must be positive for per-worker transform (firm {firm}, period {period})")


class ConstantColumn(PanelError):
    """A column cannot be standardized"""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"Column {name} is constant or has fewer than 2 observed values")


class UnknownVariable(PanelError):
    """A requested variable is not in the panel"""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"Unknown variable: {name}")


class InvalidConfig(ProductivityError):
    """A configuration field holds an unusable value"""

    def __init__(self, field: str, reason: str):
        self.field = field
        self.reason = reason
        super().__init__(f"Invalid config field '{field}': {reason}")


# Estimation

class EstimationError(ProductivityError):
    """Problem during production-function estimation"""


class NonPositiveValue(EstimationError):
    """A value that must be logged is zero or negative"""

    def __init__(self, field: str, firm: str, period: int):
        self.field = field
        self.firm = firm
        self.period = period
        super().__init__(f"Non-positive {field} for firm {firm}, period {period}")


class TooFewRows(EstimationError):
    """Not enough rows for the number of regressors"""

    def __init__(self, rows: int, cols: int):
        self.rows = rows
        self.cols = cols
        super().__init__(f"Need more rows than columns, got {rows} rows for {cols} columns")


class RankDeficient(EstimationError):
    """The design matrix does not have full column rank"""

    def __init__(self, column: int, name: Optional[str] = None):
        self.column = column
        self.name = name
        label = f"{column} ({name})" if name else str(column)
        super().__init__(f"Design matrix is rank deficient at column {label}")


class DegreeTooHigh(EstimationError):
    """Polynomial degree outside the supported range"""

    def __init__(self, degree: int, limit: int):
        self.degree = degree
        self.limit = limit
        super().__init__(f"Polynomial degree {degree} outside 1..{limit}")


class OptimizerDidNotConverge(EstimationError):
    """No optimizer start met the tolerance"""

    def __init__(self, message: str = "No start converged"):
        super().__init__(message)


class NoConsecutivePeriods(EstimationError):
    """No firm has two consecutive periods for lagged moments"""

    def __init__(self):
        super().__init__("No firm has two consecutive periods; second stage needs lags")


# Imputation, PCA and regression

class TooManyComponents(ProductivityError):
    """Requested more components than the data supports"""

    def __init__(self, requested: int, limit: int):
        self.requested = requested
        self.limit = limit
        super().__init__(f"Requested {requested} components, at most {limit} allowed")


class SchemaMismatch(ProductivityError):
    """Matrix columns do not match the fitted model"""

    def __init__(self, expected: Any, got: Any):
        self.expected = expected
        self.got = got
        super().__init__(f"Columns do not match model: expected {expected}, got {got}")


class AllMissingRow(ProductivityError):
    """A row has no observed value"""

    def __init__(self, row: Any):
        self.row = row
        super().__init__(f"Row {row} has no observed values")


class MissingEntries(ProductivityError):
    """Input that must be complete contains missing values"""

    def __init__(self, where: str):
        super().__init__(f"Missing values are not allowed in {where}")


class DidNotConverge(ProductivityError):
    """Iterative solver hit its iteration cap"""

    def __init__(self, iterations: int, final_change: float):
        self.iterations = iterations
        self.final_change = final_change
        super().__init__(f"Did not converge after {iterations} iterations (last change {final_change:.3g})")


# SOM and clustering

class ClusteringError(ProductivityError):
    """Problem in SOM training or clustering"""


class EmptyInput(ClusteringError):
    """No observations to work with"""

    def __init__(self):
        super().__init__("Input matrix has no rows or columns")


class DimensionMismatch(ClusteringError):
    """Vector length differs from the model dimension"""

    def __init__(self, expected: int, got: int):
        self.expected = expected
        self.got = got
        super().__init__(f"Expected vector of length {expected}, got {got}")


class KTooLarge(ClusteringError):
    """More clusters requested than rows available"""

    def __init__(self, k: int, n: int):
        self.k = k
        self.n = n
        super().__init__(f"k={k} must lie in 1..{n}")


class CurveTooShort(ClusteringError):
    """Elbow rule needs at least three points"""

    def __init__(self, length: int):
        self.length = length
        super().__init__(f"WSS curve has {length} points, need at least 3")


class LengthMismatch(ProductivityError):
    """Row-aligned inputs have different lengths"""

    def __init__(self, *lengths: int):
        self.lengths = lengths
        super().__init__(f"Inputs are not row-aligned: lengths {lengths}")


# Pipeline

class PipelineError(ProductivityError):
    """Problem running the pipeline"""


class ConfigError(PipelineError):
    """Pipeline configuration could not be validated"""


class StageFailure(PipelineError):
    """A pipeline stage failed"""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"Stage '{stage}' failed: {cause}")


class IncompleteManifest(PipelineError):
    """A report needs a stage the manifest does not list"""

    def __init__(self, stage: str):
        self.stage = stage
        super().__init__(f"Manifest has no artifacts for stage '{stage}'")
