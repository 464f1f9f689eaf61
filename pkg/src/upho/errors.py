"""Exception hierarchy shared by all modules.

Every error raised by the engine derives from UphoError so the gateway can
tag failures with the pipeline stage that produced them.
"""

from __future__ import annotations


class UphoError(Exception):
    """Base class for all engine errors."""


class StageError(UphoError):
    """Wraps a module error with the name of the pipeline stage it hit."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


# --- tabledata ---------------------------------------------------------

class TableError(UphoError):
    pass


class MalformedRow(TableError):
    pass


class BadGeoCode(TableError):
    pass


class NonNumericCell(TableError):
    pass


class DuplicateGeoCode(TableError):
    pass


class LevelMismatch(TableError):
    pass


class ColumnNameCollision(TableError):
    pass


class EmptyJoin(TableError):
    pass


class UnknownZip(TableError):
    pass


class BadManifest(TableError):
    pass


# --- stats -------------------------------------------------------------

class StatsError(UphoError):
    pass


class LengthMismatch(StatsError):
    pass


class ConstantInput(StatsError):
    pass


class SingularDesign(StatsError):
    pass


class InsufficientRows(StatsError):
    pass


class ConstantColumn(StatsError):
    pass


class TooFewRows(StatsError):
    pass


class KTooLarge(StatsError):
    pass


# --- regression / attribution -----------------------------------------

class RegressionError(UphoError):
    pass


class DimensionMismatch(RegressionError):
    pass


class ZeroVariance(RegressionError):
    pass


class UntrainedModel(RegressionError):
    pass


class FeatureMismatch(RegressionError):
    pass


class EmptyBackground(RegressionError):
    pass


# --- ontology ----------------------------------------------------------

class OntologyError(UphoError):
    pass


class DslSyntaxError(OntologyError):
    """Parse failure with position and the tokens that would have been legal."""

    def __init__(self, line: int, column: int, expected: str, found: str = ""):
        msg = f"line {line}, column {column}: expected {expected}"
        if found:
            msg += f", found {found!r}"
        super().__init__(msg)
        self.line = line
        self.column = column
        self.expected = expected
        self.found = found


class UndeclaredPrefix(OntologyError):
    pass


class UnboundHeadVariable(OntologyError):
    pass


class CyclicIsA(OntologyError):
    pass


class UnknownTerm(OntologyError):
    pass


# --- graphstore --------------------------------------------------------

class GraphError(UphoError):
    pass


class UnknownTract(GraphError):
    pass


class TractNotInTable(GraphError):
    pass


class UnmappedFeature(GraphError):
    pass


class InferenceOverflow(GraphError):
    pass


class UnknownFact(GraphError):
    pass


class UnknownNode(GraphError):
    pass


class UnknownEdge(GraphError):
    pass


# --- gateway -----------------------------------------------------------

class GatewayError(UphoError):
    pass


class BadRequest(GatewayError):
    pass


class WorkspaceError(GatewayError):
    pass
