"""Exception types shared across the package."""

from __future__ import annotations


class CausalCorruptError(Exception):
    """Base class for all domain errors raised by this package."""


class InvalidDistributionError(CausalCorruptError):
    """A distribution was constructed with out-of-domain parameters."""


class UnknownNodeError(CausalCorruptError):
    """A node name was referenced that does not exist in the graph."""


class UnknownParamError(CausalCorruptError):
    """A parameter name was referenced that the target node does not define."""


class UnknownOperatorError(CausalCorruptError):
    """An operator identifier is not in the operator registry."""


class ArityError(CausalCorruptError):
    """A node's declared parameters do not match its operator's signature."""


class CyclicGraphError(CausalCorruptError):
    """The directed graph contains a cycle.

    The offending cycle is stored as a list of node names.
    """

    def __init__(self, cycle: list[str]):
        self.cycle = list(cycle)
        super().__init__("cycle detected: " + " -> ".join(self.cycle + self.cycle[:1]))


class GraphStructureError(CausalCorruptError):
    """The graph violates a structural constraint other than acyclicity."""


class MechanismDomainError(CausalCorruptError):
    """A mechanism expression was evaluated outside its defined domain."""


class SpecSyntaxError(CausalCorruptError):
    """A spec file failed to parse.

    Carries the 1-based line and column of the offending token.
    """

    def __init__(self, message: str, line: int, column: int):
        self.line = line
        self.column = column
        super().__init__(f"{line}:{column}: {message}")


class SpecValidationError(CausalCorruptError):
    """A parsed spec violates a semantic rule (bad reference, arity, cycle)."""


class OperatorDomainError(CausalCorruptError):
    """An operator received a parameter outside its declared domain."""


class ShapeMismatchError(CausalCorruptError):
    """Two rasters that must share a shape do not."""


class ConfigError(CausalCorruptError):
    """A scene or dataset configuration is impossible to satisfy."""


class SceneSourceError(CausalCorruptError):
    """A scene directory does not follow the expected ingestion layout."""


class DatasetLayoutError(CausalCorruptError):
    """A dataset directory is missing files or fails hash verification."""


class PredictionLayoutError(CausalCorruptError):
    """A prediction directory does not mirror the dataset layout."""


class EmptySampleError(CausalCorruptError):
    """A statistic was requested over an empty sample."""


class ProbabilityError(CausalCorruptError):
    """Probabilities are negative or sum beyond one."""
