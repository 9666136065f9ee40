"""
File contains the exception hierarchy shared by the backend modules.
"""


class AdmgError(Exception):
    """
    Base class for every error raised by the backend.
    """


class GraphError(AdmgError, ValueError):
    """
    Invalid graph structure or a graph outside the class an operation requires.
    """


class GraphSyntaxError(GraphError):
    """
    Malformed graph text. Carries the 1-based line number of the offending line.
    """

    def __init__(self, message: str, line_number: int) -> None:
        super().__init__(f"line {line_number}: {message}")
        self.line_number: int = line_number


class QueryError(AdmgError, ValueError):
    """
    Query sets that overlap, are empty where they must not be, or misuse fixed vertices.
    """


class NotFixableError(AdmgError):
    """
    Vertex or vertex set cannot be fixed in the given graph.
    """


class DistributionError(AdmgError, ValueError):
    """
    Malformed or inconsistent probability table.
    """


class StateSpaceTooLarge(DistributionError):
    """
    Product of cardinalities exceeds the configured cap.
    """


class PreconditionError(AdmgError):
    """
    Graph precondition of a causal verification does not hold.
    """


class SystemSpecError(AdmgError, ValueError):
    """
    Malformed equation system.
    """


class InputFileError(AdmgError):
    """
    File could not be read or decoded.
    """
