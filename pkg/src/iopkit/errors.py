"""Exception types shared across the package.

The CLI maps these onto exit codes: usage/configuration problems exit
with 1, data errors with 2, numeric failures with 3.
"""


class DataError(Exception):
    """Input data is malformed or violates a documented contract."""


class ParseError(DataError):
    """A line of an edge-list file could not be parsed."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class EmptyGraphError(DataError):
    """Parsing produced a graph with no events."""


class InvalidCliqueError(DataError):
    """A node set handed in as a clique is not one."""


class InvalidSampleError(DataError):
    """A mined sample violates its invariants (e.g. isolated clique node)."""


class InvalidLabelError(DataError):
    """A permutation label has repeated, missing or unknown tokens."""


class SplitError(DataError):
    """Dataset cannot be split as requested."""


class TimeOrderError(DataError):
    """An event arrived earlier than a node's last recorded update."""


class MetricUndefinedError(DataError):
    """A metric is undefined for the given prediction (e.g. rank
    correlation for a non-permutation)."""


class ConfigError(Exception):
    """Invalid or infeasible configuration."""


class NumericError(Exception):
    """Non-finite values encountered in numeric computation."""
