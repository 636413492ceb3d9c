"""Exception taxonomy shared by all modules.

The CLI maps these onto exit codes: UsageError -> 1, DataError -> 2,
NumericalError -> 3.
"""


class HypalError(Exception):
    """Base class for all package errors."""


class UsageError(HypalError):
    """Bad arguments, unreadable paths, malformed configuration."""


class DataError(HypalError):
    """Input data violates the declared schema or an invariant."""


class UnitError(HypalError):
    """Unit algebra violation (summing unequal units, log of a dimensioned quantity, ...)."""


class DomainError(HypalError):
    """Expression evaluated outside an operator's numeric domain.

    Carries the path of the offending node, e.g. "mul.right.div".
    """

    def __init__(self, message: str, node_path: str = ""):
        super().__init__(f"{message} (at node {node_path or '<root>'})")
        self.node_path = node_path


class ExprSyntaxError(HypalError):
    """Expression text failed to parse; `position` is the 0-based offset."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class NumericalError(HypalError):
    """Numerical failure (Cholesky breakdown, all-divergent warmup, ...)."""
