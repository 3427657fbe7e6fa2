"""Exception types shared across the package."""


class CondlabError(Exception):
    """Base class for all errors raised by this package."""


class DegreeMismatchError(CondlabError):
    """Operands belong to binary fields of different degrees."""


class UnsupportedDegreeError(CondlabError):
    """Field degree outside the supported range 1..64."""


class ShapeError(CondlabError):
    """A word vector or box does not match the expected (n, w) shape."""


class BudgetError(CondlabError):
    """A search or enumeration was refused because it exceeds its budget.

    ``refused`` carries the exact count that was refused, when known.
    """

    def __init__(self, message: str, refused: int | None = None):
        super().__init__(message)
        self.refused = refused


class NotAPermutationError(CondlabError):
    """A mapping required to be bijective is not; ``witness`` holds a
    colliding input pair when one is known."""

    def __init__(self, message: str, witness: tuple[int, int] | None = None):
        super().__init__(message)
        self.witness = witness


class RangeError(CondlabError):
    """A numeric argument lies outside its documented range."""


class UndefinedEntropyError(CondlabError):
    """Min-entropy of an empty distribution was requested."""


class TableFormatError(CondlabError):
    """A table or box file failed to parse; ``line`` is 1-based."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
