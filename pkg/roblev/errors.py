class LeverageError(Exception):
    """Base class for every error roblev reports to its users.
       Each subclass carries the exit code the CLI terminates with."""

    exit_code = 1

class ConfigError(LeverageError):
    exit_code = 2

class DataError(LeverageError):
    exit_code = 3

class FormulaError(LeverageError):
    """Syntax or binding error in a model formula. If the error can be
       attributed to a location in the formula text, pos holds the
       0-based character offset."""

    exit_code = 4

    def __init__(self, msg, pos=None):
        if pos is not None:
            msg = F"{msg} (at character {pos + 1})"
        LeverageError.__init__(self, msg)
        self.pos = pos

class DesignError(LeverageError):
    exit_code = 5

class ExactFitError(LeverageError):
    """The observations in subset lie on a lower-dimensional affine
       subspace, no covariance estimate based on them is invertible."""

    exit_code = 6

    def __init__(self, msg, subset=()):
        LeverageError.__init__(self, msg)
        self.subset = tuple(int(i) for i in subset)

class ModifiedDesignError(LeverageError):
    exit_code = 7

class RankDeficiency(Exception):
    """Raised by linalg.cholesky if a pivot drops below the rank
       tolerance. index is the 0-based column of the first such pivot.
       Callers translate this into one of the errors above."""

    def __init__(self, index, pivot=None):
        msg = F"rank deficient at column {index + 1}"
        if pivot is not None:
            msg += F" (pivot {pivot:.3g})"

        Exception.__init__(self, msg)
        self.index = index
        self.pivot = pivot

class NonFinite(ValueError):
    """Raised by linalg.as_matrix for infinite or NaN entries. Inside
       roblev this means a product of finite input overflowed, callers
       translate it like RankDeficiency."""
