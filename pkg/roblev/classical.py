import numpy as np

from dataclasses import dataclass

from . import linalg
from .errors import DesignError, ExactFitError, NonFinite, RankDeficiency

@dataclass(frozen=True)
class ClassicalDiagnostics:
    hat: np.ndarray
    md: np.ndarray
    has_intercept: bool

def constant_columns(x):
    """
    Boolean mask of the columns of x which are constant across
    rows, up to floating point noise relative to their magnitude.
    """
    hi, lo = x.max(axis=0), x.min(axis=0)
    return (hi - lo) <= 1e-12 * (1 + np.abs(hi))

def hat_values(x):
    """
    Diagonal of the hat matrix X (X'X)^-1 X', evaluated row by
    row as quadratic forms in the Cholesky factor of X'X.
    """
    x = linalg.as_matrix(x, "design matrix")
    n, p = x.shape
    if n <= p:
        raise DesignError(F"need more observations than columns, have n = {n} and p = {p}")

    try:
        gram = linalg.cholesky(x.T @ x)
    except NonFinite:
        raise DesignError("design values are too large, the cross products "
                          "of its columns overflow")
    except RankDeficiency as e:
        raise DesignError(F"design is rank deficient at column {e.index + 1}")

    return gram.quad_form(x)

def strip_constant(x):
    """
    Remove the constant columns of x, returning the reduced matrix
    and the mask of removed columns. Raises DesignError if nothing
    would remain.
    """
    x = linalg.as_matrix(x, "design matrix")
    removed = constant_columns(x)
    if removed.all():
        raise DesignError("no columns remain for the Mahalanobis distance "
                          "once constant columns are removed")

    return x[:, ~removed], removed

def mahalanobis_from(rows, ref):
    """
    Distances of rows from the mean of ref in the metric of the
    sample covariance of ref.
    """
    mean, cov = linalg.weighted_moments(ref, np.ones(ref.shape[0]))
    try:
        spd = linalg.cholesky(cov)
    except NonFinite:
        raise DesignError("design values are too large, their covariance overflows")
    except RankDeficiency as e:
        raise ExactFitError(F"sample covariance is singular at column {e.index + 1}")

    return np.sqrt(spd.quad_form(rows - mean))

def mahalanobis(xstar):
    """
    Mahalanobis distance of every row of xstar from the arithmetic
    mean, using the sample covariance. The squared distances sum to
    (n - 1) times the number of columns.
    """
    xstar = linalg.as_matrix(xstar, "reduced design matrix")
    n, p = xstar.shape
    if n < p + 1:
        raise ExactFitError(F"need at least {p + 1} rows for {p} columns, have {n}")

    return mahalanobis_from(xstar, xstar)

def hat_md_relation_check(hat, md, n, has_intercept):
    """
    Largest deviation from h_i = MD_i^2 / (n - 1) + 1/n, which
    holds whenever the design contains a constant column.
    """
    if not has_intercept:
        raise ValueError("hat values and distances are only related "
                         "for designs with a constant column")

    hat, md = np.asarray(hat), np.asarray(md)
    return float(np.max(np.abs(hat - (md ** 2 / (n - 1) + 1.0 / n))))

def classical_diagnostics(x):
    """
    Hat values and Mahalanobis distances of a design. If no column
    is left once constant columns are dropped every distance is
    zero, the hat values are then 1/n for a constant column.
    """
    x = linalg.as_matrix(x, "design matrix")
    hat = hat_values(x)

    removed = constant_columns(x)
    if removed.all():
        md = np.zeros(x.shape[0])
    else:
        md = mahalanobis(x[:, ~removed])

    return ClassicalDiagnostics(hat, md, bool(removed.any()))
