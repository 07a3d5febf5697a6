import numpy as np

from scipy import special
from scipy.linalg import lapack, solve_triangular

from .errors import NonFinite, RankDeficiency

# A pivot at or below RANK_TOL times the largest diagonal
# entry of the factored matrix is treated as rank deficiency.
RANK_TOL = 1e-12

def as_matrix(a, name="matrix"):
    """
    Convert a to a read-only two-dimensional float64 array. Raises a
    ValueError if a is empty or not two-dimensional, NonFinite if it
    has non-finite entries. All matrices passed between roblev modules
    go through this function once, after that they are never mutated.
    """
    m = np.array(a, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(F"{name} must be two-dimensional, got {m.ndim} dimensions")

    rows, cols = m.shape
    if rows < 1 or cols < 1:
        raise ValueError(F"{name} must have at least one row and column")
    if not np.all(np.isfinite(m)):
        raise NonFinite(F"{name} has non-finite entries")

    m.flags.writeable = False
    return m

class SymmetricPosDef(object):
    """
    A symmetric positive definite matrix together with its lower
    Cholesky factor. Instances are created by cholesky() and are
    never modified afterwards.

    The object exposes the following attributes:

    * entries: the symmetric matrix itself
    * chol: the lower triangular factor L with L @ L.T == entries
    """
    def __init__(self, entries, chol):
        self.entries = entries
        self.chol = chol

    @property
    def order(self):
        return self.chol.shape[0]

    def quad_form(self, v):
        """
        Compute v' A^-1 v as the squared norm of L^-1 v. If v is
        two-dimensional each row is treated as a separate vector
        and an array with one value per row is returned.
        """
        v = np.asarray(v, dtype=np.float64)
        if v.shape[-1] != self.order:
            raise ValueError(F"vector length {v.shape[-1]} does not match order {self.order}")

        if v.ndim == 1:
            z = solve_triangular(self.chol, v, lower=True)
            return float(np.dot(z, z))

        z = solve_triangular(self.chol, v.T, lower=True)
        return np.einsum("ij,ij->j", z, z)

    def log_det(self):
        return 2.0 * float(np.sum(np.log(np.diag(self.chol))))

def cholesky(a, tol=RANK_TOL):
    """
    Factor the symmetric matrix a. Only the lower triangle of a is
    read, the stored entries are mirrored from it. Raises
    RankDeficiency naming the first column whose pivot does not
    exceed tol times the largest diagonal entry.
    """
    if tol < 0:
        raise ValueError("rank tolerance must be non-negative")

    a = np.tril(as_matrix(a))
    if a.shape[0] != a.shape[1]:
        raise ValueError(F"cannot factor non-square {a.shape[0]}x{a.shape[1]} matrix")

    entries = a + np.tril(a, -1).T
    diag = np.diag(entries)
    scale = diag.max()
    if scale <= 0:
        raise RankDeficiency(int(np.argmax(diag <= 0)), float(scale))

    chol, info = lapack.dpotrf(entries, lower=1, clean=1)
    if info > 0:
        # leading minor of order info is not positive definite
        raise RankDeficiency(info - 1)
    elif info < 0:
        raise AssertionError(F"dpotrf rejected argument {-info}")

    pivots = np.diag(chol) ** 2
    bad = np.flatnonzero(pivots <= tol * scale)
    if len(bad) > 0:
        raise RankDeficiency(int(bad[0]), float(pivots[bad[0]]))

    entries.flags.writeable = False
    chol.flags.writeable = False
    return SymmetricPosDef(entries, chol)

def quad_form(spd, v):
    return spd.quad_form(v)

def log_det(spd):
    return spd.log_det()

def weighted_moments(x, w):
    """
    Weighted mean and covariance of the rows of x for binary weights
    w. The covariance divides by sum(w) - 1, so all-one weights give
    the ordinary sample mean and sample covariance.
    """
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if x.ndim != 2 or w.shape != (x.shape[0],):
        raise ValueError("weights must match the number of rows")
    if not np.all((w == 0) | (w == 1)):
        raise ValueError("weights must be binary")

    total = w.sum()
    if total < 2:
        raise ValueError(F"need at least two active weights, got {int(total)}")

    mean = (x.T @ w) / total
    dev = x - mean
    cov = (dev * w[:, None]).T @ dev / (total - 1)

    # the product above is only symmetric up to rounding
    cov = (cov + cov.T) / 2
    return mean, cov

def chi2_cdf(q, df):
    "P(X <= q) for X chi-square distributed with df degrees of freedom."
    if q <= 0:
        return 0.0
    return float(special.gammainc(df / 2.0, q / 2.0))

def chi2_quantile(prob, df):
    """
    Quantile of the chi-square distribution with df degrees of
    freedom, obtained by inverting the regularized lower incomplete
    gamma function P(df/2, q/2).
    """
    if not 0 < prob < 1:
        raise ValueError(F"probability must be in (0, 1), got {prob}")
    if df <= 0:
        raise ValueError(F"degrees of freedom must be positive, got {df}")

    return 2.0 * float(special.gammaincinv(df / 2.0, prob))
