import logging

import numpy as np

from dataclasses import dataclass
from typing import Optional

from . import linalg
from .classical import constant_columns
from .design import PartitionedDesign
from .errors import ModifiedDesignError, NonFinite, RankDeficiency
from .formula import Kind
from .mcd import McdFit

logger = logging.getLogger(__name__)

REMEDY = "lower --reweight-prob or use an --alpha closer to 1"
OVERFLOW = "the modified design overflows, use a smaller --c-override"

@dataclass(frozen=True)
class ModifiedDesign:
    """
    The modified design [X1 X2~ X3~] in the column order of its
    source design. m_row is the common row of M (the robust location)
    and scale the factor sqrt(c (n - 1) / (sum(w) - 1)) applied to the
    weighted deviations from it. fit is None for designs without
    continuous columns, where the modified design equals the original.
    """
    x_tilde: np.ndarray
    scale: float
    m_row: np.ndarray
    design: PartitionedDesign
    fit: Optional[McdFit]

    @property
    def x2_tilde(self):
        return self.x_tilde[:, self.design.index(2)]

def modify_x2(x2, fit):
    """
    X2~ = scale * diag(w) (X2 - M) + M with every row of M equal to
    the robust location. Rows with zero weight collapse onto the
    location, the plain moments of X2~ equal the robust ones.
    Returns X2~ and the scale.
    """
    x2 = linalg.as_matrix(x2, "continuous block")
    w = fit.weights
    total = w.sum()
    p2 = x2.shape[1]

    if total < p2 + 2:
        raise ModifiedDesignError(F"only {int(total)} observations have weight 1, "
                                  F"need at least {p2 + 2}; {REMEDY}")

    n = x2.shape[0]
    scale = np.sqrt(fit.c * (n - 1) / (total - 1))
    x2_tilde = scale * w[:, None] * (x2 - fit.location) + fit.location

    return x2_tilde, float(scale)

def verify_equivalence(x2_tilde, fit):
    """
    Largest absolute deviations of the plain mean and sample
    covariance of X2~ from the robust location and scatter.
    """
    x2_tilde = np.asarray(x2_tilde)
    mean, cov = linalg.weighted_moments(x2_tilde, np.ones(x2_tilde.shape[0]))

    return (float(np.max(np.abs(mean - fit.location))),
            float(np.max(np.abs(cov - fit.scatter))))

def rebuild_interactions(design, x2_tilde):
    """
    Recompute the X3 columns of design with continuous factors taken
    from X2~. The continuous part of each mixed column is read from
    the X2 column of exactly those continuous variables, which
    build_design guarantees to exist. Returns an n x p3
    matrix in the order of design.index(3).
    """
    x2_tilde = np.asarray(x2_tilde)
    cont = {design.columns[j].continuous_factors(): k
            for k, j in enumerate(design.index(2))}

    out = np.empty((design.n, design.p3))
    for k, j in enumerate(design.index(3)):
        col = design.columns[j]

        margin = col.continuous_factors()
        if margin not in cont:
            # build_design rejects such models
            raise ValueError(F"no continuous column for interaction '{col.label}'")

        values = x2_tilde[:, cont[margin]].copy()
        for factor, kind, level in zip(col.term.factors, col.term.kinds, col.levels):
            if kind is Kind.CATEGORICAL:
                values *= design.indicator(factor, level)
        out[:, k] = values

    return out

def modified_design(design, fit):
    """
    Assemble X~ = [X1 X2~ X3~] in the column order of design. fit may
    be None if the design has no continuous columns.
    """
    if design.p2 == 0:
        return ModifiedDesign(design.x, 1.0, np.empty(0), design, None)
    elif fit is None:
        raise ValueError("a design with continuous columns needs an MCD fit")

    x2_tilde, scale = modify_x2(design.block(2), fit)

    x_tilde = np.array(design.x)
    x_tilde[:, design.index(2)] = x2_tilde
    if design.p3 > 0:
        x_tilde[:, design.index(3)] = rebuild_interactions(design, x2_tilde)

    x_tilde.flags.writeable = False
    logger.debug("modified design: scale %.10g, %d rows collapsed",
                 scale, int(np.sum(fit.weights == 0)))

    return ModifiedDesign(x_tilde, scale, fit.location, design, fit)

def robust_hat(design, mod):
    """
    Robust hat values x_i' (X~'X~)^-1 x_i: the original rows in the
    metric of the modified Gram matrix. Unlike classical hat values
    these may exceed 1.
    """
    try:
        gram = linalg.cholesky(mod.x_tilde.T @ mod.x_tilde)
    except NonFinite:
        raise ModifiedDesignError(OVERFLOW)
    except RankDeficiency as e:
        raise ModifiedDesignError(F"modified design is rank deficient at column "
                                  F"'{design.columns[e.index].label}'; {REMEDY}")

    return gram.quad_form(design.x)

def robust_distance(design, mod):
    """
    Robust distances of the original rows (constant columns removed)
    from the mean of the modified design, in the metric of its sample
    covariance. Zero when no column remains.
    """
    keep = ~constant_columns(design.x)
    if not keep.any():
        return np.zeros(design.n)

    xstar = design.x[:, keep]
    ref = mod.x_tilde[:, keep]
    mean, cov = linalg.weighted_moments(ref, np.ones(design.n))
    try:
        spd = linalg.cholesky(cov)
    except NonFinite:
        raise ModifiedDesignError(OVERFLOW)
    except RankDeficiency as e:
        label = design.columns[np.flatnonzero(keep)[e.index]].label
        raise ModifiedDesignError(F"covariance of the modified design is singular at "
                                  F"column '{label}'; {REMEDY}")

    return np.sqrt(spd.quad_form(xstar - mean))
