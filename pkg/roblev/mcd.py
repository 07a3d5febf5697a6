import itertools
import logging
import math

import numpy as np

from dataclasses import dataclass
from enum import Enum, auto
from typing import Optional, Tuple

from . import linalg
from .errors import ConfigError, ExactFitError, NonFinite, RankDeficiency

logger = logging.getLogger(__name__)

DEFAULT_SEED = 1
# upper bound on concentration steps when iterating to convergence,
# only reached if distance ties make the search cycle
MAX_STEPS = 100
OVERFLOW = "covariance of the continuous block overflows"

class Stage(Enum):
    RAW = auto()
    REWEIGHTED = auto()

class SearchMode(Enum):
    # all elemental subsets are tried
    ENUMERATE = auto()
    # n_trials random elemental subsets are tried
    RANDOM = auto()
    # h == n, there is nothing to search
    FULL = auto()

# Finite sample correction curves f(n) = 1 - exp(a) / n^b fitted by
# simulation for the MCD, given as (a, b) at alpha = 0.5 and alpha =
# 0.875 for one and two dimensional data.
SMALL_SAMPLE_CURVES = {
    Stage.RAW: {
        1: ((0.262024211897096, 0.604756680630497), (-0.351584646688712, 1.01646567502486)),
        2: ((0.673292623522027, 0.691365864961895), (0.446537815635445, 1.06690782995919)),
    },
    Stage.REWEIGHTED: {
        1: ((1.11098143415027, 1.5182890270453), (-0.66046776772861, 0.88939595831888)),
        2: ((3.11101712909049, 1.91401056721863), (0.79473550581058, 1.10081930350091)),
    },
}

# For more than two dimensions the curve parameters are themselves
# interpolated from fits at q = 2 and q = 3 of 1 + a / p^b, again at
# alpha = 0.5 and alpha = 0.875.
SMALL_SAMPLE_HIGHDIM = {
    Stage.RAW: (
        ((-1.42764571687802, 1.26263336932151), (-1.06141115981725, 1.28907991440387)),
        ((-0.455179464070565, 1.11192541278794), (-0.294241208320834, 1.09649329149811)),
    ),
    Stage.REWEIGHTED: (
        ((-1.02842572724793, 1.67659883081926), (-0.26800273450853, 1.35968562893582)),
        ((-0.544482443573914, 1.25994483222292), (-0.343791072183285, 1.25159004257133)),
    ),
}

@dataclass(frozen=True)
class McdConfig:
    """
    Tuning of the Fast MCD. alpha controls the subset size h, the
    default of 0.5 yields h = (n + p + 1) // 2 (maximal breakdown).
    If the number of elemental subsets does not exceed n_trials they
    are all enumerated, otherwise n_trials random ones are drawn.
    """
    alpha: float = 0.5
    n_trials: int = 500
    n_keep: int = 10
    reweight_prob: float = 0.975
    seed: int = DEFAULT_SEED
    use_small_sample_correction: bool = True
    c_override: Optional[float] = None

    def __post_init__(self):
        if not 0.5 <= self.alpha <= 1:
            raise ConfigError(F"alpha must be in [0.5, 1], got {self.alpha}")
        if self.n_trials < 1 or self.n_keep < 1:
            raise ConfigError("n_trials and n_keep must be positive")
        if not 0 < self.reweight_prob < 1:
            raise ConfigError(F"reweight probability must be in (0, 1), got {self.reweight_prob}")
        if self.seed < 0:
            raise ConfigError(F"seed must be non-negative, got {self.seed}")
        if self.c_override is not None and not 0 < self.c_override < math.inf:
            raise ConfigError(F"c override must be positive and finite, got {self.c_override}")

    def subset_size(self, n, p):
        half = (n + p + 1) // 2
        return min(n, int(math.floor(2 * half - n + 2 * (n - half) * self.alpha)))

@dataclass(frozen=True)
class McdFit:
    location: np.ndarray
    scatter: np.ndarray
    raw_location: np.ndarray
    raw_scatter: np.ndarray
    weights: np.ndarray
    c: float
    best_subset: Tuple[int, ...]
    best_logdet: float
    h: int
    # squared distances under the raw estimate
    raw_distances: np.ndarray
    raw_factors: Tuple[float, float]
    mode: SearchMode

def consistency_factor(alpha_actual, p):
    """
    Factor making the covariance of the alpha_actual fraction of
    points closest to the center consistent at the normal model:
    alpha / P(chi2_{p+2} <= chi2_p quantile of alpha).
    """
    if not 0 < alpha_actual <= 1:
        raise ValueError(F"fraction must be in (0, 1], got {alpha_actual}")
    if alpha_actual == 1:
        return 1.0

    q = linalg.chi2_quantile(alpha_actual, p)
    return alpha_actual / linalg.chi2_cdf(q, p + 2)

def highdim_curve(n, p, coeffs):
    (a2, b2), (a3, b3) = coeffs
    y = np.log([-a2 / p ** b2, -a3 / p ** b3])
    A = np.array([[1, -math.log(2 * p * p)],
                  [1, -math.log(3 * p * p)]])
    c0, c1 = np.linalg.solve(A, y)

    return 1 - math.exp(c0) / n ** c1

def small_sample_factor(n, p, stage, alpha=0.5, enabled=True):
    """
    Finite sample correction for the MCD covariance, from the
    simulation-fitted curves for the raw and the reweighted
    estimator, interpolated linearly in alpha. The factor is >= 1
    and tends to 1 as n grows.
    """
    if not enabled or alpha >= 1:
        return 1.0
    if n <= p:
        raise ValueError(F"need n > p, have n = {n} and p = {p}")

    if p <= 2:
        (a500, b500), (a875, b875) = SMALL_SAMPLE_CURVES[stage][p]
        f500 = 1 - math.exp(a500) / n ** b500
        f875 = 1 - math.exp(a875) / n ** b875
    else:
        c500, c875 = SMALL_SAMPLE_HIGHDIM[stage]
        f500 = highdim_curve(n, p, c500)
        f875 = highdim_curve(n, p, c875)

    if alpha <= 0.875:
        f = f500 + (f875 - f500) / 0.375 * (alpha - 0.5)
    else:
        f = f875 + (1 - f875) / 0.125 * (alpha - 0.875)

    if f <= 0:
        # the fitted curves are meaningless this far outside their range
        logger.warning("no small sample correction for n = %d, p = %d", n, p)
        return 1.0

    return 1 / f

def subset_fit(x, subset):
    "Mean and factored sample covariance of the rows in subset."
    rows = x[subset]
    mean, cov = linalg.weighted_moments(rows, np.ones(len(rows)))
    try:
        return mean, linalg.cholesky(cov)
    except NonFinite:
        raise ExactFitError(OVERFLOW, subset)
    except RankDeficiency:
        raise ExactFitError(F"{len(rows)} observations lie on a lower "
                            "dimensional affine subspace", subset)

def nearest(d2, h):
    "Sorted indices of the h smallest distances, ties to the lower index."
    return np.sort(np.argsort(d2, kind="stable")[:h])

def c_step(x2, subset):
    """
    One concentration step: the h = len(subset) observations closest
    to the subset's mean in the metric of its covariance. The
    determinant of the new subset's covariance never exceeds the old
    one's. Raises ExactFitError if the subset covariance is singular.
    """
    x2 = linalg.as_matrix(x2)
    subset = np.sort(np.asarray(subset, dtype=int))

    mean, spd = subset_fit(x2, subset)
    return nearest(spd.quad_form(x2 - mean), len(subset))

def concentrate(x, subset, max_steps=MAX_STEPS):
    """
    Apply C-steps until the subset no longer changes or max_steps
    steps were taken. Returns the final subset and the log
    determinant of its covariance.
    """
    h = len(subset)
    mean, spd = subset_fit(x, subset)

    for _ in range(max_steps):
        new = nearest(spd.quad_form(x - mean), h)
        if np.array_equal(new, subset):
            break

        subset = new
        mean, spd = subset_fit(x, subset)

    return subset, spd.log_det()

def inflate(x, start, h):
    "Grow an elemental subset to the h observations closest to it."
    mean, spd = subset_fit(x, start)
    return nearest(spd.quad_form(x - mean), h)

def random_start(x, rng, h):
    """
    Draw a random elemental subset of p + 1 rows and inflate it. A
    singular draw is extended by further random rows until its
    covariance is invertible.
    """
    n, p = x.shape
    order = rng.permutation(n)

    for k in range(p + 1, h + 1):
        start = np.sort(order[:k])
        try:
            return inflate(x, start, h)
        except ExactFitError:
            continue

    raise ExactFitError(F"{h} observations lie on a lower dimensional "
                        "affine subspace", np.sort(order[:h]))

def elemental_starts(x, h, cfg):
    """
    Yield the inflated starting subsets: every elemental subset if
    there are at most n_trials of them, else n_trials random ones.
    The randomness of trial i only depends on (seed, i).
    """
    n, p = x.shape
    if math.comb(n, p + 1) <= cfg.n_trials:
        for start in itertools.combinations(range(n), p + 1):
            try:
                yield inflate(x, np.array(start), h)
            except ExactFitError:
                continue
    else:
        for trial in range(cfg.n_trials):
            rng = np.random.default_rng([cfg.seed, trial])
            yield random_start(x, rng, h)

def best_subset(x, h, cfg):
    """
    Search for the h-subset with the smallest covariance determinant.
    Every start gets two C-steps, the best candidates are then
    concentrated until convergence. Ties in the determinant resolve
    to the lexicographically smallest subset.
    """
    n, p = x.shape
    enumerate_all = math.comb(n, p + 1) <= cfg.n_trials
    mode = SearchMode.ENUMERATE if enumerate_all else SearchMode.RANDOM

    candidates = {}
    for start in elemental_starts(x, h, cfg):
        subset, logdet = concentrate(x, start, max_steps=2)
        candidates[tuple(subset)] = logdet

    if not candidates:
        raise ExactFitError("every elemental subset is singular, "
                            "the data lie on a lower dimensional affine subspace")

    ranked = sorted(candidates, key=lambda s: (candidates[s], s))
    if not enumerate_all:
        ranked = ranked[:cfg.n_keep]
    logger.debug("%s search: %d distinct candidates, refining %d",
                 mode.name.lower(), len(candidates), len(ranked))

    final = {}
    for s in ranked:
        subset, logdet = concentrate(x, np.array(s))
        final[tuple(subset)] = logdet

    best = min(final, key=lambda s: (final[s], s))
    logger.debug("best subset log determinant %.10g", final[best])

    return np.array(best), final[best], mode

def fast_mcd(x2, cfg=McdConfig()):
    """
    Reweighted Fast MCD estimate of location and scatter.

    The raw estimate consists of the mean and the consistency and
    small sample corrected covariance of the best h-subset. Rows whose
    squared raw distance does not exceed the chi-square quantile at
    reweight_prob get weight 1, all others 0. The final estimate is
    the weighted mean and the weighted covariance rescaled by c (or
    c_override). With h == n nothing is trimmed and all weights are 1.
    """
    x = linalg.as_matrix(x2, "continuous block")
    n, p = x.shape
    if n <= p + 1:
        raise ExactFitError(F"need more than {p + 1} observations, have {n}")

    constant = np.flatnonzero(x.max(axis=0) == x.min(axis=0))
    if len(constant) > 0:
        raise ExactFitError(F"continuous column {constant[0] + 1} is constant", range(n))

    h = cfg.subset_size(n, p)
    if h == n:
        subset, mode = np.arange(n), SearchMode.FULL
        _, spd = subset_fit(x, subset)
        logdet = spd.log_det()
    else:
        subset, logdet, mode = best_subset(x, h, cfg)

    raw_location, raw_cov = linalg.weighted_moments(x[subset], np.ones(h))
    cons = consistency_factor(h / n, p)
    small = small_sample_factor(n, p, Stage.RAW, cfg.alpha,
                                cfg.use_small_sample_correction)
    raw_scatter = raw_cov * cons * small

    try:
        raw_distances = linalg.cholesky(raw_scatter).quad_form(x - raw_location)
    except NonFinite:
        raise ExactFitError(OVERFLOW, subset)
    if mode is SearchMode.FULL:
        weights = np.ones(n)
    else:
        cutoff = linalg.chi2_quantile(cfg.reweight_prob, p)
        weights = (raw_distances <= cutoff).astype(np.float64)

    total = int(weights.sum())
    if total < p + 1:
        raise ExactFitError(F"only {total} observations kept after reweighting",
                            np.flatnonzero(weights))

    location, cov = linalg.weighted_moments(x, weights)
    if cfg.c_override is not None:
        c = float(cfg.c_override)
    else:
        c = consistency_factor(total / n, p) * \
            small_sample_factor(n, p, Stage.REWEIGHTED, cfg.alpha,
                                cfg.use_small_sample_correction)
    scatter = cov * c

    try:
        linalg.cholesky(scatter)
    except NonFinite:
        raise ExactFitError(OVERFLOW, np.flatnonzero(weights))
    except RankDeficiency:
        raise ExactFitError("reweighted covariance is singular", np.flatnonzero(weights))

    logger.info("mcd: n=%d p=%d h=%d sum(w)=%d c=%.10g", n, p, h, total, c)
    return McdFit(location, scatter, raw_location, raw_scatter, weights, c,
                  tuple(int(i) for i in subset), logdet, h, raw_distances,
                  (cons, small), mode)
