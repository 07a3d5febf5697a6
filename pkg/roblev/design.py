import itertools
import logging

import numpy as np

from dataclasses import dataclass, field
from enum import Enum, auto
from typing import Mapping, Optional, Tuple

from . import linalg
from .dataset import ColumnKind
from .errors import DataError, DesignError, FormulaError, NonFinite, RankDeficiency
from .formula import Kind, ModelSpec, Term

logger = logging.getLogger(__name__)

INTERCEPT_LABEL = "(Intercept)"

class Part(Enum):
    """
    Kind of a design column. block maps it to X1, X2 or X3 of the
    partitioned design X = [X1 X2 X3], the intercept counts as X1.
    """
    INTERCEPT = auto()
    CATEGORICAL = auto()
    CONTINUOUS = auto()
    MIXED = auto()

    @property
    def block(self):
        if self is Part.CONTINUOUS:
            return 2
        elif self is Part.MIXED:
            return 3
        return 1

@dataclass(frozen=True)
class DesignColumn:
    """
    Provenance of one design column. term is None for the
    intercept, levels holds one entry per factor of the term:
    the coded level for categorical factors, None for
    continuous ones.
    """
    label: str
    term: Optional[Term]
    levels: Tuple[Optional[str], ...]
    part: Optional[Part] = None

    def continuous_factors(self):
        if self.term is None:
            return frozenset()
        return frozenset(f for f, k in zip(self.term.factors, self.term.kinds)
                         if k is Kind.CONTINUOUS)

    def with_part(self, part):
        return DesignColumn(self.label, self.term, self.levels, part)

@dataclass(frozen=True)
class PartitionedDesign:
    """
    A design matrix in term order (intercept, main effects,
    interactions) together with the per-column provenance and
    the X1/X2/X3 partition. The columns are *not* reordered into
    blocks, use the index properties to extract them.
    """
    x: np.ndarray
    columns: Tuple[DesignColumn, ...]
    spec: ModelSpec
    # variable -> coded (level, values) pairs the columns were built from
    codings: Mapping = field(default_factory=dict, repr=False, compare=False)

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def p(self):
        return self.x.shape[1]

    def index(self, block):
        return np.array([i for i, c in enumerate(self.columns) if c.part.block == block],
                        dtype=int)

    @property
    def p1(self):
        return len(self.index(1))

    @property
    def p2(self):
        return len(self.index(2))

    @property
    def p3(self):
        return len(self.index(3))

    @property
    def has_intercept(self):
        return any(c.part is Part.INTERCEPT for c in self.columns)

    @property
    def labels(self):
        return tuple(c.label for c in self.columns)

    def block(self, k):
        "The submatrix X_k for k = 1, 2, 3."
        return self.x[:, self.index(k)]

    def indicator(self, variable, level):
        "Treatment indicator of variable == level."
        for l, values in self.codings[variable]:
            if l == level:
                return values
        raise KeyError((variable, level))

def classify_columns(spec, coding):
    """
    Assign each column its block: the intercept and columns of purely
    categorical terms go to X1, purely continuous terms (including
    continuous products) to X2 and terms mixing both kinds to X3.
    coding holds one DesignColumn per column with bound terms.
    """
    keys = set(t.key() for t in spec.terms)
    parts = []

    for col in coding:
        if col.term is None:
            parts.append(Part.INTERCEPT)
            continue
        elif col.term.key() not in keys:
            raise ValueError(F"column '{col.label}' stems from a term not in the model")
        elif col.term.kinds is None:
            raise ValueError(F"term of column '{col.label}' is not bound to a dataset")

        kinds = set(col.term.kinds)
        if kinds == {Kind.CATEGORICAL}:
            parts.append(Part.CATEGORICAL)
        elif kinds == {Kind.CONTINUOUS}:
            parts.append(Part.CONTINUOUS)
        else:
            parts.append(Part.MIXED)

    return tuple(parts)

def code_variable(column, kind):
    """
    Coded columns of a single variable as (level, values) pairs.
    Categorical variables are coded by treatment contrasts against
    their first level, continuous ones yield their values as is.
    """
    if kind is Kind.CONTINUOUS:
        return [(None, column.array())]

    levels = column.levels()
    if len(levels) < 2:
        raise DesignError(F"categorical variable '{column.name}' has a single level")

    values = np.array(column.values, dtype=object)
    return [(l, (values == l).astype(np.float64)) for l in levels[1:]]

def variable_kinds(spec, data):
    kinds = {}
    for v in spec.variables:
        if v not in data:
            raise FormulaError(F"unknown variable '{v}'")

        col = data[v]
        kinds[v] = Kind.CATEGORICAL if col.kind is ColumnKind.LABEL else Kind.CONTINUOUS

    if spec.response is not None and spec.response not in data:
        raise FormulaError(F"unknown response variable '{spec.response}'")

    return kinds

def check_missing(spec, data):
    rows = set()
    names = []
    for v in spec.variables:
        missing = data[v].missing_rows()
        if missing:
            rows.update(missing)
            names.append(v)

    if rows:
        listing = ", ".join(str(i + 1) for i in sorted(rows))
        raise DataError(F"missing values for {', '.join(names)} in row(s) {listing}")

def term_columns(term, codings):
    """
    Columns of a term as the elementwise products of its factors'
    coded columns, the first factor varying fastest.
    """
    per_factor = [codings[f] for f in term.factors]
    for combo in itertools.product(*reversed(per_factor)):
        combo = tuple(reversed(combo))

        label = ":".join(f + (l or "") for f, (l, _) in zip(term.factors, combo))
        values = np.prod([v for _, v in combo], axis=0)
        yield DesignColumn(label, term, tuple(l for l, _ in combo)), values

def build_design(spec, data):
    """
    Build the partitioned design matrix of spec on the given Dataset.
    Label columns are categorical, numeric columns continuous. Raises
    DataError on missing values in used variables and DesignError if
    a categorical variable has a single level, n <= p, a mixed term
    lacks its continuous term, the values overflow or the columns are
    linearly dependent.
    """
    kinds = variable_kinds(spec, data)
    check_missing(spec, data)

    codings = {v: code_variable(data[v], kinds[v]) for v in spec.variables}

    coding, cols = [], []
    if spec.intercept:
        coding.append(DesignColumn(INTERCEPT_LABEL, None, ()))
        cols.append(np.ones(data.n))

    for term in spec.terms:
        for col, values in term_columns(term.bind(kinds), codings):
            coding.append(col)
            cols.append(values)

    n, p = data.n, len(cols)
    if p == 0:
        raise DesignError("the model has no columns")
    elif n <= p:
        raise DesignError(F"need more observations than columns, have n = {n} and p = {p}")

    parts = classify_columns(spec, coding)
    columns = tuple(c.with_part(part) for c, part in zip(coding, parts))

    check_margins(columns)

    try:
        x = linalg.as_matrix(np.column_stack(cols), "design matrix")
    except NonFinite as e:
        # products of huge values overflow
        raise DesignError(str(e))
    check_rank(x, columns)

    design = PartitionedDesign(x, columns, spec, codings)
    logger.debug("design %dx%d, p1=%d p2=%d p3=%d",
                 design.n, design.p, design.p1, design.p2, design.p3)

    return design

def check_margins(columns):
    """
    Every mixed column is rebuilt from the continuous column of the
    same continuous variables, which therefore has to be in the model.
    """
    margins = set(c.continuous_factors() for c in columns if c.part is Part.CONTINUOUS)
    for c in columns:
        if c.part is Part.MIXED and c.continuous_factors() not in margins:
            raise DesignError(F"interaction '{c.label}' needs the continuous term "
                              F"'{':'.join(sorted(c.continuous_factors()))}' in the model")

def check_rank(x, columns):
    try:
        linalg.cholesky(x.T @ x)
    except NonFinite:
        raise DesignError("design values are too large, the cross products "
                          "of its columns overflow")
    except RankDeficiency as e:
        raise DesignError(F"design is rank deficient: column '{columns[e.index].label}' "
                          "is linearly dependent on the preceding columns")
