import csv
import re

import numpy as np

from dataclasses import dataclass
from enum import Enum, auto
from typing import Optional, Tuple

from .errors import DataError

# Plain decimal notation as written by spreadsheets and statistics
# packages. Deliberately rejects nan, inf and hexadecimal literals
# which float() would accept.
DECIMAL = re.compile(r"[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?")

class ColumnKind(Enum):
    NUMERIC = auto()
    LABEL = auto()

def is_decimal(s):
    return DECIMAL.fullmatch(s) is not None

@dataclass(frozen=True)
class Column:
    """
    A single dataset column. values holds floats for NUMERIC and
    strings for LABEL columns, None marks a missing cell.
    """
    name: str
    kind: ColumnKind
    values: Tuple

    def missing_rows(self):
        "0-based indices of rows with a missing value."
        return tuple(i for i, v in enumerate(self.values) if v is None)

    def array(self):
        if self.kind is not ColumnKind.NUMERIC:
            raise ValueError(F"column '{self.name}' is not numeric")
        return np.array([np.nan if v is None else v for v in self.values],
                        dtype=np.float64)

    def levels(self):
        """
        Distinct non-missing labels in reference order: numerically
        sorted if every label is a decimal number, lexicographically
        otherwise. The first level is the reference level of the
        treatment contrasts.
        """
        labels = set(v for v in self.values if v is not None)
        if all(is_decimal(l) for l in labels):
            return tuple(sorted(labels, key=lambda l: (float(l), l)))
        return tuple(sorted(labels))

@dataclass(frozen=True)
class Dataset:
    columns: Tuple[Column, ...]
    source: Optional[str] = None

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise DataError("duplicate column names")

        lengths = set(len(c.values) for c in self.columns)
        if len(lengths) > 1:
            raise DataError("columns have different lengths")

    @property
    def names(self):
        return tuple(c.name for c in self.columns)

    @property
    def n(self):
        return len(self.columns[0].values) if self.columns else 0

    def __contains__(self, name):
        return name in self.names

    def __getitem__(self, name):
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    @classmethod
    def from_columns(cls, mapping, categorical=(), source=None):
        """
        Build a Dataset from a mapping of column names to sequences.
        Sequences of numbers become NUMERIC columns, anything else
        and every name in categorical becomes a LABEL column.
        """
        columns = []
        for name, values in mapping.items():
            values = list(values)
            numeric = all(v is None or isinstance(v, (int, float, np.number))
                          for v in values)

            if numeric and name not in categorical:
                col = Column(name, ColumnKind.NUMERIC,
                             tuple(None if v is None else float(v) for v in values))
            else:
                col = Column(name, ColumnKind.LABEL,
                             tuple(None if v is None else label(v) for v in values))
            columns.append(col)

        return cls(tuple(columns), source)

def label(v):
    "Text of a label cell; integral floats lose their trailing .0"
    if isinstance(v, float) and v.is_integer():
        return str(int(v))
    return str(v)

def read_rows(path):
    try:
        with open(path, newline="", encoding="utf-8") as f:
            return list(csv.reader(f))
    except (OSError, UnicodeDecodeError) as e:
        raise DataError(F"cannot read '{path}': {e}")
    except csv.Error as e:
        raise DataError(F"malformed CSV in '{path}': {e}")

def ingest_csv(path, overrides=()):
    """
    Read a CSV file with a header row into a Dataset. A column is
    NUMERIC if every non-empty cell is a decimal number, names
    listed in overrides are always read as LABEL columns. Empty
    cells are recorded as missing. Ragged rows, duplicate or empty
    header names and non-finite numbers raise DataError; row
    numbers in messages count data rows from 1.
    """
    rows = read_rows(path)

    # blank lines carry no cells and are skipped
    numbered = [(i, r) for i, r in enumerate(rows, start=1) if len(r) > 0]
    if not numbered:
        raise DataError(F"'{path}' is empty, a header row is required")

    _, header = numbered[0]
    header = [h.strip() for h in header]
    if any(len(h) == 0 for h in header):
        raise DataError(F"empty column name in header of '{path}'")

    dupes = sorted(set(h for h in header if header.count(h) > 1))
    if dupes:
        raise DataError(F"duplicate column name(s) in '{path}': {', '.join(dupes)}")

    unknown = [o for o in overrides if o not in header]
    if unknown:
        raise DataError(F"categorical override for unknown column(s): {', '.join(unknown)}")

    body = numbered[1:]
    if not body:
        raise DataError(F"'{path}' has a header but no data rows")

    cells = [[] for _ in header]
    for row, (line, record) in enumerate(body, start=1):
        if len(record) != len(header):
            raise DataError(F"ragged data row {row} (line {line}): "
                            F"expected {len(header)} fields, found {len(record)}")
        for j, cell in enumerate(record):
            cell = cell.strip()
            cells[j].append(cell if len(cell) > 0 else None)

    columns = []
    for name, values in zip(header, cells):
        present = [v for v in values if v is not None]
        numeric = name not in overrides and all(is_decimal(v) for v in present)

        if numeric:
            floats = tuple(None if v is None else float(v) for v in values)
            bad = [i + 1 for i, v in enumerate(floats) if v is not None and not np.isfinite(v)]
            if bad:
                raise DataError(F"column '{name}' has out of range numbers in row(s) "
                                + ", ".join(map(str, bad)))
            columns.append(Column(name, ColumnKind.NUMERIC, floats))
        else:
            columns.append(Column(name, ColumnKind.LABEL, tuple(values)))

    return Dataset(tuple(columns), str(path))
