import csv
import io
import json
import sys

import numpy as np

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

from .errors import ConfigError
from .robust import robust_distance, robust_hat

# column order of the emitted report, robust hat values come
# first as they are the diagnostic to look at
FIELDS = ("obs", "robust_hat", "robust_rd", "classical_hat",
          "classical_md", "mcd_weight", "flagged")

class Format(Enum):
    CSV = "csv"
    JSON = "json"

@dataclass(frozen=True)
class LeverageReport:
    """
    Per observation leverage diagnostics of one design. The arrays
    are indexed by observation, meta holds additional run metadata
    emitted after the fixed header fields.
    """
    n: int
    p: int
    p1: int
    p2: int
    p3: int
    c: float
    sum_w: int
    flag_cutoff: float
    robust_hat: np.ndarray
    robust_rd: np.ndarray
    classical_hat: np.ndarray
    classical_md: np.ndarray
    mcd_weight: np.ndarray
    meta: Mapping = field(default_factory=dict)

    @property
    def flagged(self):
        return self.robust_hat > self.flag_cutoff

    def header(self):
        head = {"n": self.n, "p": self.p, "p1": self.p1, "p2": self.p2, "p3": self.p3,
                "c": self.c, "sum_w": self.sum_w, "flag_cutoff": self.flag_cutoff}
        head.update(self.meta)
        return head

    def rows(self):
        "One tuple per observation in FIELDS order, numbers unformatted."
        flagged = self.flagged
        for i in range(self.n):
            yield (i + 1, self.robust_hat[i], self.robust_rd[i],
                   self.classical_hat[i], self.classical_md[i],
                   int(self.mcd_weight[i]), int(flagged[i]))

def assemble_report(design, classical, fit, mod, flag_cutoff=None, meta=None):
    """
    Merge classical and robust diagnostics of design into a report.
    fit is None for designs without continuous columns, all weights
    are 1 then. The default flag cutoff is 2p/n on the robust hat
    scale.
    """
    n, p = design.n, design.p
    if len(classical.hat) != n or len(classical.md) != n or mod.x_tilde.shape != (n, p):
        raise ValueError("diagnostics do not belong to the same design")

    if fit is None:
        weights, c = np.ones(n), 1.0
    else:
        if len(fit.weights) != n:
            raise ValueError("MCD fit does not belong to the same design")
        weights, c = fit.weights, fit.c

    if flag_cutoff is None:
        flag_cutoff = 2.0 * p / n

    return LeverageReport(n, p, design.p1, design.p2, design.p3, float(c),
                          int(weights.sum()), float(flag_cutoff),
                          robust_hat(design, mod), robust_distance(design, mod),
                          classical.hat, classical.md, weights.astype(int),
                          dict(meta or {}))

def number(v):
    "Text of a report value, floats with 10 significant digits."
    if isinstance(v, (float, np.floating)):
        return F"{v:.10g}"
    return str(v)

def render_csv(report):
    out = io.StringIO()
    for key, value in report.header().items():
        out.write(F"# {key}: {number(value)}\n")

    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(FIELDS)
    for row in report.rows():
        writer.writerow([number(v) for v in row])

    return out.getvalue()

def json_value(v):
    # going through the 10 digit text keeps csv and json numbers identical
    if isinstance(v, (float, np.floating)):
        return float(number(v))
    elif isinstance(v, np.integer):
        return int(v)
    return v

def render_json(report):
    doc = {
        "meta": {k: json_value(v) for k, v in report.header().items()},
        "observations": [dict(zip(FIELDS, map(json_value, row)))
                         for row in report.rows()],
    }
    return json.dumps(doc, indent=2) + "\n"

def emit_report(report, fmt=Format.CSV, dest=None):
    """
    Write the report as CSV (metadata as leading '#' lines) or JSON
    to the file dest, or to stdout if dest is None or '-'. The output
    only depends on the report, never on the time or environment.
    """
    fmt = Format(fmt)
    text = render_csv(report) if fmt is Format.CSV else render_json(report)

    if dest is None or dest == "-":
        sys.stdout.write(text)
        return

    try:
        with open(dest, "w", newline="", encoding="utf-8") as f:
            f.write(text)
    except OSError as e:
        raise ConfigError(F"cannot write report to '{dest}': {e}")
