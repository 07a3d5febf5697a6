"""
Comparison of a leverage run on the bundled epilepsy data against
published reference values.

The published reweighted MCD scatter is reproduced to the printed
digits. The hat values published next to it were computed on a
modified design into which the modified continuous block had never
been substituted, so they are the classical hat values of the design.
They are compared with the classical hat values, the robust ones are
printed for information and checked for their qualitative behaviour
only.
"""

import logging
import os
import sys

import numpy as np

from dataclasses import dataclass

from .dataset import ingest_csv
from .mcd import McdConfig
from .pipeline import RunConfig, analyse

logger = logging.getLogger(__name__)

EPILEPSY_FORMULA = "~ Age10 + Base4 * Trt"
# relative tolerances, the published values carry 7 and 8 digits
SCATTER_TOLERANCE = 1e-5
HAT_TOLERANCE = 1e-6

# reweighted MCD scatter of (Age10, Base4)
PUBLISHED_SCATTER = np.array([[0.7463740, -0.3267283],
                              [-0.3267283, 10.0194113]])

# hat values of observations 1 to 59, equal to the classical ones
PUBLISHED_HAT = np.array([
    0.05918398, 0.05761964, 0.07597885, 0.08831037, 0.12814167, 0.03649363, 0.05707197,
    0.13821982, 0.06977150, 0.05953140, 0.08231479, 0.04790064, 0.06109578, 0.06518841,
    0.21304208, 0.06047114, 0.04498471, 0.38633944, 0.04914452, 0.07172279, 0.05490496,
    0.09056742, 0.05061124, 0.04363259, 0.06789648, 0.12056569, 0.10505741, 0.07403980,
    0.13316337, 0.04489245, 0.07575642, 0.05223374, 0.09433237, 0.04382864, 0.03457940,
    0.06124138, 0.05326251, 0.09628077, 0.04761239, 0.05961493, 0.05079567, 0.10109938,
    0.06090713, 0.05230413, 0.06278511, 0.06904524, 0.03396855, 0.05985715, 0.64794379,
    0.04181870, 0.03780989, 0.05743717, 0.06796775, 0.11009718, 0.04673072, 0.03927901,
    0.05935622, 0.06818611, 0.07601004,
])

# 1-based observations with the largest hat values, largest first
CHECKED_OBSERVATIONS = (49, 18)

def epilepsy_path():
    return os.path.join(os.path.dirname(__file__), "data", "epilepsy.csv")

def load_epilepsy():
    return ingest_csv(epilepsy_path())

def relative_error(actual, expected):
    return abs(actual - expected) / abs(expected)

@dataclass(frozen=True)
class Check:
    name: str
    expected: object
    actual: object
    passed: bool

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return F"{status}  {self.name}: expected {self.expected}, got {self.actual}"

def within(name, actual, expected, tolerance):
    err = relative_error(actual, expected)
    return Check(F"{name} (rel. error {err:.2e})", F"{expected:.8g}",
                 F"{actual:.8g}", err <= tolerance)

def largest(values, k):
    return tuple(int(i) + 1 for i in np.argsort(-values, kind="stable")[:k])

def compare(analysis):
    """
    Checks of an epilepsy analysis against the published values: the
    scatter entries within SCATTER_TOLERANCE, every hat value and those
    of the checked observations within HAT_TOLERANCE, the checked
    observations having the largest hat values in order. The robust
    hat values have to be positive and larger than the classical ones
    for the checked observations, which the MCD rejects.
    """
    checks = []

    scatter = analysis.fit.scatter
    names = analysis.design.labels
    cont = [names[j] for j in analysis.design.index(2)]
    for i, j in ((0, 0), (0, 1), (1, 1)):
        checks.append(within(F"scatter[{cont[i]}, {cont[j]}]",
                             scatter[i, j], PUBLISHED_SCATTER[i, j], SCATTER_TOLERANCE))

    hat = analysis.report.classical_hat
    errors = [relative_error(a, e) for a, e in zip(hat, PUBLISHED_HAT)]
    worst = int(np.argmax(errors))
    checks.append(Check(F"hat values (largest rel. error at observation {worst + 1})",
                        F"<= {HAT_TOLERANCE:.0e}", F"{errors[worst]:.2e}",
                        errors[worst] <= HAT_TOLERANCE))

    for obs in CHECKED_OBSERVATIONS:
        checks.append(within(F"hat value of observation {obs}",
                             hat[obs - 1], PUBLISHED_HAT[obs - 1], HAT_TOLERANCE))

    top = largest(hat, len(CHECKED_OBSERVATIONS))
    checks.append(Check("largest hat values", CHECKED_OBSERVATIONS, top,
                        top == CHECKED_OBSERVATIONS))

    robust = analysis.report.robust_hat
    checks.append(Check("all robust hat values positive", True,
                        bool(np.all(robust > 0)), bool(np.all(robust > 0))))

    for obs in CHECKED_OBSERVATIONS:
        grown = bool(robust[obs - 1] > hat[obs - 1])
        checks.append(Check(F"robust hat of observation {obs} exceeds its hat value",
                            True, grown, grown))

    return checks

def reproduce(mcd=McdConfig(), out=None):
    """
    Run the epilepsy example and print every check to out (stdout by
    default), followed by the robust hat values of the checked
    observations. Returns True if all checks passed.
    """
    out = sys.stdout if out is None else out
    config = RunConfig(EPILEPSY_FORMULA, epilepsy_path(), mcd=mcd)
    analysis = analyse(config, load_epilepsy())
    checks = compare(analysis)

    for c in checks:
        print(c, file=out)

    robust = analysis.report.robust_hat
    for obs in CHECKED_OBSERVATIONS:
        print(F"info  robust hat of observation {obs}: {robust[obs - 1]:.8g}", file=out)
    print(F"info  largest robust hat values: observations "
          F"{', '.join(map(str, largest(robust, 5)))}", file=out)

    passed = all(c.passed for c in checks)
    print("reproduction " + ("passed" if passed else "FAILED"), file=out)
    logger.info("%d of %d reference checks passed",
                sum(c.passed for c in checks), len(checks))

    return passed
