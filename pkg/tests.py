#!/usr/bin/env python3
import contextlib
import io
import itertools
import json
import math
import os
import tempfile
import unittest

from unittest import mock

import numpy as np

from numpy.testing import assert_allclose, assert_array_equal
from scipy import integrate

from roblev import linalg
from roblev.__main__ import get_parser, main
from roblev.classical import (classical_diagnostics, hat_md_relation_check,
                              hat_values, mahalanobis, strip_constant)
from roblev.dataset import ColumnKind, Dataset, ingest_csv
from roblev.design import Part, build_design
from roblev.errors import (ConfigError, DataError, DesignError, ExactFitError,
                           FormulaError, ModifiedDesignError, NonFinite, RankDeficiency)
from roblev.formula import PositionedIterator, parse_formula, render, tokenize
from roblev.mcd import (McdConfig, McdFit, SearchMode, Stage, c_step,
                        consistency_factor, fast_mcd, small_sample_factor)
from roblev.pipeline import RunConfig, analyse
from roblev.reference import (EPILEPSY_FORMULA, PUBLISHED_HAT,
                              PUBLISHED_SCATTER, epilepsy_path, load_epilepsy)
from roblev.report import FIELDS, assemble_report, emit_report, render_csv, render_json
from roblev.robust import (modified_design, modify_x2, rebuild_interactions,
                           robust_distance, robust_hat, verify_equivalence)

TEST_STRING = 'foo;bar'

def epilepsy_analysis(**kwargs):
    return analyse(RunConfig(EPILEPSY_FORMULA, epilepsy_path(), **kwargs))

def cofactor_det(a):
    if len(a) == 1:
        return a[0][0]
    return sum((-1) ** j * a[0][j] * cofactor_det([row[:j] + row[j + 1:] for row in a[1:]])
               for j in range(len(a)))

def subset_logdet(x, subset):
    return np.linalg.slogdet(np.atleast_2d(np.cov(x[list(subset)].T)))[1]

def exhaustive_mcd(x, h):
    "Smallest log determinant over all h-subsets, ties to the first subset."
    best = None
    for s in itertools.combinations(range(len(x)), h):
        logdet = subset_logdet(x, s)
        if best is None or logdet < best[0] - 1e-12:
            best = (logdet, s)
    return best

def make_fit(location, scatter, weights, c):
    n = len(weights)
    return McdFit(np.asarray(location, dtype=float), np.atleast_2d(scatter),
                  np.asarray(location, dtype=float), np.atleast_2d(scatter),
                  np.asarray(weights, dtype=float), c, tuple(range(n)), 0.0, n,
                  np.zeros(n), (1.0, 1.0), SearchMode.FULL)

def mixed_dataset(rng, n=60):
    return Dataset.from_columns({
        "x": rng.normal(size=n),
        "z": rng.normal(size=n),
        "a": [F"a{i % 3 + 1}" for i in rng.permutation(n)],
        "b": [F"b{i % 2 + 1}" for i in rng.permutation(n)],
    })

class TestPositionedIterator(unittest.TestCase):
    """Tests for roblev.formula.PositionedIterator"""

    def test_lossless(self):
        """Test that the iterator doesn't loose any content"""

        it = PositionedIterator(TEST_STRING)

        self.assertEqual([x for x in it], list(TEST_STRING))
        self.assertEqual(it.wrapped, TEST_STRING)

    def test_indices(self):
        """Test that the iterator's pos matches the string indices"""
        it = PositionedIterator(TEST_STRING)

        self.assertEqual(it.pos, -1)

        for x in it:
            assert x == TEST_STRING[it.pos]

            if x == ';':
                break

        self.assertEqual(it.pos, 3)

        for x in it:
            self.assertEqual(x, it.wrapped[it.pos])

        self.assertTrue(it.empty())

    def test_exhausted(self):
        """Test that an exhausted iterator keeps its position"""
        it = PositionedIterator(TEST_STRING)
        for _ in it:
            pass

        with self.assertRaises(StopIteration):
            next(it)
        self.assertEqual(it.pos, len(TEST_STRING) - 1)

    def test_takewhile(self):
        """Test takewhile() stops before the rejected element"""
        it = PositionedIterator(TEST_STRING)

        s = it.takewhile(lambda x: x != ';')

        self.assertEqual(s, TEST_STRING.split(';')[0])
        self.assertEqual(it.pos, len(s) - 1)
        self.assertEqual(next(it), ';')

        self.assertEqual(it.takewhile(lambda x: True), 'bar')
        self.assertTrue(it.empty())
        self.assertEqual(it.takewhile(lambda x: True), '')

    def test_peek(self):
        """Test that peek() does not consume"""
        it = PositionedIterator('ab')

        self.assertEqual(it.peek(), 'a')
        self.assertEqual(next(it), 'a')
        self.assertEqual(it.peek(), 'b')
        next(it)
        self.assertIsNone(it.peek())

class TestLinalg(unittest.TestCase):
    """Tests for roblev.linalg"""

    def test_cholesky_examples(self):
        """Factor the identity and a hand-checkable 2x2"""
        assert_allclose(linalg.cholesky(np.eye(3)).chol, np.eye(3))
        assert_allclose(linalg.cholesky([[4, 2], [2, 2]]).chol, [[2, 0], [1, 1]])

    def test_cholesky_rank_deficiency(self):
        """A rank one matrix fails at its second column"""
        with self.assertRaises(RankDeficiency) as cm:
            linalg.cholesky([[1, 1], [1, 1]])

        self.assertEqual(cm.exception.index, 1)

    def test_cholesky_reads_lower_triangle(self):
        """Only the lower triangle of the input is used"""
        spd = linalg.cholesky([[4, 99], [2, 2]])
        assert_array_equal(spd.entries, [[4, 2], [2, 2]])

    def test_as_matrix_rejects(self):
        """Reject non-finite, empty and one-dimensional input"""
        for bad in ([[1, np.nan]], [[np.inf]], np.empty((0, 2)), [1, 2]):
            with self.assertRaises(ValueError):
                linalg.as_matrix(bad)

        with self.assertRaises(NonFinite):
            linalg.cholesky(np.full((2, 2), 1e200) @ np.full((2, 2), 1e200))

    def test_quad_form_examples(self):
        """Quadratic forms of small hand-checkable matrices"""
        self.assertAlmostEqual(linalg.quad_form(linalg.cholesky(np.eye(2)), [3, 4]), 25)
        self.assertAlmostEqual(linalg.quad_form(linalg.cholesky(np.diag([4, 1])), [2, 1]), 2)
        self.assertAlmostEqual(linalg.quad_form(linalg.cholesky([[4, 2], [2, 2]]), [1, 1]), 0.5)

    def test_quad_form_solve_oracle(self):
        """Quadratic forms agree with Gaussian elimination"""
        rng = np.random.default_rng(7)
        for _ in range(50):
            k = rng.integers(1, 7)
            b = rng.normal(size=(k + 3, k))
            a = b.T @ b + 1e-3 * np.eye(k)
            v = rng.normal(size=k)

            q = linalg.quad_form(linalg.cholesky(a), v)
            self.assertGreater(q, 0)
            self.assertAlmostEqual(q / (v @ np.linalg.solve(a, v)), 1, places=10)

    def test_quad_form_rows(self):
        """Rows of a matrix are treated as separate vectors"""
        spd = linalg.cholesky(np.diag([4, 1]))
        assert_allclose(spd.quad_form([[2, 1], [0, 3]]), [2, 9])

    def test_weighted_moments_examples(self):
        """Zero weights drop rows, unit weights give sample moments"""
        x = np.array([[1.0], [3.0], [100.0]])

        mean, cov = linalg.weighted_moments(x, [1, 1, 0])
        assert_allclose(mean, [2])
        assert_allclose(cov, [[2]])

        mean, cov = linalg.weighted_moments(x, [1, 1, 1])
        assert_allclose(mean, [104 / 3])
        assert_allclose(cov, [[9607 / 3]])

    def test_weighted_moments_all_ones(self):
        """Unit weights match numpy's mean and sample covariance"""
        rng = np.random.default_rng(3)
        x = rng.normal(size=(40, 4))

        mean, cov = linalg.weighted_moments(x, np.ones(40))
        assert_allclose(mean, x.mean(axis=0), rtol=1e-12)
        assert_allclose(cov, np.cov(x.T), rtol=1e-12)

    def test_weighted_moments_rejects(self):
        """Fractional weights and fewer than two active rows are errors"""
        x = np.ones((3, 1))
        with self.assertRaises(ValueError):
            linalg.weighted_moments(x, [0.5, 1, 1])
        with self.assertRaises(ValueError):
            linalg.weighted_moments(x, [1, 0, 0])

    def test_chi2_quantile_examples(self):
        """Chi-square quantiles against tabulated values"""
        self.assertAlmostEqual(linalg.chi2_quantile(0.5, 2), 2 * math.log(2), places=9)
        self.assertAlmostEqual(linalg.chi2_quantile(0.975, 2), 7.3777589082, places=8)
        self.assertAlmostEqual(linalg.chi2_quantile(0.975, 4), 11.1432868, places=6)

    def test_chi2_quantile_inverts_cdf(self):
        """The CDF of the quantile returns the probability"""
        for df in range(1, 8):
            for prob in (0.01, 0.25, 0.5, 0.9, 0.975, 0.999):
                q = linalg.chi2_quantile(prob, df)
                self.assertAlmostEqual(linalg.chi2_cdf(q, df), prob, places=9)

        with self.assertRaises(ValueError):
            linalg.chi2_quantile(1.0, 2)

    def test_log_det_examples(self):
        """Log determinants of small hand-checkable matrices"""
        self.assertAlmostEqual(linalg.log_det(linalg.cholesky(np.eye(3))), 0)
        self.assertAlmostEqual(linalg.log_det(linalg.cholesky(np.diag([4, 1]))), math.log(4))
        self.assertAlmostEqual(linalg.log_det(linalg.cholesky([[4, 2], [2, 2]])), math.log(4))

    def test_log_det_cofactor_oracle(self):
        """Log determinants agree with cofactor expansion"""
        rng = np.random.default_rng(11)
        for k in range(1, 5):
            b = rng.normal(size=(k + 2, k))
            a = b.T @ b + 0.1 * np.eye(k)

            expected = math.log(cofactor_det(a.tolist()))
            self.assertAlmostEqual(linalg.log_det(linalg.cholesky(a)), expected, places=10)

class TestFormula(unittest.TestCase):
    """Tests for roblev.formula"""

    def factors(self, spec):
        return [t.factors for t in spec.terms]

    def test_examples(self):
        """Parse the documented example formulas"""
        spec = parse_formula("~ Age10 + Base4 * Trt")
        self.assertEqual(self.factors(spec),
                         [("Age10",), ("Base4",), ("Trt",), ("Base4", "Trt")])
        self.assertTrue(spec.intercept)
        self.assertIsNone(spec.response)

        spec = parse_formula("~ 1")
        self.assertEqual(spec.terms, ())
        self.assertTrue(spec.intercept)

        spec = parse_formula("y ~ a + b - 1")
        self.assertEqual(spec.response, "y")
        self.assertEqual(self.factors(spec), [("a",), ("b",)])
        self.assertFalse(spec.intercept)

    def test_intercept_literals(self):
        """0 and -1 remove the intercept, 1 keeps it"""
        self.assertFalse(parse_formula("~ 0 + a").intercept)
        self.assertFalse(parse_formula("~ a + 0").intercept)
        self.assertFalse(parse_formula("~ -1 + a").intercept)
        self.assertTrue(parse_formula("~ a + 1").intercept)

    def test_chained_products(self):
        """a*b*c expands to all main effects and interactions"""
        spec = parse_formula("~ a*b*c")
        self.assertEqual(self.factors(spec),
                         [("a",), ("b",), ("c",), ("a", "b"), ("a", "c"),
                          ("b", "c"), ("a", "b", "c")])

    def test_parentheses(self):
        """(a + b) * c distributes over the sum"""
        spec = parse_formula("~ (a + b) * c")
        self.assertEqual(self.factors(spec),
                         [("a",), ("b",), ("c",), ("a", "c"), ("b", "c")])

    def test_duplicates(self):
        """Repeated terms are dropped irrespective of factor order"""
        spec = parse_formula("~ a:b + a + b:a + a")
        self.assertEqual(self.factors(spec), [("a",), ("a", "b")])

    def test_errors(self):
        """Malformed formulas raise FormulaError"""
        for text in ("", "  ", "a + b", "~", "~ a +", "~ a + + b", "~ (a + b",
                     "~ a - b", "~ (a + 1)", "~ a * 1", "~ 1a", "~ a b", "~ 2",
                     "~ a # b", "y ~ a ~ b"):
            with self.assertRaises(FormulaError, msg=text):
                parse_formula(text)

    def test_error_position(self):
        """Errors point at the offending character"""
        with self.assertRaises(FormulaError) as cm:
            parse_formula("~ a + ^b")

        self.assertEqual(cm.exception.pos, 6)
        self.assertIn("unknown operator", str(cm.exception))

    def test_tokenize(self):
        """Names may contain dots, underscores and digits"""
        texts = [t.text for t in tokenize("y~x.1+_z")]
        self.assertEqual(texts, ["y", "~", "x.1", "+", "_z", ""])

    def test_render(self):
        """Render in canonical form"""
        self.assertEqual(render(parse_formula("~ Age10 + Base4 * Trt")),
                         "~ Age10 + Base4 + Trt + Base4:Trt")
        self.assertEqual(render(parse_formula("y ~ 0 + a")), "y ~ a - 1")
        self.assertEqual(render(parse_formula("~ 1")), "~ 1")
        self.assertEqual(render(parse_formula("~ 0")), "~ 0")

    def test_round_trip(self):
        """Rendered formulas parse back to the same model"""
        rng = np.random.default_rng(5)
        names = ["a", "b", "c", "d"]

        def expr(depth):
            k = rng.integers(0, 4 if depth < 2 else 1)
            if k == 0:
                return str(rng.choice(names))
            elif k == 1:
                return F"{expr(depth + 1)}:{expr(depth + 1)}"
            elif k == 2:
                return F"{expr(depth + 1)} * {expr(depth + 1)}"
            return F"({expr(depth + 1)} + {expr(depth + 1)})"

        for _ in range(200):
            text = " + ".join(expr(0) for _ in range(rng.integers(1, 4)))
            if rng.random() < 0.3:
                text += " - 1"
            text = ("y ~ " if rng.random() < 0.5 else "~ ") + text

            spec = parse_formula(text)
            self.assertEqual(parse_formula(render(spec)), spec, msg=text)

class TestDataset(unittest.TestCase):
    """Tests for roblev.dataset"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def write(self, text, name="data.csv"):
        path = os.path.join(self.tmp.name, name)
        with open(path, "w", newline="") as f:
            f.write(text)
        return path

    def test_epilepsy(self):
        """The bundled fixture has the published shape and kinds"""
        data = load_epilepsy()

        self.assertEqual(data.n, 59)
        self.assertIs(data["Age10"].kind, ColumnKind.NUMERIC)
        self.assertIs(data["Base4"].kind, ColumnKind.NUMERIC)
        self.assertIs(data["Trt"].kind, ColumnKind.LABEL)
        self.assertEqual(data["Trt"].levels(), ("placebo", "progabide"))

        self.assertEqual(data["Age10"].values[:6], (3.1, 3.0, 2.5, 3.6, 2.2, 2.9))
        self.assertEqual(data["Base4"].values[:6], (2.75, 2.75, 1.5, 2.0, 16.5, 6.75))

    def test_ragged_row(self):
        """Ragged rows are reported with their data row number"""
        rows = ["a,b"] + ["1,2"] * 6 + ["1,2,3"] + ["4,5"]
        path = self.write("\n".join(rows) + "\n")

        with self.assertRaises(DataError) as cm:
            ingest_csv(path)

        self.assertIn("row 7", str(cm.exception))

    def test_missing_cell(self):
        """Blank cells are missing and rejected once the column is used"""
        path = self.write("x,z\n1,4\n2,5\n,6\n4,8\n5,1\n")
        data = ingest_csv(path)

        self.assertIs(data["x"].kind, ColumnKind.NUMERIC)
        self.assertEqual(data["x"].missing_rows(), (2,))

        with self.assertRaises(DataError) as cm:
            build_design(parse_formula("~ x"), data)
        self.assertIn("3", str(cm.exception))

        build_design(parse_formula("~ z"), data)

    def test_header_errors(self):
        """Duplicate, empty and absent headers are errors"""
        for text in ("a,a\n1,2\n", "a,\n1,2\n", "", "\n\n", "a,b\n"):
            with self.assertRaises(DataError, msg=repr(text)):
                ingest_csv(self.write(text))

    def test_unreadable(self):
        """Missing files are DataErrors"""
        with self.assertRaises(DataError):
            ingest_csv(os.path.join(self.tmp.name, "nope.csv"))

    def test_overrides(self):
        """Overrides force label columns, numeric labels sort numerically"""
        path = self.write("g,x\n10,1\n2,2\n1,3\n2,4\n")

        data = ingest_csv(path, ["g"])
        self.assertIs(data["g"].kind, ColumnKind.LABEL)
        self.assertEqual(data["g"].levels(), ("1", "2", "10"))

        with self.assertRaises(DataError):
            ingest_csv(path, ["h"])

    def test_quoting(self):
        """Quoted fields may contain the delimiter"""
        data = ingest_csv(self.write('g,x\n"a,b",1\nc,2\n'))
        self.assertEqual(data["g"].values, ("a,b", "c"))

    def test_non_decimal(self):
        """nan and inf make a column a label column"""
        data = ingest_csv(self.write("x\n1\nnan\n"))
        self.assertIs(data["x"].kind, ColumnKind.LABEL)

        with self.assertRaises(DataError):
            ingest_csv(self.write("x\n1\n1e999\n"))

class TestDesign(unittest.TestCase):
    """Tests for roblev.design"""

    @classmethod
    def setUpClass(cls):
        cls.epilepsy = build_design(parse_formula(EPILEPSY_FORMULA), load_epilepsy())

    def test_epilepsy(self):
        """Columns, first row and partition of the epilepsy design"""
        d = self.epilepsy

        self.assertEqual(d.x.shape, (59, 5))
        self.assertEqual(d.labels, ("(Intercept)", "Age10", "Base4",
                                    "Trtprogabide", "Base4:Trtprogabide"))
        assert_allclose(d.x[0], [1, 3.1, 2.75, 0, 0])
        self.assertEqual((d.p1, d.p2, d.p3), (2, 2, 1))
        self.assertEqual(tuple(c.part.block for c in d.columns), (1, 2, 2, 1, 3))
        self.assertTrue(d.has_intercept)

    def test_treatment_contrast(self):
        """A two level factor codes to one indicator"""
        data = Dataset.from_columns({"g": ["a", "a", "b", "b"]})
        d = build_design(parse_formula("~ g"), data)

        assert_array_equal(d.x, [[1, 0], [1, 0], [1, 1], [1, 1]])
        self.assertEqual(d.labels, ("(Intercept)", "gb"))

    def test_continuous(self):
        """A numeric column enters as is"""
        data = Dataset.from_columns({"x": [1, 2, 3, 4, 5]})
        d = build_design(parse_formula("~ x"), data)

        assert_array_equal(d.x[:, 1], [1, 2, 3, 4, 5])
        self.assertEqual((d.p1, d.p2, d.p3), (1, 1, 0))

    def test_classification(self):
        """Categorical products go to X1, continuous products to X2"""
        rng = np.random.default_rng(2)
        data = mixed_dataset(rng)

        d = build_design(parse_formula("~ a:b"), data)
        self.assertEqual(d.p, d.p1)

        d = build_design(parse_formula("~ x:z"), data)
        self.assertIs(d.columns[1].part, Part.CONTINUOUS)

        d = build_design(parse_formula("~ x * a"), data)
        self.assertEqual((d.p1, d.p2, d.p3), (3, 1, 2))
        self.assertEqual(d.labels[-2:], ("x:aa2", "x:aa3"))

    def test_column_count(self):
        """One column per intercept and per product of coded levels"""
        rng = np.random.default_rng(4)
        data = mixed_dataset(rng)
        levels = {"x": 1, "z": 1, "a": 2, "b": 1}

        for text in ("~ x", "~ a", "~ a * b", "~ x * a", "~ x:z + a:b",
                     "~ x * z * a - 1", "~ (x + z) * b"):
            spec = parse_formula(text)
            d = build_design(spec, data)

            expected = int(spec.intercept) + sum(math.prod(levels[f] for f in t.factors)
                                                 for t in spec.terms)
            self.assertEqual(d.p, expected, msg=text)
            self.assertEqual(d.p1 + d.p2 + d.p3, d.p, msg=text)

    def test_interaction_order(self):
        """The first factor's levels vary fastest"""
        rng = np.random.default_rng(6)
        d = build_design(parse_formula("~ a:b"), mixed_dataset(rng))
        self.assertEqual(d.labels[1:], ("aa2:bb2", "aa3:bb2"))

    def test_row_permutation(self):
        """Permuting the data rows permutes the design rows"""
        rng = np.random.default_rng(8)
        data = mixed_dataset(rng)
        perm = rng.permutation(data.n)

        permuted = Dataset.from_columns({c.name: [c.values[i] for i in perm]
                                         for c in data.columns})
        spec = parse_formula("~ x * a + z:b")
        assert_array_equal(build_design(spec, permuted).x, build_design(spec, data).x[perm])

    def test_errors(self):
        """Rank deficiency, single levels and small n are DesignErrors"""
        data = Dataset.from_columns({"x": [1, 2, 3, 4], "y": [2, 4, 6, 8],
                                     "g": ["a"] * 4, "h": ["a", "b", "a", "b"]})

        with self.assertRaises(DesignError) as cm:
            build_design(parse_formula("~ x + y"), data)
        self.assertIn("'y'", str(cm.exception))

        with self.assertRaises(DesignError):
            build_design(parse_formula("~ g"), data)
        with self.assertRaises(DesignError):
            build_design(parse_formula("~ x * h"), data)
        with self.assertRaises(DesignError):
            build_design(parse_formula("~ 0"), data)

    def test_missing_margin(self):
        """Mixed terms need their continuous column in the model"""
        data = mixed_dataset(np.random.default_rng(26))

        with self.assertRaises(DesignError) as cm:
            build_design(parse_formula("~ z + x:a"), data)
        self.assertIn("'x'", str(cm.exception))

        d = build_design(parse_formula("~ x + z:x + x:a + x:z:b"), data)
        self.assertEqual(d.p3, 3)

    def test_overflow(self):
        """Finite values whose cross products overflow are DesignErrors"""
        data = Dataset.from_columns({"x": np.arange(1, 31) * 1e200,
                                     "z": np.arange(30.0) % 7})
        with self.assertRaises(DesignError):
            build_design(parse_formula("~ x + z"), data)
        with self.assertRaises(DesignError):
            hat_values(np.column_stack([np.ones(30), data["x"].array()]))

    def test_unknown_variable(self):
        """Variables missing from the dataset are FormulaErrors"""
        data = Dataset.from_columns({"x": [1, 2, 3]})
        with self.assertRaises(FormulaError):
            build_design(parse_formula("~ w"), data)
        with self.assertRaises(FormulaError):
            build_design(parse_formula("y ~ x"), data)

class TestClassical(unittest.TestCase):
    """Tests for roblev.classical"""

    def test_hat_examples(self):
        """Hat values of small hand-checkable designs"""
        assert_allclose(hat_values(np.ones((4, 1))), [0.25] * 4)

        x = np.column_stack([np.ones(4), [0, 1, 2, 3]])
        assert_allclose(hat_values(x), [0.7, 0.3, 0.3, 0.7])
        self.assertLess(hat_md_relation_check(hat_values(x), mahalanobis(x[:, 1:]), 4, True), 1e-12)

    def test_epilepsy(self):
        """Hat values sum to p and relate to the distances"""
        d = build_design(parse_formula(EPILEPSY_FORMULA), load_epilepsy())
        diag = classical_diagnostics(d.x)

        self.assertTrue(np.all((diag.hat > 0) & (diag.hat < 1)))
        self.assertAlmostEqual(diag.hat.sum(), 5, places=10)
        self.assertTrue(np.all(np.isfinite(diag.md)))
        self.assertLess(hat_md_relation_check(diag.hat, diag.md, d.n, diag.has_intercept), 1e-10)

        reduced, removed = strip_constant(d.x)
        self.assertEqual(reduced.shape, (59, 4))
        assert_array_equal(removed, [True, False, False, False, False])

    def test_strip_constant(self):
        """Nothing is removed without constant columns, everything is an error"""
        x = np.array([[1.0, 2.0], [3.0, 5.0], [4.0, 1.0]])
        reduced, removed = strip_constant(x)
        assert_array_equal(reduced, x)
        self.assertFalse(removed.any())

        with self.assertRaises(DesignError):
            strip_constant(np.ones((3, 1)))

    def test_mahalanobis(self):
        """Distances of two points and the standardization identity"""
        assert_allclose(mahalanobis([[-1.0], [1.0]]), [1 / math.sqrt(2)] * 2)

        rng = np.random.default_rng(9)
        x = rng.normal(size=(30, 3))
        self.assertAlmostEqual(np.sum(mahalanobis(x) ** 2), 29 * 3, places=9)

    def test_singular_covariance(self):
        """Collinear columns make the covariance singular"""
        x = np.column_stack([[1.0, 2, 3, 4, 5], [2.0, 4, 6, 8, 10]])
        with self.assertRaises(ExactFitError):
            mahalanobis(x)

    def test_relation_random_designs(self):
        """Hat values and distances are related on random designs"""
        rng = np.random.default_rng(12)
        for _ in range(100):
            n = int(rng.integers(10, 201))
            p = int(rng.integers(2, 9))
            x = np.column_stack([np.ones(n), rng.normal(size=(n, p - 1))])

            diag = classical_diagnostics(x)
            self.assertAlmostEqual(diag.hat.sum(), p, places=10)
            self.assertLess(hat_md_relation_check(diag.hat, diag.md, n, True), 1e-10)

    def test_relation_needs_intercept(self):
        """The relation check refuses designs without constant column"""
        with self.assertRaises(ValueError):
            hat_md_relation_check(np.ones(3), np.ones(3), 3, False)

    def test_reparametrization(self):
        """Hat values only depend on the column space"""
        rng = np.random.default_rng(13)
        for _ in range(20):
            x = np.column_stack([np.ones(25), rng.normal(size=(25, 3))])
            r = rng.normal(size=(4, 4)) + 4 * np.eye(4)
            assert_allclose(hat_values(x @ r), hat_values(x), rtol=1e-8)

    def test_duplicated_row(self):
        """Duplicating a row never increases its hat value"""
        rng = np.random.default_rng(14)
        x = np.column_stack([np.ones(15), rng.normal(size=(15, 2))])
        hat = hat_values(x)

        for i in range(15):
            augmented = np.vstack([x, x[i]])
            self.assertLessEqual(hat_values(augmented)[i], hat[i] + 1e-12)

class TestMcd(unittest.TestCase):
    """Tests for roblev.mcd"""

    def test_c_step_example(self):
        """Concentration on 1-D data with a gross outlier"""
        x = np.array([[1.0], [2.0], [3.0], [4.0], [100.0]])

        step = c_step(x, [2, 3, 4])
        assert_array_equal(step, [1, 2, 3])
        assert_array_equal(c_step(x, step), [1, 2, 3])

        fit = fast_mcd(x)
        self.assertIs(fit.mode, SearchMode.ENUMERATE)
        self.assertEqual(fit.h, 3)
        self.assertEqual(fit.best_subset, (0, 1, 2))
        self.assertEqual(fit.weights[4], 0)

    def test_c_step_monotone(self):
        """The determinant never increases along C-steps"""
        rng = np.random.default_rng(15)
        for _ in range(20):
            x = rng.standard_t(3, size=(30, 2))
            subset = np.sort(rng.choice(30, 16, replace=False))

            for _ in range(10):
                new = c_step(x, subset)
                self.assertLessEqual(subset_logdet(x, new), subset_logdet(x, subset) + 1e-12)
                subset = new

    def test_subset_size(self):
        """Default h gives maximal breakdown, alpha 1 keeps all rows"""
        self.assertEqual(McdConfig().subset_size(59, 2), 31)
        self.assertEqual(McdConfig(alpha=1).subset_size(59, 2), 59)
        self.assertEqual(McdConfig(alpha=0.75).subset_size(100, 2), 75)

    def test_config_validation(self):
        """Out of range tunables are ConfigErrors"""
        for kwargs in ({"alpha": 0.4}, {"alpha": 1.1}, {"n_trials": 0},
                       {"reweight_prob": 1}, {"c_override": 0}, {"seed": -1},
                       {"c_override": math.inf}, {"c_override": math.nan}):
            with self.assertRaises(ConfigError, msg=kwargs):
                McdConfig(**kwargs)

    def test_exhaustive_oracle(self):
        """Enumeration finds the h-subset of smallest determinant"""
        for seed in range(10):
            rng = np.random.default_rng(100 + seed)
            n = 10 + seed % 3
            x = rng.normal(size=(n, 2))
            x[:2] += 8

            fit = fast_mcd(x)
            logdet, subset = exhaustive_mcd(x, fit.h)

            self.assertIs(fit.mode, SearchMode.ENUMERATE)
            self.assertAlmostEqual(fit.best_logdet, logdet, places=9)
            self.assertEqual(fit.best_subset, subset)

    def test_exhaustive_oracle_larger(self):
        """Enumeration up to n = 16, where C(16, 3) = 560 starts exist"""
        cfg = McdConfig(n_trials=math.comb(16, 3))
        for n in (15, 16):
            rng = np.random.default_rng(200 + n)
            x = rng.normal(size=(n, 2))
            x[:3] += 8

            fit = fast_mcd(x, cfg)
            logdet, subset = exhaustive_mcd(x, fit.h)

            self.assertIs(fit.mode, SearchMode.ENUMERATE)
            self.assertAlmostEqual(fit.best_logdet, logdet, places=9)
            self.assertEqual(fit.best_subset, subset)

        self.assertIs(fast_mcd(x).mode, SearchMode.RANDOM)

    def test_fixed_point(self):
        """Members of the best subset are closest under the raw estimate"""
        rng = np.random.default_rng(16)
        x = rng.normal(size=(50, 2))
        fit = fast_mcd(x)

        inside = np.zeros(50, dtype=bool)
        inside[list(fit.best_subset)] = True
        self.assertLessEqual(fit.raw_distances[inside].max(), fit.raw_distances[~inside].min())

    def test_scatter_is_scaled_weighted_covariance(self):
        """The scatter is the weighted covariance times c"""
        rng = np.random.default_rng(17)
        x = rng.normal(size=(40, 3))
        fit = fast_mcd(x)

        mean, cov = linalg.weighted_moments(x, fit.weights)
        assert_allclose(fit.location, mean, rtol=1e-12)
        assert_allclose(fit.scatter, cov * fit.c, rtol=1e-12)

    def test_all_weights_one(self):
        """Without far points the scatter is c times the sample covariance"""
        rng = np.random.default_rng(18)
        x = rng.uniform(-1, 1, size=(20, 2))
        fit = fast_mcd(x, McdConfig(reweight_prob=0.999999))

        assert_array_equal(fit.weights, np.ones(20))
        assert_allclose(fit.scatter, fit.c * np.cov(x.T), rtol=1e-12)

    def test_no_trimming(self):
        """alpha 1 keeps every row and applies no correction"""
        rng = np.random.default_rng(19)
        x = rng.normal(size=(25, 2))
        fit = fast_mcd(x, McdConfig(alpha=1))

        self.assertIs(fit.mode, SearchMode.FULL)
        self.assertEqual(fit.c, 1.0)
        assert_array_equal(fit.weights, np.ones(25))
        assert_allclose(fit.scatter, np.cov(x.T), rtol=1e-12)

    def test_determinism(self):
        """Identical data and seed give identical fits"""
        rng = np.random.default_rng(20)
        x = rng.normal(size=(60, 3))

        a, b = fast_mcd(x, McdConfig(seed=5)), fast_mcd(x, McdConfig(seed=5))
        self.assertIs(a.mode, SearchMode.RANDOM)
        self.assertEqual(a.best_subset, b.best_subset)
        assert_array_equal(a.scatter, b.scatter)
        assert_array_equal(a.weights, b.weights)

    def test_affine_equivariance(self):
        """Location and scatter transform with the data"""
        rng = np.random.default_rng(21)
        x = rng.normal(size=(40, 2))
        a = np.array([[2.0, 0.5], [-1.0, 3.0]])
        b = np.array([5.0, -2.0])

        fx, fy = fast_mcd(x), fast_mcd(x @ a.T + b)

        self.assertEqual(fx.best_subset, fy.best_subset)
        assert_allclose(fy.location, a @ fx.location + b, rtol=1e-8)
        assert_allclose(fy.scatter, a @ fx.scatter @ a.T, rtol=1e-8, atol=1e-10)

    def test_breakdown(self):
        """Planted gross outliers barely move the robust location"""
        rng = np.random.default_rng(22)
        clean = rng.normal([10.0, 20.0], 1.0, size=(100, 2))
        dirty = clean.copy()
        dirty[:20] *= 1000

        f0, f1 = fast_mcd(clean), fast_mcd(dirty)
        shift = np.linalg.norm(f1.location - f0.location) / np.linalg.norm(f0.location)
        self.assertLess(shift, 0.05)
        self.assertTrue(np.all(f1.weights[:20] == 0))

        moved = np.linalg.norm(dirty.mean(axis=0) - clean.mean(axis=0)) / np.linalg.norm(clean.mean(axis=0))
        self.assertGreater(moved, 1)

    def test_exact_fit(self):
        """Constant columns and too few rows are exact fits"""
        x = np.column_stack([np.ones(10), np.arange(10.0)])
        with self.assertRaises(ExactFitError) as cm:
            fast_mcd(x)
        self.assertEqual(cm.exception.subset, tuple(range(10)))

        with self.assertRaises(ExactFitError):
            fast_mcd(np.eye(3))

    def test_consistency_factor(self):
        """Consistency factors against numeric integration"""
        def oracle(alpha, p):
            q = linalg.chi2_quantile(alpha, p)
            dens = lambda t: t ** (p / 2 - 1) * math.exp(-t / 2) / (2 ** (p / 2) * math.gamma(p / 2))
            moment, _ = integrate.quad(lambda t: t * dens(t), 0, q)
            return alpha / (moment / p)

        for p in (1, 2, 3, 5):
            for alpha in (0.5, 0.75, 0.9):
                self.assertAlmostEqual(consistency_factor(alpha, p) / oracle(alpha, p), 1, places=7)

        self.assertEqual(consistency_factor(1, 2), 1.0)
        self.assertTrue(2 < consistency_factor(0.5, 2) < 3.5)

        grid = [consistency_factor(a, 2) for a in np.linspace(0.5, 0.99, 20)]
        self.assertTrue(all(x > y for x, y in zip(grid, grid[1:])))

    def test_small_sample_factor(self):
        """Small sample factors are at least 1 and tend to 1"""
        self.assertEqual(small_sample_factor(59, 2, Stage.RAW, enabled=False), 1.0)
        self.assertEqual(small_sample_factor(59, 2, Stage.REWEIGHTED, alpha=1), 1.0)

        # 1 / f of the fitted curves at n = 59, p = 2
        self.assertAlmostEqual(small_sample_factor(59, 2, Stage.RAW), 1.1325, delta=2e-3)
        self.assertAlmostEqual(small_sample_factor(59, 2, Stage.REWEIGHTED), 1.0092, delta=2e-4)

        for stage in Stage:
            self.assertTrue(1 <= small_sample_factor(59, 2, stage) <= 1.15)
        self.assertAlmostEqual(small_sample_factor(10000, 2, Stage.REWEIGHTED), 1, delta=1e-3)
        self.assertLess(small_sample_factor(10000, 2, Stage.RAW), 1.005)

        for stage in Stage:
            for p in range(1, 6):
                for alpha in (0.5, 0.7, 0.9):
                    factors = [small_sample_factor(n, p, stage, alpha)
                               for n in (2 * p + 10, 50, 200, 1000)]
                    self.assertTrue(all(f >= 1 for f in factors))

    def test_epilepsy_scatter(self):
        """The epilepsy scatter matches the published one"""
        fit = epilepsy_analysis().fit

        assert_allclose(fit.scatter, PUBLISHED_SCATTER, rtol=1e-5)
        self.assertEqual(fit.h, 31)
        self.assertEqual(fit.weights.sum(), 42)

class TestRobust(unittest.TestCase):
    """Tests for roblev.robust"""

    @classmethod
    def setUpClass(cls):
        cls.epilepsy = epilepsy_analysis()

    def test_modify_example(self):
        """Hand computed modification of 1-D data"""
        x2 = np.array([[1.0], [2.0], [3.0], [4.0], [100.0]])
        fit = make_fit([2.5], [[5 / 3]], [1, 1, 1, 1, 0], 1.0)

        x2_tilde, scale = modify_x2(x2, fit)
        self.assertAlmostEqual(scale, math.sqrt(4 / 3))
        assert_allclose(x2_tilde[:, 0],
                        2.5 + math.sqrt(4 / 3) * np.array([-1.5, -0.5, 0.5, 1.5, 0]))
        self.assertEqual(x2_tilde[4, 0], 2.5)
        self.assertAlmostEqual(np.var(x2_tilde[:, 0], ddof=1), 5 / 3)

    def test_identity_configuration(self):
        """Unit weights and c = 1 leave X2 unchanged"""
        rng = np.random.default_rng(23)
        x2 = rng.normal(size=(12, 2))
        mean, cov = linalg.weighted_moments(x2, np.ones(12))

        x2_tilde, scale = modify_x2(x2, make_fit(mean, cov, np.ones(12), 1.0))
        self.assertEqual(scale, 1.0)
        assert_allclose(x2_tilde, x2, rtol=1e-14, atol=1e-14)

        mean_gap, cov_gap = verify_equivalence(x2_tilde, make_fit(mean, cov, np.ones(12), 1.0))
        self.assertLess(max(mean_gap, cov_gap), 1e-14)

    def test_equivalence(self):
        """Plain moments of X2~ are the weighted moments"""
        rng = np.random.default_rng(24)
        for _ in range(200):
            p2 = int(rng.integers(1, 4))
            n = int(rng.integers(10, 51))
            x2 = rng.normal(size=(n, p2)) * rng.uniform(0.1, 10, size=p2)

            w = (rng.random(n) < 0.7).astype(float)
            w[:p2 + 2] = 1
            c = rng.uniform(0.5, 2)

            mean, cov = linalg.weighted_moments(x2, w)
            fit = make_fit(mean, c * cov, w, c)
            x2_tilde, _ = modify_x2(x2, fit)

            assert_array_equal(x2_tilde[w == 0], np.broadcast_to(mean, x2_tilde[w == 0].shape))
            mean_gap, cov_gap = verify_equivalence(x2_tilde, fit)
            self.assertLess(mean_gap, 1e-10 * (1 + np.abs(mean).max()))
            self.assertLess(cov_gap, 1e-10 * np.abs(fit.scatter).max())

    def test_too_few_weights(self):
        """Fewer than p2 + 2 unit weights cannot be modified"""
        x2 = np.arange(12.0).reshape(6, 2) ** 1.5
        fit = make_fit([1, 1], np.eye(2), [1, 1, 1, 0, 0, 0], 1.0)

        with self.assertRaises(ModifiedDesignError):
            modify_x2(x2, fit)

    def test_epilepsy_moments(self):
        """The modified epilepsy block reproduces the published scatter"""
        mod = self.epilepsy.modified

        assert_allclose(np.cov(mod.x2_tilde.T), PUBLISHED_SCATTER, rtol=1e-5)
        mean_gap, cov_gap = verify_equivalence(mod.x2_tilde, self.epilepsy.fit)
        self.assertLess(mean_gap, 1e-10)
        self.assertLess(cov_gap, 1e-9)

    def test_epilepsy_interactions(self):
        """X3~ is Base4~ times the treatment indicator"""
        x_tilde = self.epilepsy.modified.x_tilde
        placebo = np.arange(59) < 28

        assert_array_equal(x_tilde[placebo, 4], 0)
        assert_allclose(x_tilde[~placebo, 4], x_tilde[~placebo, 2])
        assert_array_equal(x_tilde[:, [0, 3]], self.epilepsy.design.x[:, [0, 3]])

    def test_rebuild_without_interactions(self):
        """Designs without X3 yield an empty block"""
        rng = np.random.default_rng(25)
        d = build_design(parse_formula("~ x + a"), mixed_dataset(rng))
        self.assertEqual(rebuild_interactions(d, d.block(2)).shape, (60, 0))

    def test_epilepsy_hats(self):
        """Published hat values are the classical ones, robust hats grow for rejected rows"""
        report = self.epilepsy.report

        assert_allclose(report.classical_hat, PUBLISHED_HAT, rtol=1e-6)
        self.assertEqual(list(np.argsort(-report.classical_hat)[:2]), [48, 17])

        hat = report.robust_hat
        self.assertTrue(np.all(hat > 0))
        self.assertEqual(set(np.argsort(-hat)[:2]), {48, 17})
        for i in (48, 17):
            self.assertEqual(self.epilepsy.fit.weights[i], 0)
            self.assertGreater(hat[i], 1)
            self.assertGreater(hat[i], report.classical_hat[i])

    def test_intercept_relation(self):
        """Robust hats and distances are related through the intercept"""
        report = self.epilepsy.report
        gap = hat_md_relation_check(report.robust_hat, report.robust_rd, 59, True)
        self.assertLess(gap, 1e-10)

    def test_classical_reduction(self):
        """Unit weights and c = 1 give the classical diagnostics"""
        cfg = McdConfig(alpha=1, c_override=1)
        designs = [(load_epilepsy(), EPILEPSY_FORMULA)]

        rng = np.random.default_rng(27)
        designs += [(mixed_dataset(rng, 40), "~ x * a + z") for _ in range(20)]

        for data, formula in designs:
            report = analyse(RunConfig(formula, mcd=cfg), data).report
            assert_allclose(report.robust_hat, report.classical_hat, rtol=1e-10)
            assert_allclose(report.robust_rd, report.classical_md, rtol=1e-10)

    def test_intercept_only(self):
        """Intercept-only designs have all hat values 1/n"""
        rng = np.random.default_rng(28)
        report = analyse(RunConfig("~ 1"), mixed_dataset(rng, 30)).report

        assert_allclose(report.robust_hat, np.full(30, 1 / 30))
        assert_allclose(report.classical_hat, np.full(30, 1 / 30))
        assert_array_equal(report.robust_rd, np.zeros(30))

    def test_categorical_only(self):
        """Without continuous columns robust and classical values agree"""
        rng = np.random.default_rng(29)
        analysis = analyse(RunConfig("~ a * b"), mixed_dataset(rng))

        self.assertIsNone(analysis.fit)
        assert_allclose(analysis.report.robust_hat, analysis.report.classical_hat)

    def test_continuous_only(self):
        """With only continuous columns RD is the robust distance"""
        rng = np.random.default_rng(30)
        data = mixed_dataset(rng, 50)
        analysis = analyse(RunConfig("~ x + z"), data)

        fit = analysis.fit
        x2 = analysis.design.block(2)
        direct = np.sqrt(linalg.cholesky(fit.scatter).quad_form(x2 - fit.location))
        assert_allclose(analysis.report.robust_rd, direct, rtol=1e-9)

    def test_downweighted_outlier(self):
        """A rejected outlier gets a larger robust than classical hat"""
        rng = np.random.default_rng(31)
        x = rng.normal(size=40)
        z = rng.normal(size=40)
        x[7], z[7] = 50, 50

        data = Dataset.from_columns({"x": x, "z": z})
        analysis = analyse(RunConfig("~ x + z"), data)

        self.assertEqual(analysis.fit.weights[7], 0)
        self.assertGreater(analysis.report.robust_hat[7], analysis.report.classical_hat[7])

    def test_reused_modification(self):
        """robust_hat and robust_distance only depend on their inputs"""
        a = self.epilepsy
        mod = modified_design(a.design, a.fit)
        assert_array_equal(robust_hat(a.design, mod), a.report.robust_hat)
        assert_array_equal(robust_distance(a.design, mod), a.report.robust_rd)

class TestReport(unittest.TestCase):
    """Tests for roblev.report"""

    @classmethod
    def setUpClass(cls):
        cls.epilepsy = epilepsy_analysis()

    def test_flags(self):
        """The default cutoff 2p/n flags the two largest observations"""
        report = self.epilepsy.report

        self.assertAlmostEqual(report.flag_cutoff, 10 / 59)
        self.assertTrue(report.flagged[48] and report.flagged[17])
        assert_array_equal(report.flagged, report.robust_hat > 10 / 59)
        self.assertFalse(report.flagged.all())

    def test_csv_structure(self):
        """Metadata comments, header and one row per observation"""
        lines = render_csv(self.epilepsy.report).splitlines()

        meta = [l for l in lines if l.startswith("#")]
        body = [l for l in lines if not l.startswith("#")]
        self.assertEqual(lines[:len(meta)], meta)
        self.assertEqual(body[0], ",".join(FIELDS))
        self.assertEqual(len(body), 60)
        self.assertTrue(body[1].startswith("1,"))

        keys = [l[2:].split(":")[0] for l in meta]
        for key in ("n", "p", "p1", "p2", "p3", "h", "sum_w", "c", "seed", "version"):
            self.assertIn(key, keys)

    def test_json_matches_csv(self):
        """JSON and CSV carry the same numbers"""
        report = self.epilepsy.report
        doc = json.loads(render_json(report))
        rows = [l.split(",") for l in render_csv(report).splitlines() if not l.startswith("#")]

        self.assertEqual(doc["meta"]["n"], 59)
        self.assertEqual(len(doc["observations"]), 59)
        for obs, row in zip(doc["observations"], rows[1:]):
            for name, text in zip(rows[0], row):
                self.assertEqual(F"{float(text):.10g}", F"{float(obs[name]):.10g}")

    def test_reassembly(self):
        """Assembling twice gives the same ordering and values"""
        a = self.epilepsy
        again = assemble_report(a.design, a.classical, a.fit, a.modified,
                                meta=a.report.meta)
        self.assertEqual(render_csv(again), render_csv(a.report))

    def test_dimension_mismatch(self):
        """Diagnostics of another design are rejected"""
        a = self.epilepsy
        other = classical_diagnostics(a.design.x[:30])
        with self.assertRaises(ValueError):
            assemble_report(a.design, other, a.fit, a.modified)

    def test_unwritable(self):
        """Directories and missing parents cannot be written"""
        with tempfile.TemporaryDirectory() as tmp:
            for dest in (tmp, os.path.join(tmp, "missing", "out.csv")):
                with self.assertRaises(ConfigError):
                    emit_report(self.epilepsy.report, "csv", dest)

class TestCli(unittest.TestCase):
    """Tests for roblev.__main__"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.out = os.path.join(self.tmp.name, "out")

    def tearDown(self):
        self.tmp.cleanup()

    def write(self, text, name="data.csv"):
        path = os.path.join(self.tmp.name, name)
        with open(path, "w", newline="") as f:
            f.write(text)
        return path

    def run_main(self, *argv):
        stderr = io.StringIO()
        with contextlib.redirect_stderr(stderr):
            code = main(list(argv))
        return code, stderr.getvalue()

    def read_rows(self, path):
        with open(path) as f:
            lines = [l.rstrip("\n") for l in f if not l.startswith("#")]
        return [dict(zip(lines[0].split(","), l.split(","))) for l in lines[1:]]

    def test_epilepsy(self):
        """A default run on the epilepsy data"""
        code, _ = self.run_main("--data", epilepsy_path(), "--formula", EPILEPSY_FORMULA,
                                "--seed", "1", "--out", self.out)
        self.assertEqual(code, 0)

        rows = self.read_rows(self.out)
        self.assertEqual(len(rows), 59)
        self.assertAlmostEqual(float(rows[48]["classical_hat"]) / 0.64794379, 1, delta=1e-6)
        self.assertGreater(float(rows[48]["robust_hat"]), float(rows[48]["classical_hat"]))
        self.assertEqual(rows[48]["flagged"], "1")

    def test_byte_determinism(self):
        """Identical invocations write identical bytes"""
        outputs = []
        for i in range(2):
            out = F"{self.out}{i}"
            code, _ = self.run_main("--data", epilepsy_path(), "--formula", EPILEPSY_FORMULA,
                                    "--format", "json", "--out", out)
            self.assertEqual(code, 0)
            with open(out, "rb") as f:
                outputs.append(f.read())

        self.assertEqual(outputs[0], outputs[1])

    def test_no_trimming(self):
        """--alpha 1 --c-override 1 reproduces the classical hat values"""
        code, _ = self.run_main("--data", epilepsy_path(), "--formula", EPILEPSY_FORMULA,
                                "--alpha", "1", "--c-override", "1", "--out", self.out)
        self.assertEqual(code, 0)

        for row in self.read_rows(self.out):
            self.assertAlmostEqual(float(row["robust_hat"]), float(row["classical_hat"]), places=9)
            self.assertEqual(row["mcd_weight"], "1")

    def test_exit_codes(self):
        """Each failure exits with its documented code"""
        ragged = self.write("x,z\n1,2\n3\n", "ragged.csv")
        good = self.write("x,z,c\n1,2,5\n2,1,5\n3,5,5\n4,3,5\n5,8,5\n6,2,5\n", "good.csv")
        huge = self.write("x,z\n" + "".join(F"{i}e200,{i % 7}\n" for i in range(1, 31)),
                          "huge.csv")

        cases = [
            (3, ["--data", ragged, "--formula", "~ x"]),
            (3, ["--data", os.path.join(self.tmp.name, "none.csv"), "--formula", "~ x"]),
            (4, ["--data", good, "--formula", "~ x ^ 2"]),
            (4, ["--data", good, "--formula", "~ w"]),
            (5, ["--data", good, "--formula", "~ x + c"]),
            (6, ["--data", good, "--formula", "~ c + z - 1"]),
            (2, ["--data", good, "--formula", "~ x", "--alpha", "0.2"]),
            (2, ["--data", good, "--formula", "~ x", "--out", self.tmp.name]),
            (5, ["--data", huge, "--formula", "~ x + z"]),
            (2, ["--data", good, "--formula", "~ x", "--c-override", "inf"]),
            (2, ["--data", good, "--formula", "~ x", "--flag-cutoff", "nan"]),
        ]
        for expected, argv in cases:
            code, err = self.run_main(*argv)
            self.assertEqual(code, expected, msg=argv)
            self.assertTrue(err.startswith("roblev: "), msg=err)

    def test_usage(self):
        """Missing arguments are usage errors"""
        with contextlib.redirect_stderr(io.StringIO()):
            with self.assertRaises(SystemExit) as cm:
                main(["--formula", "~ x"])
        self.assertEqual(cm.exception.code, 2)

    def test_environment_defaults(self):
        """Seed and trial defaults come from the environment"""
        with mock.patch.dict(os.environ, {"ROBLEV_SEED": "7", "ROBLEV_NTRIALS": "42"}):
            args = get_parser().parse_args([])
        self.assertEqual((args.seed, args.ntrials), (7, 42))

        with mock.patch.dict(os.environ, {"ROBLEV_SEED": "7"}):
            args = get_parser().parse_args(["--seed", "3"])
        self.assertEqual(args.seed, 3)

    def test_fuzz(self):
        """Malformed input never escapes as a traceback"""
        rng = np.random.default_rng(32)
        cells = ["1", "2.5", "-3", "", "a", "b", '"x,y"', "7", "0",
                 "1e200", "-3e250", "1e-300", "1e308"]
        formulas = ["~ a", "~ b", "~ a * b", "~ a:b - 1", "~ (a", "~ a +", "y ~ a",
                    "~ a * 1", "~ a ^ b", "~ 1", "~ a + b + c"]

        for _ in range(60):
            ncols = int(rng.integers(1, 4))
            header = ",".join(["a", "b", "c"][:ncols])
            rows = [",".join(rng.choice(cells, size=int(rng.integers(ncols - 1, ncols + 2))))
                    for _ in range(int(rng.integers(0, 12)))]
            path = self.write("\n".join([header] + rows) + "\n")

            code, _ = self.run_main("--data", path, "--formula", str(rng.choice(formulas)),
                                    "--out", self.out)
            self.assertIn(code, (0, 2, 3, 4, 5, 6, 7))

    def test_reproduce_paper(self):
        """The bundled reproduction passes"""
        stdout = io.StringIO()
        with contextlib.redirect_stdout(stdout):
            code, _ = self.run_main("--reproduce-paper")

        self.assertEqual(code, 0, msg=stdout.getvalue())
        self.assertIn("observation 49", stdout.getvalue())
        self.assertNotIn("FAIL", stdout.getvalue())

if __name__ == '__main__':
    unittest.main()
