# Copyright (C) 2026 The ltrcreg developers.
# This file is part of ltrcreg.
#
# ltrcreg is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 2 of the License, or
# (at your option) any later version.
#
# ltrcreg is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with ltrcreg.  If not, see <http://www.gnu.org/licenses/>.

"""Tests for the product-limit estimators."""

import math
from unittest import TestCase
from unittest.mock import patch

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from parameterized import parameterized

from ltrcreg.datagen import SimulationConfig, simulate
from ltrcreg.errors import EstimationImpossibleError, GridMismatchError
from ltrcreg.functional_core import Curve, Grid
from ltrcreg.survival import (
    LTRCRecord,
    LTRCSample,
    StepFunction,
    alpha_n,
    lynden_bell_L,
    records_from_arrays,
    risk_counts,
    risk_set_fraction,
    support_diagnostics,
    tjw_F,
    tjw_G,
)


GRID = Grid.equidistant(5)


def make_sample(z, t, delta):
    """Build a sample with flat curves from parallel sequences."""
    curves = [Curve(GRID, np.full(GRID.count, float(i))) for i in range(len(z))]
    return records_from_arrays(curves, z, t, delta)


def random_sample(seed, size=None, ties=False):
    """Draw an arbitrary valid sample."""
    rng = np.random.default_rng(seed)
    n = size or int(rng.integers(1, 30))
    t = rng.uniform(0.0, 2.0, n)
    if ties:
        t = np.floor(t * 2) / 2
        z = t + rng.integers(1, 4, n) * 0.5
    else:
        z = t + rng.exponential(1.0, n) + 0.01
    return make_sample(z, t, rng.integers(0, 2, n))


def permuted(sample, seed):
    """Return the sample with its records shuffled."""
    order = np.random.default_rng(seed).permutation(sample.n)
    return LTRCSample(tuple(sample.records[i] for i in order))


class TestRecords(TestCase):
    """Test validation of records and samples."""

    @parameterized.expand(
        [
            ("truncated", 1.0, 2.0, 1),
            ("zero_lifetime", 0.0, -1.0, 1),
            ("infinite_lifetime", math.inf, 0.0, 1),
            ("nan_truncation", 1.0, math.nan, 1),
            ("bad_indicator", 1.0, 0.0, 2),
        ]
    )
    def test_invalid_record(self, _, z, t, delta):
        """Test rejecting records which can't be observed."""
        with self.assertRaises(ValueError):
            LTRCRecord(Curve(GRID, np.zeros(5)), z, t, delta)

    def test_untruncated_record(self):
        """Test that -inf marks a record without truncation."""
        record = LTRCRecord(Curve(GRID, np.zeros(5)), 1.0, -math.inf, 0)
        self.assertEqual(record.t, -math.inf)

    def test_empty_sample(self):
        """Test rejecting samples without records."""
        with self.assertRaises(ValueError):
            LTRCSample(())

    def test_grid_mismatch(self):
        """Test rejecting samples mixing grids."""
        records = (
            LTRCRecord(Curve(GRID, np.zeros(5)), 1.0, 0.0, 1),
            LTRCRecord(Curve(Grid.equidistant(6), np.zeros(6)), 2.0, 0.0, 1),
        )
        with self.assertRaises(GridMismatchError):
            LTRCSample(records)

    def test_with_record(self):
        """Test appending a record without changing the sample."""
        sample = make_sample([1.0, 2.0], [0.0, 0.0], [1, 1])
        extended = sample.with_record(LTRCRecord(Curve(GRID, np.ones(5)), 3.0, 0.0, 1))
        self.assertEqual(sample.n, 2)
        self.assertEqual(extended.n, 3)
        np.testing.assert_array_equal(extended.z, [1.0, 2.0, 3.0])


class TestStepFunction(TestCase):
    """Test right-continuous step functions."""

    def setUp(self):
        """Set up a function with two jumps."""
        self.step = StepFunction([1.0, 2.0], [0.5, 1.0], initial=0.0)

    @parameterized.expand([(0.5, 0.0), (1.0, 0.5), (1.5, 0.5), (2.0, 1.0), (9.0, 1.0)])
    def test_values(self, y, expected):
        """Test evaluation on and between the jumps."""
        self.assertEqual(self.step(y), expected)

    @parameterized.expand([(1.0, 0.0), (2.0, 0.5), (1.5, 0.5)])
    def test_left_limits(self, y, expected):
        """Test left limits at and between the jumps."""
        self.assertEqual(self.step.left_limit(y), expected)

    def test_vectorized(self):
        """Test evaluating several points at once."""
        np.testing.assert_array_equal(self.step(np.array([0.0, 1.0, 3.0])), [0.0, 0.5, 1.0])

    def test_unsorted_locations(self):
        """Test rejecting jumps which aren't increasing."""
        with self.assertRaises(ValueError):
            StepFunction([2.0, 1.0], [0.5, 1.0])

    def test_lookup_table_built_once(self):
        """Test that evaluations don't rebuild the table of values."""
        step = StepFunction(np.arange(1.0, 10_001.0), np.linspace(0.0, 1.0, 10_000))
        with patch.object(np, "concatenate", wraps=np.concatenate) as concatenate:
            values = [step(y) for y in (0.5, 1.0, 5000.5, 20_000.0)]
            step.left_limit(np.arange(0.5, 10_001.0))
        concatenate.assert_not_called()
        self.assertEqual(values[0], 0.0)
        self.assertEqual(values[-1], 1.0)
        self.assertEqual(values[2], step.values[4999])


class TestRiskSet(TestCase):
    """Test the risk-set fraction C_n."""

    def setUp(self):
        """Set up a sample with staggered entries."""
        self.sample = make_sample([2.0, 3.0, 4.0], [0.0, 1.0, 2.0], [1, 1, 1])

    @parameterized.expand([(1.5, 2 / 3), (2.0, 1.0), (-1.0, 0.0), (4.0, 1 / 3), (4.5, 0.0)])
    def test_values(self, y, expected):
        """Test that both ends of the risk interval count."""
        self.assertAlmostEqual(risk_set_fraction(self.sample, y), expected, places=12)

    def test_sorted_once(self):
        """Test that repeated risk counts reuse the sorted times."""
        risk_counts(self.sample, 1.0)
        with patch.object(np, "sort", wraps=np.sort) as sort:
            counts = risk_counts(self.sample, np.array([1.5, 2.0, 4.5]))
            risk_counts(self.sample, 3.0)
        sort.assert_not_called()
        np.testing.assert_array_equal(counts, [2, 3, 0])


class TestTJW(TestCase):
    """Test the TJW estimators of both distributions."""

    def test_complete_data(self):
        """Test the lifetime distribution without censoring."""
        F = tjw_F(make_sample([1.0, 2.0, 3.0], [0.0] * 3, [1, 1, 1]))  # noqa: N806
        for y, expected in ((0.5, 0.0), (1.0, 1 / 3), (2.0, 2 / 3), (2.5, 2 / 3), (3.0, 1.0)):
            self.assertAlmostEqual(F(y), expected, places=12)

    def test_censored_record(self):
        """Test that a censored record only shrinks the risk set."""
        sample = make_sample([1.0, 2.0, 3.0], [0.0] * 3, [1, 0, 1])
        F, G = tjw_F(sample), tjw_G(sample)  # noqa: N806
        for y in (1.0, 2.0, 2.9):
            self.assertAlmostEqual(F(y), 1 / 3, places=12)
        self.assertEqual(F(3.0), 1.0)
        self.assertEqual(G(1.9), 0.0)
        self.assertEqual(G(2.0), 0.5)
        self.assertEqual(G(3.0), 0.5)

    def test_without_censoring(self):
        """Test that G_n vanishes without censored records."""
        G = tjw_G(make_sample([1.0, 2.0], [0.0, 0.0], [1, 1]))  # noqa: N806
        self.assertEqual(G(100.0), 0.0)

    def test_single_record(self):
        """Test the estimators of a single uncensored record."""
        sample = make_sample([2.0], [1.0], [1])
        self.assertEqual(tjw_F(sample)(1.9), 0.0)
        self.assertEqual(tjw_F(sample)(2.0), 1.0)

    @given(st.integers(min_value=0, max_value=2**32 - 1))
    def test_empirical_without_truncation(self, seed):
        """Test that F_n is the empirical CDF for complete data."""
        rng = np.random.default_rng(seed)
        z = rng.exponential(1.0, 20) + 0.01
        F = tjw_F(make_sample(z, np.full(20, -math.inf), np.ones(20, dtype=int)))  # noqa: N806
        points = np.sort(z)
        np.testing.assert_allclose(F(points), np.arange(1, 21) / 20, atol=1e-12)

    def test_censoring_empirical_without_truncation(self):
        """Test that G_n is the empirical CDF under full censoring."""
        z = np.array([0.5, 1.5, 2.0, 4.0])
        G = tjw_G(make_sample(z, np.zeros(4), np.zeros(4, dtype=int)))  # noqa: N806
        np.testing.assert_allclose(G(z), [0.25, 0.5, 0.75, 1.0], atol=1e-12)

    @given(st.integers(min_value=0, max_value=2**32 - 1), st.booleans())
    def test_monotone_and_bounded(self, seed, ties):
        """Test that the estimates are distribution functions."""
        sample = random_sample(seed, ties=ties)
        points = np.linspace(-1.0, 8.0, 200)
        for estimator in (tjw_F, tjw_G):
            values = estimator(sample)(points)
            self.assertTrue(np.all(np.diff(values) >= 0))
            self.assertTrue(np.all((values >= 0) & (values <= 1)))

    @given(st.integers(min_value=0, max_value=2**32 - 1), st.booleans())
    def test_order_invariance(self, seed, ties):
        """Test that shuffling the records doesn't change anything."""
        sample = random_sample(seed, ties=ties)
        shuffled = permuted(sample, seed)
        points = np.linspace(-1.0, 8.0, 91)
        for estimator in (tjw_F, tjw_G, lynden_bell_L):
            np.testing.assert_array_equal(
                estimator(sample)(points), estimator(shuffled)(points)
            )


class TestLyndenBell(TestCase):
    """Test the Lynden-Bell estimator of the truncation distribution."""

    def test_common_truncation_time(self):
        """Test three records truncated at the same time."""
        L = lynden_bell_L(make_sample([1.0, 2.0, 3.0], [0.0] * 3, [1, 1, 1]))  # noqa: N806
        self.assertAlmostEqual(L(-1.0), 8 / 27, places=12)
        self.assertEqual(L(0.0), 1.0)
        self.assertEqual(L(5.0), 1.0)

    def test_staggered_truncation(self):
        """Test a factor from a later truncation time."""
        L = lynden_bell_L(make_sample([1.0, 2.0], [0.0, 0.5], [1, 1]))  # noqa: N806
        self.assertAlmostEqual(L(0.25), 0.5, places=12)
        self.assertEqual(L(-1.0), 0.0)
        self.assertEqual(L(0.5), 1.0)

    def test_untruncated_records(self):
        """Test that records without truncation give no factor."""
        L = lynden_bell_L(make_sample([1.0, 2.0], [-math.inf, -math.inf], [1, 0]))  # noqa: N806
        self.assertEqual(L(-1e9), 1.0)

    @given(st.integers(min_value=0, max_value=2**32 - 1), st.booleans())
    def test_monotone_and_bounded(self, seed, ties):
        """Test that the estimate is a distribution function."""
        values = lynden_bell_L(random_sample(seed, ties=ties))(np.linspace(-1.0, 8.0, 200))
        self.assertTrue(np.all(np.diff(values) >= 0))
        self.assertTrue(np.all((values >= 0) & (values <= 1)))


class TestAlpha(TestCase):
    """Test the estimate of the probability of not being truncated."""

    def test_complete_data(self):
        """Test that alpha_n is 1 without censoring and truncation."""
        z = np.random.default_rng(3).exponential(1.0, 30) + 0.1
        estimate = alpha_n(make_sample(z, np.zeros(30), np.ones(30, dtype=int)))
        self.assertAlmostEqual(estimate.value, 1.0, places=10)
        self.assertLessEqual(estimate.spread, 1e-10)
        self.assertEqual(estimate.degenerate_points, 0)

    def test_single_record(self):
        """Test a sample of one record."""
        self.assertEqual(alpha_n(make_sample([2.0], [1.0], [1])).value, 1.0)

    def test_every_point_degenerate(self):
        """Test a sample where every point has a zero factor."""
        sample = make_sample([1.0, 2.0], [0.0, 1.5], [1, 1])
        with self.assertRaises(EstimationImpossibleError):
            alpha_n(sample)

    @parameterized.expand([(1,), (2,), (3,), (4,), (5,)])
    def test_same_value_everywhere(self, seed):
        """Test that alpha_n doesn't depend on the evaluation point."""
        sample = simulate(SimulationConfig(n=50, mu=0.02, lam=11.0, seed=seed)).sample
        estimate = alpha_n(sample)
        self.assertLessEqual(estimate.spread, 1e-10)
        self.assertGreater(estimate.value, 0.0)
        self.assertLessEqual(estimate.value, 1.0)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(min_value=0, max_value=2**32 - 1))
    def test_same_value_on_many_samples(self, seed):
        """Test the spread of alpha_n across points on many samples."""
        sample = simulate(SimulationConfig(n=50, mu=0.02, lam=11.0, seed=seed)).sample
        try:
            estimate = alpha_n(sample)
        except EstimationImpossibleError:
            return
        self.assertLessEqual(estimate.spread, 1e-10)
        self.assertGreater(estimate.value, 0.0)
        self.assertLessEqual(estimate.value, 1.0)

    @settings(max_examples=50)
    @given(st.integers(min_value=0, max_value=2**32 - 1))
    def test_order_invariance(self, seed):
        """Test that shuffling the records doesn't change alpha_n."""
        sample = random_sample(seed, size=15)
        try:
            expected = alpha_n(sample).value
        except EstimationImpossibleError:
            return
        self.assertAlmostEqual(alpha_n(permuted(sample, seed)).value, expected, places=12)

    def test_acceptance_rate(self):
        """Test that alpha_n estimates the share of kept candidates."""
        result = simulate(SimulationConfig(n=300, mu=0.01, lam=12.0, seed=11))
        self.assertAlmostEqual(alpha_n(result.sample).value, 1.0 - result.trunc_rate, delta=0.1)


class TestSupportDiagnostics(TestCase):
    """Test the identifiability diagnostics."""

    def test_conditions_hold(self):
        """Test a sample meeting both conditions."""
        diagnostics = support_diagnostics(make_sample([1.0, 2.0], [0.0, 0.5], [1, 1]))
        self.assertTrue(diagnostics.lower_ok)
        self.assertTrue(diagnostics.upper_ok)
        self.assertEqual(diagnostics.min_t, 0.0)
        self.assertEqual(diagnostics.max_z, 2.0)

    def test_lower_condition_violated(self):
        """Test a warning if truncation starts at the first lifetime."""
        sample = make_sample([1.0, 2.0], [1.0, 1.5], [1, 1])
        with self.assertLogs("ltrcreg.survival", level="WARNING"):
            diagnostics = support_diagnostics(sample)
        self.assertFalse(diagnostics.lower_ok)
        self.assertEqual(diagnostics.degenerate_truncation_factors, 2)
