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

"""Tests for fitting, prediction and bandwidth selection."""

import math
from unittest import TestCase

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from parameterized import parameterized

from ltrcreg.datagen import NO_CENSORING, NO_TRUNCATION, SimulationConfig, simulate
from ltrcreg.errors import (
    BandwidthSelectionError,
    DegenerateDesignError,
    DegenerateFitError,
    EmptyNeighborhoodError,
    GridMismatchError,
)
from ltrcreg.functional_core import Curve, Grid, Kernel, SemiMetric, l2_distance
from ltrcreg.regression import (
    EstimatorConfig,
    EstimatorKind,
    default_bandwidth_grid,
    fit,
    loo_cv_bandwidth,
    loo_cv_scores,
    predict,
    predict_batch,
    survival_weights,
    truncation_weights,
)
from ltrcreg.survival import records_from_arrays


GRID = Grid.equidistant(11)


def flat(value):
    """Return a constant curve."""
    return Curve(GRID, np.full(GRID.count, float(value)))


def flat_sample(levels, z, t=None, delta=None):
    """Build a sample of constant curves."""
    n = len(levels)
    t = np.zeros(n) if t is None else t
    delta = np.ones(n, dtype=int) if delta is None else delta
    return records_from_arrays([flat(level) for level in levels], z, t, delta)


def naive_factors(sample):
    """Evaluate L_n(Z_i) and 1 - G_n(Z_i) with explicit products."""
    z, t, delta, n = sample.z, sample.t, sample.delta, sample.n

    def at_risk(y):
        return sum(1 for i in range(n) if t[i] <= y <= z[i])

    truncation, survival = [], []
    for i in range(n):
        product = 1.0
        for j in range(n):
            if z[j] <= z[i] and delta[j] == 0:
                product *= 1.0 - 1.0 / at_risk(z[j])
        survival.append(product)
        product = 1.0
        for j in range(n):
            if t[j] > z[i]:
                product *= 1.0 - 1.0 / at_risk(t[j])
        truncation.append(product)
    return np.array(truncation), np.array(survival)


def naive_weights(sample, floor=1e-10):
    """Compute survival weights straight from the product formulas."""
    truncation, survival = naive_factors(sample)
    weights = []
    for i, delta in enumerate(sample.delta):
        denominator = truncation[i] * survival[i]
        weights.append(delta / denominator if delta and denominator >= floor else 0.0)
    return np.array(weights)


def naive_truncation_weights(sample, floor=1e-10):
    """Compute 1 / L_n(Z_i) straight from the product formula."""
    truncation, _ = naive_factors(sample)
    return np.array([1.0 / factor if factor >= floor else 0.0 for factor in truncation])


def naive_prediction(sample, weights, kind, query, bandwidth, skip=None):
    """Compute one prediction with explicit loops."""
    truncation = naive_truncation_weights(sample)
    numerator = denominator = 0.0
    neighbors = 0
    for i, record in enumerate(sample.records):
        if i == skip:
            continue
        u = l2_distance(query, record.curve) / bandwidth
        k = 1.5 * (1 - u * u) if 0 <= u < 1 else 0.0
        neighbors += weights[i] * k > 0
        if kind is EstimatorKind.RER:
            numerator += weights[i] * k / record.z
            denominator += weights[i] * k / record.z**2
        elif kind is EstimatorKind.NW:
            numerator += weights[i] * k * record.z
            denominator += truncation[i] * k
        else:
            numerator += weights[i] * k * record.z
            denominator += weights[i] * k
    return numerator / denominator if neighbors else math.nan


def simulated(seed, n=25, mu=0.02, lam=11.0):
    """Draw a small censored and truncated sample."""
    return simulate(SimulationConfig(n=n, mu=mu, lam=lam, seed=seed, grid_size=21)).sample


class TestSurvivalWeights(TestCase):
    """Test the inverse-probability weights."""

    def test_censored_middle_record(self):
        """Test the weights of three records with one censored."""
        sample = flat_sample([0, 1, 2], [1.0, 2.0, 3.0], delta=[1, 0, 1])
        np.testing.assert_allclose(survival_weights(sample), [1.0, 0.0, 2.0], rtol=1e-12)

    def test_complete_data(self):
        """Test that complete data gets unit weights."""
        sample = flat_sample([0, 1, 2], [1.0, 2.0, 3.0])
        np.testing.assert_array_equal(survival_weights(sample), [1.0, 1.0, 1.0])

    def test_single_censored_record(self):
        """Test that a censored record gets weight 0."""
        sample = flat_sample([0], [1.0], delta=[0])
        np.testing.assert_array_equal(survival_weights(sample), [0.0])

    def test_floor(self):
        """Test dropping records whose denominator vanishes."""
        # The censored record is alone at risk, so G_n jumps to 1.
        sample = flat_sample([0, 1], [1.0, 2.0], t=[0.0, 1.5], delta=[0, 1])
        with self.assertLogs("ltrcreg.regression", "WARNING") as logs:
            weights = survival_weights(sample)
        np.testing.assert_array_equal(weights, [0.0, 0.0])
        self.assertEqual(len(logs.records), 1)
        self.assertIn("Dropped 1 of 1 uncensored records", logs.output[0])
        self.assertIn("degenerate truncation factors", logs.output[0])

    def test_nothing_dropped(self):
        """Test that keeping every record logs nothing."""
        sample = flat_sample([0, 1, 2], [1.0, 2.0, 3.0], delta=[1, 0, 1])
        with self.assertNoLogs("ltrcreg.regression", "WARNING"):
            survival_weights(sample)

    @parameterized.expand([(1,), (2,), (3,), (4,)])
    def test_brute_force(self, seed):
        """Test against the product formulas evaluated with loops."""
        sample = simulated(seed)
        np.testing.assert_allclose(survival_weights(sample), naive_weights(sample), rtol=1e-12)


class TestTruncationWeights(TestCase):
    """Test the weights of the synthetic-response denominator."""

    def test_untruncated(self):
        """Test that untruncated data gets unit weights."""
        sample = flat_sample([0, 1, 2], [1.0, 2.0, 3.0], delta=[1, 0, 1])
        np.testing.assert_array_equal(truncation_weights(sample), [1.0, 1.0, 1.0])

    def test_censored_record_keeps_weight(self):
        """Test that censoring doesn't zero the truncation weight."""
        # Only T_2 = 1.5 lies beyond Z_1; two records are at risk there.
        sample = flat_sample([0, 1, 2], [1.0, 2.0, 3.0], t=[0.0, 1.5, 0.5], delta=[0, 1, 1])
        np.testing.assert_allclose(truncation_weights(sample), [2.0, 1.0, 1.0], rtol=1e-12)

    def test_floor(self):
        """Test zeroing records whose truncation factor vanishes."""
        sample = flat_sample([0, 1], [1.0, 2.0], t=[0.0, 1.5])
        np.testing.assert_array_equal(truncation_weights(sample), [0.0, 1.0])

    @parameterized.expand([(1,), (2,), (3,)])
    def test_brute_force(self, seed):
        """Test against the product formula evaluated with loops."""
        sample = simulated(seed)
        np.testing.assert_allclose(
            truncation_weights(sample), naive_truncation_weights(sample), rtol=1e-12
        )


class TestFit(TestCase):
    """Test fitting and prediction."""

    def setUp(self):
        """Set up two records at the same distance from the query."""
        self.sample = flat_sample([1, -1], [1.0, 2.0])
        self.config = EstimatorConfig(bandwidth=2.0)
        self.query = flat(0)

    def test_relative_error(self):
        """Test the relative error regressor on two records."""
        prediction = predict(fit(self.sample, self.config, EstimatorKind.RER), self.query)
        self.assertAlmostEqual(prediction.value, 1.2, places=12)
        self.assertEqual(prediction.neighbors, 2)

    def test_nadaraya_watson(self):
        """Test the Nadaraya-Watson comparator on two records."""
        prediction = predict(fit(self.sample, self.config, EstimatorKind.NW), self.query)
        self.assertAlmostEqual(prediction.value, 1.5, places=12)

    def test_empty_neighborhood(self):
        """Test a query without training curve in reach."""
        regressor = fit(self.sample, self.config)
        with self.assertRaises(EmptyNeighborhoodError) as context:
            predict(regressor, flat(10))
        self.assertEqual(context.exception.neighbors, 0)

    def test_boundary_excluded(self):
        """Test that a curve at exactly the bandwidth doesn't count."""
        distance = SemiMetric().matrix([self.query], self.sample.curves)[0, 0]
        regressor = fit(self.sample, EstimatorConfig(bandwidth=distance))
        with self.assertRaises(EmptyNeighborhoodError):
            predict(regressor, self.query)

    def test_grid_mismatch(self):
        """Test a query on another grid."""
        regressor = fit(self.sample, self.config)
        with self.assertRaises(GridMismatchError):
            predict(regressor, Curve(Grid.equidistant(5), np.zeros(5)))

    def test_all_censored(self):
        """Test fitting a sample without uncensored record."""
        sample = flat_sample([0, 1], [1.0, 2.0], delta=[0, 0])
        with self.assertRaises(DegenerateFitError):
            fit(sample, self.config)

    def test_invalid_config(self):
        """Test rejecting nonpositive bandwidths."""
        with self.assertRaises(ValueError):
            EstimatorConfig(bandwidth=0.0)

    def test_batch(self):
        """Test that failed batch predictions are NaN."""
        regressor = fit(self.sample, self.config, EstimatorKind.NW)
        values, neighbors = predict_batch(regressor, [self.query, flat(10), flat(1.5)])
        self.assertAlmostEqual(values[0], 1.5, places=12)
        self.assertTrue(math.isnan(values[1]))
        np.testing.assert_array_equal(neighbors, [2, 0, 1])

    def test_censored_record_is_no_neighbor(self):
        """Test that only uncensored records count as neighbors."""
        sample = flat_sample([1, -1], [1.0, 2.0], delta=[1, 0])
        prediction = predict(fit(sample, self.config, EstimatorKind.NW_WEIGHTED), self.query)
        self.assertEqual(prediction.neighbors, 1)
        self.assertAlmostEqual(prediction.value, 1.0, places=12)

    def test_synthetic_responses(self):
        """Test that censored records still weigh in the denominator."""
        sample = flat_sample([1, -1], [1.0, 2.0], delta=[1, 0])
        regressor = fit(sample, self.config, EstimatorKind.NW)
        np.testing.assert_array_equal(regressor.denominator_weights, [1.0, 1.0])
        prediction = predict(regressor, self.query)
        self.assertEqual(prediction.neighbors, 1)
        self.assertAlmostEqual(prediction.value, 0.5, places=12)

    def test_variants_agree_on_complete_data(self):
        """Test that both NW variants match without censoring."""
        for kind in (EstimatorKind.NW, EstimatorKind.NW_WEIGHTED):
            prediction = predict(fit(self.sample, self.config, kind), self.query)
            self.assertAlmostEqual(prediction.value, 1.5, places=12)

    def test_given_truncation_weights(self):
        """Test that given truncation weights are used as is."""
        sample = flat_sample([1, -1], [1.0, 2.0], delta=[1, 0])
        regressor = fit(sample, self.config, EstimatorKind.NW, truncation=np.array([1.0, 3.0]))
        self.assertAlmostEqual(predict(regressor, self.query).value, 0.25, places=12)

    @parameterized.expand(
        [(EstimatorKind.RER, False), (EstimatorKind.NW, True), (EstimatorKind.NW_WEIGHTED, False)]
    )
    def test_synthetic_kind(self, kind, synthetic):
        """Test which estimators use synthetic responses."""
        self.assertIs(kind.synthetic, synthetic)

    @parameterized.expand([(kind,) for kind in EstimatorKind])
    def test_brute_force(self, kind):
        """Test predictions against kernel sums evaluated with loops."""
        sample = simulated(7)
        weights = survival_weights(sample)
        regressor = fit(sample, EstimatorConfig(bandwidth=2.5), kind)
        queries = [record.curve for record in simulated(8).records[:5]]
        values, _ = predict_batch(regressor, queries)
        for query, value in zip(queries, values, strict=True):
            expected = naive_prediction(sample, weights, kind, query, 2.5)
            if math.isnan(expected):
                self.assertTrue(math.isnan(value))
            else:
                self.assertAlmostEqual(value / expected, 1.0, places=12)

    @settings(max_examples=25, deadline=None)
    @given(
        st.integers(min_value=0, max_value=2**32 - 1),
        st.floats(min_value=0.01, max_value=100.0),
    )
    def test_scale_equivariance(self, seed, scale):
        """Test that scaling responses scales the prediction."""
        rng = np.random.default_rng(seed)
        levels = rng.normal(size=8)
        z = rng.uniform(1.0, 5.0, 8)
        t = np.full(8, -math.inf)
        query = flat(0.1)
        for kind in EstimatorKind:
            original = predict(fit(flat_sample(levels, z, t), self.config, kind), query)
            scaled = predict(fit(flat_sample(levels, z * scale, t), self.config, kind), query)
            self.assertAlmostEqual(scaled.value / (scale * original.value), 1.0, places=12)

    def test_locality(self):
        """Test that records beyond the bandwidth don't matter."""
        levels = [0.1, -0.3, 0.5, 3.0, -4.0]
        z = [1.0, 2.0, 4.0, 8.0, 16.0]
        full = flat_sample(levels, z)
        near = flat_sample(levels[:3], z[:3])
        for kind in EstimatorKind:
            self.assertAlmostEqual(
                predict(fit(full, self.config, kind), self.query).value,
                predict(fit(near, self.config, kind), self.query).value,
                places=12,
            )


class TestCrossValidation(TestCase):
    """Test leave-one-out bandwidth selection."""

    def setUp(self):
        """Set up pairs of identical records far apart."""
        self.twins = flat_sample([0, 0, 10, 10, 20, 20], [1.0, 1.0, 5.0, 5.0, 9.0, 9.0])

    @parameterized.expand([(kind,) for kind in EstimatorKind])
    def test_noiseless_twins(self, kind):
        """Test that the twin distance wins with zero error."""
        self.assertEqual(loo_cv_bandwidth(self.twins, kind, [100.0, 0.5]), 0.5)
        scores = loo_cv_scores(self.twins, kind, [0.5, 100.0])
        self.assertLess(scores[0].criterion, 1e-20)
        self.assertGreater(scores[1].criterion, 1e-3)

    def test_ties_pick_smaller(self):
        """Test that equal criteria select the smaller bandwidth."""
        self.assertEqual(loo_cv_bandwidth(self.twins, EstimatorKind.RER, [1.0, 0.5, 2.0]), 0.5)

    def test_single_candidate(self):
        """Test that a single candidate is returned."""
        self.assertEqual(loo_cv_bandwidth(self.twins, EstimatorKind.NW, [42.0]), 42.0)

    def test_no_neighbors(self):
        """Test candidates leaving every neighborhood empty."""
        sample = flat_sample([0, 10], [1.0, 2.0])
        with self.assertRaises(BandwidthSelectionError):
            loo_cv_bandwidth(sample, EstimatorKind.RER, [1.0, 2.0])

    def test_invalid_input(self):
        """Test rejecting single records and missing candidates."""
        with self.assertRaises(ValueError):
            loo_cv_bandwidth(flat_sample([0], [1.0]), EstimatorKind.RER, [1.0])
        with self.assertRaises(ValueError):
            loo_cv_bandwidth(self.twins, EstimatorKind.RER, [])

    @parameterized.expand(
        [(EstimatorKind.RER, 5), (EstimatorKind.NW, 6), (EstimatorKind.NW_WEIGHTED, 6)]
    )
    def test_brute_force(self, kind, seed):
        """Test the criterion against leave-one-out fits with loops."""
        sample = simulated(seed, n=20)
        weights = survival_weights(sample)
        candidates = default_bandwidth_grid(sample, 6)
        scores = loo_cv_scores(sample, kind, candidates, Kernel(), weights)
        expected = []
        for h in candidates:
            total = weight_sum = 0.0
            for i, record in enumerate(sample.records):
                if weights[i] == 0:
                    continue
                predicted = naive_prediction(sample, weights, kind, record.curve, h, skip=i)
                if math.isnan(predicted):
                    continue
                error = record.z - predicted
                loss = (error / record.z) ** 2 if kind is EstimatorKind.RER else error**2
                total += weights[i] * loss
                weight_sum += weights[i]
            expected.append(total / weight_sum if weight_sum else math.inf)
        for score, value in zip(scores, expected, strict=True):
            if math.isinf(value):
                self.assertTrue(math.isinf(score.criterion))
            else:
                self.assertAlmostEqual(score.criterion, value, delta=1e-12 * max(value, 1.0))
        finite = [v for v in expected if math.isfinite(v)]
        if finite:
            self.assertEqual(
                loo_cv_bandwidth(sample, kind, candidates, weights=weights),
                candidates[expected.index(min(finite))],
            )


class TestBandwidthGrid(TestCase):
    """Test the default bandwidth candidates."""

    def test_two_curves(self):
        """Test that two curves give their distance."""
        grid = default_bandwidth_grid(flat_sample([0, 2], [1.0, 2.0]))
        self.assertEqual(grid.size, 1)
        self.assertAlmostEqual(grid[0], 2.0, places=12)

    def test_identical_curves(self):
        """Test that identical curves give no candidate."""
        with self.assertRaises(DegenerateDesignError):
            default_bandwidth_grid(flat_sample([1, 1, 1], [1.0, 2.0, 3.0]))

    def test_single_record(self):
        """Test rejecting a single record."""
        with self.assertRaises(ValueError):
            default_bandwidth_grid(flat_sample([1], [1.0]))

    def test_quantiles(self):
        """Test the candidates against sorted pairwise distances."""
        sample = simulated(9, n=20, mu=NO_CENSORING, lam=NO_TRUNCATION)
        grid = default_bandwidth_grid(sample, 10)
        curves = sample.curves
        pairs = sorted(
            l2_distance(curves[i], curves[j]) for i in range(20) for j in range(i + 1, 20)
        )
        expected = []
        for p in np.linspace(0.02, 0.5, 10):
            position = p * (len(pairs) - 1)
            lower = math.floor(position)
            upper = min(lower + 1, len(pairs) - 1)
            expected.append(pairs[lower] + (position - lower) * (pairs[upper] - pairs[lower]))
        np.testing.assert_allclose(grid, expected, rtol=1e-10)
        self.assertTrue(np.all(grid > 0))
        self.assertTrue(np.all(np.diff(grid) > 0))
