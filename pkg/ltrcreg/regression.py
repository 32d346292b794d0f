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

"""Kernel regression of a truncated and censored response on curves.

Every estimator weights record i by the survival weight

    w_i = delta_i / (L_n(Z_i) (1 - G_n(Z_i)))

and smooths with K_i = K(d(chi, chi_i) / h). The relative error
regressor is sum w_i K_i / Z_i over sum w_i K_i / Z_i^2.

The Nadaraya-Watson comparator averages the synthetic responses
w_i Z_i against the truncation weights v_i = 1 / L_n(Z_i) of all
records, sum w_i K_i Z_i over sum v_i K_i. Its weighted variant divides
by sum w_i K_i instead.
"""

import enum
import logging
from collections.abc import Sequence
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ltrcreg.errors import (
    BandwidthSelectionError,
    DegenerateDesignError,
    DegenerateFitError,
    EmptyNeighborhoodError,
)
from ltrcreg.functional_core import Curve, Kernel, SemiMetric
from ltrcreg.survival import LTRCSample, lynden_bell_L, support_diagnostics, tjw_G


# Survival weight denominators below this value drop the record.
DEFAULT_WEIGHT_FLOOR = 1e-10

# Quantile range of the pairwise training distances spanned by the
# default bandwidth candidates.
BANDWIDTH_QUANTILE_RANGE = (0.02, 0.5)

logger = logging.getLogger(__name__)


class EstimatorKind(enum.Enum):
    """Regression estimators which can be fitted."""

    RER = "rer"
    NW = "nw"
    NW_WEIGHTED = "wnw"

    @property
    def synthetic(self) -> bool:
        """Whether the denominator sums truncation weights."""
        return self is EstimatorKind.NW

    def terms(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return the per-record numerator and denominator terms."""
        if self is EstimatorKind.RER:
            return 1.0 / z, 1.0 / (z * z)
        return z, np.ones_like(z)

    def loss(self, z: np.ndarray, predictions: np.ndarray) -> np.ndarray:
        """Return the loss targeted by the estimator.

        That's the squared relative error for relative error regression
        and the squared error for both Nadaraya-Watson variants.
        """
        if self is EstimatorKind.RER:
            return ((z - predictions) / z) ** 2
        return (z - predictions) ** 2


@dataclass(frozen=True)
class EstimatorConfig:
    """Kernel, semi-metric and bandwidth of a regressor."""

    bandwidth: float
    kernel: Kernel = Kernel()
    semimetric: SemiMetric = SemiMetric()
    weight_floor: float = DEFAULT_WEIGHT_FLOOR

    def __post_init__(self) -> None:
        """Validate the configuration."""
        if not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        if not self.weight_floor > 0:
            raise ValueError(f"weight floor must be positive, got {self.weight_floor}")


@dataclass(frozen=True)
class Prediction:
    """A prediction and the kernel sums it is the ratio of."""

    value: float
    numerator: float
    denominator: float
    neighbors: int


@dataclass(frozen=True, eq=False)
class FittedRegressor:
    """A regressor with precomputed weights.

    ``weights`` enter the numerator, ``denominator_weights`` the
    denominator; they are the same array unless the kind is synthetic.
    """

    sample: LTRCSample
    weights: np.ndarray
    config: EstimatorConfig
    kind: EstimatorKind
    denominator_weights: np.ndarray

    @cached_property
    def response_terms(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-record numerator and denominator terms."""
        return self.kind.terms(self.sample.z)


def survival_weights(sample: LTRCSample, weight_floor: float = DEFAULT_WEIGHT_FLOOR):
    """Return delta_i / (L_n(Z_i) (1 - G_n(Z_i))) for every record.

    Records whose denominator falls below ``weight_floor`` get weight 0
    instead of an exploding weight.
    """
    z = sample.z
    denominators = np.asarray(lynden_bell_L(sample)(z)) * (1.0 - np.asarray(tjw_G(sample)(z)))
    uncensored = sample.delta == 1
    keep = uncensored & (denominators >= weight_floor)
    dropped = int(np.count_nonzero(uncensored & ~keep))
    if dropped:
        diagnostics = support_diagnostics(sample)
        logger.warning(
            "Dropped %d of %d uncensored records with vanishing survival weight "
            "(%d degenerate truncation factors, T in [%g, %g], Z in [%g, %g])",
            dropped,
            int(np.count_nonzero(uncensored)),
            diagnostics.degenerate_truncation_factors,
            diagnostics.min_t,
            diagnostics.max_t,
            diagnostics.min_z,
            diagnostics.max_z,
        )
    weights = np.zeros(sample.n)
    weights[keep] = 1.0 / denominators[keep]
    return weights


def truncation_weights(sample: LTRCSample, weight_floor: float = DEFAULT_WEIGHT_FLOOR):
    """Return 1 / L_n(Z_i) for every record, censored or not.

    Records with L_n(Z_i) below ``weight_floor`` get weight 0.
    """
    factors = np.asarray(lynden_bell_L(sample)(sample.z), dtype=float)
    keep = factors >= weight_floor
    weights = np.zeros(sample.n)
    weights[keep] = 1.0 / factors[keep]
    return weights


def _denominator_weights(sample, kind, weights, truncation, weight_floor) -> np.ndarray:
    if not kind.synthetic:
        return weights
    if truncation is None:
        return truncation_weights(sample, weight_floor)
    return np.asarray(truncation, dtype=float)


def fit(
    sample: LTRCSample,
    config: EstimatorConfig,
    kind: EstimatorKind = EstimatorKind.RER,
    weights: np.ndarray | None = None,
    truncation: np.ndarray | None = None,
) -> FittedRegressor:
    """Fit a regressor to an LTRC sample.

    The product-limit estimators are built once here; predictions only
    evaluate kernel sums.

    Arguments:
        sample (LTRCSample): training sample
        config (EstimatorConfig): kernel, semi-metric and bandwidth
        kind (EstimatorKind): estimator to fit
        weights (np.ndarray): survival weights of ``sample``, if they
            are already known
        truncation (np.ndarray): truncation weights of ``sample``, if
            they are already known; only synthetic kinds use them

    Returns:
        FittedRegressor: the fitted regressor

    Raises:
        DegenerateFitError: if every survival weight is zero

    """
    if weights is None:
        weights = survival_weights(sample, config.weight_floor)
    weights = np.array(weights, dtype=float)
    if not np.any(weights > 0):
        raise DegenerateFitError(f"all {sample.n} survival weights are zero")
    weights.flags.writeable = False
    denominator_weights = _denominator_weights(
        sample, kind, weights, truncation, config.weight_floor
    )
    if denominator_weights is not weights:
        denominator_weights = np.array(denominator_weights, dtype=float)
        denominator_weights.flags.writeable = False
    return FittedRegressor(
        sample=sample,
        weights=weights,
        config=config,
        kind=kind,
        denominator_weights=denominator_weights,
    )


def _kernel_sums(reg: FittedRegressor, distances: np.ndarray):
    kernel = reg.config.kernel.evaluate(distances / reg.config.bandwidth)
    active = reg.weights * kernel
    numerator_terms, denominator_terms = reg.response_terms
    return (
        active @ numerator_terms,
        (reg.denominator_weights * kernel) @ denominator_terms,
        np.count_nonzero(active > 0, axis=-1),
    )


def predict(reg: FittedRegressor, query: Curve) -> Prediction:
    """Predict the response for a query curve.

    Raises:
        GridMismatchError: if the query uses another grid
        EmptyNeighborhoodError: if no uncensored training curve lies
            within the bandwidth

    """
    distances = reg.config.semimetric.matrix([query], reg.sample.curves)[0]
    numerator, denominator, neighbors = _kernel_sums(reg, distances)
    if neighbors == 0:
        raise EmptyNeighborhoodError(
            f"no uncensored training curve within bandwidth {reg.config.bandwidth:g}",
            neighbors=0,
        )
    return Prediction(
        value=float(numerator / denominator),
        numerator=float(numerator),
        denominator=float(denominator),
        neighbors=int(neighbors),
    )


def predict_batch(reg: FittedRegressor, queries: Sequence[Curve]):
    """Predict the responses for several query curves.

    Returns:
        tuple of the predicted values, with NaN where the neighborhood
        is empty, and the effective neighbor counts

    """
    distances = reg.config.semimetric.matrix(queries, reg.sample.curves)
    numerators, denominators, neighbors = _kernel_sums(reg, distances)
    values = np.full(len(queries), np.nan)
    found = neighbors > 0
    values[found] = numerators[found] / denominators[found]
    return values, neighbors


@dataclass(frozen=True)
class CVScore:
    """Cross-validation criterion of one candidate bandwidth."""

    bandwidth: float
    criterion: float
    evaluated: int


def loo_cv_scores(
    sample: LTRCSample,
    kind: EstimatorKind,
    candidates: Sequence[float],
    kernel: Kernel | None = None,
    weights: np.ndarray | None = None,
    distances: np.ndarray | None = None,
    truncation: np.ndarray | None = None,
) -> list[CVScore]:
    """Compute the leave-one-out criterion for every candidate.

    Every uncensored record with positive weight is predicted from all
    other records; the weights are those of the full sample. The
    criterion is the weighted mean of the estimator's loss over the
    records whose leave-one-out neighborhood isn't empty.
    """
    kernel = kernel or Kernel()
    if weights is None:
        weights = survival_weights(sample)
    if distances is None:
        distances = SemiMetric().matrix(sample.curves)
    denominator_weights = _denominator_weights(
        sample, kind, weights, truncation, DEFAULT_WEIGHT_FLOOR
    )
    z = sample.z
    numerator_terms, denominator_terms = kind.terms(z)

    scores = []
    for h in candidates:
        kernel_values = kernel.evaluate(distances / h)
        np.fill_diagonal(kernel_values, 0.0)
        active = kernel_values * weights
        numerators = active @ numerator_terms
        denominators = (kernel_values * denominator_weights) @ denominator_terms
        evaluable = (weights > 0) & (np.count_nonzero(active > 0, axis=1) > 0)
        if not np.any(evaluable):
            scores.append(CVScore(float(h), np.inf, 0))
            continue
        predictions = numerators[evaluable] / denominators[evaluable]
        losses = kind.loss(z[evaluable], predictions)
        criterion = np.sum(weights[evaluable] * losses) / np.sum(weights[evaluable])
        scores.append(CVScore(float(h), float(criterion), int(np.count_nonzero(evaluable))))
    return scores


def loo_cv_bandwidth(
    sample: LTRCSample,
    kind: EstimatorKind,
    candidates: Sequence[float],
    kernel: Kernel | None = None,
    weights: np.ndarray | None = None,
    distances: np.ndarray | None = None,
    truncation: np.ndarray | None = None,
) -> float:
    """Select a bandwidth by leave-one-out cross-validation.

    Ties are broken toward the smaller bandwidth.

    Raises:
        ValueError: for fewer than two records or no candidates
        BandwidthSelectionError: if no candidate has a single nonempty
            leave-one-out neighborhood

    """
    if sample.n < 2:
        raise ValueError("cross-validation needs at least two records")
    candidates = np.unique(np.asarray(candidates, dtype=float))
    if not candidates.size:
        raise ValueError("no candidate bandwidths given")

    scores = loo_cv_scores(sample, kind, candidates, kernel, weights, distances, truncation)
    criteria = np.array([score.criterion for score in scores])
    if not np.any(np.isfinite(criteria)):
        raise BandwidthSelectionError(
            f"all {candidates.size} candidate bandwidths leave every neighborhood empty"
        )
    selected = scores[int(np.argmin(criteria))]
    logger.debug(
        "Selected bandwidth %g for %s (criterion %g over %d records)",
        selected.bandwidth,
        kind.value,
        selected.criterion,
        selected.evaluated,
    )
    return selected.bandwidth


def default_bandwidth_grid(
    sample: LTRCSample, count: int = 15, distances: np.ndarray | None = None
) -> np.ndarray:
    """Return candidate bandwidths from the training distances.

    The candidates are ``count`` equally spaced quantiles, from the 2nd
    percentile to the median, of the pairwise distances between the
    training curves, without duplicates and zeros.

    Raises:
        ValueError: for fewer than two records
        DegenerateDesignError: if the distances don't give a positive
            candidate

    """
    if sample.n < 2:
        raise ValueError("bandwidth candidates need at least two records")
    if distances is None:
        distances = SemiMetric().matrix(sample.curves)
    pairs = distances[np.triu_indices(sample.n, k=1)]
    quantiles = np.quantile(pairs, np.linspace(*BANDWIDTH_QUANTILE_RANGE, count))
    grid = np.unique(quantiles[quantiles > 0])
    if not grid.size:
        raise DegenerateDesignError("training curves are (almost all) identical")
    return grid
