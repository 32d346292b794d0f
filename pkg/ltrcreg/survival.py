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

"""Product-limit estimators for left-truncated, right-censored data.

A lifetime Y is only observed as Z = min(Y, S) together with the
indicator delta = 1{Y <= S}, and only if Z >= T for a truncation time
T. The estimators in this module work on such a sample:

- C_n, the fraction of records at risk at y (T <= y <= Z),
- F_n, the TJW estimator of the lifetime distribution,
- G_n, the TJW-type estimator of the censoring distribution,
- L_n, the Lynden-Bell estimator of the truncation distribution,
- alpha_n, the estimated probability of not being truncated.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ltrcreg.errors import EstimationImpossibleError, GridMismatchError
from ltrcreg.functional_core import Curve, Grid


# Largest spread of alpha_n across evaluation points which is still
# regarded as the same value.
ALPHA_SPREAD_TOLERANCE = 1e-10

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LTRCRecord:
    """One observed quadruple (curve, Z, T, delta)."""

    curve: Curve
    z: float
    t: float
    delta: int

    def __post_init__(self) -> None:
        """Reject records which can't have been observed."""
        z, t = float(self.z), float(self.t)
        if not np.isfinite(z) or z <= 0:
            raise ValueError(f"observed lifetime must be positive and finite, got {self.z}")
        if np.isnan(t) or t == np.inf:
            raise ValueError(f"invalid truncation time: {self.t}")
        if z < t:
            raise ValueError(f"truncated record can't be observed: z={z} < t={t}")
        if self.delta not in (0, 1):
            raise ValueError(f"censoring indicator must be 0 or 1, got {self.delta}")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "delta", int(self.delta))


@dataclass(frozen=True, eq=False)
class LTRCSample:
    """An observed LTRC sample whose curves share one grid."""

    records: tuple[LTRCRecord, ...]

    def __post_init__(self) -> None:
        """Validate the sample."""
        records = tuple(self.records)
        if not records:
            raise ValueError("a sample needs at least one record")
        grid = records[0].curve.grid
        for record in records[1:]:
            if not grid.same_as(record.curve.grid):
                raise GridMismatchError("all curves of a sample must share one grid")
        object.__setattr__(self, "records", records)

    @property
    def n(self) -> int:
        """Number of observed records."""
        return len(self.records)

    @property
    def grid(self) -> Grid:
        """Grid shared by all curves of the sample."""
        return self.records[0].curve.grid

    @cached_property
    def z(self) -> np.ndarray:
        """Observed lifetimes."""
        return np.array([record.z for record in self.records])

    @cached_property
    def t(self) -> np.ndarray:
        """Truncation times."""
        return np.array([record.t for record in self.records])

    @cached_property
    def delta(self) -> np.ndarray:
        """Censoring indicators."""
        return np.array([record.delta for record in self.records], dtype=int)

    @cached_property
    def sorted_t(self) -> np.ndarray:
        """Truncation times in ascending order."""
        return np.sort(self.t)

    @cached_property
    def sorted_z(self) -> np.ndarray:
        """Observed lifetimes in ascending order."""
        return np.sort(self.z)

    @property
    def curves(self) -> list[Curve]:
        """Covariate curves in record order."""
        return [record.curve for record in self.records]

    def with_record(self, record: LTRCRecord) -> "LTRCSample":
        """Return a new sample with one additional record."""
        return LTRCSample((*self.records, record))


@dataclass(frozen=True, eq=False)
class StepFunction:
    """Right-continuous piecewise constant function.

    ``values[k]`` holds on ``[locations[k], locations[k + 1])``, and
    ``initial`` below the first location.
    """

    locations: np.ndarray
    values: np.ndarray
    initial: float = 0.0

    def __post_init__(self) -> None:
        """Validate the jump locations."""
        locations = np.array(self.locations, dtype=float)
        values = np.array(self.values, dtype=float)
        if locations.shape != values.shape or locations.ndim != 1:
            raise ValueError("step function needs one value per jump location")
        if np.any(np.diff(locations) <= 0):
            raise ValueError("jump locations must be strictly increasing")
        locations.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "locations", locations)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "initial", float(self.initial))
        # _padded[k] is the value after k jumps.
        object.__setattr__(self, "_padded", np.concatenate(([self.initial], values)))

    def _lookup(self, y, side: str):
        result = self._padded[np.searchsorted(self.locations, y, side=side)]
        return float(result) if np.ndim(result) == 0 else result

    def __call__(self, y):
        """Evaluate the function at ``y``."""
        return self._lookup(y, "right")

    def left_limit(self, y):
        """Evaluate the limit from the left at ``y``."""
        return self._lookup(y, "left")


@dataclass(frozen=True)
class AlphaEstimate:
    """Estimate of the probability of not being truncated."""

    value: float
    points: np.ndarray
    spread: float
    degenerate_points: int = 0


@dataclass(frozen=True)
class SupportDiagnostics:
    """Empirical proxies of the identifiability conditions."""

    min_t: float
    max_t: float
    min_z: float
    max_z: float
    degenerate_truncation_factors: int

    @property
    def lower_ok(self) -> bool:
        """Whether truncation starts before the observed lifetimes."""
        return self.min_t < self.min_z

    @property
    def upper_ok(self) -> bool:
        """Whether truncation ends before the observed lifetimes."""
        return self.max_t <= self.max_z


def risk_counts(s: LTRCSample, y) -> np.ndarray:
    """Return n * C_n(y), the number of records with T <= y <= Z."""
    y = np.asarray(y, dtype=float)
    entered = np.searchsorted(s.sorted_t, y, side="right")
    left = np.searchsorted(s.sorted_z, y, side="left")
    return entered - left


def risk_set_fraction(s: LTRCSample, y: float) -> float:
    """Return C_n(y), the fraction of records at risk at ``y``.

    Both ends of the risk interval are inclusive.
    """
    return float(risk_counts(s, y)) / s.n


def _group_products(locations: np.ndarray, factors: np.ndarray):
    """Multiply all factors sharing a location.

    Tied factors are multiplied in sorted order, so the result doesn't
    depend on the order of the records.
    """
    order = np.lexsort((factors, locations))
    unique, inverse = np.unique(locations[order], return_inverse=True)
    products = np.ones(unique.size)
    np.multiply.at(products, inverse, factors[order])
    return unique, products


def _tjw(s: LTRCSample, selected: np.ndarray) -> StepFunction:
    z = s.z[selected]
    factors = 1.0 - 1.0 / risk_counts(s, z)
    locations, products = _group_products(z, factors)
    return StepFunction(locations, 1.0 - np.cumprod(products), initial=0.0)


def tjw_F(s: LTRCSample) -> StepFunction:  # noqa: N802
    """Return the TJW estimator of the lifetime distribution.

    F_n(y) = 1 - prod_{Z_i <= y} (1 - 1 / (n C_n(Z_i)))^delta_i, so
    only uncensored records contribute a factor.
    """
    return _tjw(s, s.delta == 1)


def tjw_G(s: LTRCSample) -> StepFunction:  # noqa: N802
    """Return the TJW-type estimator of the censoring distribution.

    Same as :func:`tjw_F`, but with the exponent 1 - delta_i, so only
    censored records contribute.
    """
    return _tjw(s, s.delta == 0)


def _truncation_factors(s: LTRCSample) -> tuple[np.ndarray, np.ndarray]:
    t = s.t[np.isfinite(s.t)]
    return t, 1.0 - 1.0 / risk_counts(s, t)


def lynden_bell_L(s: LTRCSample) -> StepFunction:  # noqa: N802
    """Return the Lynden-Bell estimator of the truncation distribution.

    L_n(y) = prod_{T_i > y} (1 - 1 / (n C_n(T_i))). Records without
    truncation (T = -inf) never contribute a factor.
    """
    t, factors = _truncation_factors(s)
    locations, products = _group_products(t, factors)
    # suffix[k] is the product over all locations from k onwards.
    suffix = np.cumprod(products[::-1])[::-1]
    if not suffix.size:
        return StepFunction(locations, suffix, initial=1.0)
    return StepFunction(locations, np.append(suffix[1:], 1.0), initial=suffix[0])


def support_diagnostics(s: LTRCSample) -> SupportDiagnostics:
    """Check empirical proxies of the identifiability conditions.

    Logs a warning if the proxies are violated or if a degenerate
    Lynden-Bell factor (only one record at risk) sits above the
    smallest truncation time, where it zeroes L_n at observed
    lifetimes.
    """
    t, factors = _truncation_factors(s)
    degenerate = int(np.count_nonzero(factors == 0.0))
    diagnostics = SupportDiagnostics(
        min_t=float(np.min(s.t)),
        max_t=float(np.max(s.t)),
        min_z=float(np.min(s.z)),
        max_z=float(np.max(s.z)),
        degenerate_truncation_factors=degenerate,
    )
    if not diagnostics.lower_ok:
        logger.warning(
            "Smallest truncation time %s isn't below the smallest lifetime %s",
            diagnostics.min_t,
            diagnostics.min_z,
        )
    if not diagnostics.upper_ok:
        logger.warning(
            "Largest truncation time %s exceeds the largest lifetime %s",
            diagnostics.max_t,
            diagnostics.max_z,
        )
    if t.size and np.any((factors == 0.0) & (t > np.min(t))):
        logger.warning("Degenerate Lynden-Bell factors above the smallest truncation time")
    return diagnostics


def alpha_n(s: LTRCSample) -> AlphaEstimate:
    """Estimate the probability of absence of truncation.

    alpha_n = L_n(y) (1 - F_n(y-)) (1 - G_n(y-)) / C_n(y) is evaluated
    at every observed lifetime. The left limits make the value exactly
    the same at every point; points where a degenerate product-limit
    factor zeroes the numerator are counted but not used.

    Raises:
        EstimationImpossibleError: if no point admits an estimate

    """
    points = np.unique(s.z)
    at_risk = risk_counts(s, points) / s.n
    admissible = at_risk > 0
    points, at_risk = points[admissible], at_risk[admissible]
    if not points.size:
        raise EstimationImpossibleError("no observed lifetime has a nonempty risk set")

    lifetime, censoring, truncation = tjw_F(s), tjw_G(s), lynden_bell_L(s)
    estimates = (
        np.asarray(truncation(points))
        * (1.0 - np.asarray(lifetime.left_limit(points)))
        * (1.0 - np.asarray(censoring.left_limit(points)))
        / at_risk
    )
    usable = estimates > 0.0
    if not np.any(usable):
        raise EstimationImpossibleError("every evaluation point is degenerate")

    degenerate = int(np.count_nonzero(~usable))
    if degenerate:
        logger.warning("Skipped %d degenerate points when estimating alpha", degenerate)
    estimates = estimates[usable]
    spread = float(np.max(estimates) - np.min(estimates))
    if spread > ALPHA_SPREAD_TOLERANCE:
        logger.warning("alpha_n varies by %g across evaluation points", spread)
    value = min(float(np.mean(estimates)), 1.0)
    return AlphaEstimate(
        value=value, points=points[usable], spread=spread, degenerate_points=degenerate
    )


def records_from_arrays(
    curves: Sequence[Curve], z: Sequence[float], t: Sequence[float], delta: Sequence[int]
) -> LTRCSample:
    """Build a sample from parallel sequences."""
    return LTRCSample(
        tuple(
            LTRCRecord(curve, zi, ti, int(di))
            for curve, zi, ti, di in zip(curves, z, t, delta, strict=True)
        )
    )
