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

"""Discretized curves, the L2 semi-metric and the smoothing kernel."""

from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from ltrcreg.errors import GridMismatchError


# Number of equidistant measurements per curve in the simulation design.
DEFAULT_GRID_SIZE = 100

# Relative tolerance for the spacing of an equidistant grid.
GRID_SPACING_RTOL = 1e-12


def _readonly(values) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class Grid:
    """Equidistant abscissae the curves of a dataset are observed on."""

    points: np.ndarray

    def __post_init__(self) -> None:
        """Validate the abscissae and freeze them."""
        points = _readonly(self.points)
        if points.ndim != 1 or points.size < 2:
            raise ValueError("a grid needs at least two points")
        if not np.all(np.isfinite(points)):
            raise ValueError("grid points must be finite")
        steps = np.diff(points)
        if np.any(steps <= 0):
            raise ValueError("grid points must be strictly increasing")
        mean_step = (points[-1] - points[0]) / (points.size - 1)
        if np.max(np.abs(steps - mean_step)) > GRID_SPACING_RTOL * mean_step:
            raise ValueError("grid points must be equidistant")
        object.__setattr__(self, "points", points)

    @classmethod
    def equidistant(cls, count: int = DEFAULT_GRID_SIZE, start=0.0, stop=1.0) -> "Grid":
        """Create a grid of ``count`` equidistant points."""
        return cls(np.linspace(start, stop, count))

    @property
    def count(self) -> int:
        """Number of grid points."""
        return int(self.points.size)

    def same_as(self, other: "Grid") -> bool:
        """Check whether two grids have identical abscissae."""
        return self is other or np.array_equal(self.points, other.points)


@dataclass(frozen=True, eq=False)
class Curve:
    """A function observed on a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        """Validate the observed values and freeze them."""
        values = _readonly(self.values)
        if values.shape != self.grid.points.shape:
            raise ValueError(
                f"curve has {values.size} values but its grid has {self.grid.count} points"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("curve values must be finite")
        object.__setattr__(self, "values", values)


def _quadratic(u: np.ndarray) -> np.ndarray:
    # Support is half-open, so an exact match gets the full weight.
    return np.where((u >= 0.0) & (u < 1.0), 1.5 * (1.0 - u * u), 0.0)


KERNELS: dict[str, Callable[[np.ndarray], np.ndarray]] = {"quadratic": _quadratic}


@dataclass(frozen=True)
class Kernel:
    """Asymmetric smoothing kernel supported on [0, 1)."""

    name: str = "quadratic"

    def __post_init__(self) -> None:
        """Check that the kernel is known."""
        if self.name not in KERNELS:
            raise ValueError(f"unknown kernel: {self.name}")

    def evaluate(self, u) -> np.ndarray:
        """Evaluate the kernel elementwise."""
        return KERNELS[self.name](np.asarray(u, dtype=float))


def kernel_eval(k: Kernel, u: float) -> float:
    """Evaluate a kernel at a single point.

    Arguments:
        k (Kernel): kernel to evaluate
        u (float): scaled distance, any real number

    Returns:
        float: 3/2 (1 - u^2) inside [0, 1), 0 elsewhere

    """
    return float(k.evaluate(u))


def _check_grids(grid: Grid, curves: Sequence[Curve]) -> None:
    for curve in curves:
        if not grid.same_as(curve.grid):
            raise GridMismatchError("curves aren't observed on the same grid")


def l2_distance(a: Curve, b: Curve) -> float:
    """Return the L2 distance of two curves.

    The integral over the grid is approximated by the trapezoid rule.

    Raises:
        GridMismatchError: if the curves use different grids

    """
    _check_grids(a.grid, [b])
    return float(np.sqrt(trapezoid((a.values - b.values) ** 2, x=a.grid.points)))


def curve_matrix(curves: Sequence[Curve]) -> tuple[Grid, np.ndarray]:
    """Stack curves into a matrix with one curve per row.

    Raises:
        GridMismatchError: if the curves use different grids
        ValueError: if no curves are given

    """
    if not curves:
        raise ValueError("no curves given")
    grid = curves[0].grid
    _check_grids(grid, curves)
    return grid, np.vstack([curve.values for curve in curves])


def _row_distances(rows: np.ndarray, reference: np.ndarray, grid: Grid) -> np.ndarray:
    return np.sqrt(trapezoid((rows - reference) ** 2, x=grid.points, axis=1))


def pairwise_distances(targets: Sequence[Curve], reference: Curve) -> np.ndarray:
    """Return the distance of every target to a reference curve."""
    if not targets:
        return np.zeros(0)
    grid, rows = curve_matrix([*targets, reference])
    return _row_distances(rows[:-1], rows[-1], grid)


def distance_matrix(
    rows: Sequence[Curve], columns: Sequence[Curve] | None = None
) -> np.ndarray:
    """Return all distances between two collections of curves.

    Element ``[i, j]`` is the distance between ``rows[i]`` and
    ``columns[j]``. Without ``columns`` the matrix of ``rows`` against
    itself is returned.
    """
    columns = rows if columns is None else columns
    grid, stacked = curve_matrix([*rows, *columns])
    row_values, column_values = stacked[: len(rows)], stacked[len(rows) :]
    matrix = np.empty((len(rows), len(columns)))
    for j, reference in enumerate(column_values):
        matrix[:, j] = _row_distances(row_values, reference, grid)
    return matrix


SEMI_METRICS: dict[str, Callable[..., np.ndarray]] = {"l2": distance_matrix}


@dataclass(frozen=True)
class SemiMetric:
    """Distance between curves sharing a grid."""

    name: str = "l2"

    def __post_init__(self) -> None:
        """Check that the semi-metric is known."""
        if self.name not in SEMI_METRICS:
            raise ValueError(f"unknown semi-metric: {self.name}")

    def __call__(self, a: Curve, b: Curve) -> float:
        """Return the distance between two curves."""
        return float(self.matrix([a], [b])[0, 0])

    def matrix(
        self, rows: Sequence[Curve], columns: Sequence[Curve] | None = None
    ) -> np.ndarray:
        """Return all distances between two collections of curves."""
        return SEMI_METRICS[self.name](rows, columns)
