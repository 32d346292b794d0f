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

"""Exceptions raised when an estimation contract can't be met."""


class LTRCRegError(ValueError):
    """Base class for all contract errors.

    Every subclass has a stable ``code`` which the command line
    interface reports, so scripts can tell failures apart without
    parsing messages.
    """

    code = "ltrcreg-error"


class GridMismatchError(LTRCRegError):
    """Curves were compared which aren't observed on the same grid."""

    code = "grid-mismatch"


class EstimationImpossibleError(LTRCRegError):
    """No evaluation point admits an estimate."""

    code = "estimation-impossible"


class DegenerateFitError(LTRCRegError):
    """All survival weights of a training sample are zero."""

    code = "degenerate-fit"


class EmptyNeighborhoodError(LTRCRegError):
    """No uncensored training curve lies within the bandwidth."""

    code = "empty-neighborhood"

    def __init__(self, message: str, neighbors: int = 0) -> None:
        """Create the error with the effective neighbor count."""
        super().__init__(message)
        self.neighbors = neighbors


class BandwidthSelectionError(LTRCRegError):
    """Cross-validation couldn't evaluate any candidate bandwidth."""

    code = "bandwidth-selection-failed"


class DegenerateDesignError(LTRCRegError):
    """The training curves are too close to pick bandwidths."""

    code = "degenerate-design"


class RunawayRejectionError(LTRCRegError):
    """The simulator rejects almost every candidate observation."""

    code = "runaway-rejection"


class CalibrationError(LTRCRegError):
    """A rate calibration couldn't bracket its target."""

    code = "calibration-failed"

    def __init__(self, message: str, scenario: str | None = None) -> None:
        """Create the error, optionally naming the failing scenario."""
        if scenario is not None:
            message = f"scenario {scenario}: {message}"
        super().__init__(message)
        self.scenario = scenario


class EmptyReportError(LTRCRegError):
    """A report would aggregate zero valid cells."""

    code = "empty-report"


class NoDataError(LTRCRegError):
    """Nothing to plot."""

    code = "no-data"


class SensitivityError(LTRCRegError):
    """A sensitivity curve couldn't be computed.

    ``side`` is ``"clean"`` or ``"contaminated"`` depending on which of
    the two predictions failed.
    """

    code = "sensitivity-failed"

    def __init__(self, message: str, side: str) -> None:
        """Create the error naming the failing side."""
        super().__init__(f"{side} prediction failed: {message}")
        self.side = side


class SchemaError(LTRCRegError):
    """An input file is malformed or has an unsupported schema."""

    code = "schema-error"
