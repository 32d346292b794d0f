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

"""Monte Carlo benchmark and robustness experiments."""

import logging
import math
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ltrcreg.datagen import (
    MAX_CALIBRATION_TARGET,
    MIN_PILOT_SIZE,
    SimulationConfig,
    calibrate,
    derive_seed,
    random_curves,
    rate_parameters,
    simulate,
    true_regression,
)
from ltrcreg.errors import (
    BandwidthSelectionError,
    CalibrationError,
    DegenerateFitError,
    EmptyNeighborhoodError,
    EmptyReportError,
    SensitivityError,
)
from ltrcreg.functional_core import DEFAULT_GRID_SIZE, Curve, SemiMetric
from ltrcreg.regression import (
    EstimatorConfig,
    EstimatorKind,
    FittedRegressor,
    default_bandwidth_grid,
    fit,
    loo_cv_bandwidth,
    predict,
    predict_batch,
    survival_weights,
    truncation_weights,
)
from ltrcreg.survival import LTRCRecord


# Number of candidate bandwidths tried by cross-validation.
DEFAULT_BANDWIDTH_COUNT = 15

# Conventions every report states, so runs can be compared.
CONVENTIONS = {
    "censoring_distribution": "exponential with rate mu (mean 1/mu)",
    "truncation_distribution": "normal with mean lambda and variance 2",
    "censor_rate": "measured on kept records",
    "trunc_rate": "1 - n/N",
    "cv_criterion_rer": "weighted mean squared relative error",
    "cv_criterion_nw": "weighted mean squared error",
    "nw_comparator": "synthetic responses over truncation weights 1/L_n(Z)",
    "cv_weights": "survival weights of the full sample",
    "alpha_convention": "left limits of F_n and G_n",
    "weight_floor": "1e-10",
    "evaluation_curves": "fresh per replicate, complete-data truth",
    "outlier_truncation_time": "minimum observed truncation time",
    "influence_bandwidth": "cross-validated on the clean sample, reused",
}

logger = logging.getLogger(__name__)


def _check_rates(**rates: float) -> None:
    for name, rate in rates.items():
        if not 0.0 <= rate <= MAX_CALIBRATION_TARGET:
            raise ValueError(f"{name} rate must be in [0, {MAX_CALIBRATION_TARGET}], got {rate}")


@dataclass(frozen=True)
class Scenario:
    """Censoring and truncation targets with a sample size."""

    censor: float
    trunc: float
    n: int

    def __post_init__(self) -> None:
        """Validate the targets and the sample size."""
        _check_rates(censor=self.censor, trunc=self.trunc)
        if self.n < 1:
            raise ValueError(f"sample size must be at least 1, got {self.n}")

    @property
    def label(self) -> str:
        """Short identifier of the scenario."""
        return f"cr{self.censor:g}_tr{self.trunc:g}_n{self.n}"


DEFAULT_SCENARIOS = (
    Scenario(0.2, 0.2, 100),
    Scenario(0.2, 0.2, 300),
    Scenario(0.2, 0.2, 500),
    Scenario(0.1, 0.2, 100),
    Scenario(0.2, 0.2, 100),
    Scenario(0.4, 0.2, 100),
    Scenario(0.2, 0.1, 100),
    Scenario(0.2, 0.2, 100),
    Scenario(0.2, 0.4, 100),
)

# Censoring and truncation targets of the influence panels.
INFLUENCE_PANELS = ((0.2, 0.2), (0.2, 0.4), (0.4, 0.2))

ESTIMATOR_KINDS = (EstimatorKind.RER, EstimatorKind.NW)


@dataclass(frozen=True)
class BenchmarkSpec:
    """Design of a GMSE benchmark."""

    scenarios: tuple[Scenario, ...] = DEFAULT_SCENARIOS
    replicates: int = 200
    eval_curves: int = 20
    kinds: tuple[EstimatorKind, ...] = ESTIMATOR_KINDS
    seed: int = 0
    bandwidth_count: int = DEFAULT_BANDWIDTH_COUNT
    pilot_size: int = MIN_PILOT_SIZE
    noise_sd: float = 1.0
    grid_size: int = DEFAULT_GRID_SIZE

    def __post_init__(self) -> None:
        """Validate the design."""
        if self.replicates < 1:
            raise ValueError("a benchmark needs at least one replicate")
        if self.eval_curves < 1:
            raise ValueError("a benchmark needs at least one evaluation curve")
        if not self.scenarios:
            raise ValueError("a benchmark needs at least one scenario")
        object.__setattr__(self, "scenarios", tuple(self.scenarios))
        object.__setattr__(self, "kinds", tuple(EstimatorKind(k) for k in self.kinds))


@dataclass(frozen=True)
class GMSERow:
    """GMSE of one estimator in one scenario."""

    scenario: Scenario
    scenario_index: int
    kind: EstimatorKind
    gmse: float
    valid: int
    failed: int
    mean_bandwidth: float
    mu: float
    lam: float


@dataclass(frozen=True)
class GMSEReport:
    """Result of a benchmark run."""

    rows: tuple[GMSERow, ...]
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class InfluencePoint:
    """Empirical influence at a query curve."""

    distance: float
    eif_rer: float
    eif_nw: float


@dataclass(frozen=True)
class InfluenceSpec:
    """Design of an influence experiment."""

    n: int = 300
    z0: float = 300.0
    censor_rate: float = 0.2
    trunc_rate: float = 0.2
    curves: int = 20
    seed: int = 0
    bandwidth_count: int = DEFAULT_BANDWIDTH_COUNT
    pilot_size: int = MIN_PILOT_SIZE
    noise_sd: float = 1.0
    grid_size: int = DEFAULT_GRID_SIZE

    def __post_init__(self) -> None:
        """Validate the design."""
        if not self.z0 > 0:
            raise ValueError(f"outlier response must be positive, got {self.z0}")
        if self.n < 2:
            raise ValueError("an influence experiment needs at least two records")
        if self.curves < 1:
            raise ValueError("an influence experiment needs at least one query curve")
        _check_rates(censor=self.censor_rate, trunc=self.trunc_rate)

    @property
    def label(self) -> str:
        """Short identifier of the experiment."""
        return f"cr{self.censor_rate:g}_tr{self.trunc_rate:g}"


@dataclass(frozen=True)
class InfluenceResult:
    """Influence points of one experiment."""

    spec: InfluenceSpec
    points: tuple[InfluencePoint, ...]
    failed_curves: int
    bandwidths: dict
    mu: float
    lam: float


def parallel_map(function: Callable, items: Iterable, workers: int = 1) -> list:
    """Apply a function to items, optionally in worker processes.

    Results are returned in the order of the items, whatever the
    number of workers.
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [function(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(function, items))


def gmse(estimates, truths) -> float:
    """Return the global mean squared error over valid cells.

    Arguments:
        estimates: B x m matrix of predictions, NaN where a prediction
            failed
        truths: true values, m of them or one B x m matrix

    Raises:
        EmptyReportError: if there is no valid cell

    """
    estimates = np.asarray(estimates, dtype=float)
    errors = estimates - np.broadcast_to(np.asarray(truths, dtype=float), estimates.shape)
    valid = np.isfinite(estimates)
    if not np.any(valid):
        raise EmptyReportError("no valid prediction to aggregate")
    # Exact summation keeps the result independent of the cell order.
    return math.fsum((errors[valid] ** 2).tolist()) / int(np.count_nonzero(valid))


@dataclass(frozen=True)
class _ReplicateTask:
    spec: BenchmarkSpec
    scenario: Scenario
    scenario_index: int
    replicate: int
    mu: float
    lam: float


@dataclass(frozen=True)
class _ReplicateResult:
    truths: np.ndarray
    estimates: dict
    bandwidths: dict
    degenerate: bool


def _select_and_fit(
    sample, kind, weights, truncation, distances, bandwidth_count
) -> FittedRegressor:
    candidates = default_bandwidth_grid(sample, bandwidth_count, distances)
    bandwidth = loo_cv_bandwidth(
        sample, kind, candidates, weights=weights, distances=distances, truncation=truncation
    )
    return fit(sample, EstimatorConfig(bandwidth), kind, weights=weights, truncation=truncation)


def _run_replicate(task: _ReplicateTask) -> _ReplicateResult:
    spec = task.spec
    seed = derive_seed(spec.seed, task.scenario_index, task.replicate)
    simulation = simulate(
        SimulationConfig(
            n=task.scenario.n,
            censor_rate=task.scenario.censor,
            trunc_rate=task.scenario.trunc,
            mu=task.mu,
            lam=task.lam,
            noise_sd=spec.noise_sd,
            grid_size=spec.grid_size,
            seed=derive_seed(seed, 0),
        )
    )
    sample = simulation.sample
    queries = random_curves(spec.eval_curves, sample.grid, derive_seed(seed, 1))
    truths = np.array([true_regression(curve) for curve in queries])
    weights = survival_weights(sample)
    truncation = truncation_weights(sample)
    distances = SemiMetric().matrix(sample.curves)
    degenerate = not np.any(weights > 0)
    if degenerate:
        logger.warning(
            "%s replicate %d: every survival weight is zero", task.scenario.label, task.replicate
        )

    estimates, bandwidths = {}, {}
    for kind in spec.kinds:
        try:
            regressor = _select_and_fit(
                sample, kind, weights, truncation, distances, spec.bandwidth_count
            )
        except (BandwidthSelectionError, DegenerateFitError) as exc:
            logger.warning(
                "%s replicate %d: %s fit failed: %s",
                task.scenario.label,
                task.replicate,
                kind.value,
                exc,
            )
            estimates[kind] = np.full(spec.eval_curves, np.nan)
            bandwidths[kind] = np.nan
            continue
        estimates[kind], _ = predict_batch(regressor, queries)
        bandwidths[kind] = regressor.config.bandwidth
    return _ReplicateResult(
        truths=truths, estimates=estimates, bandwidths=bandwidths, degenerate=degenerate
    )


def run_benchmark(spec: BenchmarkSpec, workers: int = 1) -> GMSEReport:
    """Run the GMSE benchmark of every scenario.

    Rates are calibrated once per scenario; every replicate draws a
    fresh training sample and fresh evaluation curves from seeds
    derived from the master seed, so the report doesn't depend on the
    number of workers.

    Raises:
        CalibrationError: naming the scenario whose rates can't be
            calibrated
        EmptyReportError: if an estimator fails on every evaluation
            curve of a scenario

    """
    rows = []
    calibration, degenerate = {}, {}
    for index, scenario in enumerate(spec.scenarios):
        try:
            mu, lam = calibrate(
                scenario.censor,
                scenario.trunc,
                spec.pilot_size,
                spec.seed,
                spec.noise_sd,
                spec.grid_size,
            )
        except CalibrationError as exc:
            raise CalibrationError(str(exc), scenario=scenario.label) from exc
        calibration[scenario.label] = rate_parameters(mu, lam)

        tasks = [
            _ReplicateTask(spec, scenario, index, replicate, mu, lam)
            for replicate in range(spec.replicates)
        ]
        results = parallel_map(_run_replicate, tasks, workers)
        truths = np.vstack([result.truths for result in results])
        degenerate[scenario.label] = sum(result.degenerate for result in results)
        if degenerate[scenario.label]:
            logger.warning(
                "%s: %d of %d replicates had no positive survival weight",
                scenario.label,
                degenerate[scenario.label],
                spec.replicates,
            )
        for kind in spec.kinds:
            estimates = np.vstack([result.estimates[kind] for result in results])
            bandwidths = np.array([result.bandwidths[kind] for result in results])
            failed = int(np.count_nonzero(~np.isfinite(estimates)))
            fitted = np.isfinite(bandwidths)
            if failed:
                logger.warning(
                    "%s: excluded %d failed %s predictions", scenario.label, failed, kind.value
                )
            rows.append(
                GMSERow(
                    scenario=scenario,
                    scenario_index=index,
                    kind=kind,
                    gmse=gmse(estimates, truths),
                    valid=estimates.size - failed,
                    failed=failed,
                    mean_bandwidth=float(np.mean(bandwidths[fitted])) if fitted.any() else np.nan,
                    mu=mu,
                    lam=lam,
                )
            )
        logger.info("Finished scenario %s", scenario.label)

    metadata = {
        "seed": spec.seed,
        "replicates": spec.replicates,
        "eval_curves": spec.eval_curves,
        "bandwidth_count": spec.bandwidth_count,
        "pilot_size": spec.pilot_size,
        "noise_sd": spec.noise_sd,
        "grid_size": spec.grid_size,
        "calibration": calibration,
        "degenerate_replicates": degenerate,
        "conventions": CONVENTIONS,
    }
    return GMSEReport(rows=tuple(rows), metadata=metadata)


def ssc(fit_n: FittedRegressor, fit_n1: FittedRegressor, query: Curve) -> float:
    """Return the standardized sensitivity curve at a query curve.

    That's (n + 1) times the change of the prediction caused by adding
    one record to the training sample.

    Raises:
        ValueError: if ``fit_n1`` isn't trained on exactly one more
            record than ``fit_n``
        SensitivityError: naming the side whose prediction failed

    """
    n = fit_n.sample.n
    if fit_n1.sample.n != n + 1:
        raise ValueError(
            f"contaminated fit needs {n + 1} records, got {fit_n1.sample.n}"
        )
    predictions = []
    for side, regressor in (("clean", fit_n), ("contaminated", fit_n1)):
        try:
            predictions.append(predict(regressor, query).value)
        except EmptyNeighborhoodError as exc:
            raise SensitivityError(str(exc), side) from exc
    clean, contaminated = predictions
    return (n + 1) * (contaminated - clean)


def run_influence(spec: InfluenceSpec) -> InfluenceResult:
    """Compute the empirical influence of one outlier at query curves.

    A clean sample and fresh curves chi_0, chi_1, ..., chi_curves are
    drawn; the outlier (chi_0, z0, T0, 1) with T0 the smallest observed
    truncation time is appended to get the contaminated sample. Each
    estimator is cross-validated on the clean sample and the bandwidth
    reused for the contaminated fit. Query curves where either
    prediction fails are skipped and counted.

    Raises:
        EmptyNeighborhoodError: if every query curve fails

    """
    mu, lam = calibrate(
        spec.censor_rate,
        spec.trunc_rate,
        spec.pilot_size,
        spec.seed,
        spec.noise_sd,
        spec.grid_size,
    )
    simulation = simulate(
        SimulationConfig(
            n=spec.n,
            censor_rate=spec.censor_rate,
            trunc_rate=spec.trunc_rate,
            mu=mu,
            lam=lam,
            noise_sd=spec.noise_sd,
            grid_size=spec.grid_size,
            seed=derive_seed(spec.seed, 0),
        )
    )
    clean = simulation.sample
    center, *queries = random_curves(spec.curves + 1, clean.grid, derive_seed(spec.seed, 1))
    outlier = LTRCRecord(curve=center, z=spec.z0, t=float(np.min(clean.t)), delta=1)
    contaminated = clean.with_record(outlier)

    weights = survival_weights(clean)
    truncation = truncation_weights(clean)
    distances = SemiMetric().matrix(clean.curves)
    fits, bandwidths = {}, {}
    for kind in ESTIMATOR_KINDS:
        clean_fit = _select_and_fit(
            clean, kind, weights, truncation, distances, spec.bandwidth_count
        )
        fits[kind] = (clean_fit, fit(contaminated, clean_fit.config, kind))
        bandwidths[kind.value] = clean_fit.config.bandwidth

    points, failed = [], 0
    for query in queries:
        try:
            eif = {kind: ssc(*fits[kind], query) for kind in ESTIMATOR_KINDS}
        except SensitivityError as exc:
            logger.warning("Skipped query curve of %s: %s", spec.label, exc)
            failed += 1
            continue
        points.append(
            InfluencePoint(
                distance=SemiMetric()(query, center),
                eif_rer=eif[EstimatorKind.RER],
                eif_nw=eif[EstimatorKind.NW],
            )
        )
    if not points:
        raise EmptyNeighborhoodError(f"all {spec.curves} query curves of {spec.label} failed")
    return InfluenceResult(
        spec=spec,
        points=tuple(points),
        failed_curves=failed,
        bandwidths=bandwidths,
        mu=mu,
        lam=lam,
    )


def run_influences(specs: Sequence[InfluenceSpec], workers: int = 1) -> list[InfluenceResult]:
    """Run several influence experiments."""
    return parallel_map(run_influence, specs, workers)


def robustness_summary(points: Sequence[InfluencePoint]) -> dict[str, float]:
    """Return the largest absolute influence per estimator."""
    if not points:
        raise EmptyReportError("no influence points given")
    return {
        EstimatorKind.RER.value: max(abs(point.eif_rer) for point in points),
        EstimatorKind.NW.value: max(abs(point.eif_nw) for point in points),
    }
