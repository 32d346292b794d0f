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

"""Command line interface of the simulations and experiments."""

import logging
import os
import sys
from argparse import ArgumentDefaultsHelpFormatter, Namespace
from collections.abc import Sequence
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ltrcreg.datagen import MIN_PILOT_SIZE, SimulationConfig, rate_parameters, simulate
from ltrcreg.errors import EstimationImpossibleError, LTRCRegError
from ltrcreg.evaluation import (
    DEFAULT_BANDWIDTH_COUNT,
    DEFAULT_SCENARIOS,
    ESTIMATOR_KINDS,
    INFLUENCE_PANELS,
    BenchmarkSpec,
    InfluenceSpec,
    robustness_summary,
    run_benchmark,
    run_influences,
)
from ltrcreg.functional_core import DEFAULT_GRID_SIZE, SemiMetric
from ltrcreg.regression import (
    EstimatorConfig,
    EstimatorKind,
    default_bandwidth_grid,
    fit,
    loo_cv_bandwidth,
    predict_batch,
    survival_weights,
    truncation_weights,
)
from ltrcreg.report import (
    RunManifest,
    emit_svg_scatter,
    predictions_frame,
    read_curves,
    read_sample,
    read_scenarios,
    write_gmse,
    write_gmse_sidecar,
    write_influence,
    write_latents,
    write_predictions,
    write_sample,
)
from ltrcreg.results_db import archive_report
from ltrcreg.survival import alpha_n, support_diagnostics
from ltrcreg.utils import ArgumentParserWithConfigFile, configure_logging


WORKERS_ENVIRONMENT_VARIABLE = "LTRCREG_WORKERS"

logger = logging.getLogger(__name__)


def _default_workers() -> int:
    value = os.environ.get(WORKERS_ENVIRONMENT_VARIABLE, "1")
    try:
        return max(int(value), 1)
    except ValueError:
        logger.warning("Ignoring invalid %s=%r", WORKERS_ENVIRONMENT_VARIABLE, value)
        return 1


def _add_design_arguments(parser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="master seed of all random draws")
    parser.add_argument(
        "--noise-sd", type=float, default=1.0, help="standard deviation of the response noise"
    )
    parser.add_argument(
        "--grid-size", type=int, default=DEFAULT_GRID_SIZE, help="number of points per curve"
    )
    parser.add_argument(
        "--pilot-size",
        type=int,
        default=MIN_PILOT_SIZE,
        help="number of candidates in calibration pilot runs",
    )


def _add_cv_arguments(parser) -> None:
    parser.add_argument(
        "--bandwidth-count",
        type=int,
        default=DEFAULT_BANDWIDTH_COUNT,
        help="number of candidate bandwidths for cross-validation",
    )


def _add_estimators_argument(parser) -> None:
    parser.add_argument(
        "--estimators",
        nargs="+",
        choices=[kind.value for kind in EstimatorKind],
        default=[kind.value for kind in ESTIMATOR_KINDS],
        help="estimators to fit",
    )


def _add_workers_argument(parser) -> None:
    parser.add_argument(
        "--workers",
        type=int,
        default=_default_workers(),
        help=f"number of worker processes (default from {WORKERS_ENVIRONMENT_VARIABLE})",
    )


def parse_args(argv: Sequence[str] | None = None) -> Namespace:
    """Parse command line arguments.

    Returns:
         Parsed command line arguments

    """
    parser = ArgumentParserWithConfigFile(
        prog="ltrcreg",
        formatter_class=ArgumentDefaultsHelpFormatter,
        description="Relative error regression for curves with truncated and censored responses",
    )

    verbosity_parser = parser.add_mutually_exclusive_group()
    verbosity_parser.add_argument(
        "-v",
        action="count",
        dest="verbosity",
        default=0,
        help="Increase verbosity of logging. Can be provided up to "
        "three times to get full debug logging",
    )
    verbosity_parser.add_argument(
        "--verbosity", type=int, help="Increase verbosity of logging. Supported values are 0 to 3"
    )

    commands = parser.add_subparsers(dest="command", required=True)

    simulate_parser = commands.add_parser(
        "simulate",
        formatter_class=ArgumentDefaultsHelpFormatter,
        help="draw a left-truncated, right-censored sample",
    )
    simulate_parser.add_argument("--n", type=int, default=100, help="number of kept records")
    simulate_parser.add_argument(
        "--censor-rate", type=float, default=0.0, help="target censoring rate"
    )
    simulate_parser.add_argument(
        "--trunc-rate", type=float, default=0.0, help="target truncation rate"
    )
    simulate_parser.add_argument(
        "--mu", type=float, help="exponential censoring rate, instead of calibrating it"
    )
    simulate_parser.add_argument(
        "--lam", type=float, help="truncation mean, instead of calibrating it"
    )
    _add_design_arguments(simulate_parser)
    simulate_parser.add_argument("--out", default="sample.csv", help="sample CSV to write")
    simulate_parser.add_argument("--latents", help="CSV to write the latent Y and S to")

    fit_parser = commands.add_parser(
        "fit",
        formatter_class=ArgumentDefaultsHelpFormatter,
        help="fit the chosen estimators to a sample and predict at query curves",
    )
    fit_parser.add_argument("--sample", help="sample CSV to train on")
    fit_parser.add_argument("--queries", help="curve CSV with the query curves")
    fit_parser.add_argument(
        "--bandwidth", type=float, help="fixed bandwidth instead of cross-validation"
    )
    _add_cv_arguments(fit_parser)
    _add_estimators_argument(fit_parser)
    fit_parser.add_argument("--out", default="predictions.csv", help="predictions CSV to write")

    benchmark_parser = commands.add_parser(
        "benchmark",
        formatter_class=ArgumentDefaultsHelpFormatter,
        help="estimate the GMSE of both estimators by Monte Carlo",
    )
    benchmark_parser.add_argument(
        "--scenarios", help="JSON array of {censor, trunc, n}; nine defaults if omitted"
    )
    benchmark_parser.add_argument(
        "-B",
        "--B",
        "--replicates",
        dest="replicates",
        type=int,
        default=200,
        help="number of replicates per scenario",
    )
    benchmark_parser.add_argument(
        "-m", "--eval-curves", type=int, default=20, help="evaluation curves per replicate"
    )
    _add_design_arguments(benchmark_parser)
    _add_cv_arguments(benchmark_parser)
    _add_estimators_argument(benchmark_parser)
    _add_workers_argument(benchmark_parser)
    benchmark_parser.add_argument("--out", default="report", help="directory for the report")
    benchmark_parser.add_argument(
        "--database-url", help="archive the report in this database as well"
    )

    influence_parser = commands.add_parser(
        "influence",
        formatter_class=ArgumentDefaultsHelpFormatter,
        help="compute the empirical influence of one outlier",
    )
    influence_parser.add_argument("--n", type=int, default=300, help="size of the clean sample")
    influence_parser.add_argument("--z0", type=float, default=300.0, help="outlier response")
    influence_parser.add_argument(
        "--censor-rate", type=float, help="target censoring rate; all panels if not given"
    )
    influence_parser.add_argument(
        "--trunc-rate", type=float, help="target truncation rate; all panels if not given"
    )
    influence_parser.add_argument(
        "--curves", type=int, default=20, help="number of query curves to measure influence at"
    )
    _add_design_arguments(influence_parser)
    _add_cv_arguments(influence_parser)
    _add_workers_argument(influence_parser)
    influence_parser.add_argument("--out", default="influence", help="directory for the output")

    args = parser.parse_args(argv)
    if args.command == "fit" and not (args.sample and args.queries):
        parser.error("fit needs --sample and --queries")
    if args.command == "influence" and (args.censor_rate is None) != (args.trunc_rate is None):
        parser.error("influence needs both --censor-rate and --trunc-rate, or neither")
    return args


def _config(args: Namespace) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("verbosity", "command")}


def run_simulate(args: Namespace) -> None:
    """Draw a sample and write it with its sidecar."""
    result = simulate(
        SimulationConfig(
            n=args.n,
            censor_rate=args.censor_rate,
            trunc_rate=args.trunc_rate,
            mu=args.mu,
            lam=args.lam,
            noise_sd=args.noise_sd,
            grid_size=args.grid_size,
            seed=args.seed,
            pilot_size=args.pilot_size,
        )
    )
    out = Path(args.out)
    manifest = RunManifest("simulate", _config(args), args.seed)
    manifest.add_artifact(write_sample(result.sample, out))
    if args.latents:
        manifest.add_artifact(write_latents(result.latent_y, result.latent_s, args.latents))
    manifest.results = {
        **rate_parameters(result.mu, result.lam),
        "censor_rate": result.censor_rate,
        "raw_censor_rate": result.raw_censor_rate,
        "trunc_rate": result.trunc_rate,
        "candidates_drawn": result.candidates_drawn,
    }
    manifest.write(out.with_suffix(".json"))
    logger.info("Wrote %d records to %s", result.sample.n, out)


def run_fit(args: Namespace) -> None:
    """Fit the estimators to a sample and predict at query curves."""
    sample = read_sample(args.sample)
    queries = read_curves(args.queries)
    diagnostics = support_diagnostics(sample)
    try:
        alpha = alpha_n(sample).value
    except EstimationImpossibleError as exc:
        logger.warning("Can't estimate alpha: %s", exc)
        alpha = None

    weights = survival_weights(sample)
    truncation = truncation_weights(sample)
    distances = SemiMetric().matrix(sample.curves) if args.bandwidth is None else None
    values, neighbors, bandwidths = {}, {}, {}
    for name in args.estimators:
        kind = EstimatorKind(name)
        bandwidth = args.bandwidth
        if bandwidth is None:
            candidates = default_bandwidth_grid(sample, args.bandwidth_count, distances)
            bandwidth = loo_cv_bandwidth(
                sample,
                kind,
                candidates,
                weights=weights,
                distances=distances,
                truncation=truncation,
            )
        regressor = fit(
            sample, EstimatorConfig(bandwidth), kind, weights=weights, truncation=truncation
        )
        values[name], neighbors[name] = predict_batch(regressor, queries)
        bandwidths[name] = bandwidth
        failed = int(np.count_nonzero(neighbors[name] == 0))
        if failed:
            logger.warning("%s: %d queries without neighbors", name, failed)

    out = Path(args.out)
    manifest = RunManifest("fit", _config(args), None)
    manifest.add_artifact(
        write_predictions(predictions_frame(values, neighbors, len(queries)), out)
    )
    manifest.results = {
        "bandwidths": bandwidths,
        "alpha": alpha,
        "support": asdict(diagnostics),
        "lower_support_ok": diagnostics.lower_ok,
        "upper_support_ok": diagnostics.upper_ok,
    }
    manifest.write(out.with_suffix(".json"))
    logger.info("Wrote predictions for %d queries to %s", len(queries), out)


def run_benchmark_command(args: Namespace) -> None:
    """Run the GMSE benchmark and write its report."""
    scenarios = read_scenarios(args.scenarios) if args.scenarios else DEFAULT_SCENARIOS
    spec = BenchmarkSpec(
        scenarios=scenarios,
        replicates=args.replicates,
        eval_curves=args.eval_curves,
        kinds=tuple(EstimatorKind(name) for name in args.estimators),
        seed=args.seed,
        bandwidth_count=args.bandwidth_count,
        pilot_size=args.pilot_size,
        noise_sd=args.noise_sd,
        grid_size=args.grid_size,
    )
    report = run_benchmark(spec, workers=args.workers)

    out = Path(args.out)
    config = _config(args)
    # The worker count doesn't change the artifacts.
    config.pop("workers")
    manifest = RunManifest("benchmark", config, args.seed)
    manifest.add_artifact(write_gmse(report, out / "gmse.csv"))
    manifest.add_artifact(write_gmse_sidecar(report, out / "gmse.json"))
    manifest.write(out / "manifest.json")
    logger.info("Wrote benchmark report to %s", out)

    if args.database_url:
        archive_report(report, args.database_url)
        logger.info("Archived benchmark report in %s", args.database_url)


def run_influence_command(args: Namespace) -> None:
    """Run the influence experiments and write points and plots."""
    panels = (
        INFLUENCE_PANELS if args.censor_rate is None else ((args.censor_rate, args.trunc_rate),)
    )
    specs = [
        InfluenceSpec(
            n=args.n,
            z0=args.z0,
            censor_rate=censor_rate,
            trunc_rate=trunc_rate,
            curves=args.curves,
            seed=args.seed,
            bandwidth_count=args.bandwidth_count,
            pilot_size=args.pilot_size,
            noise_sd=args.noise_sd,
            grid_size=args.grid_size,
        )
        for censor_rate, trunc_rate in panels
    ]
    results = run_influences(specs, workers=args.workers)

    out = Path(args.out)
    config = _config(args)
    config.pop("workers")
    manifest = RunManifest("influence", config, args.seed)
    for result in results:
        name = f"influence_{result.spec.label}"
        manifest.add_artifact(write_influence(result.points, out / f"{name}.csv"))
        manifest.add_artifact(
            emit_svg_scatter(result.points, out / f"{name}.svg", title=result.spec.label)
        )
        manifest.results[result.spec.label] = {
            **rate_parameters(result.mu, result.lam),
            "bandwidths": result.bandwidths,
            "failed_curves": result.failed_curves,
            "max_abs_eif": robustness_summary(result.points),
        }
    manifest.write(out / "manifest.json")
    logger.info("Wrote %d influence panels to %s", len(results), out)


COMMANDS = {
    "simulate": run_simulate,
    "fit": run_fit,
    "benchmark": run_benchmark_command,
    "influence": run_influence_command,
}


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point a console script.

    Returns:
        0 on success, 1 if a computation or file access failed, 2 for
        invalid input

    """
    args = parse_args(argv)
    configure_logging(args.verbosity)

    try:
        COMMANDS[args.command](args)
    except LTRCRegError as exc:
        logger.debug("%s failed", args.command, exc_info=True)
        print(f"error[{exc.code}]: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error[invalid-input]: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error[io-error]: {exc}", file=sys.stderr)
        return 1
    return 0
