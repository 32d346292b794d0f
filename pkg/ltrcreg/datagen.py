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

"""Synthetic left-truncated, right-censored data on random curves.

Curves are a cos(2 pi t) + b sin(4 pi t) + c (t - 0.5)(t - 0.25) with
a, b, c uniform on [0, 3], the response is Y = int chi^2 + 10 + noise,
censoring times are exponential with rate mu and truncation times
normal with mean lambda and variance 2. A candidate is kept only if
Z = min(Y, S) >= T; candidates are drawn until n are kept.
"""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from cachetools import LRUCache, cached
from scipy.integrate import trapezoid
from scipy.optimize import brentq

from ltrcreg.errors import CalibrationError, RunawayRejectionError
from ltrcreg.functional_core import DEFAULT_GRID_SIZE, Curve, Grid
from ltrcreg.survival import LTRCSample, records_from_arrays


# Sentinel rate for "no censoring", every S is +inf.
NO_CENSORING = 0.0

# Sentinel mean for "no truncation", every T is -inf.
NO_TRUNCATION = -math.inf

CURVE_PARAMETER_RANGE = (0.0, 3.0)
REGRESSION_OFFSET = 10.0
TRUNCATION_VARIANCE = 2.0

MAX_RATE_TARGET = 0.95
MAX_CALIBRATION_TARGET = 0.9
MIN_PILOT_SIZE = 5000
CALIBRATION_TOLERANCE = 0.01
CALIBRATION_ITERATIONS = 100
CALIBRATION_XTOL = 1e-6

# Range and resolution of the scan bracketing mu.
MU_SCAN_RANGE = (1e-8, 1e3)
MU_SCAN_POINTS = 45

# Generation gives up once at least this many candidates were drawn
# and the acceptance rate is still below the minimum.
RUNAWAY_MIN_CANDIDATES = 100_000
MIN_ACCEPTANCE_RATE = 1e-4

# Spawn keys separating the random streams derived from one seed.
PILOT_STREAM = 1
SAMPLE_STREAM = 2

logger = logging.getLogger(__name__)


def derive_seed(seed: int, *key: int) -> int:
    """Derive a 64-bit seed from a master seed and a key."""
    sequence = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))
    return int(sequence.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class CurveParams:
    """Coefficients of a simulated curve."""

    a: float
    b: float
    c: float

    def __post_init__(self) -> None:
        """Check that the coefficients are in range."""
        low, high = CURVE_PARAMETER_RANGE
        for name in ("a", "b", "c"):
            if not low <= getattr(self, name) <= high:
                raise ValueError(f"curve parameter {name} must be in [{low}, {high}]")


def _curve_values(params: np.ndarray, grid: Grid) -> np.ndarray:
    t = grid.points
    a, b, c = (params[:, k, None] for k in range(3))
    return a * np.cos(2 * np.pi * t) + b * np.sin(4 * np.pi * t) + c * (t - 0.5) * (t - 0.25)


def _regression_values(values: np.ndarray, grid: Grid) -> np.ndarray:
    return trapezoid(values**2, x=grid.points, axis=-1) + REGRESSION_OFFSET


def gen_curve(params: CurveParams, grid: Grid) -> Curve:
    """Evaluate the curve with the given coefficients on a grid."""
    values = _curve_values(np.array([[params.a, params.b, params.c]]), grid)[0]
    return Curve(grid, values)


def true_regression(c: Curve) -> float:
    """Return the regression operator int_0^1 chi(t)^2 dt + 10."""
    return float(_regression_values(c.values, c.grid))


def random_curves(count: int, grid: Grid, seed: int) -> list[Curve]:
    """Draw curves with uniformly distributed coefficients."""
    rng = np.random.default_rng(seed)
    params = rng.uniform(*CURVE_PARAMETER_RANGE, size=(count, 3))
    return [Curve(grid, values) for values in _curve_values(params, grid)]


@dataclass(frozen=True)
class SimulationConfig:
    """Design of a simulated LTRC sample.

    ``mu`` and ``lam`` are calibrated from the rate targets when they
    aren't given.
    """

    n: int
    censor_rate: float = 0.0
    trunc_rate: float = 0.0
    mu: float | None = None
    lam: float | None = None
    noise_sd: float = 1.0
    grid_size: int = DEFAULT_GRID_SIZE
    seed: int = 0
    pilot_size: int = MIN_PILOT_SIZE

    def __post_init__(self) -> None:
        """Validate the design."""
        if self.n < 1:
            raise ValueError("sample size must be at least 1")
        for name in ("censor_rate", "trunc_rate"):
            if not 0.0 <= getattr(self, name) <= MAX_RATE_TARGET:
                raise ValueError(f"{name} must be in [0, {MAX_RATE_TARGET}]")
        if self.mu is not None and self.mu < 0:
            raise ValueError("censoring rate parameter mu can't be negative")
        if self.noise_sd < 0:
            raise ValueError("noise standard deviation can't be negative")


@dataclass(frozen=True, eq=False)
class SimulationResult:
    """A simulated sample together with its latent variables."""

    sample: LTRCSample
    latent_y: np.ndarray
    latent_s: np.ndarray
    candidates_drawn: int
    censor_rate: float
    trunc_rate: float
    raw_censor_rate: float
    mu: float
    lam: float


@dataclass(frozen=True)
class PilotRates:
    """Rates measured on a pilot run of candidates."""

    censor_rate: float
    raw_censor_rate: float
    trunc_rate: float


@dataclass(frozen=True, eq=False)
class _Candidates:
    params: np.ndarray
    values: np.ndarray
    y: np.ndarray
    exponential: np.ndarray
    normal: np.ndarray

    def observe(self, mu: float, lam: float):
        s = self.exponential / mu if mu > 0 else np.full_like(self.y, np.inf)
        t = (
            lam + math.sqrt(TRUNCATION_VARIANCE) * self.normal
            if np.isfinite(lam)
            else np.full_like(self.y, -np.inf)
        )
        z = np.minimum(self.y, s)
        delta = (self.y <= s).astype(int)
        return z, t, delta, s


def _draw_candidates(
    rng: np.random.Generator, count: int, grid: Grid, noise_sd: float
) -> _Candidates:
    params = rng.uniform(*CURVE_PARAMETER_RANGE, size=(count, 3))
    noise = rng.normal(0.0, noise_sd, size=count)
    exponential = rng.standard_exponential(count)
    normal = rng.standard_normal(count)
    values = _curve_values(params, grid)
    y = _regression_values(values, grid) + noise
    positive = y > 0
    if not np.all(positive):
        logger.warning("Discarded %d candidates with nonpositive response", count - positive.sum())
    return _Candidates(
        params[positive], values[positive], y[positive], exponential[positive], normal[positive]
    )


def pilot_rates(
    mu: float,
    lam: float,
    pilot_size: int = MIN_PILOT_SIZE,
    seed: int = 0,
    noise_sd: float = 1.0,
    grid_size: int = DEFAULT_GRID_SIZE,
) -> PilotRates:
    """Measure censoring and truncation rates on a pilot run.

    The censoring rate is measured on the kept records, the raw one on
    all candidates, the truncation rate is the rejected fraction.
    """
    candidates = _draw_candidates(
        np.random.default_rng(seed), pilot_size, Grid.equidistant(grid_size), noise_sd
    )
    return _measure(candidates, mu, lam)


def _measure(candidates: _Candidates, mu: float, lam: float) -> PilotRates:
    z, t, delta, _ = candidates.observe(mu, lam)
    kept = z >= t
    return PilotRates(
        censor_rate=float(1.0 - delta[kept].mean()) if kept.any() else 0.0,
        raw_censor_rate=float(1.0 - delta.mean()),
        trunc_rate=float(1.0 - kept.mean()),
    )


def _check_target(target: float, pilot_size: int) -> None:
    if not 0.0 <= target <= MAX_CALIBRATION_TARGET:
        raise ValueError(f"calibration target must be in [0, {MAX_CALIBRATION_TARGET}]")
    if pilot_size < MIN_PILOT_SIZE:
        raise ValueError(f"pilot runs need at least {MIN_PILOT_SIZE} candidates")


def _pilot_candidates(pilot_size: int, seed: int, noise_sd: float, grid_size: int) -> _Candidates:
    return _draw_candidates(
        np.random.default_rng(seed), pilot_size, Grid.equidistant(grid_size), noise_sd
    )


def _truncation_mean(candidates: _Candidates, mu: float, target: float) -> float:
    """Return the lambda rejecting a ``target`` share of the candidates.

    A candidate is kept iff lambda <= Z - sqrt(2) N, so the truncation
    rate is the empirical distribution function of these thresholds.
    """
    if target == 0.0:
        return NO_TRUNCATION
    z = candidates.observe(mu, NO_TRUNCATION)[0]
    thresholds = z - math.sqrt(TRUNCATION_VARIANCE) * candidates.normal
    return float(np.quantile(thresholds, target))


def _solve_log_mu(excess: Callable[[float], float], what: str) -> float:
    """Return the first mu where ``excess(log mu)`` turns nonnegative.

    The censoring rate of the kept records isn't monotone once nearly
    everything is rejected, so the bracket is the first sign change on
    a log-spaced scan.
    """
    previous = None
    for log_mu in np.linspace(*np.log(MU_SCAN_RANGE), MU_SCAN_POINTS):
        if excess(log_mu) >= 0.0:
            break
        previous = log_mu
    else:
        raise CalibrationError(f"{what} can't be reached")
    if previous is None:
        raise CalibrationError(f"{what} can't be undercut")
    try:
        root = brentq(
            excess, previous, log_mu, xtol=CALIBRATION_XTOL, maxiter=CALIBRATION_ITERATIONS
        )
    except (ValueError, RuntimeError) as exc:
        raise CalibrationError(f"{what}: {exc}") from exc
    return math.exp(root)


def _check_rates(candidates: _Candidates, mu: float, lam: float, **targets: float) -> None:
    achieved = _measure(candidates, mu, lam)
    for name, target in targets.items():
        rate = getattr(achieved, name)
        if abs(rate - target) > CALIBRATION_TOLERANCE:
            raise CalibrationError(
                f"{name} {target} missed: mu={mu:g}, lambda={lam:g} give {rate:.4f}"
            )


def calibrate_censoring(
    target: float,
    lam: float,
    pilot_size: int = MIN_PILOT_SIZE,
    seed: int = 0,
    noise_sd: float = 1.0,
    grid_size: int = DEFAULT_GRID_SIZE,
) -> float:
    """Find the exponential rate mu giving a censoring rate.

    The censoring rate is measured on the records kept after
    truncation with mean ``lam``. All pilot evaluations share the same
    random numbers.

    Raises:
        CalibrationError: if no rate reaches the target

    """
    _check_target(target, pilot_size)
    if target == 0.0:
        return NO_CENSORING
    candidates = _pilot_candidates(pilot_size, seed, noise_sd, grid_size)

    def excess(log_mu: float) -> float:
        return _measure(candidates, math.exp(log_mu), lam).censor_rate - target

    mu = _solve_log_mu(excess, f"censoring rate {target}")
    _check_rates(candidates, mu, lam, censor_rate=target)
    logger.debug("Calibrated mu=%g for censoring rate %g", mu, target)
    return mu


def calibrate_truncation(
    target: float,
    mu: float,
    pilot_size: int = MIN_PILOT_SIZE,
    seed: int = 0,
    noise_sd: float = 1.0,
    grid_size: int = DEFAULT_GRID_SIZE,
) -> float:
    """Find the truncation mean lambda giving a truncation rate.

    The truncation rate is the fraction of rejected candidates, with
    censoring rate ``mu``.
    """
    _check_target(target, pilot_size)
    if target == 0.0:
        return NO_TRUNCATION
    candidates = _pilot_candidates(pilot_size, seed, noise_sd, grid_size)
    lam = _truncation_mean(candidates, mu, target)
    logger.debug("Calibrated lambda=%g for truncation rate %g", lam, target)
    return lam


@cached(LRUCache(maxsize=64))
def calibrate(
    censor_target: float,
    trunc_target: float,
    pilot_size: int = MIN_PILOT_SIZE,
    seed: int = 0,
    noise_sd: float = 1.0,
    grid_size: int = DEFAULT_GRID_SIZE,
) -> tuple[float, float]:
    """Calibrate mu and lambda jointly for a pair of rate targets.

    The root search runs over mu on the censoring rate of the pair
    (mu, lambda(mu)), where lambda(mu) hits the truncation target
    exactly on the pilot run.

    Returns:
        tuple of mu and lambda

    Raises:
        CalibrationError: if the pair misses either target

    """
    _check_target(censor_target, pilot_size)
    _check_target(trunc_target, pilot_size)
    candidates = _pilot_candidates(
        pilot_size, derive_seed(seed, PILOT_STREAM), noise_sd, grid_size
    )
    mu = NO_CENSORING
    if censor_target > 0.0:

        def excess(log_mu: float) -> float:
            candidate = math.exp(log_mu)
            lam = _truncation_mean(candidates, candidate, trunc_target)
            return _measure(candidates, candidate, lam).censor_rate - censor_target

        mu = _solve_log_mu(
            excess, f"censoring rate {censor_target} with truncation rate {trunc_target}"
        )
    lam = _truncation_mean(candidates, mu, trunc_target)
    _check_rates(candidates, mu, lam, censor_rate=censor_target, trunc_rate=trunc_target)
    logger.info(
        "Calibrated mu=%g, lambda=%g for censoring %g and truncation %g",
        mu,
        lam,
        censor_target,
        trunc_target,
    )
    return mu, lam


def resolve_rates(config: SimulationConfig) -> tuple[float, float]:
    """Return mu and lambda of a design, calibrating missing ones.

    A given parameter is held fixed while the missing one is
    calibrated against it.
    """
    if config.mu is not None and config.lam is not None:
        return config.mu, config.lam
    options = {
        "pilot_size": config.pilot_size,
        "seed": derive_seed(config.seed, PILOT_STREAM),
        "noise_sd": config.noise_sd,
        "grid_size": config.grid_size,
    }
    if config.mu is not None:
        return config.mu, calibrate_truncation(config.trunc_rate, config.mu, **options)
    if config.lam is not None:
        return calibrate_censoring(config.censor_rate, config.lam, **options), config.lam
    return calibrate(
        config.censor_rate,
        config.trunc_rate,
        config.pilot_size,
        config.seed,
        config.noise_sd,
        config.grid_size,
    )


def rate_parameters(mu: float, lam: float) -> dict:
    """Return mu and lambda with sentinels as ``None``."""
    return {
        "mu": None if mu == NO_CENSORING else mu,
        "lambda": None if lam == NO_TRUNCATION else lam,
    }


def simulate(config: SimulationConfig) -> SimulationResult:
    """Draw candidates until ``config.n`` of them survive truncation.

    Raises:
        RunawayRejectionError: if almost every candidate is rejected

    """
    mu, lam = resolve_rates(config)
    grid = Grid.equidistant(config.grid_size)
    rng = np.random.default_rng(derive_seed(config.seed, SAMPLE_STREAM))
    batch_size = max(4 * config.n, 1024)

    chunks = []
    kept = drawn = raw_censored = 0
    while kept < config.n:
        candidates = _draw_candidates(rng, batch_size, grid, config.noise_sd)
        z, t, delta, s = candidates.observe(mu, lam)
        accepted = np.flatnonzero(z >= t)[: config.n - kept]
        used = accepted[-1] + 1 if kept + accepted.size == config.n else z.size
        drawn += int(used)
        raw_censored += int(np.count_nonzero(delta[:used] == 0))
        kept += accepted.size
        columns = (candidates.values, candidates.y, z, t, delta, s)
        chunks.append(tuple(column[accepted] for column in columns))
        if drawn >= RUNAWAY_MIN_CANDIDATES and kept / drawn < MIN_ACCEPTANCE_RATE:
            raise RunawayRejectionError(
                f"only {kept} of {drawn} candidates survived truncation (lambda={lam:g})"
            )

    values, latent_y, z, t, delta, latent_s = (np.concatenate(column) for column in zip(*chunks))
    sample = records_from_arrays([Curve(grid, row) for row in values], z, t, delta)
    result = SimulationResult(
        sample=sample,
        latent_y=latent_y,
        latent_s=latent_s,
        candidates_drawn=drawn,
        censor_rate=float(1.0 - delta.mean()),
        trunc_rate=1.0 - config.n / drawn,
        raw_censor_rate=raw_censored / drawn,
        mu=mu,
        lam=lam,
    )
    logger.debug(
        "Simulated %d records from %d candidates (censoring %.3f, truncation %.3f)",
        config.n,
        drawn,
        result.censor_rate,
        result.trunc_rate,
    )
    return result
