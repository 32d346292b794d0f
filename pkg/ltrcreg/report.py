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

"""Reading and writing of CSV, JSON and SVG artifacts.

Every CSV starts with the schema line
``# ltrcreg-schema: <kind>/<version>``, which the loaders check. All
files are first written to a temporary file in the target directory
and then renamed, so a failing run never leaves a partial artifact
behind.
"""

import io
import json
import logging
import math
import os
import tempfile
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field
from enum import Enum
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import matplotlib
import numpy as np
import pandas as pd
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from ltrcreg.errors import NoDataError, SchemaError
from ltrcreg.evaluation import CONVENTIONS, GMSEReport, InfluencePoint, Scenario
from ltrcreg.functional_core import Curve, Grid
from ltrcreg.survival import LTRCRecord, LTRCSample


SCHEMA_PREFIX = "# ltrcreg-schema: "

SCHEMA_VERSIONS = {
    "curves": 1,
    "sample": 1,
    "latents": 1,
    "predictions": 1,
    "gmse": 1,
    "influence": 1,
}

# Enough significant digits to read back every float exactly.
FLOAT_FORMAT = "%.17g"

SAMPLE_COLUMNS = ("z", "t", "delta")

logger = logging.getLogger(__name__)


def tool_version() -> str:
    """Return the installed version of ltrcreg."""
    try:
        return version("ltrcreg")
    except PackageNotFoundError:
        return "unknown"


def atomic_write(path: Path | str, text: str) -> Path:
    """Write a text file by renaming a completed temporary file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.NamedTemporaryFile(
        "w", encoding="utf-8", newline="", dir=path.parent, prefix=f".{path.name}.", delete=False
    ) as temporary:
        temporary.write(text)
    try:
        os.replace(temporary.name, path)
    except OSError:
        Path(temporary.name).unlink(missing_ok=True)
        raise
    logger.debug("Wrote %s", path)
    return path


def _schema_line(kind: str) -> str:
    return f"{SCHEMA_PREFIX}{kind}/{SCHEMA_VERSIONS[kind]}\n"


def _check_schema(path: Path, kind: str) -> None:
    with path.open(encoding="utf-8") as f:
        first = f.readline().rstrip("\r\n")
    if not first.startswith(SCHEMA_PREFIX):
        raise SchemaError(f"{path} has no schema line")
    found_kind, _, found_version = first.removeprefix(SCHEMA_PREFIX).partition("/")
    if found_kind != kind:
        raise SchemaError(f"{path} holds {found_kind!r} data, expected {kind!r}")
    if found_version != str(SCHEMA_VERSIONS[kind]):
        raise SchemaError(f"{path} has unsupported {kind} schema version {found_version!r}")


def write_table(frame: pd.DataFrame, path: Path | str, kind: str, header: bool = True) -> Path:
    """Write a data frame as a CSV file with a schema line."""
    body = frame.to_csv(index=False, header=header, float_format=FLOAT_FORMAT, lineterminator="\n")
    return atomic_write(path, _schema_line(kind) + body)


def read_table(path: Path | str, kind: str, header: bool = True) -> pd.DataFrame:
    """Read a CSV file written by :func:`write_table`.

    Raises:
        SchemaError: if the schema line is missing or doesn't match,
            or if the rows are ragged

    """
    path = Path(path)
    _check_schema(path, kind)
    try:
        frame = pd.read_csv(path, skiprows=1, header=0 if header else None)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise SchemaError(f"malformed {kind} file {path}: {exc}") from exc
    if frame.isna().to_numpy().any():
        raise SchemaError(f"{path} has ragged rows or missing values")
    return frame


def write_curves(curves: Sequence[Curve], path: Path | str) -> Path:
    """Write curves with the grid abscissae as first row."""
    if not curves:
        raise NoDataError("no curves to write")
    grid = curves[0].grid
    rows = np.vstack([grid.points, *(curve.values for curve in curves)])
    return write_table(pd.DataFrame(rows), path, "curves", header=False)


def read_curves(path: Path | str) -> list[Curve]:
    """Read curves written by :func:`write_curves`."""
    rows = read_table(path, "curves", header=False).to_numpy(dtype=float)
    if rows.shape[0] < 2:
        raise SchemaError(f"{path} holds no curve")
    try:
        grid = Grid(rows[0])
        return [Curve(grid, values) for values in rows[1:]]
    except ValueError as exc:
        raise SchemaError(f"invalid curve file {path}: {exc}") from exc


def sample_frame(sample: LTRCSample) -> pd.DataFrame:
    """Return a sample as a frame with z, t, delta and curve columns.

    The curve columns are named after the grid abscissae.
    """
    names = [FLOAT_FORMAT % x for x in sample.grid.points]
    frame = pd.DataFrame(np.vstack([c.values for c in sample.curves]), columns=names)
    frame.insert(0, "delta", sample.delta)
    frame.insert(0, "t", sample.t)
    frame.insert(0, "z", sample.z)
    return frame


def write_sample(sample: LTRCSample, path: Path | str) -> Path:
    """Write an LTRC sample."""
    return write_table(sample_frame(sample), path, "sample")


def read_sample(path: Path | str) -> LTRCSample:
    """Read an LTRC sample, validating every record.

    Raises:
        SchemaError: if a column is missing or a record is invalid

    """
    frame = read_table(path, "sample")
    if tuple(frame.columns[:3]) != SAMPLE_COLUMNS:
        raise SchemaError(f"{path} must start with the columns z, t, delta")
    try:
        grid = Grid([float(name) for name in frame.columns[3:]])
    except ValueError as exc:
        raise SchemaError(f"invalid grid in the header of {path}: {exc}") from exc

    values = frame.iloc[:, 3:].to_numpy(dtype=float)
    records = []
    for row, (z, t, delta) in enumerate(frame[list(SAMPLE_COLUMNS)].itertuples(index=False)):
        try:
            if delta not in (0, 1):
                raise ValueError(f"censoring indicator must be 0 or 1, got {delta}")
            records.append(LTRCRecord(Curve(grid, values[row]), z, t, int(delta)))
        except ValueError as exc:
            raise SchemaError(f"{path}, record {row + 1}: {exc}") from exc
    if not records:
        raise SchemaError(f"{path} holds no record")
    return LTRCSample(tuple(records))


def write_latents(latent_y, latent_s, path: Path | str) -> Path:
    """Write the latent lifetimes and censoring times of a sample."""
    frame = pd.DataFrame({"y": latent_y, "s": latent_s})
    return write_table(frame, path, "latents")


def predictions_frame(values: dict, neighbors: dict, count: int) -> pd.DataFrame:
    """Tabulate predictions of several estimators.

    Arguments:
        values (dict): predicted values per estimator name, NaN where
            the prediction failed
        neighbors (dict): effective neighbor counts per estimator name
        count (int): number of queries

    """
    frame = pd.DataFrame({"query": np.arange(count)})
    flags = [[] for _ in range(count)]
    for name, predicted in values.items():
        predicted = np.asarray(predicted, dtype=float)
        frame[name] = predicted
        for query in np.flatnonzero(~np.isfinite(predicted)):
            flags[query].append(f"{name}-empty-neighborhood")
    for name, counts in neighbors.items():
        frame[f"neighbors_{name}"] = np.asarray(counts, dtype=int)
    frame["flags"] = [";".join(f) or "ok" for f in flags]
    return frame


def write_predictions(frame: pd.DataFrame, path: Path | str) -> Path:
    """Write predictions; failed ones are written as empty cells."""
    body = frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n", na_rep="")
    return atomic_write(path, _schema_line("predictions") + body)


def gmse_frame(report: GMSEReport) -> pd.DataFrame:
    """Tabulate a benchmark with one row per scenario."""
    entries: dict[int, dict] = {}
    for row in report.rows:
        entry = entries.setdefault(
            row.scenario_index,
            {
                "censor_rate": row.scenario.censor,
                "trunc_rate": row.scenario.trunc,
                "n": row.scenario.n,
            },
        )
        kind = row.kind.value
        entry[kind] = row.gmse
        entry[f"{kind}_failed"] = row.failed
        entry[f"{kind}_bandwidth"] = row.mean_bandwidth
        entry["mu"] = row.mu
        entry["lam"] = row.lam
    return pd.DataFrame(list(entries.values()))


def write_gmse(report: GMSEReport, path: Path | str) -> Path:
    """Write the GMSE table of a benchmark."""
    return write_table(gmse_frame(report), path, "gmse")


def write_gmse_sidecar(report: GMSEReport, path: Path | str) -> Path:
    """Write the metadata and the rows of a benchmark as JSON."""
    rows = gmse_frame(report).to_dict(orient="records")
    return write_json({"metadata": report.metadata, "rows": rows}, path)


def influence_frame(points: Sequence[InfluencePoint]) -> pd.DataFrame:
    """Tabulate influence points."""
    return pd.DataFrame(
        {
            "distance": [p.distance for p in points],
            "eif_rer": [p.eif_rer for p in points],
            "eif_nw": [p.eif_nw for p in points],
        }
    )


def write_influence(points: Sequence[InfluencePoint], path: Path | str) -> Path:
    """Write influence points."""
    return write_table(influence_frame(points), path, "influence")


def json_safe(value):
    """Convert a value to plain JSON types.

    Non-finite floats, which include the sentinels for absent
    censoring and truncation, become ``None``.
    """
    if isinstance(value, dict):
        return {str(k): json_safe(v) for k, v in value.items()}
    if isinstance(value, list | tuple):
        return [json_safe(v) for v in value]
    if isinstance(value, np.ndarray):
        return json_safe(value.tolist())
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, Enum):
        return value.value
    return value


def write_json(data, path: Path | str) -> Path:
    """Write JSON with sorted keys."""
    text = json.dumps(json_safe(data), indent=2, sort_keys=True, allow_nan=False)
    return atomic_write(path, text + "\n")


@dataclass
class RunManifest:
    """Everything needed to reproduce the artifacts of one run."""

    command: str
    config: dict
    seed: int | None
    artifacts: list[str] = field(default_factory=list)
    version: str = field(default_factory=tool_version)
    conventions: dict = field(default_factory=lambda: dict(CONVENTIONS))
    results: dict = field(default_factory=dict)

    def add_artifact(self, path: Path | str) -> None:
        """Record a written artifact."""
        self.artifacts.append(str(path))

    def write(self, path: Path | str) -> Path:
        """Write the manifest as JSON."""
        return write_json(asdict(self), path)


# Fixed ids and text elements instead of glyph paths keep the SVG
# byte-identical across runs.
SVG_RC_PARAMS = {"svg.hashsalt": "ltrcreg", "svg.fonttype": "none"}
FIGURE_SIZE = (6.4, 4.8)

# Legend label, marker and color per series.
SERIES_STYLE = {
    "eif_rer": ("RER", "o", "#1f77b4"),
    "eif_nw": ("NW", "s", "#d62728"),
}


def render_svg_scatter(points: Sequence[InfluencePoint], title: str = "") -> str:
    """Render influence points as an SVG scatter plot.

    Each series is drawn as a group whose id is its CSV column.

    Raises:
        NoDataError: if there are no points

    """
    if not points:
        raise NoDataError("no influence points to plot")
    frame = influence_frame(points)
    buffer = io.StringIO()
    with matplotlib.rc_context(SVG_RC_PARAMS):
        fig = Figure(figsize=FIGURE_SIZE, layout="constrained")
        FigureCanvasAgg(fig)
        ax = fig.subplots()
        for column, (label, marker, color) in SERIES_STYLE.items():
            ax.scatter(
                frame["distance"], frame[column], marker=marker, c=color, label=label, gid=column
            )
        ax.set_xlabel("distance")
        ax.set_ylabel("EIF")
        if title:
            ax.set_title(title)
        ax.grid(True, alpha=0.3)
        ax.legend(loc="best")
        fig.savefig(buffer, format="svg", metadata={"Date": None})
    return buffer.getvalue()


def emit_svg_scatter(points: Sequence[InfluencePoint], path: Path | str, title: str = "") -> Path:
    """Write influence points as an SVG scatter plot.

    Raises:
        NoDataError: if there are no points

    """
    return atomic_write(path, render_svg_scatter(points, title))


def read_scenarios(path: Path | str) -> tuple[Scenario, ...]:
    """Read benchmark scenarios from a JSON array of objects.

    Every object has the keys ``censor``, ``trunc`` and ``n``.

    Raises:
        SchemaError: if the file isn't such an array

    """
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid scenario file {path}: {exc}") from exc
    if not isinstance(data, list) or not data:
        raise SchemaError(f"{path} must hold a nonempty array of scenarios")
    scenarios = []
    for position, entry in enumerate(data):
        if not isinstance(entry, dict) or set(entry) != {"censor", "trunc", "n"}:
            raise SchemaError(f"scenario {position} in {path} needs exactly censor, trunc and n")
        if not isinstance(entry["n"], int) or entry["n"] < 1:
            raise SchemaError(f"scenario {position} in {path} has an invalid sample size")
        try:
            scenarios.append(Scenario(float(entry["censor"]), float(entry["trunc"]), entry["n"]))
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"scenario {position} in {path} is invalid: {exc}") from exc
    return tuple(scenarios)
