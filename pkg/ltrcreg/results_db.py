# Copyright (C) 2024 Wildfire Games.
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

"""Database schema to archive benchmark reports."""

import argparse
import math
from datetime import UTC, datetime
from functools import partial
from typing import ClassVar

from sqlalchemy import (
    JSON,
    DateTime,
    ForeignKey,
    String,
    TypeDecorator,
    create_engine,
    create_mock_engine,
)
from sqlalchemy.orm import DeclarativeBase, Mapped, Session, mapped_column, relationship

from ltrcreg.datagen import rate_parameters
from ltrcreg.evaluation import GMSEReport
from ltrcreg.report import json_safe, tool_version


DEFAULT_DATABASE_URL = "sqlite:///ltrcreg_results.sqlite3"


class TZDateTime(TypeDecorator):
    """Timezone aware DateTime datatype for SQLAlchemy."""

    impl = DateTime
    cache_ok = True

    def process_bind_param(self, value, _):
        """Store datetime values in UTC in the database."""
        if value is not None:
            if not value.tzinfo or value.tzinfo.utcoffset(value) is None:
                raise TypeError("timezone aware datetime object required")
            value = value.astimezone(UTC).replace(tzinfo=None)
        return value

    def process_result_value(self, value, _):
        """Add UTC as timezone for values returned from the database."""
        if value is not None:
            value = value.replace(tzinfo=UTC)
        return value


class Base(DeclarativeBase):
    """Base class for models.

    Defaults to use a timezone aware datatype for datetimes.
    """

    type_annotation_map: ClassVar[dict[type, TypeDecorator]] = {
        datetime: TZDateTime(),
    }


class BenchmarkRun(Base):
    """Model for one archived benchmark run."""

    __tablename__ = "benchmark_runs"

    id: Mapped[int] = mapped_column(primary_key=True)
    created: Mapped[datetime] = mapped_column(default=partial(datetime.now, tz=UTC))
    seed: Mapped[int]
    version: Mapped[str] = mapped_column(String(64))
    replicates: Mapped[int]
    eval_curves: Mapped[int]
    conventions: Mapped[dict] = mapped_column(JSON)
    results: Mapped[list["GMSEResult"]] = relationship(back_populates="run")


class GMSEResult(Base):
    """Model for the GMSE of one estimator in one scenario."""

    __tablename__ = "gmse_results"

    id: Mapped[int] = mapped_column(primary_key=True)
    run_id: Mapped[int] = mapped_column(ForeignKey("benchmark_runs.id"))
    run: Mapped[BenchmarkRun] = relationship(back_populates="results")
    scenario_index: Mapped[int]
    censor_target: Mapped[float]
    trunc_target: Mapped[float]
    n: Mapped[int]
    estimator: Mapped[str] = mapped_column(String(8))
    gmse: Mapped[float]
    failed_predictions: Mapped[int]
    valid_cells: Mapped[int]
    mean_bandwidth: Mapped[float | None]
    mu: Mapped[float | None]
    lam: Mapped[float | None]


def _finite_or_none(value: float) -> float | None:
    return value if math.isfinite(value) else None


def archive_report(report: GMSEReport, database_url: str = DEFAULT_DATABASE_URL) -> int:
    """Store a benchmark report.

    The tables are created if they don't exist yet.

    Returns:
        id of the stored run

    """
    engine = create_engine(database_url)
    Base.metadata.create_all(engine)
    metadata = report.metadata
    with Session(engine) as db:
        run = BenchmarkRun(
            seed=metadata["seed"],
            version=tool_version(),
            replicates=metadata["replicates"],
            eval_curves=metadata["eval_curves"],
            conventions=json_safe(metadata.get("conventions", {})),
        )
        for row in report.rows:
            parameters = rate_parameters(row.mu, row.lam)
            run.results.append(
                GMSEResult(
                    scenario_index=row.scenario_index,
                    censor_target=row.scenario.censor,
                    trunc_target=row.scenario.trunc,
                    n=row.scenario.n,
                    estimator=row.kind.value,
                    gmse=row.gmse,
                    failed_predictions=row.failed,
                    valid_cells=row.valid,
                    mean_bandwidth=_finite_or_none(row.mean_bandwidth),
                    mu=parameters["mu"],
                    lam=parameters["lambda"],
                )
            )
        db.add(run)
        db.commit()
        return run.id


def parse_args():
    """Parse command line arguments.

    Returns:
         Parsed command line arguments

    """
    parser = argparse.ArgumentParser(
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        description="Helper command for database creation",
    )
    parser.add_argument(
        "action", help="Action to apply to the database", choices=["create", "schema"]
    )
    parser.add_argument(
        "--database-url",
        help="URL for the results database",
        default=DEFAULT_DATABASE_URL,
    )
    return parser.parse_args()


def main():
    """Entry point a console script."""
    args = parse_args()
    if args.action == "create":
        Base.metadata.create_all(create_engine(args.database_url))
    elif args.action == "schema":
        engine = create_mock_engine(
            args.database_url,
            lambda sql, *_, **__: print(sql.compile(dialect=engine.dialect)),  # noqa: T201
        )
        Base.metadata.create_all(engine, checkfirst=False)


if __name__ == "__main__":
    main()
