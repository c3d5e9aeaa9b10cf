"""Weekly panel data model and CSV ingestion.

The toolkit operates on two shapes of data: regional *daily* climate records
(one row per region and calendar day) and the national *weekly* panel that the
statistical modules consume.  Both have a canonical CSV form.  Ingestion is
strict: malformed cells, calendar gaps and duplicate keys are rejected with
the offending line number rather than repaired or imputed.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
import os
import tempfile
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import AlignmentError, IngestionError, InvalidInputError, ShapeError

#: Header of the regional daily climate CSV, in canonical column order.
DAILY_CSV_HEADER = (
    "region_id",
    "date",
    "temp_c",
    "u10_ms",
    "v10_ms",
    "precip_mm",
    "spec_humidity_gkg",
    "cloud_cover",
    "fwi",
)

#: Canonical weekly panel columns (demand first when present).
PANEL_COLUMNS = (
    "drug_demand",
    "temperature",
    "wind_speed",
    "cloud_cover",
    "specific_humidity",
    "precipitation",
    "fwi",
    "temperature_sd",
    "extreme_rainfall",
    "wet_days",
)

WEEK_DAYS = 7


def format_float(x: float) -> str:
    """Fixed 10-significant-digit rendering used by every CSV writer.

    The same float always renders to the same text, so emitted files are
    byte-stable, and text produced here parses back to a float that renders
    identically (the representation is a fixed point of write-then-read).
    """
    return "%.10g" % float(x)


def _check_finite_1d(values: np.ndarray, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ShapeError(f"{what} must be one-dimensional, got shape {arr.shape}")
    if arr.size and not np.isfinite(arr).all():
        bad = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise InvalidInputError(f"{what} contains a non-finite value at position {bad}")
    return arr


def _check_week_axis(week_starts: Sequence[dt.date], what: str) -> tuple[dt.date, ...]:
    weeks = tuple(week_starts)
    for w in weeks:
        if not isinstance(w, dt.date) or isinstance(w, dt.datetime):
            raise InvalidInputError(f"{what}: week starts must be datetime.date values")
    for a, b in zip(weeks, weeks[1:]):
        if (b - a).days != WEEK_DAYS:
            raise AlignmentError(
                f"{what}: week starts must be exactly 7 days apart, found {a} -> {b}"
            )
    return weeks


@dataclass(frozen=True)
class RegionalDailyRecord:
    """One region-day of climate measurements.

    Units follow the daily CSV: temperature in deg C, wind components in m/s,
    precipitation in mm, specific humidity in g/kg, cloud cover as a fraction
    of the sky, and the fire weather index on its usual open-ended scale.
    """

    region_id: str
    date: dt.date
    temp: float
    u10: float
    v10: float
    precip: float
    specific_humidity: float
    cloud_cover: float
    fwi: float

    def __post_init__(self):
        if not self.region_id:
            raise InvalidInputError("region_id must be a non-empty string")
        values = (
            self.temp,
            self.u10,
            self.v10,
            self.precip,
            self.specific_humidity,
            self.cloud_cover,
            self.fwi,
        )
        if not all(math.isfinite(v) for v in values):
            raise InvalidInputError(
                f"non-finite measurement for region {self.region_id} on {self.date}"
            )
        if not 0.0 <= self.cloud_cover <= 1.0:
            raise InvalidInputError(
                f"cloud_cover must lie in [0, 1], got {self.cloud_cover!r} "
                f"for region {self.region_id} on {self.date}"
            )
        if self.precip < 0.0:
            raise InvalidInputError(
                f"precip must be non-negative, got {self.precip!r} "
                f"for region {self.region_id} on {self.date}"
            )
        if self.fwi < 0.0:
            raise InvalidInputError(
                f"fwi must be non-negative, got {self.fwi!r} "
                f"for region {self.region_id} on {self.date}"
            )


@dataclass(frozen=True)
class WeeklySeries:
    """A named weekly series on a contiguous Monday-indexed time axis."""

    name: str
    week_starts: tuple[dt.date, ...]
    values: np.ndarray

    def __post_init__(self):
        weeks = _check_week_axis(self.week_starts, f"series {self.name!r}")
        vals = _check_finite_1d(self.values, f"series {self.name!r} values")
        if len(weeks) != vals.size:
            raise ShapeError(
                f"series {self.name!r}: {len(weeks)} week starts but {vals.size} values"
            )
        object.__setattr__(self, "week_starts", weeks)
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class PanelDataset:
    """National weekly panel: a shared week axis plus named value columns."""

    week_starts: tuple[dt.date, ...]
    columns: dict[str, np.ndarray]

    def __post_init__(self):
        weeks = _check_week_axis(self.week_starts, "panel")
        if not self.columns:
            raise InvalidInputError("panel must have at least one column")
        frozen: dict[str, np.ndarray] = {}
        for name, values in self.columns.items():
            vals = _check_finite_1d(values, f"panel column {name!r}")
            if vals.size != len(weeks):
                raise ShapeError(
                    f"panel column {name!r} has {vals.size} values "
                    f"for {len(weeks)} weeks"
                )
            vals = vals.copy()
            vals.flags.writeable = False
            frozen[name] = vals
        object.__setattr__(self, "week_starts", weeks)
        object.__setattr__(self, "columns", frozen)

    @property
    def n_weeks(self) -> int:
        return len(self.week_starts)

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(self.columns)

    def column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise KeyError(
                f"panel has no column {name!r}; available: {', '.join(self.columns)}"
            )
        return self.columns[name]

    def series(self, name: str) -> WeeklySeries:
        return WeeklySeries(name, self.week_starts, self.column(name))

    def matrix(self, names: Sequence[str]) -> np.ndarray:
        """Column-stack the named columns into a (n_weeks, len(names)) array."""
        return np.column_stack([self.column(n) for n in names])

    def with_column(self, name: str, values: np.ndarray) -> "PanelDataset":
        cols = dict(self.columns)
        cols[name] = np.asarray(values, dtype=float)
        return PanelDataset(self.week_starts, cols)

    def select(self, names: Sequence[str]) -> "PanelDataset":
        return PanelDataset(self.week_starts, {n: self.column(n) for n in names})

    def slice_weeks(self, start: int, stop: int) -> "PanelDataset":
        """Return the sub-panel for week positions [start, stop)."""
        if not 0 <= start < stop <= self.n_weeks:
            raise ShapeError(
                f"week slice [{start}, {stop}) out of range for {self.n_weeks} weeks"
            )
        return PanelDataset(
            self.week_starts[start:stop],
            {n: v[start:stop] for n, v in self.columns.items()},
        )

    def equals(self, other: "PanelDataset") -> bool:
        return (
            self.week_starts == other.week_starts
            and self.column_names == other.column_names
            and all(
                np.array_equal(self.columns[n], other.columns[n])
                for n in self.columns
            )
        )


def _atomic_write_text(path: str, text: str) -> None:
    """Write ``text`` to ``path`` via a temp file in the same directory."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_panel_csv(panel: PanelDataset, path: str) -> None:
    """Serialize a panel to CSV (``week_start`` first, 10 significant digits)."""
    lines = ["week_start," + ",".join(panel.column_names)]
    cols = [panel.columns[n] for n in panel.column_names]
    for i, week in enumerate(panel.week_starts):
        lines.append(week.isoformat() + "," + ",".join(format_float(c[i]) for c in cols))
    _atomic_write_text(path, "\n".join(lines) + "\n")


def _parse_date(cell: str, line: int) -> dt.date:
    try:
        return dt.date.fromisoformat(cell)
    except ValueError:
        raise IngestionError(f"unparseable ISO date {cell!r}", line) from None


def _parse_float(cell: str, column: str, line: int) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise IngestionError(f"unparseable number {cell!r} in column {column!r}", line) from None
    if not math.isfinite(value):
        raise IngestionError(f"non-finite value {cell!r} in column {column!r}", line)
    return value


def read_panel_csv(path: str) -> PanelDataset:
    """Ingest a weekly panel CSV.

    The header must start with ``week_start``; week starts must be ISO-dated
    Mondays exactly seven days apart.  Any gap, duplicate column, ragged row
    or malformed cell raises :class:`IngestionError` with the line number.
    """
    with open(path, "r", encoding="utf-8", newline="") as handle:
        rows = list(csv.reader(handle))
    if not rows:
        raise IngestionError("empty file: no header row", 1)
    header = rows[0]
    if not header or header[0] != "week_start":
        raise IngestionError("header must start with 'week_start'", 1)
    names = header[1:]
    if not names:
        raise IngestionError("panel CSV must have at least one value column", 1)
    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise IngestionError(f"duplicate column names: {', '.join(dupes)}", 1)

    weeks: list[dt.date] = []
    data: list[list[float]] = [[] for _ in names]
    for offset, row in enumerate(rows[1:]):
        line = offset + 2
        if len(row) != len(names) + 1:
            raise IngestionError(
                f"expected {len(names) + 1} cells, found {len(row)}", line
            )
        week = _parse_date(row[0], line)
        if week.weekday() != 0:
            raise IngestionError(f"week_start {week} is not a Monday", line)
        if weeks:
            expected = weeks[-1] + dt.timedelta(days=WEEK_DAYS)
            if week != expected:
                raise IngestionError(
                    f"gap in week axis: expected week {expected}, found {week}", line
                )
        weeks.append(week)
        for j, cell in enumerate(row[1:]):
            data[j].append(_parse_float(cell, names[j], line))
    if not weeks:
        raise IngestionError("no data rows", 1)
    return PanelDataset(
        tuple(weeks), {n: np.asarray(v, dtype=float) for n, v in zip(names, data)}
    )


def read_daily_csv(path: str) -> list[RegionalDailyRecord]:
    """Ingest regional daily climate records.

    Enforces the canonical header, one record per (region, day), and a
    gap-free daily calendar within each region.  Errors carry line numbers.
    """
    with open(path, "r", encoding="utf-8", newline="") as handle:
        rows = list(csv.reader(handle))
    if not rows:
        raise IngestionError("empty file: no header row", 1)
    if tuple(rows[0]) != DAILY_CSV_HEADER:
        raise IngestionError(
            "unexpected header; expected " + ",".join(DAILY_CSV_HEADER), 1
        )
    records: list[RegionalDailyRecord] = []
    lines: dict[tuple[str, dt.date], int] = {}
    for offset, row in enumerate(rows[1:]):
        line = offset + 2
        if len(row) != len(DAILY_CSV_HEADER):
            raise IngestionError(
                f"expected {len(DAILY_CSV_HEADER)} cells, found {len(row)}", line
            )
        region = row[0]
        date = _parse_date(row[1], line)
        key = (region, date)
        if key in lines:
            raise IngestionError(
                f"duplicate record for region {region!r} on {date} "
                f"(first seen on line {lines[key]})",
                line,
            )
        lines[key] = line
        numbers = [
            _parse_float(cell, DAILY_CSV_HEADER[j + 2], line)
            for j, cell in enumerate(row[2:])
        ]
        try:
            records.append(RegionalDailyRecord(region, date, *numbers))
        except InvalidInputError as exc:
            raise IngestionError(str(exc), line) from None
    if not records:
        raise IngestionError("no data rows", 1)

    # Daily calendars must be gap free within each region.
    by_region: dict[str, list[dt.date]] = {}
    for rec in records:
        by_region.setdefault(rec.region_id, []).append(rec.date)
    for region, dates in by_region.items():
        dates.sort()
        for a, b in zip(dates, dates[1:]):
            if (b - a).days != 1:
                missing = a + dt.timedelta(days=1)
                raise IngestionError(
                    f"gap in daily calendar for region {region!r}: "
                    f"missing {missing}",
                    lines[(region, b)],
                )
    return records


def write_daily_csv(records: Iterable[RegionalDailyRecord], path: str) -> None:
    """Serialize daily records in canonical column order."""
    lines = [",".join(DAILY_CSV_HEADER)]
    for rec in records:
        lines.append(
            ",".join(
                [
                    rec.region_id,
                    rec.date.isoformat(),
                    format_float(rec.temp),
                    format_float(rec.u10),
                    format_float(rec.v10),
                    format_float(rec.precip),
                    format_float(rec.specific_humidity),
                    format_float(rec.cloud_cover),
                    format_float(rec.fwi),
                ]
            )
        )
    _atomic_write_text(path, "\n".join(lines) + "\n")
