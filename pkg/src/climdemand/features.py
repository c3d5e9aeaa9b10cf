"""Weekly climate feature derivation and national aggregation.

Daily regional records are reduced to one national weekly panel.  Wind speed
is derived from the 10 m wind components before averaging.  Three features
summarize within-week structure: the count of wet days (daily precipitation
strictly above a fixed threshold), the total rainfall on days exceeding the
region's extreme quantile, and the population standard deviation of daily
temperature.  Intensive quantities are averaged across regions; precipitation
totals and extreme rainfall are summed, so they remain national amounts.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import AlignmentError, ConfigError, InvalidInputError, ShapeError
from .panel import WEEK_DAYS, PanelDataset, RegionalDailyRecord

#: Climate columns produced by :func:`aggregate_weekly_national`, in order.
NATIONAL_CLIMATE_COLUMNS = (
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

# National aggregation rule: every column is averaged across regions except
# these two, which are extensive amounts and therefore summed.
_SUMMED_COLUMNS = frozenset({"precipitation", "extreme_rainfall"})


@dataclass(frozen=True)
class FeatureConfig:
    """Thresholds for the derived weekly features.

    Parameters
    ----------
    wet_day_threshold_mm : float
        A day is wet when its precipitation strictly exceeds this amount.
    extreme_quantile : float
        Per-region precipitation quantile above which a day counts as
        extreme rainfall.  Estimated from the region's full daily history
        with linear interpolation.
    """

    wet_day_threshold_mm: float = 1.0
    extreme_quantile: float = 0.999

    def __post_init__(self):
        problems: dict[str, str] = {}
        if not np.isfinite(self.wet_day_threshold_mm) or self.wet_day_threshold_mm < 0:
            problems["wet_day_threshold_mm"] = (
                f"must be a finite non-negative number, got {self.wet_day_threshold_mm!r}"
            )
        if not 0.0 < self.extreme_quantile < 1.0:
            problems["extreme_quantile"] = (
                f"must lie strictly inside (0, 1), got {self.extreme_quantile!r}"
            )
        if problems:
            raise ConfigError(problems)


def derive_wind_speed(u10, v10):
    """Wind speed from the zonal and meridional 10 m components.

    Accepts scalars or arrays; returns ``sqrt(u10**2 + v10**2)`` elementwise.
    """
    u = np.asarray(u10, dtype=float)
    v = np.asarray(v10, dtype=float)
    if u.shape != v.shape:
        raise ShapeError(f"wind components differ in shape: {u.shape} vs {v.shape}")
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise InvalidInputError("wind components must be finite")
    speed = np.hypot(u, v)
    return float(speed) if speed.ndim == 0 else speed


def _seven_days(values, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.shape != (WEEK_DAYS,):
        raise ShapeError(f"{what} requires exactly {WEEK_DAYS} daily values, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise InvalidInputError(f"{what}: daily values must be finite")
    return arr


def weekly_wet_days(daily_precip, cfg: FeatureConfig = FeatureConfig()) -> int:
    """Number of days in the week with precipitation strictly above threshold.

    A day exactly at the threshold is dry: the exceedance indicator is zero
    at zero argument.
    """
    precip = _seven_days(daily_precip, "weekly_wet_days")
    if np.any(precip < 0):
        raise InvalidInputError("weekly_wet_days: precipitation must be non-negative")
    return int(np.sum(precip > cfg.wet_day_threshold_mm))


def weekly_extreme_rainfall(daily_precip, extreme_threshold_mm: float) -> float:
    """Total precipitation on days strictly exceeding the extreme threshold."""
    precip = _seven_days(daily_precip, "weekly_extreme_rainfall")
    if np.any(precip < 0):
        raise InvalidInputError("weekly_extreme_rainfall: precipitation must be non-negative")
    if not np.isfinite(extreme_threshold_mm):
        raise InvalidInputError("weekly_extreme_rainfall: threshold must be finite")
    return float(np.sum(precip[precip > extreme_threshold_mm]))


def weekly_temperature_sd(daily_temp) -> float:
    """Population standard deviation (divisor 7) of the week's daily temperature."""
    temp = _seven_days(daily_temp, "weekly_temperature_sd")
    return float(np.std(temp))


def regional_extreme_threshold(daily_precip: Sequence[float], cfg: FeatureConfig) -> float:
    """Extreme-rainfall cutoff for one region from its full daily history."""
    precip = np.asarray(daily_precip, dtype=float)
    if precip.size == 0:
        raise InvalidInputError("cannot take a quantile of an empty precipitation history")
    return float(np.quantile(precip, cfg.extreme_quantile))


def aggregate_weekly_national(
    records: Iterable[RegionalDailyRecord],
    cfg: FeatureConfig = FeatureConfig(),
) -> PanelDataset:
    """Reduce regional daily records to the national weekly climate panel.

    Parameters
    ----------
    records : iterable of RegionalDailyRecord
        Every region must cover the same gap-free span of whole weeks,
        starting on a Monday.
    cfg : FeatureConfig
        Thresholds for wet days and extreme rainfall.

    Returns
    -------
    PanelDataset
        Columns :data:`NATIONAL_CLIMATE_COLUMNS` on the common week axis.

    Raises
    ------
    AlignmentError
        If regions cover different spans, a span does not start on a Monday,
        or it does not consist of whole weeks.
    """
    by_region: dict[str, list[RegionalDailyRecord]] = {}
    for rec in records:
        by_region.setdefault(rec.region_id, []).append(rec)
    if not by_region:
        raise InvalidInputError("no records to aggregate")

    spans = {}
    for region, recs in by_region.items():
        recs.sort(key=lambda r: r.date)
        dates = [r.date for r in recs]
        for a, b in zip(dates, dates[1:]):
            if (b - a).days == 0:
                raise AlignmentError(
                    f"region {region!r} has duplicate records for {a}"
                )
            if (b - a).days != 1:
                raise AlignmentError(
                    f"region {region!r} has a calendar gap after {a}"
                )
        spans[region] = (dates[0], dates[-1])
    if len(set(spans.values())) != 1:
        detail = "; ".join(
            f"{region}: {first} to {last}"
            for region, (first, last) in sorted(spans.items())
        )
        raise AlignmentError(f"regions cover different spans ({detail})")
    first, last = next(iter(spans.values()))
    if first.weekday() != 0:
        raise AlignmentError(f"span must start on a Monday, got {first} ({first:%A})")
    n_days = (last - first).days + 1
    if n_days % WEEK_DAYS != 0:
        raise AlignmentError(
            f"span {first} to {last} is {n_days} days, not a whole number of weeks"
        )
    n_weeks = n_days // WEEK_DAYS
    week_starts = tuple(first + dt.timedelta(days=WEEK_DAYS * k) for k in range(n_weeks))

    per_region: dict[str, dict[str, np.ndarray]] = {}
    for region, recs in by_region.items():
        temp = np.array([r.temp for r in recs])
        wind = derive_wind_speed([r.u10 for r in recs], [r.v10 for r in recs])
        precip = np.array([r.precip for r in recs])
        humidity = np.array([r.specific_humidity for r in recs])
        cloud = np.array([r.cloud_cover for r in recs])
        fwi = np.array([r.fwi for r in recs])
        cutoff = regional_extreme_threshold(precip, cfg)

        weeks_temp = temp.reshape(n_weeks, WEEK_DAYS)
        weeks_precip = precip.reshape(n_weeks, WEEK_DAYS)
        per_region[region] = {
            "temperature": weeks_temp.mean(axis=1),
            "wind_speed": wind.reshape(n_weeks, WEEK_DAYS).mean(axis=1),
            "cloud_cover": cloud.reshape(n_weeks, WEEK_DAYS).mean(axis=1),
            "specific_humidity": humidity.reshape(n_weeks, WEEK_DAYS).mean(axis=1),
            "precipitation": weeks_precip.sum(axis=1),
            "fwi": fwi.reshape(n_weeks, WEEK_DAYS).mean(axis=1),
            "temperature_sd": np.array(
                [weekly_temperature_sd(row) for row in weeks_temp]
            ),
            "extreme_rainfall": np.array(
                [weekly_extreme_rainfall(row, cutoff) for row in weeks_precip]
            ),
            "wet_days": np.array(
                [float(weekly_wet_days(row, cfg)) for row in weeks_precip]
            ),
        }

    regions = sorted(per_region)
    columns: dict[str, np.ndarray] = {}
    for name in NATIONAL_CLIMATE_COLUMNS:
        stack = np.vstack([per_region[region][name] for region in regions])
        columns[name] = stack.sum(axis=0) if name in _SUMMED_COLUMNS else stack.mean(axis=0)
    return PanelDataset(week_starts, columns)
