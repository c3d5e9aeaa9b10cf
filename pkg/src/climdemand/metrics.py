"""Forecast accuracy metrics and evaluation splits.

All scale-dependent and scale-free measures are computed from the same error
sums inside :func:`evaluate_forecast`, so the algebraic ties between them
(``r2 == 1 - rsr**2`` in particular) hold to machine precision rather than to
whatever rounding separate implementations would introduce.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .errors import (
    ConfigError,
    InsufficientDataError,
    InvalidInputError,
    MetricUndefinedError,
)
from .panel import PanelDataset

__all__ = [
    "MetricReport",
    "SplitSpec",
    "ComparisonTable",
    "mape",
    "rmse",
    "rsr",
    "mase",
    "evaluate_forecast",
    "holdout_split",
    "rolling_slices",
    "compare_models",
]

METRIC_COLUMNS = ("mape", "rmse", "rsr", "r2", "mase")

# Lower is better for every column except the coefficient of determination.
_HIGHER_IS_BETTER = frozenset({"r2"})


@dataclasses.dataclass(frozen=True)
class MetricReport:
    """Accuracy summary for one forecast against one test window."""

    mape: float
    rmse: float
    rsr: float
    r2: float
    mase: float
    seasonal_lag: int
    train_mean: float

    def values(self) -> tuple[float, ...]:
        return tuple(getattr(self, c) for c in METRIC_COLUMNS)


@dataclasses.dataclass(frozen=True)
class SplitSpec:
    """Evaluation layout: one holdout block or a rolling origin.

    ``train_length`` and ``horizon`` describe the holdout split;
    ``window`` and ``step`` describe the rolling scheme, where each slice
    trains on ``window`` consecutive weeks and tests on the ``horizon``
    weeks that follow.
    """

    train_length: int = 338
    horizon: int = 52
    window: int = 260
    step: int = 52

    def __post_init__(self):
        problems = {}
        for field in ("train_length", "horizon", "window", "step"):
            value = getattr(self, field)
            if (
                not isinstance(value, (int, np.integer))
                or isinstance(value, bool)
                or value < 1
            ):
                problems[field] = f"must be a positive integer, got {value!r}"
        if problems:
            raise ConfigError(problems)


def _paired_arrays(actual, predicted) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(actual, dtype=float)
    p = np.asarray(predicted, dtype=float)
    if a.ndim != 1 or p.ndim != 1:
        raise InvalidInputError("actual and predicted must be 1-D arrays")
    if a.shape != p.shape:
        raise InvalidInputError(
            f"actual has {a.shape[0]} values but predicted has {p.shape[0]}"
        )
    if a.size == 0:
        raise InvalidInputError("cannot score an empty forecast")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(p))):
        raise InvalidInputError("actual and predicted must be finite")
    return a, p


def _train_array(train_series) -> np.ndarray:
    y = np.asarray(train_series, dtype=float)
    if y.ndim != 1 or y.size == 0:
        raise InvalidInputError("training series must be a non-empty 1-D array")
    if not np.all(np.isfinite(y)):
        raise InvalidInputError("training series must be finite")
    return y


def mape(actual, predicted) -> float:
    """Mean absolute percentage error, in percent."""
    a, p = _paired_arrays(actual, predicted)
    zeros = np.flatnonzero(a == 0.0)
    if zeros.size:
        raise MetricUndefinedError(
            f"mape is undefined: actual value at index {zeros[0]} is zero"
        )
    return float(100.0 * np.mean(np.abs(a - p) / np.abs(a)))


def rmse(actual, predicted) -> float:
    """Root mean squared error."""
    a, p = _paired_arrays(actual, predicted)
    return math.sqrt(float(np.mean((a - p) ** 2)))


def rsr(actual, predicted, train_mean: float) -> float:
    """RMSE divided by the spread of the test window around the training mean.

    Values below one mean the forecast beats the constant training-mean
    predictor on the test window.
    """
    a, p = _paired_arrays(actual, predicted)
    denom = float(np.mean((a - float(train_mean)) ** 2))
    if denom == 0.0:
        raise MetricUndefinedError(
            "rsr is undefined: every test value equals the training mean"
        )
    return math.sqrt(float(np.mean((a - p) ** 2)) / denom)


def _seasonal_denominator(train: np.ndarray, seasonal_lag: int) -> float:
    if (
        not isinstance(seasonal_lag, (int, np.integer))
        or isinstance(seasonal_lag, bool)
        or seasonal_lag < 1
    ):
        raise ConfigError(
            {"seasonal_lag": f"must be a positive integer, got {seasonal_lag!r}"}
        )
    if train.size <= seasonal_lag:
        raise InsufficientDataError(
            f"mase needs a training series longer than the seasonal lag "
            f"({seasonal_lag}), got {train.size} values"
        )
    denom = float(np.mean(np.abs(train[seasonal_lag:] - train[:-seasonal_lag])))
    if denom == 0.0:
        raise MetricUndefinedError(
            "mase is undefined: the seasonal differences of the training "
            "series are all zero"
        )
    return denom


def mase(actual, predicted, train_series, seasonal_lag: int = 52) -> float:
    """Mean absolute error scaled by the training seasonal-naive error.

    The denominator is the in-sample mean absolute error of the seasonal
    random walk on the training series alone, so the test window never
    influences its own scaling.
    """
    a, p = _paired_arrays(actual, predicted)
    denom = _seasonal_denominator(_train_array(train_series), seasonal_lag)
    return float(np.mean(np.abs(a - p))) / denom


def evaluate_forecast(
    actual, predicted, train_series, seasonal_lag: int = 52
) -> MetricReport:
    """Score a forecast on every supported metric at once."""
    a, p = _paired_arrays(actual, predicted)
    train = _train_array(train_series)
    zeros = np.flatnonzero(a == 0.0)
    if zeros.size:
        raise MetricUndefinedError(
            f"mape is undefined: actual value at index {zeros[0]} is zero"
        )
    train_mean = float(np.mean(train))
    err = a - p
    mse = float(np.mean(err**2))
    spread = float(np.mean((a - train_mean) ** 2))
    if spread == 0.0:
        raise MetricUndefinedError(
            "rsr is undefined: every test value equals the training mean"
        )
    ratio = mse / spread
    denom = _seasonal_denominator(train, seasonal_lag)
    return MetricReport(
        mape=float(100.0 * np.mean(np.abs(err) / np.abs(a))),
        rmse=math.sqrt(mse),
        rsr=math.sqrt(ratio),
        r2=1.0 - ratio,
        mase=float(np.mean(np.abs(err))) / denom,
        seasonal_lag=int(seasonal_lag),
        train_mean=train_mean,
    )


def holdout_split(
    panel: PanelDataset, spec: SplitSpec
) -> tuple[PanelDataset, PanelDataset]:
    """Split a panel into one training block and the test block after it."""
    needed = spec.train_length + spec.horizon
    if panel.n_weeks < needed:
        raise InsufficientDataError(
            f"holdout split needs {needed} weeks "
            f"({spec.train_length} train + {spec.horizon} test), "
            f"panel has {panel.n_weeks}"
        )
    train = panel.slice_weeks(0, spec.train_length)
    test = panel.slice_weeks(spec.train_length, needed)
    return train, test


def rolling_slices(
    panel: PanelDataset, spec: SplitSpec
) -> tuple[tuple[PanelDataset, PanelDataset], ...]:
    """Rolling-origin splits: train on ``window`` weeks, test on the next
    ``horizon``, advance by ``step`` until the panel runs out.

    Returns an empty tuple when not even one slice fits.
    """
    out = []
    start = 0
    while start + spec.window + spec.horizon <= panel.n_weeks:
        train = panel.slice_weeks(start, start + spec.window)
        test = panel.slice_weeks(
            start + spec.window, start + spec.window + spec.horizon
        )
        out.append((train, test))
        start += spec.step
    return tuple(out)


@dataclasses.dataclass(frozen=True)
class ComparisonTable:
    """Metric matrix across models with per-column best-value flags."""

    model_names: tuple[str, ...]
    columns: tuple[str, ...]
    values: np.ndarray
    best: np.ndarray

    def to_rows(self) -> list[tuple]:
        """Rows of (model, metric values..., best flags...) for writing out."""
        rows = []
        for i, name in enumerate(self.model_names):
            rows.append(
                (name,)
                + tuple(float(v) for v in self.values[i])
                + tuple(bool(b) for b in self.best[i])
            )
        return rows


def compare_models(reports: dict[str, MetricReport]) -> ComparisonTable:
    """Tabulate reports side by side and flag the best value per metric.

    Ties are flagged on every row that attains the best value, so callers
    can see when models are indistinguishable on a metric.
    """
    if len(reports) < 2:
        raise InvalidInputError("model comparison needs at least two reports")
    names = tuple(reports)
    values = np.array([reports[n].values() for n in names], dtype=float)
    best = np.zeros_like(values, dtype=bool)
    for j, column in enumerate(METRIC_COLUMNS):
        col = values[:, j]
        target = col.max() if column in _HIGHER_IS_BETTER else col.min()
        best[:, j] = col == target
    return ComparisonTable(
        model_names=names,
        columns=METRIC_COLUMNS,
        values=values,
        best=best,
    )
