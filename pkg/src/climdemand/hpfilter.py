"""Hodrick-Prescott detrending for weekly series.

The trend solves the penalized least-squares problem

    min_tau  sum_t (y_t - tau_t)^2 + smoothing * sum_t (d2 tau)_t^2

where d2 is the second difference.  The first-order condition is the sparse
pentadiagonal system (I + smoothing * K'K) tau = y, solved directly.  The
smoothing default follows the standard frequency adjustment of the quarterly
value 1600 to weekly data: 1600 * (52/4)**4.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse
from scipy.sparse.linalg import spsolve

from .errors import ConfigError, InsufficientDataError, InvalidInputError
from .panel import WeeklySeries

#: Weekly smoothing parameter, 1600 scaled by (52/4)**4.
WEEKLY_SMOOTHING = 1600.0 * 13.0**4


@dataclass(frozen=True)
class HpConfig:
    """Smoothing strength of the trend filter (larger is smoother)."""

    smoothing: float = WEEKLY_SMOOTHING

    def __post_init__(self):
        if not (np.isfinite(self.smoothing) and self.smoothing > 0):
            raise ConfigError(
                {"smoothing": f"must be a finite positive number, got {self.smoothing!r}"}
            )


def _solve_cycle(values, smoothing: float) -> np.ndarray:
    # Solving for the cycle c = y - tau, i.e. (I + s K'K) c = s K'K y, is
    # better conditioned than solving for tau when the trend dominates, and
    # gives an exactly zero cycle for linear input (K y = 0).
    y = np.asarray(values, dtype=float)
    if y.ndim != 1:
        raise InvalidInputError(f"hp filter expects a one-dimensional series, got shape {y.shape}")
    if y.size < 4:
        raise InsufficientDataError(
            f"hp filter needs at least 4 observations, got {y.size}"
        )
    if not np.isfinite(y).all():
        raise InvalidInputError("hp filter: series must be finite")
    n = y.size
    offsets = np.array([0, 1, 2])
    data = np.repeat([[1.0], [-2.0], [1.0]], n, axis=1)
    second_diff = sparse.dia_matrix((data, offsets), shape=(n - 2, n))
    system = sparse.eye(n, format="csc") + smoothing * second_diff.T.dot(second_diff)
    rhs = smoothing * second_diff.T.dot(second_diff.dot(y))
    return spsolve(system, rhs)


def hp_trend(values, smoothing: float = WEEKLY_SMOOTHING) -> np.ndarray:
    """Return the smooth trend component of a series.

    Parameters
    ----------
    values : array_like
        Series of length at least 4 (two second differences).
    smoothing : float
        Penalty on the squared second difference of the trend.
    """
    y = np.asarray(values, dtype=float)
    return y - _solve_cycle(y, smoothing)


def hp_cycle(series, cfg: HpConfig = HpConfig()):
    """Deviation of a series from its smooth trend.

    Accepts a :class:`WeeklySeries` (returned with ``_cycle`` appended to the
    name) or a plain array (returned as an array).
    """
    if isinstance(series, WeeklySeries):
        cycle = _solve_cycle(series.values, cfg.smoothing)
        return WeeklySeries(series.name + "_cycle", series.week_starts, cycle)
    return _solve_cycle(series, cfg.smoothing)


def _solve_seasonal_residual(values, period: float, harmonics: int) -> np.ndarray:
    y = np.asarray(values, dtype=float)
    if y.ndim != 1:
        raise InvalidInputError(
            f"seasonal adjustment expects a one-dimensional series, got shape {y.shape}"
        )
    if not np.isfinite(y).all():
        raise InvalidInputError("seasonal adjustment: series must be finite")
    problems: dict[str, str] = {}
    if not (np.isfinite(period) and period > 1.0):
        problems["period"] = f"must be a number greater than 1, got {period!r}"
    if not isinstance(harmonics, int) or isinstance(harmonics, bool) or harmonics < 0:
        problems["harmonics"] = f"must be a non-negative integer, got {harmonics!r}"
    if problems:
        raise ConfigError(problems)
    n_params = 2 * harmonics + 1
    if y.size < n_params + 2:
        raise InsufficientDataError(
            f"seasonal adjustment with {harmonics} harmonics needs at least "
            f"{n_params + 2} observations, got {y.size}"
        )
    t = np.arange(y.size, dtype=float)
    columns = [np.ones(y.size)]
    for k in range(1, harmonics + 1):
        angle = 2.0 * np.pi * k * t / period
        columns.append(np.cos(angle))
        columns.append(np.sin(angle))
    design = np.column_stack(columns)
    beta, *_ = np.linalg.lstsq(design, y, rcond=None)
    return y - design @ beta


def seasonal_adjust(series, period: float = 52.0, harmonics: int = 3):
    """Remove the mean and a fixed periodic component by Fourier regression.

    The HP filter with the weekly smoothing default passes everything with a
    period up to roughly a decade, so an annual cycle survives into the
    cyclical component.  Two series sharing a deterministic annual cycle
    predict one another through it, which contaminates causality measures in
    both directions; projecting out a small Fourier basis removes that shared
    component while leaving irregular fluctuations untouched.

    Accepts a :class:`WeeklySeries` (returned with ``_deseasonalized``
    appended to the name) or a plain array (returned as an array).
    """
    if isinstance(series, WeeklySeries):
        adjusted = _solve_seasonal_residual(series.values, period, harmonics)
        return WeeklySeries(
            series.name + "_deseasonalized", series.week_starts, adjusted
        )
    return _solve_seasonal_residual(series, period, harmonics)
