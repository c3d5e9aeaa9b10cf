"""L1-penalized vector autoregression via cyclic coordinate descent.

Each equation is a lasso on the shared lagged design.  Variables are
standardized first (zero mean, unit standard deviation per column), lags are
built from the standardized panel, and design and target are then centered
within the regression sample so the intercept is handled exactly without
being penalized.  The per-equation objective is

    (1 / 2n) * ||y - X b||^2 + lam * ||b||_1

with n the number of regression rows; a coefficient is therefore driven to
exactly zero once ``lam`` reaches ``max_j |<x_j, y>| / n``.  Coordinate
updates use precomputed Gram and moment matrices (covariance updates), and
a sweep loop runs until the Fenchel duality gap falls below tolerance, so
the returned solution is a certified optimum, not just a stalled iterate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    ConvergenceError,
    DegenerateInputError,
    InsufficientDataError,
    InvalidInputError,
    ShapeError,
)
from .panel import PanelDataset

DUALITY_GAP_TOL = 1e-8
MAX_SWEEPS = 50_000


@dataclass
class SparseVarModel:
    """Fitted penalized VAR.  Coefficients are in standardized units.

    ``coef[l][i, j]`` is the effect of (standardized) variable ``j`` at lag
    ``l + 1`` on (standardized) variable ``i``.
    """

    variable_names: tuple[str, ...]
    order: int
    lam: float
    coef: np.ndarray
    column_means: np.ndarray
    column_sds: np.ndarray
    standardized: bool
    nobs: int
    duality_gap: np.ndarray
    n_sweeps: np.ndarray

    @property
    def n_variables(self) -> int:
        return len(self.variable_names)

    def nonzero_share(self) -> float:
        return float(np.mean(self.coef != 0.0))


@dataclass
class CoefficientTable:
    """One equation's coefficients arranged variable-by-lag."""

    equation: str
    variables: tuple[str, ...]
    values: np.ndarray  # (n_variables, order)


def soft_threshold(value: float, threshold: float) -> float:
    if value > threshold:
        return value - threshold
    if value < -threshold:
        return value + threshold
    return 0.0


def _coordinate_descent(
    gram: np.ndarray,
    moment: np.ndarray,
    y_sq_mean: float,
    lam: float,
    tol: float,
    max_sweeps: int,
) -> tuple[np.ndarray, float, int]:
    """Lasso on precomputed covariance statistics.

    ``gram = X'X / n``, ``moment = X'y / n``, ``y_sq_mean = y'y / n``.
    Returns (coefficients, final duality gap, sweeps used).
    """
    q = moment.size
    if lam == 0.0:
        # The unpenalized problem is plain least squares; the duality gap
        # degenerates there (the feasible dual set is X'theta = 0), so solve
        # the normal equations directly instead of iterating.
        beta, *_ = np.linalg.lstsq(gram, moment, rcond=None)
        return beta, 0.0, 0
    beta = np.zeros(q)
    gram_beta = np.zeros(q)
    diag = np.diag(gram).copy()
    updatable = diag > 0.0
    scale = max(1.0, y_sq_mean)

    def duality_gap() -> float:
        # primal
        resid_sq_mean = y_sq_mean - 2.0 * moment @ beta + beta @ gram_beta
        resid_sq_mean = max(resid_sq_mean, 0.0)
        primal = 0.5 * resid_sq_mean + lam * np.abs(beta).sum()
        # dual candidate: rescale r/n into the feasible set ||X'theta||_inf <= lam
        corr = moment - gram_beta
        corr_max = np.max(np.abs(corr)) if q else 0.0
        shrink = 1.0 if corr_max <= lam or corr_max == 0.0 else lam / corr_max
        dual = shrink * (y_sq_mean - moment @ beta) - 0.5 * shrink**2 * resid_sq_mean
        return primal - dual

    gap = duality_gap()
    sweeps = 0
    while gap > tol * scale:
        if sweeps >= max_sweeps:
            raise ConvergenceError(
                f"coordinate descent did not converge in {max_sweeps} sweeps",
                gap=float(gap),
            )
        for j in range(q):
            if not updatable[j]:
                continue
            rho = moment[j] - gram_beta[j] + diag[j] * beta[j]
            new = soft_threshold(rho, lam) / diag[j]
            delta = new - beta[j]
            if delta != 0.0:
                gram_beta += gram[:, j] * delta
                beta[j] = new
        sweeps += 1
        gap = duality_gap()
    return beta, float(gap), sweeps


def _as_matrix_and_names(data, names):
    if isinstance(data, PanelDataset):
        if names is None:
            names = data.column_names
        return data.matrix(names), tuple(names)
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 2:
        raise ShapeError(f"expected a (T, K) matrix, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise InvalidInputError("data must be finite")
    if names is None:
        names = tuple(f"y{i}" for i in range(arr.shape[1]))
    else:
        names = tuple(names)
        if len(names) != arr.shape[1]:
            raise ShapeError(f"{len(names)} names for {arr.shape[1]} variables")
    return arr, names


def _standardize(arr: np.ndarray, names: Sequence[str]):
    means = arr.mean(axis=0)
    sds = arr.std(axis=0)
    flat = [names[j] for j in np.flatnonzero(sds == 0.0)]
    if flat:
        raise DegenerateInputError(
            "cannot standardize constant columns: " + ", ".join(flat)
        )
    return (arr - means) / sds, means, sds


def _lagged(arr: np.ndarray, order: int):
    T, K = arr.shape
    n = T - order
    target = arr[order:]
    design = np.hstack([arr[order - lag : T - lag] for lag in range(1, order + 1)])
    return target, design, n


def fit_lasso_var(
    data,
    order: int = 4,
    lam: float = 0.0,
    standardize: bool = True,
    names: Sequence[str] | None = None,
    tol: float = DUALITY_GAP_TOL,
    max_sweeps: int = MAX_SWEEPS,
) -> SparseVarModel:
    """Fit the penalized VAR equation by equation.

    Parameters
    ----------
    data : PanelDataset or array_like of shape (T, K)
        Weekly panel; every column enters every equation at lags 1..order.
    order : int
        Number of lags.
    lam : float
        L1 penalty weight on the (1/2n) squared-error scale.  Zero gives
        plain least squares.
    standardize : bool
        Standardize columns before fitting (the stored coefficients always
        refer to the scale the fit ran on).
    """
    arr, names = _as_matrix_and_names(data, names)
    T, K = arr.shape
    if order < 1:
        raise InvalidInputError(f"order must be >= 1, got {order}")
    if lam < 0 or not np.isfinite(lam):
        raise InvalidInputError(f"lam must be finite and >= 0, got {lam!r}")
    if T - order <= K * order + 1:
        raise InsufficientDataError(
            f"need more than {order + K * order + 1} rows for order {order} "
            f"with {K} variables, got {T}"
        )
    if standardize:
        work, means, sds = _standardize(arr, names)
    else:
        work = arr
        means = np.zeros(K)
        sds = np.ones(K)
        if np.any(arr.std(axis=0) == 0.0):
            flat = [names[j] for j in np.flatnonzero(arr.std(axis=0) == 0.0)]
            raise DegenerateInputError("constant columns: " + ", ".join(flat))

    target, design, n = _lagged(work, order)
    # Center within the regression sample: the unpenalized intercept drops
    # out exactly and the lambda_max identity holds as stated.
    design = design - design.mean(axis=0)
    target = target - target.mean(axis=0)

    gram = design.T @ design / n
    moments = design.T @ target / n

    coef = np.empty((order, K, K))
    gaps = np.empty(K)
    sweeps = np.empty(K, dtype=int)
    for k in range(K):
        y = target[:, k]
        beta, gap, ns = _coordinate_descent(
            gram, moments[:, k], float(y @ y) / n, lam, tol, max_sweeps
        )
        coef[:, k, :] = beta.reshape(order, K)
        gaps[k] = gap
        sweeps[k] = ns
    return SparseVarModel(
        variable_names=names,
        order=order,
        lam=float(lam),
        coef=coef,
        column_means=means,
        column_sds=sds,
        standardized=standardize,
        nobs=n,
        duality_gap=gaps,
        n_sweeps=sweeps,
    )


def lambda_max(data, order: int = 4, names: Sequence[str] | None = None) -> float:
    """Smallest penalty that zeroes every coefficient of every equation."""
    arr, names = _as_matrix_and_names(data, names)
    work, _, _ = _standardize(arr, names)
    target, design, n = _lagged(work, order)
    design = design - design.mean(axis=0)
    target = target - target.mean(axis=0)
    return float(np.max(np.abs(design.T @ target)) / n)


def select_lambda(
    data,
    order: int = 4,
    grid: Sequence[float] | None = None,
    n_origins: int = 24,
    names: Sequence[str] | None = None,
) -> float:
    """Pick the penalty by rolling-origin one-step forecast error.

    For every origin t0 in the evaluation tail, the model is refit on rows
    up to t0 (standardization re-estimated on that window alone) and scored
    on its one-step prediction of row t0 + 1; errors are accumulated in
    standardized units across all equations.  The grid value with the
    smallest mean squared error wins; ties go to the larger (sparser)
    penalty.
    """
    arr, names = _as_matrix_and_names(data, names)
    T, K = arr.shape
    if grid is None:
        top = lambda_max(arr, order, names)
        grid = np.geomspace(top, top * 1e-3, 16)
    grid = np.asarray(sorted(grid, reverse=True), dtype=float)
    if grid.size == 0 or np.any(grid < 0):
        raise InvalidInputError("grid must be non-empty with non-negative values")
    min_train = max(order + K * order + 2, 5 * order, T - n_origins)
    origins = range(min_train, T - 1)
    if len(origins) == 0:
        raise InsufficientDataError(
            f"no forecast origins left: T={T}, first usable origin {min_train}"
        )
    mse = np.zeros(grid.size)
    for t0 in origins:
        window = arr[: t0 + 1]
        w_means = window.mean(axis=0)
        w_sds = window.std(axis=0)
        if np.any(w_sds == 0.0):
            raise DegenerateInputError("constant column inside a training window")
        actual_std = (arr[t0 + 1] - w_means) / w_sds
        for g, lam in enumerate(grid):
            model = fit_lasso_var(window, order=order, lam=lam, names=names)
            pred = _one_step_standardized(model, window)
            mse[g] += float(np.sum((actual_std - pred) ** 2))
    best = int(np.argmin(mse))  # grid is sorted descending: first min is largest lam
    return float(grid[best])


def _one_step_standardized(model: SparseVarModel, window: np.ndarray) -> np.ndarray:
    """Prediction of the next standardized observation after ``window``."""
    work = (window - model.column_means) / model.column_sds
    target, design, _ = _lagged(work, model.order)
    design_mean = design.mean(axis=0)
    target_mean = target.mean(axis=0)
    last = np.concatenate(
        [work[len(work) - lag] for lag in range(1, model.order + 1)]
    )
    flat = model.coef.transpose(1, 0, 2).reshape(model.n_variables, -1)
    return target_mean + flat @ (last - design_mean)


def coefficient_table(model: SparseVarModel, equation: str) -> CoefficientTable:
    """Arrange one equation's coefficients as variables x lags."""
    if equation not in model.variable_names:
        raise KeyError(
            f"unknown equation {equation!r}; have: {', '.join(model.variable_names)}"
        )
    k = model.variable_names.index(equation)
    values = model.coef[:, k, :].T  # (K, order)
    return CoefficientTable(
        equation=equation,
        variables=model.variable_names,
        values=values.copy(),
    )
