"""Least-squares vector autoregression core.

Estimation is equation-by-equation OLS on a common design (identical
regressors per equation, so joint GLS collapses to OLS), with the lag order
chosen by BIC over 1..max_order on a common effective sample and the chosen
order refit on its full usable sample.  The companion-matrix spectral radius
is reported with every fit; values below one mean the process is stable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import (
    InsufficientDataError,
    InvalidInputError,
    RankDeficiencyError,
    ShapeError,
)


def _validate_matrix(data, what: str) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ShapeError(f"{what} must be a (T, K) matrix, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise InvalidInputError(f"{what} must be finite")
    return arr


def lag_design(
    data: np.ndarray, order: int, exog: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Stack the regression target and design for a VAR(order).

    Rows are t = order..T-1.  Design columns are an intercept, then the K
    variables at lag 1, lag 2, ..., then any exogenous columns at time t.
    """
    T, K = data.shape
    n = T - order
    if n <= 0:
        raise InsufficientDataError(f"need more than {order} rows, got {T}")
    blocks = [np.ones((n, 1))]
    for lag in range(1, order + 1):
        blocks.append(data[order - lag : T - lag])
    if exog is not None:
        blocks.append(exog[order:])
    return data[order:], np.hstack(blocks)


def design_column_names(
    names: Sequence[str], order: int, exog_names: Sequence[str] = ()
) -> list[str]:
    cols = ["const"]
    for lag in range(1, order + 1):
        cols.extend(f"{name}.l{lag}" for name in names)
    cols.extend(exog_names)
    return cols


def _name_collinear_columns(design: np.ndarray, columns: Sequence[str]) -> list[str]:
    # Pivoted QR: columns pivoted past the numerical rank are the dependent ones.
    _, r, piv = scipy.linalg.qr(design, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = diag.max() * max(design.shape) * np.finfo(float).eps if diag.size else 0.0
    rank = int(np.sum(diag > tol))
    dependent = sorted(piv[rank:])
    return [columns[j] for j in dependent]


def solve_ols(
    target: np.ndarray, design: np.ndarray, columns: Sequence[str]
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """OLS coefficients for every target column over a shared design.

    Returns (coefficients (q, K), residuals (n, K), inverse Gram (q, q)).
    Raises :class:`RankDeficiencyError` naming the collinear columns when the
    design is singular.
    """
    gram = design.T @ design
    moment = design.T @ target
    try:
        chol = scipy.linalg.cho_factor(gram, lower=True)
    except scipy.linalg.LinAlgError:
        raise RankDeficiencyError(_name_collinear_columns(design, columns)) from None
    coef = scipy.linalg.cho_solve(chol, moment)
    gram_inv = scipy.linalg.cho_solve(chol, np.eye(gram.shape[0]))
    residuals = target - design @ coef
    return coef, residuals, gram_inv


@dataclass
class VarModel:
    """Fitted vector autoregression.

    ``coef[l][i, j]`` is the effect of variable ``j`` at lag ``l + 1`` on
    variable ``i``.  ``resid_cov`` is the degrees-of-freedom adjusted
    residual covariance.
    """

    variable_names: tuple[str, ...]
    order: int
    intercept: np.ndarray
    coef: np.ndarray
    resid_cov: np.ndarray
    residuals: np.ndarray
    intercept_se: np.ndarray
    coef_se: np.ndarray
    companion_radius: float
    nobs: int
    bic: float
    bic_by_order: dict[int, float]

    @property
    def n_variables(self) -> int:
        return len(self.variable_names)


def companion_matrix(coef: np.ndarray) -> np.ndarray:
    """Companion form of the lag polynomial: (K*p, K*p)."""
    p, K, _ = coef.shape
    top = np.concatenate([coef[l] for l in range(p)], axis=1)
    if p == 1:
        return top
    body = np.eye(K * (p - 1), K * p)
    return np.vstack([top, body])


def spectral_radius(coef: np.ndarray) -> float:
    """Largest modulus among companion-matrix eigenvalues."""
    return float(np.max(np.abs(np.linalg.eigvals(companion_matrix(coef)))))


def _bic_path(
    data: np.ndarray, max_order: int, columns_full: Sequence[str]
) -> dict[int, float]:
    """BIC for each order on the common sample t = max_order..T-1.

    The design at order p is the leading 1 + p*K columns of the max-order
    design, so one Gram matrix serves every candidate.
    """
    T, K = data.shape
    target, design = lag_design(data, max_order)
    n = target.shape[0]
    gram = design.T @ design
    moment = design.T @ target
    s_yy = target.T @ target
    path: dict[int, float] = {}
    for p in range(1, max_order + 1):
        q = 1 + p * K
        try:
            chol = scipy.linalg.cho_factor(gram[:q, :q], lower=True)
        except scipy.linalg.LinAlgError:
            raise RankDeficiencyError(
                _name_collinear_columns(design[:, :q], columns_full[:q])
            ) from None
        coef = scipy.linalg.cho_solve(chol, moment[:q])
        rss = s_yy - moment[:q].T @ coef
        sign, logdet = np.linalg.slogdet(rss / n)
        if sign <= 0:
            raise RankDeficiencyError(
                _name_collinear_columns(design[:, :q], columns_full[:q])
            )
        path[p] = float(logdet + np.log(n) / n * (p * K * K + K))
    return path


def fit_var(
    data,
    max_order: int = 4,
    order: int | None = None,
    names: Sequence[str] | None = None,
) -> VarModel:
    """Fit a VAR by equation-wise least squares.

    Parameters
    ----------
    data : array_like, shape (T, K)
        Observations in time order.
    max_order : int
        Upper end of the BIC search grid (ignored when ``order`` is given).
    order : int, optional
        Fix the lag order instead of selecting it.
    names : sequence of str, optional
        Variable names for error messages and reports.

    Raises
    ------
    RankDeficiencyError
        If the regression design is singular; the message names the
        collinear columns.
    """
    arr = _validate_matrix(data, "VAR data")
    T, K = arr.shape
    if names is None:
        names = tuple(f"y{i}" for i in range(K))
    else:
        names = tuple(names)
        if len(names) != K:
            raise ShapeError(f"{len(names)} names for {K} variables")
    if order is not None:
        if not 1 <= order:
            raise InvalidInputError(f"order must be >= 1, got {order}")
        max_order = order
    if not 1 <= max_order:
        raise InvalidInputError(f"max_order must be >= 1, got {max_order}")
    if T <= K * max_order + K + 10:
        raise InsufficientDataError(
            f"need T > K*max_order + K + 10 = {K * max_order + K + 10} rows, got {T}"
        )

    columns_full = design_column_names(names, max_order)
    if order is None:
        bic_by_order = _bic_path(arr, max_order, columns_full)
        order = min(bic_by_order, key=lambda p: (bic_by_order[p], p))
    else:
        bic_by_order = _bic_path(arr, order, columns_full)

    target, design = lag_design(arr, order)
    columns = design_column_names(names, order)
    coef_flat, residuals, gram_inv = solve_ols(target, design, columns)
    n, q = design.shape
    dof = n - q
    if dof <= 0:
        raise InsufficientDataError(
            f"no residual degrees of freedom at order {order} (n={n}, q={q})"
        )
    resid_cov = residuals.T @ residuals / dof
    # Per-equation OLS standard errors from sigma_kk * diag((X'X)^-1).
    se_flat = np.sqrt(np.outer(np.diag(gram_inv), np.diag(resid_cov)))

    coef = np.transpose(coef_flat[1:].reshape(order, K, K), (0, 2, 1))
    coef_se = np.transpose(se_flat[1:].reshape(order, K, K), (0, 2, 1))
    return VarModel(
        variable_names=names,
        order=order,
        intercept=coef_flat[0].copy(),
        coef=coef,
        resid_cov=resid_cov,
        residuals=residuals,
        intercept_se=se_flat[0].copy(),
        coef_se=coef_se,
        companion_radius=spectral_radius(coef),
        nobs=n,
        bic=bic_by_order[order],
        bic_by_order=bic_by_order,
    )


def simulate_var(
    intercept: np.ndarray,
    coef: np.ndarray,
    innovations: np.ndarray,
    initial: np.ndarray | None = None,
) -> np.ndarray:
    """Iterate the VAR recursion over a given innovation sequence.

    ``initial`` holds the ``order`` pre-sample rows (zeros when omitted);
    the returned array has one row per innovation row.
    """
    p, K, _ = coef.shape
    innovations = np.asarray(innovations, dtype=float)
    n = innovations.shape[0]
    out = np.empty((p + n, K))
    out[:p] = 0.0 if initial is None else np.asarray(initial, dtype=float)
    for t in range(n):
        level = intercept + innovations[t]
        for lag in range(1, p + 1):
            level = level + coef[lag - 1] @ out[p + t - lag]
        out[p + t] = level
    return out[p:]
