"""Residual diagnostics for fitted dynamic models.

Serial correlation is checked with a multivariate portmanteau statistic and
conditional heteroskedasticity with per-equation ARCH-LM statistics.  Neither
reference distribution is taken from asymptotic theory.  Both tests calibrate
their null by resampling whole residual rows with replacement, which destroys
serial structure while preserving the cross-sectional covariance, and report
p-values with the add-one adjustment so that zero is never returned.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import ConfigError, DegenerateInputError, InvalidInputError
from ._rng import substream

__all__ = [
    "PortmanteauResult",
    "ArchLmResult",
    "portmanteau_statistic",
    "portmanteau_test",
    "arch_lm_statistics",
    "arch_lm_test",
]

_MIN_REPLICATES = 100


@dataclasses.dataclass(frozen=True)
class PortmanteauResult:
    """Outcome of the serial-correlation test on a residual matrix."""

    statistic: float
    p_value: float
    lags: int
    n_replicates: int


@dataclasses.dataclass(frozen=True)
class ArchLmResult:
    """Per-equation ARCH-LM statistics with a Bonferroni-combined p-value."""

    statistics: np.ndarray
    p_values: np.ndarray
    p_value: float
    lags: int
    n_replicates: int


def _as_residual_matrix(residuals) -> np.ndarray:
    u = np.asarray(residuals, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    if u.ndim != 2:
        raise InvalidInputError("residuals must form a 1-D or 2-D array")
    if u.shape[0] == 0 or u.shape[1] == 0:
        raise InvalidInputError("residuals are empty")
    if not np.all(np.isfinite(u)):
        raise InvalidInputError("residuals contain non-finite values")
    return u


def _check_lags(lags, n_rows, minimum_rows) -> None:
    problems = {}
    if not isinstance(lags, (int, np.integer)) or isinstance(lags, bool) or lags < 1:
        problems["lags"] = f"must be a positive integer, got {lags!r}"
    elif n_rows < minimum_rows:
        problems["lags"] = (
            f"needs at least {minimum_rows} residual rows at {lags} lags, "
            f"got {n_rows}"
        )
    if problems:
        raise ConfigError(problems)


def _portmanteau_batch(u: np.ndarray, lags: int) -> np.ndarray:
    """Portmanteau statistics for a (B, T, K) stack of residual matrices."""
    u = u - u.mean(axis=1, keepdims=True)
    n = u.shape[1]
    c0 = np.einsum("btk,btl->bkl", u, u) / n
    try:
        c0_inv = np.linalg.inv(c0)
    except np.linalg.LinAlgError:
        raise DegenerateInputError(
            "residual covariance is singular; a residual column is constant"
        ) from None
    stat = np.zeros(u.shape[0])
    for j in range(1, lags + 1):
        cj = np.einsum("btk,btl->bkl", u[:, j:], u[:, : n - j]) / n
        stat += np.einsum("bkl,bkl->b", cj, c0_inv @ cj @ c0_inv) / (n - j)
    return n * n * stat


def portmanteau_statistic(residuals, lags: int) -> float:
    """Multivariate portmanteau statistic over autocovariances 1..lags.

    The statistic is ``T^2 * sum_j tr(C_j' C_0^{-1} C_j C_0^{-1}) / (T - j)``
    with ``C_j`` the lag-j residual autocovariance.  Large values indicate
    leftover serial correlation.
    """
    u = _as_residual_matrix(residuals)
    _check_lags(lags, u.shape[0], lags + 2)
    return float(_portmanteau_batch(u[None, :, :], lags)[0])


def _resample_rows(u: np.ndarray, n_replicates: int, seed: int, label: str):
    n = u.shape[0]
    draws = np.empty((n_replicates, n), dtype=np.intp)
    for b in range(n_replicates):
        draws[b] = substream(seed, label, b).integers(0, n, size=n)
    return u[draws]


def _check_replicates(n_replicates) -> None:
    if (
        not isinstance(n_replicates, (int, np.integer))
        or isinstance(n_replicates, bool)
        or n_replicates < _MIN_REPLICATES
    ):
        raise ConfigError(
            {"n_replicates": f"must be an integer >= {_MIN_REPLICATES}"}
        )


def portmanteau_test(
    residuals, lags: int = 12, n_replicates: int = 500, seed: int = 0
) -> PortmanteauResult:
    """Serial-correlation test with a row-resampled null distribution."""
    u = _as_residual_matrix(residuals)
    _check_lags(lags, u.shape[0], lags + 2)
    _check_replicates(n_replicates)
    observed = float(_portmanteau_batch(u[None, :, :], lags)[0])
    null_draws = _resample_rows(u, n_replicates, seed, "portmanteau-null")
    null_stats = _portmanteau_batch(null_draws, lags)
    p_value = (1.0 + np.count_nonzero(null_stats >= observed)) / (
        1.0 + n_replicates
    )
    return PortmanteauResult(
        statistic=observed,
        p_value=float(p_value),
        lags=lags,
        n_replicates=n_replicates,
    )


def _arch_lm_batch(u: np.ndarray, lags: int) -> np.ndarray:
    """ARCH-LM statistics, shape (B, K), for a (B, T, K) residual stack."""
    n_batch, n_rows, n_eq = u.shape
    z = u * u
    n = n_rows - lags
    stats = np.empty((n_batch, n_eq))
    for k in range(n_eq):
        zk = z[:, :, k]
        target = zk[:, lags:]
        design = np.empty((n_batch, n, lags + 1))
        design[:, :, 0] = 1.0
        for j in range(1, lags + 1):
            design[:, :, j] = zk[:, lags - j : n_rows - j]
        gram = design.transpose(0, 2, 1) @ design
        moment = np.einsum("bnq,bn->bq", design, target)
        try:
            beta = np.linalg.solve(gram, moment[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError:
            beta = np.linalg.pinv(gram) @ moment[:, :, None]
            beta = beta[:, :, 0]
        rss = np.einsum("bn,bn->b", target, target) - np.einsum(
            "bq,bq->b", beta, moment
        )
        centered = target - target.mean(axis=1, keepdims=True)
        tss = np.einsum("bn,bn->b", centered, centered)
        # Constant squared residuals carry no ARCH signal at all.
        safe = tss > 0.0
        r_sq = np.zeros(n_batch)
        r_sq[safe] = 1.0 - np.clip(rss[safe], 0.0, None) / tss[safe]
        stats[:, k] = n * np.clip(r_sq, 0.0, 1.0)
    return stats


def arch_lm_statistics(residuals, lags: int) -> np.ndarray:
    """Per-equation ARCH-LM statistics (n R^2 of squared-residual lags)."""
    u = _as_residual_matrix(residuals)
    _check_lags(lags, u.shape[0], 2 * lags + 3)
    return _arch_lm_batch(u[None, :, :], lags)[0]


def arch_lm_test(
    residuals, lags: int = 12, n_replicates: int = 500, seed: int = 0
) -> ArchLmResult:
    """Conditional-heteroskedasticity test with a row-resampled null.

    Each equation gets its own p-value; the combined p-value applies a
    Bonferroni correction across equations, so it stays valid however the
    equations are correlated.
    """
    u = _as_residual_matrix(residuals)
    _check_lags(lags, u.shape[0], 2 * lags + 3)
    _check_replicates(n_replicates)
    observed = _arch_lm_batch(u[None, :, :], lags)[0]
    null_draws = _resample_rows(u, n_replicates, seed, "arch-null")
    null_stats = _arch_lm_batch(null_draws, lags)
    counts = np.count_nonzero(null_stats >= observed[None, :], axis=0)
    p_values = (1.0 + counts) / (1.0 + n_replicates)
    combined = min(1.0, u.shape[1] * float(p_values.min()))
    return ArchLmResult(
        statistics=observed,
        p_values=p_values,
        p_value=combined,
        lags=lags,
        n_replicates=n_replicates,
    )
