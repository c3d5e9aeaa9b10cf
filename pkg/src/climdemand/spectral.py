"""Frequency-domain Granger causality with bootstrap significance thresholds.

The causality measure at frequency f is the log ratio of the effect
variable's spectral density to the part of it driven by the effect's own
(orthogonalized) innovation.  It is zero at every frequency exactly when the
cause does not enter the effect's equations, and positive otherwise.

Significance is judged against a resampling null: cause and effect are
resampled by independent stationary bootstraps (geometric block lengths,
wrap-around), which preserves each series' own dependence while destroying
any relation between them.  Each resample is pushed through the same
estimation path as the observed data, its measure is reduced to the median
across frequencies, and thresholds are quantiles of those medians: the
(1 - alpha) quantile pointwise, and the (1 - 2 alpha / F) quantile for a
familywise (Bonferroni-corrected over the F frequencies) decision.  Both
thresholds are flat lines over frequency.

For the conditional measure, cause and effect are first projected on the
conditioning series (contemporaneous value and as many lags as the
(effect, conditioning) VAR selected); the unconditional measure of the
projection residuals is the conditional measure.  Null replicates keep the
(effect, conditioning) dynamics via a residual bootstrap of their joint VAR
and draw the cause independently by stationary bootstrap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._parallel import parallel_map
from ._rng import substream
from .errors import (
    AlignmentError,
    ConfigError,
    DegenerateInputError,
    InvalidInputError,
    NumericalError,
    RankDeficiencyError,
    ShapeError,
)
from .panel import WeeklySeries
from .varbase import VarModel, fit_var, simulate_var


@dataclass(frozen=True)
class GcBootstrapConfig:
    """Settings for the bootstrap significance thresholds.

    ``expected_block_length`` of ``None`` defaults to ``ceil(T ** (1/3))``
    for a series of length T.
    """

    n_replicates: int = 1000
    alpha: float = 0.05
    expected_block_length: float | None = None
    max_var_order: int = 4
    seed: int = 0

    def __post_init__(self):
        problems: dict[str, str] = {}
        if self.n_replicates < 100:
            problems["n_replicates"] = f"need at least 100 replicates, got {self.n_replicates!r}"
        if not 0.0 < self.alpha <= 0.5:
            problems["alpha"] = f"must lie in (0, 0.5], got {self.alpha!r}"
        if self.expected_block_length is not None and not self.expected_block_length >= 1.0:
            problems["expected_block_length"] = (
                f"must be >= 1 when given, got {self.expected_block_length!r}"
            )
        if self.max_var_order < 1:
            problems["max_var_order"] = f"must be >= 1, got {self.max_var_order!r}"
        if self.seed < 0:
            problems["seed"] = f"must be non-negative, got {self.seed!r}"
        if problems:
            raise ConfigError(problems)

    def block_length(self, n: int) -> float:
        if self.expected_block_length is not None:
            return float(self.expected_block_length)
        return float(math.ceil(n ** (1.0 / 3.0)))


@dataclass
class SpectralDecomposition:
    """Split of the effect's spectral density at each frequency.

    ``total = intrinsic + cross`` where ``intrinsic`` is the contribution of
    the effect's own orthogonalized innovation and ``cross`` the part routed
    through the cause's innovation.  The causality measure is
    ``log(total / intrinsic)``.
    """

    frequencies: np.ndarray
    total: np.ndarray
    intrinsic: np.ndarray
    cross: np.ndarray

    @property
    def measure(self) -> np.ndarray:
        return np.log1p(self.cross / self.intrinsic)


@dataclass
class ConditionalDecomposition:
    """Decomposition of the projection residuals plus the projection order."""

    frequencies: np.ndarray
    total: np.ndarray
    intrinsic: np.ndarray
    cross: np.ndarray
    projection_order: int

    @property
    def measure(self) -> np.ndarray:
        return np.log1p(self.cross / self.intrinsic)


@dataclass
class SpectrumResult:
    """Causality spectrum with its bootstrap decision thresholds."""

    cause_name: str
    effect_name: str
    conditioning_name: str | None
    frequencies: np.ndarray
    estimate: np.ndarray
    threshold_pointwise: float
    threshold_bonferroni: float
    alpha: float
    n_replicates: int
    var_order: int

    @property
    def significant_pointwise(self) -> np.ndarray:
        return self.estimate > self.threshold_pointwise

    @property
    def significant_bonferroni(self) -> np.ndarray:
        return self.estimate > self.threshold_bonferroni


def stationary_bootstrap_indices(
    n: int, expected_block_length: float, rng: np.random.Generator
) -> np.ndarray:
    """Index path of one stationary-bootstrap draw (wrap-around blocks).

    Block starts are uniform; at every step a new block begins with
    probability ``1 / expected_block_length``, so block lengths are
    geometric with the requested mean.
    """
    if n <= 0:
        raise ShapeError("cannot resample an empty series")
    if not expected_block_length >= 1.0:
        raise InvalidInputError(
            f"expected block length must be >= 1, got {expected_block_length!r}"
        )
    starts = rng.integers(0, n, size=n)
    restart = rng.random(n) < 1.0 / expected_block_length
    restart[0] = True
    restart_positions = np.flatnonzero(restart)
    block_id = np.cumsum(restart) - 1
    anchor_pos = restart_positions[block_id]
    anchor_val = starts[restart_positions][block_id]
    return (anchor_val + (np.arange(n) - anchor_pos)) % n


def stationary_bootstrap(
    values, expected_block_length: float, rng: np.random.Generator
) -> np.ndarray:
    """One stationary-bootstrap resample of a series."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ShapeError(f"stationary bootstrap expects a 1-d series, got shape {arr.shape}")
    return arr[stationary_bootstrap_indices(arr.size, expected_block_length, rng)]


def _series_values(series, what: str) -> tuple[np.ndarray, str]:
    if isinstance(series, WeeklySeries):
        return np.asarray(series.values, dtype=float), series.name
    arr = np.asarray(series, dtype=float)
    if arr.ndim != 1:
        raise ShapeError(f"{what} must be a one-dimensional series, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise InvalidInputError(f"{what} must be finite")
    return arr, what


def _check_pair(cause, effect, what_cause="cause", what_effect="effect"):
    x, x_name = _series_values(cause, what_cause)
    y, y_name = _series_values(effect, what_effect)
    if x.size != y.size:
        raise AlignmentError(
            f"series lengths differ: {x_name} has {x.size}, {y_name} has {y.size}"
        )
    if (
        isinstance(cause, WeeklySeries)
        and isinstance(effect, WeeklySeries)
        and cause.week_starts != effect.week_starts
    ):
        raise AlignmentError(f"{x_name} and {y_name} are on different week axes")
    for arr, name in ((x, x_name), (y, y_name)):
        if np.ptp(arr) == 0.0:
            raise DegenerateInputError(f"series {name!r} has zero variance")
    return x, y, x_name, y_name


def fourier_frequencies(n: int) -> np.ndarray:
    """Evaluation grid i/n for i = 1..floor(n/2), in cycles per week."""
    return np.arange(1, n // 2 + 1) / float(n)


def _decompose(
    coef: np.ndarray, resid_cov: np.ndarray, frequencies: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Cross and intrinsic spectral terms of the effect (variable 1).

    The innovation of the cause (variable 0) is orthogonalized against the
    effect's innovation, so the effect's own term keeps variance s22 and the
    cross term carries the residual cause variance s11 - s12^2 / s22.
    """
    s11 = resid_cov[0, 0]
    s12 = resid_cov[0, 1]
    s22 = resid_cov[1, 1]
    if s22 <= 0.0 or s11 <= 0.0:
        raise DegenerateInputError("innovation covariance is singular")
    omega = 2.0 * np.pi * frequencies
    p = coef.shape[0]
    z = np.exp(-1j * np.outer(omega, np.arange(1, p + 1)))
    lagpoly = np.eye(2)[None, :, :] - np.einsum("fl,lij->fij", z, coef)
    det = lagpoly[:, 0, 0] * lagpoly[:, 1, 1] - lagpoly[:, 0, 1] * lagpoly[:, 1, 0]
    if np.any(np.abs(det) < 1e-14):
        raise NumericalError("lag polynomial is non-invertible at some frequency")
    transfer_cause = -lagpoly[:, 1, 0] / det
    transfer_own = lagpoly[:, 0, 0] / det
    rotated_own = transfer_own + transfer_cause * (s12 / s22)
    cross = (s11 - s12 * s12 / s22) * np.abs(transfer_cause) ** 2
    intrinsic = s22 * np.abs(rotated_own) ** 2
    if not (np.isfinite(cross).all() and np.isfinite(intrinsic).all()):
        raise NumericalError("spectral decomposition produced non-finite values")
    if np.any(intrinsic <= 0.0):
        raise NumericalError("effect's own spectral term vanished at some frequency")
    return cross, intrinsic


def spectral_decomposition(model: VarModel, frequencies: np.ndarray) -> SpectralDecomposition:
    """Decompose a fitted bivariate VAR (cause first, effect second)."""
    if model.n_variables != 2:
        raise ShapeError("spectral decomposition requires a bivariate model")
    cross, intrinsic = _decompose(model.coef, model.resid_cov, frequencies)
    return SpectralDecomposition(
        frequencies=np.asarray(frequencies, dtype=float),
        total=cross + intrinsic,
        intrinsic=intrinsic,
        cross=cross,
    )


def _pair_measure(x: np.ndarray, y: np.ndarray, max_order: int, frequencies: np.ndarray):
    model = fit_var(np.column_stack([x, y]), max_order=max_order)
    cross, intrinsic = _decompose(model.coef, model.resid_cov, frequencies)
    return np.log1p(cross / intrinsic), model


def _threshold_pair(medians: np.ndarray, alpha: float, n_frequencies: int) -> tuple[float, float]:
    pointwise = float(np.quantile(medians, 1.0 - alpha))
    bonferroni = float(np.quantile(medians, 1.0 - 2.0 * alpha / n_frequencies))
    return pointwise, bonferroni


@dataclass
class BootstrapThresholds:
    """Null-median distribution and the two decision quantiles drawn from it."""

    pointwise: float
    bonferroni: float
    medians: np.ndarray
    n_failed: int


def _collect_medians(
    replicate: Callable[[int], float], cfg: GcBootstrapConfig, threads: int
) -> tuple[np.ndarray, int]:
    raw = np.asarray(parallel_map(replicate, cfg.n_replicates, threads), dtype=float)
    medians = raw[np.isfinite(raw)]
    n_failed = int(raw.size - medians.size)
    if medians.size < max(50, cfg.n_replicates // 2):
        raise NumericalError(
            f"too many bootstrap replicates failed ({n_failed} of {raw.size})"
        )
    return medians, n_failed


def bootstrap_threshold_unconditional(
    cause, effect, cfg: GcBootstrapConfig = GcBootstrapConfig(), threads: int = 1
) -> BootstrapThresholds:
    """Null thresholds for the unconditional measure.

    Each replicate resamples cause and effect independently (stationary
    bootstrap), refits the VAR with the same BIC selection, and records the
    median measure across frequencies.
    """
    x, y, _, _ = _check_pair(cause, effect)
    n = x.size
    frequencies = fourier_frequencies(n)
    block = cfg.block_length(n)

    def replicate(b: int) -> float:
        rng = substream(cfg.seed, "gc-unconditional", b)
        x_star = x[stationary_bootstrap_indices(n, block, rng)]
        y_star = y[stationary_bootstrap_indices(n, block, rng)]
        try:
            measure, _ = _pair_measure(x_star, y_star, cfg.max_var_order, frequencies)
        except (RankDeficiencyError, NumericalError, DegenerateInputError):
            return np.nan
        return float(np.median(measure))

    medians, n_failed = _collect_medians(replicate, cfg, threads)
    pointwise, bonferroni = _threshold_pair(medians, cfg.alpha, frequencies.size)
    return BootstrapThresholds(pointwise, bonferroni, medians, n_failed)


def unconditional_gc_spectrum(
    cause, effect, cfg: GcBootstrapConfig = GcBootstrapConfig(), threads: int = 1
) -> SpectrumResult:
    """Unconditional causality spectrum of cause -> effect with thresholds."""
    x, y, x_name, y_name = _check_pair(cause, effect)
    frequencies = fourier_frequencies(x.size)
    estimate, model = _pair_measure(x, y, cfg.max_var_order, frequencies)
    thresholds = bootstrap_threshold_unconditional(x, y, cfg, threads)
    return SpectrumResult(
        cause_name=x_name,
        effect_name=y_name,
        conditioning_name=None,
        frequencies=frequencies,
        estimate=estimate,
        threshold_pointwise=thresholds.pointwise,
        threshold_bonferroni=thresholds.bonferroni,
        alpha=cfg.alpha,
        n_replicates=int(thresholds.medians.size),
        var_order=model.order,
    )


def _project_on_conditioning(
    series: np.ndarray, conditioning: np.ndarray, order: int
) -> np.ndarray:
    """Residual of a regression on [1, w_t, w_{t-1}, ..., w_{t-order}]."""
    n = series.size
    rows = n - order
    design = np.ones((rows, 2 + order))
    for lag in range(order + 1):
        design[:, 1 + lag] = conditioning[order - lag : n - lag]
    coef, _, _, _ = np.linalg.lstsq(design, series[order:], rcond=None)
    return series[order:] - design @ coef


def conditional_decomposition(
    cause, effect, conditioning, max_order: int = 4
) -> ConditionalDecomposition:
    """Decomposition of the cause/effect projection residuals.

    The projection lag order is the BIC order of the (effect, conditioning)
    VAR; frequencies stay on the original i/T grid.
    """
    x, y, _, _ = _check_pair(cause, effect)
    w, w_name = _series_values(conditioning, "conditioning")
    if w.size != x.size:
        raise AlignmentError(
            f"conditioning series has {w.size} values, expected {x.size}"
        )
    if np.ptp(w) == 0.0:
        raise DegenerateInputError(f"series {w_name!r} has zero variance")
    frequencies = fourier_frequencies(x.size)
    pair_model = fit_var(np.column_stack([y, w]), max_order=max_order)
    order = pair_model.order
    x_resid = _project_on_conditioning(x, w, order)
    y_resid = _project_on_conditioning(y, w, order)
    for resid, name in ((x_resid, "cause"), (y_resid, "effect")):
        if np.ptp(resid) == 0.0 or float(np.std(resid)) < 1e-12 * max(1.0, float(np.std(x))):
            raise DegenerateInputError(
                f"{name} series is fully explained by the conditioning series"
            )
    model = fit_var(np.column_stack([x_resid, y_resid]), max_order=max_order)
    cross, intrinsic = _decompose(model.coef, model.resid_cov, frequencies)
    return ConditionalDecomposition(
        frequencies=frequencies,
        total=cross + intrinsic,
        intrinsic=intrinsic,
        cross=cross,
        projection_order=order,
    )


def conditional_gc_spectrum(
    cause,
    effect,
    conditioning,
    cfg: GcBootstrapConfig = GcBootstrapConfig(),
    threads: int = 1,
) -> SpectrumResult:
    """Conditional causality spectrum of cause -> effect given conditioning.

    Null replicates regenerate (effect, conditioning) by a residual bootstrap
    of their joint VAR (keeping their dynamics and mutual dependence) while
    the cause is resampled independently by stationary bootstrap; every
    replicate then goes through the full conditional estimation path.
    """
    x, y, x_name, y_name = _check_pair(cause, effect)
    w, w_name = _series_values(conditioning, "conditioning")
    if isinstance(conditioning, WeeklySeries) and isinstance(cause, WeeklySeries):
        if conditioning.week_starts != cause.week_starts:
            raise AlignmentError(f"{w_name} and {x_name} are on different week axes")
    n = x.size
    frequencies = fourier_frequencies(n)
    observed = conditional_decomposition(x, y, w, cfg.max_var_order)

    pair_model = fit_var(np.column_stack([y, w]), max_order=cfg.max_var_order)
    order = pair_model.order
    resid = pair_model.residuals - pair_model.residuals.mean(axis=0)
    initial = np.column_stack([y[:order], w[:order]])
    block = cfg.block_length(n)

    def replicate(b: int) -> float:
        rng = substream(cfg.seed, "gc-conditional", b)
        draw = resid[rng.integers(0, resid.shape[0], size=resid.shape[0])]
        sim = simulate_var(pair_model.intercept, pair_model.coef, draw, initial)
        y_star = np.concatenate([y[:order], sim[:, 0]])
        w_star = np.concatenate([w[:order], sim[:, 1]])
        x_star = x[stationary_bootstrap_indices(n, block, rng)]
        try:
            decomp = conditional_decomposition(x_star, y_star, w_star, cfg.max_var_order)
        except (RankDeficiencyError, NumericalError, DegenerateInputError):
            return np.nan
        return float(np.median(decomp.measure))

    medians, _ = _collect_medians(replicate, cfg, threads)
    pointwise, bonferroni = _threshold_pair(medians, cfg.alpha, frequencies.size)
    return SpectrumResult(
        cause_name=x_name,
        effect_name=y_name,
        conditioning_name=w_name,
        frequencies=frequencies,
        estimate=observed.measure,
        threshold_pointwise=pointwise,
        threshold_bonferroni=bonferroni,
        alpha=cfg.alpha,
        n_replicates=int(medians.size),
        var_order=observed.projection_order,
    )
