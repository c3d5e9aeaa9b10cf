"""Random forest regression on block-resampled time series.

Ordinary bagging draws rows independently, which destroys the serial
dependence that weekly demand series carry.  The forest here draws
overlapping blocks of consecutive rows instead (moving-block bootstrap), so
every tree trains on stretches that preserve short-range autocorrelation.
Out-of-bag evaluation follows the same logic: a row counts as out-of-bag for
a tree only when none of that tree's sampled blocks covers its index.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from ._parallel import parallel_map
from ._rng import substream
from .errors import (
    ConfigError,
    DiagnosticsError,
    InvalidInputError,
    MetricUndefinedError,
    ShapeError,
)
from .panel import PanelDataset

__all__ = [
    "SupervisedDataset",
    "ForestConfig",
    "ForestModel",
    "ImportanceRanking",
    "OobReport",
    "lagged_design_matrix",
    "moving_block_plan",
    "moving_block_indices",
    "mbb_resample",
    "train_forest",
    "predict",
    "impurity_importance",
    "oob_metrics",
]


@dataclasses.dataclass(frozen=True)
class SupervisedDataset:
    """Time-ordered regression rows with named feature columns.

    Parameters
    ----------
    feature_names : tuple of str
        One name per feature column, unique.
    features : ndarray, shape (n_rows, n_features)
        Feature matrix; row order is temporal.
    target : ndarray, shape (n_rows,)
        Regression target aligned with ``features``.
    """

    feature_names: tuple[str, ...]
    features: np.ndarray
    target: np.ndarray

    def __post_init__(self) -> None:
        features = np.asarray(self.features, dtype=float)
        target = np.asarray(self.target, dtype=float)
        if features.ndim != 2:
            raise ShapeError("features must be a 2-D array")
        if target.ndim != 1 or target.shape[0] != features.shape[0]:
            raise ShapeError("target must be 1-D with one value per feature row")
        if features.shape[0] == 0:
            raise InvalidInputError("dataset has no rows")
        names = tuple(self.feature_names)
        if len(names) != features.shape[1]:
            raise ShapeError("feature_names must match the number of feature columns")
        if len(set(names)) != len(names):
            raise InvalidInputError("feature names must be unique")
        if not np.all(np.isfinite(features)) or not np.all(np.isfinite(target)):
            raise InvalidInputError("features and target must be finite")
        features.setflags(write=False)
        target.setflags(write=False)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "target", target)

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


@dataclasses.dataclass(frozen=True)
class ForestConfig:
    """Hyperparameters for :func:`train_forest`.

    ``mtry=None`` resolves to ``ceil(n_features / 3)`` at training time, the
    usual regression heuristic.
    """

    n_trees: int = 1000
    mtry: int | None = None
    min_node_size: int = 5
    block_length: int = 52
    seed: int = 0

    def __post_init__(self) -> None:
        problems: dict[str, str] = {}
        if self.n_trees < 1:
            problems["n_trees"] = "must be at least 1"
        if self.mtry is not None and self.mtry < 1:
            problems["mtry"] = "must be at least 1 (or None for the default)"
        if self.min_node_size < 1:
            problems["min_node_size"] = "must be at least 1"
        if self.block_length < 1:
            problems["block_length"] = "must be at least 1"
        if self.seed < 0:
            problems["seed"] = "must be nonnegative"
        if problems:
            raise ConfigError(problems)

    def resolved_mtry(self, n_features: int) -> int:
        if self.mtry is None:
            return min(n_features, math.ceil(n_features / 3))
        return self.mtry


@dataclasses.dataclass(frozen=True)
class _Tree:
    """One regression tree stored as parallel node arrays.

    ``feature[i] == -1`` marks node ``i`` as a leaf; ``value`` holds the mean
    training target of every node (internal nodes included).
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    block_starts: np.ndarray
    oob_mask: np.ndarray
    importance: np.ndarray


@dataclasses.dataclass(frozen=True)
class ForestModel:
    """Trained forest: trees plus the resampling bookkeeping for OOB scoring."""

    feature_names: tuple[str, ...]
    config: ForestConfig
    trees: tuple[_Tree, ...]
    n_rows: int

    @property
    def n_trees(self) -> int:
        return len(self.trees)


@dataclasses.dataclass(frozen=True)
class ImportanceRanking:
    """Per-feature impurity reduction, averaged over trees."""

    feature_names: tuple[str, ...]
    scores: np.ndarray

    def ranked(self) -> list[tuple[str, float]]:
        """Pairs sorted by descending score; ties keep feature order."""
        order = np.argsort(-self.scores, kind="stable")
        return [(self.feature_names[i], float(self.scores[i])) for i in order]


@dataclasses.dataclass(frozen=True)
class OobReport:
    """Out-of-bag evaluation summary.

    ``n_never_oob`` counts rows that every tree saw in-bag; those rows carry
    ``nan`` in ``predictions`` and are excluded from the error metrics.
    """

    rmse: float
    rsr: float
    r2: float
    n_rows: int
    n_covered: int
    n_never_oob: int
    predictions: np.ndarray
    oob_counts: np.ndarray


def lagged_design_matrix(
    panel: PanelDataset,
    target_name: str,
    lags: int = 4,
    extra_columns: tuple[str, ...] = (),
) -> SupervisedDataset:
    """Build a supervised dataset from a weekly panel.

    Features at week ``t`` are lags 1..``lags`` of the target, lags 1..``lags``
    of every other panel column (panel order), and the listed extra columns
    taken contemporaneously at ``t``.  The first ``lags`` weeks are dropped.

    Parameters
    ----------
    panel : PanelDataset
        Aligned weekly panel.
    target_name : str
        Column to predict.
    lags : int
        Number of lags per variable, at least 1.
    extra_columns : tuple of str
        Panel columns entered unlagged (deterministic calendar terms,
        baseline fitted values).  They are excluded from the lagged set.

    Returns
    -------
    SupervisedDataset

    Raises
    ------
    KeyError
        Unknown target or extra column.
    InvalidInputError
        ``lags < 1`` or the panel is no longer than ``lags``.
    """
    if lags < 1:
        raise InvalidInputError("lags must be at least 1")
    known = set(panel.column_names)
    if target_name not in known:
        raise KeyError(f"unknown target column {target_name!r}")
    for name in extra_columns:
        if name not in known:
            raise KeyError(f"unknown extra column {name!r}")
    if panel.n_weeks <= lags:
        raise InvalidInputError(
            f"panel has {panel.n_weeks} weeks; need more than lags={lags}"
        )
    covariates = [
        name
        for name in panel.column_names
        if name != target_name and name not in extra_columns
    ]
    names: list[str] = []
    columns: list[np.ndarray] = []
    for name in [target_name, *covariates]:
        series = panel.column(name)
        for lag in range(1, lags + 1):
            names.append(f"{name}.l{lag}")
            columns.append(series[lags - lag : len(series) - lag])
    for name in extra_columns:
        names.append(name)
        columns.append(panel.column(name)[lags:])
    return SupervisedDataset(
        feature_names=tuple(names),
        features=np.column_stack(columns),
        target=panel.column(target_name)[lags:],
    )


def moving_block_plan(n_rows: int, block_length: int) -> tuple[int, int, int]:
    """Sizes of a moving-block resample before truncation.

    Returns
    -------
    (n_blocks, n_draws, n_raw_rows)
        Number of overlapping candidate blocks, blocks drawn with
        replacement, and concatenated rows before truncation to ``n_rows``.
    """
    if n_rows < 1:
        raise InvalidInputError("n_rows must be at least 1")
    if block_length < 1 or block_length > n_rows:
        raise ConfigError(
            {"block_length": f"must be in [1, {n_rows}] for {n_rows} rows"}
        )
    n_blocks = n_rows - block_length + 1
    n_draws = math.ceil(n_rows / block_length)
    return n_blocks, n_draws, n_draws * block_length


def moving_block_indices(
    n_rows: int, block_length: int, rng: np.random.Generator
) -> np.ndarray:
    """Row indices of one moving-block resample, truncated to ``n_rows``."""
    starts = _draw_block_starts(n_rows, block_length, rng)
    return _indices_from_starts(starts, block_length, n_rows)


def _draw_block_starts(
    n_rows: int, block_length: int, rng: np.random.Generator
) -> np.ndarray:
    n_blocks, n_draws, _ = moving_block_plan(n_rows, block_length)
    return rng.integers(0, n_blocks, size=n_draws)


def _indices_from_starts(
    starts: np.ndarray, block_length: int, n_rows: int
) -> np.ndarray:
    raw = (starts[:, None] + np.arange(block_length)[None, :]).reshape(-1)
    return raw[:n_rows]


def mbb_resample(
    dataset: SupervisedDataset, block_length: int, rng: np.random.Generator
) -> SupervisedDataset:
    """Resample a dataset by concatenated moving blocks.

    With ``block_length == n_rows`` there is a single candidate block and the
    resample is the original dataset.
    """
    idx = moving_block_indices(dataset.n_rows, block_length, rng)
    return SupervisedDataset(
        feature_names=dataset.feature_names,
        features=dataset.features[idx],
        target=dataset.target[idx],
    )


def _grow_tree(
    features: np.ndarray,
    target: np.ndarray,
    rows: np.ndarray,
    mtry: int,
    min_node_size: int,
    rng: np.random.Generator,
) -> tuple[list, list, list, list, list, np.ndarray]:
    """Grow one CART regression tree on the given row multiset.

    Splits minimise the summed child SSE over midpoints of consecutive
    distinct sorted values.  Ties take the lowest feature index, then the
    lowest threshold, so growth is deterministic given the RNG stream.
    """
    n_features = features.shape[1]
    node_feature: list[int] = []
    node_threshold: list[float] = []
    node_left: list[int] = []
    node_right: list[int] = []
    node_value: list[float] = []
    gains = np.zeros(n_features)

    def new_node(mean: float) -> int:
        node_feature.append(-1)
        node_threshold.append(np.nan)
        node_left.append(-1)
        node_right.append(-1)
        node_value.append(mean)
        return len(node_feature) - 1

    root = new_node(float(np.mean(target[rows])))
    stack: list[tuple[int, np.ndarray]] = [(root, rows)]
    while stack:
        node, node_rows = stack.pop()
        n = node_rows.size
        y = target[node_rows]
        mean = node_value[node]
        node_sse = float(np.dot(y, y)) - n * mean * mean
        if n <= min_node_size or node_sse <= 0.0:
            continue
        candidates = np.sort(rng.permutation(n_features)[:mtry])
        values = features[np.ix_(node_rows, candidates)]
        order = np.argsort(values, axis=0, kind="stable")
        sorted_values = np.take_along_axis(values, order, axis=0)
        sorted_y = y[order]
        prefix_sum = np.cumsum(sorted_y, axis=0)
        prefix_sq = np.cumsum(sorted_y * sorted_y, axis=0)
        left_n = np.arange(1, n, dtype=float)[:, None]
        right_n = n - left_n
        left_sse = prefix_sq[:-1] - prefix_sum[:-1] ** 2 / left_n
        right_sse = (prefix_sq[-1] - prefix_sq[:-1]) - (
            prefix_sum[-1] - prefix_sum[:-1]
        ) ** 2 / right_n
        child_sse = left_sse + right_sse
        # A cut is valid only between distinct values of the split feature.
        child_sse[sorted_values[1:] <= sorted_values[:-1]] = np.inf
        # Feature-major argmin: first occurrence = lowest candidate index,
        # then lowest threshold within that feature.
        flat = child_sse.T.reshape(-1)
        best = int(np.argmin(flat))
        if not np.isfinite(flat[best]):
            continue  # all candidate features constant on this node
        j = best // (n - 1)
        pos = best % (n - 1) + 1
        feature = int(candidates[j])
        threshold = float((sorted_values[pos - 1, j] + sorted_values[pos, j]) / 2.0)
        gains[feature] += max(node_sse - float(flat[best]), 0.0)
        left_rows = node_rows[order[:pos, j]]
        right_rows = node_rows[order[pos:, j]]
        node_feature[node] = feature
        node_threshold[node] = threshold
        left_id = new_node(float(np.mean(target[left_rows])))
        right_id = new_node(float(np.mean(target[right_rows])))
        node_left[node] = left_id
        node_right[node] = right_id
        stack.append((right_id, right_rows))
        stack.append((left_id, left_rows))
    return node_feature, node_threshold, node_left, node_right, node_value, gains


def train_forest(
    dataset: SupervisedDataset,
    config: ForestConfig = ForestConfig(),
    threads: int = 1,
) -> ForestModel:
    """Train a moving-block bootstrap forest.

    Each tree draws its own block resample and grows on it; per-tree RNG
    streams make the result independent of ``threads``.

    Parameters
    ----------
    dataset : SupervisedDataset
        Training rows in temporal order.
    config : ForestConfig
        Hyperparameters; ``block_length`` must not exceed the row count.
    threads : int
        Worker threads for tree growth.

    Returns
    -------
    ForestModel
    """
    n = dataset.n_rows
    m = dataset.n_features
    moving_block_plan(n, config.block_length)  # validates block_length vs n
    mtry = config.resolved_mtry(m)
    if mtry > m:
        raise ConfigError({"mtry": f"must not exceed the {m} available features"})
    features = dataset.features
    target = dataset.target

    def grow(tree_index: int) -> _Tree:
        rng = substream(config.seed, "forest-tree", tree_index)
        starts = _draw_block_starts(n, config.block_length, rng)
        rows = _indices_from_starts(starts, config.block_length, n)
        oob = np.ones(n, dtype=bool)
        oob[rows] = False
        feat, thr, left, right, value, gains = _grow_tree(
            features, target, rows, mtry, config.min_node_size, rng
        )
        return _Tree(
            feature=np.asarray(feat, dtype=np.intp),
            threshold=np.asarray(thr, dtype=float),
            left=np.asarray(left, dtype=np.intp),
            right=np.asarray(right, dtype=np.intp),
            value=np.asarray(value, dtype=float),
            block_starts=starts,
            oob_mask=oob,
            importance=gains,
        )

    trees = parallel_map(grow, config.n_trees, threads)
    return ForestModel(
        feature_names=dataset.feature_names,
        config=config,
        trees=tuple(trees),
        n_rows=n,
    )


def _tree_predict(tree: _Tree, features: np.ndarray) -> np.ndarray:
    """Route rows of ``features`` through one tree; returns leaf values."""
    node = np.zeros(features.shape[0], dtype=np.intp)
    active = tree.feature[node] >= 0
    while np.any(active):
        idx = np.nonzero(active)[0]
        at = node[idx]
        go_left = features[idx, tree.feature[at]] <= tree.threshold[at]
        node[idx] = np.where(go_left, tree.left[at], tree.right[at])
        active[idx] = tree.feature[node[idx]] >= 0
    return tree.value[node]


def predict(model: ForestModel, features: np.ndarray) -> np.ndarray | float:
    """Forest prediction: the mean of the per-tree leaf values.

    Accepts a single feature vector (returns a float) or a matrix with one
    row per observation (returns an array).
    """
    x = np.asarray(features, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != len(model.feature_names):
        raise ShapeError(
            f"expected {len(model.feature_names)} features, got shape {x.shape}"
        )
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("features must be finite")
    total = np.zeros(x.shape[0])
    for tree in model.trees:
        total += _tree_predict(tree, x)
    out = total / model.n_trees
    return float(out[0]) if single else out


def impurity_importance(model: ForestModel) -> ImportanceRanking:
    """Summed split-wise SSE reduction per feature, averaged over trees."""
    scores = np.zeros(len(model.feature_names))
    for tree in model.trees:
        scores += tree.importance
    return ImportanceRanking(
        feature_names=model.feature_names, scores=scores / model.n_trees
    )


def oob_metrics(model: ForestModel, dataset: SupervisedDataset) -> OobReport:
    """Score the forest on rows out-of-bag per tree.

    A row's OOB prediction averages the trees whose block resample never
    covered its index.  Rows in-bag for every tree are excluded and counted.

    Raises
    ------
    DiagnosticsError
        No row is out-of-bag for any tree (shrink ``block_length`` or grow
        more trees).
    MetricUndefinedError
        The covered targets are constant, so RSR has a zero denominator.
    """
    if dataset.n_rows != model.n_rows:
        raise ShapeError(
            f"dataset has {dataset.n_rows} rows; the forest was trained on "
            f"{model.n_rows}"
        )
    if dataset.feature_names != model.feature_names:
        raise InvalidInputError("dataset feature names differ from the model's")
    n = dataset.n_rows
    pred_sum = np.zeros(n)
    counts = np.zeros(n, dtype=int)
    for tree in model.trees:
        rows = np.nonzero(tree.oob_mask)[0]
        if rows.size == 0:
            continue
        pred_sum[rows] += _tree_predict(tree, dataset.features[rows])
        counts[rows] += 1
    covered = counts > 0
    n_covered = int(covered.sum())
    if n_covered == 0:
        raise DiagnosticsError(
            "no rows were out-of-bag for any tree; use a smaller block_length "
            "or more trees"
        )
    predictions = np.full(n, np.nan)
    predictions[covered] = pred_sum[covered] / counts[covered]
    actual = dataset.target[covered]
    errors = actual - predictions[covered]
    rmse = float(np.sqrt(np.mean(errors**2)))
    spread = float(np.sqrt(np.mean((actual - actual.mean()) ** 2)))
    if spread == 0.0:
        raise MetricUndefinedError("covered targets are constant; RSR is undefined")
    rsr = rmse / spread
    return OobReport(
        rmse=rmse,
        rsr=rsr,
        r2=1.0 - rsr * rsr,
        n_rows=n,
        n_covered=n_covered,
        n_never_oob=n - n_covered,
        predictions=predictions,
        oob_counts=counts,
    )
