"""Predictor screening with random-forest contribution rankings.

A forest of regression trees is fit from landmark features to a per-batch
target, and every feature is scored by the total sum-of-squared-errors
reduction its splits achieved across the whole forest. To separate signal
from chance, :func:`screen_predictors` appends one synthetic feature of pure
standard-normal noise and keeps only the features that beat it.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from sklearn.ensemble import RandomForestRegressor

from .errors import MissingFeature, NonFiniteValue, SchemaError, TooFewRows
from .landmarks import FeatureMatrix

NOISE_FEATURE = "synthetic|noise"

MIN_ROWS = 5


@dataclass(frozen=True)
class ForestConfig:
    """Settings for the screening forest.

    Parameters
    ----------
    n_trees : int
        Number of trees in the ensemble.
    max_depth : int or None
        Depth limit per tree; ``None`` grows trees until leaves are pure or
        smaller than ``min_samples_leaf``.
    min_samples_leaf : int
        Minimum number of training rows in a leaf.
    feature_subsample : float
        Fraction of features drawn at each split, in (0, 1].
    row_bootstrap : bool
        Whether each tree trains on a bootstrap resample of the rows.
    seed : int
        Seed for both the forest and the synthetic noise column.
    """

    n_trees: int = 200
    max_depth: int | None = None
    min_samples_leaf: int = 3
    feature_subsample: float = 1.0 / 3.0
    row_bootstrap: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise SchemaError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.max_depth is not None and self.max_depth < 1:
            raise SchemaError(f"max_depth must be >= 1 or None, got {self.max_depth}")
        if self.min_samples_leaf < 1:
            raise SchemaError(
                f"min_samples_leaf must be >= 1, got {self.min_samples_leaf}")
        if not 0.0 < self.feature_subsample <= 1.0:
            raise SchemaError(
                f"feature_subsample must be in (0, 1], got {self.feature_subsample}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class ForestModel:
    """A fitted screening forest plus the bookkeeping needed to rank features."""

    estimator: RandomForestRegressor
    feature_names: tuple[str, ...]
    target_name: str
    config: ForestConfig
    batch_ids: tuple[str, ...]
    n_imputed_cells: int = 0
    n_dropped_rows: int = 0


@dataclass(frozen=True)
class ScreeningReport:
    """Outcome of a screening run.

    ``contributions`` covers every fitted column, the synthetic noise column
    included, and sums to 1 whenever any split occurred. ``selected`` lists
    the features whose contribution strictly exceeds the noise column's, in
    descending order of contribution; strictness means the noise column can
    never select itself.
    """

    contributions: dict[str, float]
    noise_contribution: float
    selected: tuple[str, ...]
    target_name: str
    config: ForestConfig
    n_imputed_cells: int = 0
    n_dropped_rows: int = 0
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "target_name": self.target_name,
            "noise_contribution": self.noise_contribution,
            "selected": list(self.selected),
            "contributions": dict(self.contributions),
            "n_imputed_cells": self.n_imputed_cells,
            "n_dropped_rows": self.n_dropped_rows,
            "config": self.config.to_dict(),
            "metadata": dict(self.metadata),
        }


def _coerce_features(X) -> pd.DataFrame:
    if isinstance(X, FeatureMatrix):
        return X.frame.copy()
    if isinstance(X, pd.DataFrame):
        frame = X.copy()
        frame.index = frame.index.astype(str)
        return frame
    raise SchemaError(
        f"expected a FeatureMatrix or DataFrame of features, got {type(X).__name__}")


def _coerce_target(y, index: pd.Index, target_name: str | None) -> tuple[pd.Series, str]:
    if isinstance(y, pd.Series):
        name = target_name or (str(y.name) if y.name is not None else "y")
        series = y.copy()
        series.index = series.index.astype(str)
        return series.reindex(index), name
    if isinstance(y, dict):
        series = pd.Series({str(k): v for k, v in y.items()}, dtype=float)
        return series.reindex(index), target_name or "y"
    values = np.asarray(y, dtype=float)
    if values.ndim != 1 or len(values) != len(index):
        raise SchemaError(
            f"target must be one value per batch: got shape {values.shape} "
            f"for {len(index)} rows")
    return pd.Series(values, index=index), target_name or "y"


def _prepare(X, y, target_name: str | None):
    """Align features and target, drop target-less rows, impute masked cells."""
    frame = _coerce_features(X)
    if frame.shape[1] == 0:
        raise SchemaError("feature matrix has no columns")
    target, name = _coerce_target(y, frame.index, target_name)

    keep = np.isfinite(target.to_numpy(dtype=float))
    n_dropped = int((~keep).sum())
    frame = frame.loc[keep]
    target = target.loc[keep]
    if len(frame) < MIN_ROWS:
        raise TooFewRows(
            f"screening needs at least {MIN_ROWS} rows with a target, "
            f"got {len(frame)}")

    values = frame.to_numpy(dtype=float)
    if np.isinf(values).any():
        raise NonFiniteValue("feature matrix contains infinite values")
    mask = np.isnan(values)
    n_imputed = int(mask.sum())
    if n_imputed:
        dead = np.flatnonzero(mask.all(axis=0))
        if dead.size:
            bad = [frame.columns[j] for j in dead]
            raise SchemaError(f"features with no observed values: {bad}")
        medians = np.nanmedian(values, axis=0)
        values = np.where(mask, medians[None, :], values)
    return frame.index, tuple(frame.columns), values, target.to_numpy(dtype=float), \
        name, n_imputed, n_dropped


def fit_forest(X, y, config: ForestConfig | None = None,
               target_name: str | None = None) -> ForestModel:
    """Fit a random forest of regression trees from features to a target.

    Rows without a finite target are dropped; masked feature cells are
    median-imputed per column (count recorded on the model). A constant
    target is not an error: every tree becomes a stump and all
    contributions are zero.

    Parameters
    ----------
    X : FeatureMatrix or DataFrame
        One row per batch, one column per feature.
    y : Series, dict, or array
        Per-batch target. Series and dict entries are matched by batch id;
        a bare array must follow the row order of ``X``.
    config : ForestConfig, optional
    target_name : str, optional
        Overrides the name recorded in the model.

    Returns
    -------
    ForestModel
    """
    config = config or ForestConfig()
    index, names, values, target, name, n_imputed, n_dropped = \
        _prepare(X, y, target_name)

    # SeedSequence folds a full 64-bit seed into the 32-bit words sklearn
    # accepts, without the collisions a plain modulo would introduce.
    state = np.random.RandomState(
        np.random.SeedSequence(config.seed).generate_state(4))
    estimator = RandomForestRegressor(
        n_estimators=config.n_trees,
        max_depth=config.max_depth,
        min_samples_leaf=config.min_samples_leaf,
        max_features=config.feature_subsample,
        bootstrap=config.row_bootstrap,
        random_state=state,
    )
    estimator.fit(values, target)
    return ForestModel(
        estimator=estimator,
        feature_names=names,
        target_name=name,
        config=config,
        batch_ids=tuple(index),
        n_imputed_cells=n_imputed,
        n_dropped_rows=n_dropped,
    )


def _tree_sse_reductions(tree, n_features: int) -> np.ndarray:
    """Per-feature total SSE reduction achieved by one fitted tree.

    For an internal node ``n`` splitting on feature ``f``, the reduction is
    ``w(n) i(n) - w(left) i(left) - w(right) i(right)`` with ``w`` the
    weighted sample count and ``i`` the node MSE, i.e. the drop in weighted
    squared error the split bought. Reductions are accumulated on ``f``.
    """
    left = tree.children_left
    internal = np.flatnonzero(left != -1)
    out = np.zeros(n_features)
    if internal.size == 0:
        return out
    right = tree.children_right
    w = tree.weighted_n_node_samples
    sse = w * tree.impurity
    gains = sse[internal] - sse[left[internal]] - sse[right[internal]]
    np.add.at(out, tree.feature[internal], gains)
    return out


def contribution_ranking(forest: ForestModel, X=None, y=None) -> dict[str, float]:
    """Rank features by their share of the forest's total SSE reduction.

    The ranking is fully determined by the fitted trees; ``X`` and ``y`` are
    accepted for optional consistency checks (``X`` must carry the columns
    the forest was trained on) and may be omitted.

    Returns
    -------
    dict
        Feature name to contribution, in the forest's column order.
        Contributions are nonnegative and sum to 1 when any split occurred;
        a forest of stumps (constant target) yields all zeros.
    """
    if X is not None:
        frame = _coerce_features(X)
        missing = [name for name in forest.feature_names if name not in frame.columns]
        if missing:
            raise MissingFeature(
                f"feature matrix lacks columns the forest was trained on: "
                f"{missing[:5]}")
    n = len(forest.feature_names)
    totals = np.zeros(n)
    for est in forest.estimator.estimators_:
        totals += _tree_sse_reductions(est.tree_, n)
    grand = totals.sum()
    if grand > 0:
        totals /= grand
    return {name: float(v) for name, v in zip(forest.feature_names, totals)}


def screen_predictors(X, y, config: ForestConfig | None = None,
                      target_name: str | None = None) -> ScreeningReport:
    """Screen features against a target using a synthetic-noise threshold.

    One column of i.i.d. standard normal noise is appended to the features
    (drawn from a stream independent of the forest's, both derived from
    ``config.seed``), the forest is fit, and every feature whose
    contribution strictly exceeds the noise column's is selected.

    Returns
    -------
    ScreeningReport
    """
    config = config or ForestConfig()
    frame = _coerce_features(X)
    if NOISE_FEATURE in frame.columns:
        raise SchemaError(
            f"feature matrix already contains a column named {NOISE_FEATURE!r}")

    noise_seq, _ = np.random.SeedSequence(config.seed).spawn(2)
    noise = np.random.default_rng(noise_seq).standard_normal(len(frame))
    augmented = frame.copy()
    augmented[NOISE_FEATURE] = noise

    model = fit_forest(augmented, y, config, target_name=target_name)
    contributions = contribution_ranking(model)
    noise_contribution = contributions[NOISE_FEATURE]
    ranked = sorted(
        (name for name in contributions if name != NOISE_FEATURE),
        key=lambda name: (-contributions[name], name))
    selected = tuple(
        name for name in ranked if contributions[name] > noise_contribution)
    return ScreeningReport(
        contributions=contributions,
        noise_contribution=noise_contribution,
        selected=selected,
        target_name=model.target_name,
        config=config,
        n_imputed_cells=model.n_imputed_cells,
        n_dropped_rows=model.n_dropped_rows,
        metadata={"n_rows": len(model.batch_ids),
                  "n_features": len(frame.columns)},
    )
