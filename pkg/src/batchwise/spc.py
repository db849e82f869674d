"""Statistical process control charts over batch features.

Three layers: individuals charts for single KPIs, PCA-based Hotelling T²
charts over feature matrices (with per-feature contribution decomposition
and heatmaps), and functional monitoring that first compresses aligned
trajectories to FPC scores per tag and then watches those scores with a
T² chart. Because the scores come from pre-aligned curves, a batch that
merely ran longer, but traced the same shapes, stays in control.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import scipy.stats

from .errors import (
    AllFeaturesConstant,
    MissingFeature,
    NonFiniteValue,
    SchemaError,
    TooFewPoints,
    TooFewRows,
)
from .fpca import FpcaModel, SmoothingConfig, fit_fpca, scores_matrix, smooth
from .landmarks import FeatureMatrix

#: Individuals-chart constant: E[moving range] = d2 * sigma for n=2.
D2 = 1.128

#: Below this many training batches the F-distribution limit is unreliable
#: and the empirical training quantile is used instead.
F_LIMIT_MIN_ROWS = 20


@dataclass(frozen=True)
class UnivariateChart:
    """Individuals chart: center line, 3-sigma limits, flags."""

    center: float
    sigma: float
    lower: float
    upper: float
    points: np.ndarray
    flags: np.ndarray
    labels: tuple[str, ...] | None = None

    def to_dict(self) -> dict:
        return {
            "center": self.center,
            "sigma": self.sigma,
            "lower": self.lower,
            "upper": self.upper,
            "points": self.points.tolist(),
            "flags": self.flags.tolist(),
            "labels": list(self.labels) if self.labels else None,
        }


@dataclass(frozen=True)
class ControlChartModel:
    """PCA-based Hotelling T² chart fitted on autoscaled features."""

    feature_names: tuple[str, ...]
    mean: np.ndarray
    scale: np.ndarray
    loadings: np.ndarray
    component_variances: np.ndarray
    t2_limit: float
    alpha: float
    training_t2: np.ndarray
    batch_ids: tuple[str, ...]
    limit_rule: str
    dropped_features: tuple[str, ...] = ()
    n_imputed_cells: int = 0

    @property
    def n_components(self) -> int:
        return self.loadings.shape[1]

    @property
    def flags(self) -> np.ndarray:
        return self.training_t2 > self.t2_limit

    def to_dict(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
            "loadings": self.loadings.tolist(),
            "component_variances": self.component_variances.tolist(),
            "t2_limit": self.t2_limit,
            "alpha": self.alpha,
            "training_t2": self.training_t2.tolist(),
            "batch_ids": list(self.batch_ids),
            "flags": self.flags.tolist(),
            "limit_rule": self.limit_rule,
            "dropped_features": list(self.dropped_features),
            "n_imputed_cells": self.n_imputed_cells,
        }


def fit_univariate(values, labels=None) -> UnivariateChart:
    """Individuals chart: center = mean, sigma = mean moving range / 1.128."""
    x = np.asarray(values, dtype=float).ravel()
    if x.size < 5 or not np.isfinite(x).all():
        raise TooFewPoints("an individuals chart needs at least 5 finite values")
    center = float(np.mean(x))
    sigma = float(np.mean(np.abs(np.diff(x)))) / D2
    lower, upper = center - 3 * sigma, center + 3 * sigma
    flags = (x < lower) | (x > upper)
    return UnivariateChart(
        center=center, sigma=sigma, lower=lower, upper=upper,
        points=x, flags=flags, labels=tuple(labels) if labels is not None else None,
    )


def _impute(frame: pd.DataFrame) -> tuple[np.ndarray, int]:
    mask = frame.isna()
    n_missing = int(mask.to_numpy().sum())
    if n_missing == 0:
        return frame.to_numpy(dtype=float), 0
    filled = frame.fillna(frame.median())
    if filled.isna().any().any():
        bad = filled.columns[filled.isna().any()].tolist()
        raise SchemaError(f"feature(s) {bad} have no observed values at all")
    return filled.to_numpy(dtype=float), n_missing


def fit_t2(features: FeatureMatrix, n_components: int | None = None,
           variance_cutoff: float | None = None, alpha: float = 0.01) -> ControlChartModel:
    """Hotelling T² chart: autoscale, PCA by SVD, F-distribution limit.

    Parameters
    ----------
    features : FeatureMatrix
        Training batches; masked cells are median-imputed (counted in the
        model). Zero-variance features are dropped with a record.
    n_components : int, optional
        Retained components A; mutually exclusive with
        ``variance_cutoff``. When neither is given, all components up to
        the rank are kept (full-rank T², the Mahalanobis distance).
    variance_cutoff : float, optional
        Keep the smallest A reaching this cumulative explained variance.
    alpha : float
        Chart significance. The limit is the F-distribution formula
        A(I-1)(I+1) / (I(I-A)) * F(1-alpha; A, I-A); with fewer than 20
        training batches (or A = I-rank edge cases) the empirical
        (1-alpha) training quantile is used; ``limit_rule`` records which.
    """
    if n_components is not None and variance_cutoff is not None:
        raise SchemaError("give either n_components or variance_cutoff, not both")
    if not 0 < alpha < 1:
        raise SchemaError("alpha must be in (0, 1)")
    X, n_imputed = _impute(features.frame)
    n_rows, n_cols = X.shape
    if n_rows < 5:
        raise TooFewRows(f"T² needs at least 5 training batches, got {n_rows}")

    std = X.std(axis=0, ddof=1)
    keep = std > 0
    dropped = tuple(np.asarray(features.feature_names)[~keep])
    if not keep.any():
        raise AllFeaturesConstant("every feature is constant over the training batches")
    X = X[:, keep]
    names = tuple(np.asarray(features.feature_names)[keep])
    mean = X.mean(axis=0)
    scale = X.std(axis=0, ddof=1)
    Z = (X - mean) / scale

    u, s, vt = np.linalg.svd(Z, full_matrices=False)
    tol = (s[0] * max(Z.shape) * np.finfo(float).eps) if s.size else 0.0
    rank = int(np.sum(s > tol))
    if rank == 0:
        raise AllFeaturesConstant("autoscaled features have rank 0")
    variances = s * s / (n_rows - 1)
    if n_components is not None:
        if n_components < 1:
            raise SchemaError("n_components must be >= 1")
        a = min(n_components, rank)
    elif variance_cutoff is not None:
        fractions = np.cumsum(variances[:rank]) / variances[:rank].sum()
        a = int(np.searchsorted(fractions, variance_cutoff - 1e-12) + 1)
        a = min(a, rank)
    else:
        # Full rank, but never more than the A+2-rows precondition allows:
        # a centered score matrix always has rank up to I-1, which would
        # leave no degrees of freedom for the limit.
        a = min(rank, n_rows - 2)
    if n_rows < a + 2:
        raise TooFewRows(f"{n_rows} rows cannot support {a} components (need A+2)")

    loadings = vt[:a].T
    # Deterministic sign: largest-|loading| element of each component positive.
    for k in range(a):
        j = int(np.argmax(np.abs(loadings[:, k])))
        if loadings[j, k] < 0:
            loadings[:, k] = -loadings[:, k]
    component_variances = variances[:a].copy()
    scores = Z @ loadings
    training_t2 = np.sum(scores * scores / component_variances, axis=1)

    if n_rows >= F_LIMIT_MIN_ROWS and n_rows > a:
        f_crit = scipy.stats.f.ppf(1 - alpha, a, n_rows - a)
        t2_limit = a * (n_rows - 1) * (n_rows + 1) / (n_rows * (n_rows - a)) * f_crit
        limit_rule = "f_distribution"
    else:
        t2_limit = float(np.quantile(training_t2, 1 - alpha))
        limit_rule = "empirical_quantile"

    return ControlChartModel(
        feature_names=names,
        mean=mean,
        scale=scale,
        loadings=loadings,
        component_variances=component_variances,
        t2_limit=float(t2_limit),
        alpha=alpha,
        training_t2=training_t2,
        batch_ids=features.batch_ids,
        limit_rule=limit_rule,
        dropped_features=dropped,
        n_imputed_cells=n_imputed,
    )


def _observation_vector(model: ControlChartModel, observation) -> np.ndarray:
    if isinstance(observation, dict):
        missing = [f for f in model.feature_names if f not in observation]
        if missing:
            raise MissingFeature(f"observation lacks feature(s) {missing}")
        x = np.array([float(observation[f]) for f in model.feature_names])
    elif isinstance(observation, pd.Series):
        return _observation_vector(model, observation.to_dict())
    else:
        x = np.asarray(observation, dtype=float).ravel()
        if x.shape != (len(model.feature_names),):
            raise MissingFeature(
                f"observation has {x.size} values, model expects {len(model.feature_names)}"
            )
    if not np.isfinite(x).all():
        raise NonFiniteValue("observation contains NaN or infinite values")
    return x


def t2_score(model: ControlChartModel, observation) -> float:
    """Hotelling T² of one observation under the fitted model."""
    x = _observation_vector(model, observation)
    z = (x - model.mean) / model.scale
    t = z @ model.loadings
    return float(np.sum(t * t / model.component_variances))


def t2_contributions(model: ControlChartModel, observation) -> dict[str, float]:
    """Per-feature decomposition of T²; the values sum to the T² score.

    contribution_j = sum_a (t_a / lambda_a) * p_{j,a} * z_j with z the
    autoscaled observation. Contributions can be negative for features
    pulling against the overall deviation.
    """
    x = _observation_vector(model, observation)
    z = (x - model.mean) / model.scale
    t = z @ model.loadings
    weights = model.loadings @ (t / model.component_variances)
    contrib = weights * z
    return dict(zip(model.feature_names, contrib.astype(float)))


def contribution_heatmap(model: ControlChartModel, features: FeatureMatrix) -> pd.DataFrame:
    """Contribution of every feature for every batch (rows sum to T²)."""
    X, _ = _impute(features.frame.reindex(columns=list(model.feature_names)))
    rows = [t2_contributions(model, X[i]) for i in range(X.shape[0])]
    return pd.DataFrame(rows, index=pd.Index(features.batch_ids, name="batch_id"))


def tag_contributions(model: ControlChartModel, observation) -> dict[str, float]:
    """T² contributions aggregated per tag over its FPC-score columns.

    Feature names of the form ``tag|FPC{k}`` collapse onto ``tag``; other
    names aggregate onto themselves.
    """
    per_feature = t2_contributions(model, observation)
    out: dict[str, float] = {}
    for name, value in per_feature.items():
        tag = name.rsplit("|FPC", 1)[0] if "|FPC" in name else name
        out[tag] = out.get(tag, 0.0) + value
    return out


@dataclass(frozen=True)
class FunctionalMspcResult:
    """T² chart on concatenated FPC scores plus the per-tag FPCA models."""

    chart: ControlChartModel
    fpca_models: dict[str, FpcaModel]
    scores: FeatureMatrix
    per_tag_contributions: pd.DataFrame = field(repr=False, default=None)


def functional_mspc(aligned, tags=None, fpca_cutoff: float = 0.95,
                    alpha: float = 0.01, smoothing: SmoothingConfig | None = None,
                    quadrature: str = "trapezoid",
                    chart_cutoff: float = 0.95) -> FunctionalMspcResult:
    """Monitor aligned trajectories through their FPC scores.

    Per tag, an FPCA model compresses the aligned curves; all tags' scores
    are concatenated (columns ``tag|FPC{k}``) and watched with one T²
    chart retaining ``chart_cutoff`` of the score variance. (Keeping every
    score direction instead would push A toward the batch count, where T²
    saturates and stops discriminating.) Per-tag contributions are the
    summed contributions of each tag's score columns. Duration anomalies
    vanish here by construction when the input was trigger-aligned: only
    shape differences survive alignment.
    """
    tags = tuple(tags) if tags is not None else aligned.tags
    if len(aligned.batch_ids) < 5:
        raise TooFewRows("functional monitoring needs at least 5 batches")
    fpca_models: dict[str, FpcaModel] = {}
    blocks: list[FeatureMatrix] = []
    for tag in tags:
        curves = smooth(aligned, tag, smoothing) if smoothing is not None \
            else aligned.values[:, aligned.tag_index(tag), :]
        model = fit_fpca(
            curves, aligned.grid, variance_cutoff=fpca_cutoff,
            quadrature=quadrature, tag=tag, batch_ids=aligned.batch_ids,
            smoothing=smoothing,
        )
        fpca_models[tag] = model
        if model.n_components > 0:
            blocks.append(scores_matrix(model))
    if not blocks:
        raise AllFeaturesConstant("no tag shows any between-batch variation")
    scores = blocks[0]
    for block in blocks[1:]:
        scores = scores.join(block)
    chart = fit_t2(scores, variance_cutoff=chart_cutoff, alpha=alpha)
    per_tag = pd.DataFrame(
        [tag_contributions(chart, scores.frame.loc[b].to_dict()) for b in scores.batch_ids],
        index=pd.Index(scores.batch_ids, name="batch_id"),
    )
    return FunctionalMspcResult(
        chart=chart, fpca_models=fpca_models, scores=scores,
        per_tag_contributions=per_tag,
    )
