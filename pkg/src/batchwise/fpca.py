"""Functional principal component analysis of aligned trajectories.

A cohort of curves on a shared grid is summarized by a mean curve plus a
small set of orthonormal shape functions (eigenfunctions); each batch is
then described by how much of each shape it contains (its FPC scores).
Orthonormality is taken under a quadrature inner product on the grid, and
the decomposition is computed by SVD of the centered, quadrature-weighted
data matrix rather than an N x N covariance, which is stabler when the
grid is much finer than the cohort is large.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.interpolate import BSpline

from .errors import (
    DegenerateData,
    GridMismatch,
    SchemaError,
    TooFewPointsForBasis,
)
from .ingest import Grid
from .landmarks import FeatureMatrix

QUADRATURES = ("trapezoid", "uniform")


@dataclass(frozen=True)
class SmoothingConfig:
    """Penalized B-spline presmoothing (or none).

    ``basis="bspline"`` fits each curve with ``n_knots`` basis functions of
    the given order (order 4 = cubic) and a curvature penalty built from
    second divided differences of the coefficients, so affine curves are
    reproduced exactly at any penalty; ``basis="none"`` passes data through
    untouched.
    """

    basis: str = "none"
    order: int = 4
    n_knots: int = 20
    penalty: float = 0.0

    def __post_init__(self):
        if self.basis not in ("none", "bspline"):
            raise SchemaError(f"unknown basis {self.basis!r}")
        if self.order < 2:
            raise SchemaError("spline order must be >= 2")
        if self.n_knots < self.order:
            raise SchemaError("n_knots must be >= order")
        if self.penalty < 0:
            raise SchemaError("penalty must be >= 0")


@dataclass(frozen=True)
class FpcaModel:
    """Mean curve, eigenfunctions, eigenvalues, and training scores.

    ``eigenfunctions`` (K x N) are orthonormal under the stored quadrature
    weights; ``eigenvalues`` are the score variances (ddof=1), sorted
    non-increasing; ``total_variance`` is the pre-truncation sum of all
    eigenvalues, so discarded energy is ``total_variance -
    sum(eigenvalues)``.
    """

    tag: str
    grid: Grid
    mean_curve: np.ndarray
    eigenfunctions: np.ndarray
    eigenvalues: np.ndarray
    scores: np.ndarray
    quadrature_weights: np.ndarray
    total_variance: float
    batch_ids: tuple[str, ...] | None = None
    smoothing: SmoothingConfig | None = None
    quadrature: str = "trapezoid"

    @property
    def n_components(self) -> int:
        return len(self.eigenvalues)

    def to_dict(self) -> dict:
        return {
            "tag": self.tag,
            "n_components": self.n_components,
            "grid": self.grid.points.tolist(),
            "mean_curve": self.mean_curve.tolist(),
            "eigenfunctions": self.eigenfunctions.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "scores": self.scores.tolist(),
            "total_variance": self.total_variance,
            "batch_ids": list(self.batch_ids) if self.batch_ids else None,
            "quadrature": self.quadrature,
            "smoothing": None if self.smoothing is None else {
                "basis": self.smoothing.basis,
                "order": self.smoothing.order,
                "n_knots": self.smoothing.n_knots,
                "penalty": self.smoothing.penalty,
            },
        }


def quadrature_weights(grid: Grid, kind: str = "trapezoid") -> np.ndarray:
    """Inner-product weights on the grid: trapezoid rule or all ones."""
    if kind == "uniform":
        return np.ones(len(grid))
    if kind != "trapezoid":
        raise SchemaError(f"unknown quadrature {kind!r}; expected one of {QUADRATURES}")
    g = grid.points
    w = np.empty(len(g))
    w[0] = (g[1] - g[0]) / 2.0
    w[-1] = (g[-1] - g[-2]) / 2.0
    w[1:-1] = (g[2:] - g[:-2]) / 2.0
    return w


def _bspline_design(grid_points: np.ndarray, order: int, n_knots: int):
    degree = order - 1
    lo, hi = grid_points[0], grid_points[-1]
    n_interior = n_knots - order
    interior = np.linspace(lo, hi, n_interior + 2)[1:-1]
    knots = np.concatenate([np.full(order, lo), interior, np.full(order, hi)])
    design = BSpline.design_matrix(grid_points, knots, degree).toarray()
    # Greville abscissae: coefficients of an affine function are affine in
    # these sites, which anchors the penalty's null space below.
    greville = np.array([knots[j + 1: j + order].mean()
                         for j in range(design.shape[1])])
    return design, greville


def _curvature_penalty(greville: np.ndarray) -> np.ndarray:
    """Second divided-difference operator over the Greville sites.

    Its null space is exactly the affine coefficient sequences, so any
    penalty weight leaves straight-line curves untouched.
    """
    k = len(greville)
    left = 1.0 / np.diff(greville[:-1])
    right = 1.0 / np.diff(greville[1:])
    scale = 2.0 / (greville[2:] - greville[:-2])
    op = np.zeros((k - 2, k))
    rows = np.arange(k - 2)
    op[rows, rows] = scale * left
    op[rows, rows + 1] = -scale * (left + right)
    op[rows, rows + 2] = scale * right
    return op.T @ op


def smooth(aligned, tag: str, config: SmoothingConfig | None = None) -> np.ndarray:
    """Penalized B-spline fit of one tag's curves, evaluated on the grid.

    Returns the I x N matrix of smoothed trajectories; ``basis="none"``
    returns the aligned values unchanged.
    """
    config = config or SmoothingConfig()
    values = aligned.values[:, aligned.tag_index(tag), :]
    if config.basis == "none":
        return values.copy()
    n = values.shape[1]
    if n < config.n_knots:
        raise TooFewPointsForBasis(
            f"{n} grid points cannot support {config.n_knots} basis functions"
        )
    design, greville = _bspline_design(aligned.grid.points, config.order,
                                       config.n_knots)
    k = design.shape[1]
    penalty = np.zeros((k, k))
    if config.penalty > 0 and k > 2:
        penalty = config.penalty * _curvature_penalty(greville)
    gram = design.T @ design + penalty
    coef = np.linalg.solve(gram, design.T @ values.T)
    return (design @ coef).T


def fit_fpca(curves: np.ndarray, grid: Grid | None = None,
             variance_cutoff: float = 0.95, n_components: int | None = None,
             quadrature: str = "trapezoid", tag: str = "",
             batch_ids: tuple[str, ...] | None = None,
             smoothing: SmoothingConfig | None = None) -> FpcaModel:
    """Eigendecomposition of a curve cohort under grid quadrature.

    Parameters
    ----------
    curves : numpy.ndarray
        I x N matrix of (smoothed) trajectories on a common grid.
    grid : Grid, optional
        Defaults to unit-spaced indices 0..N-1.
    variance_cutoff : float
        Keep the smallest K whose cumulative explained variance reaches
        this fraction; ignored when ``n_components`` is given.
    n_components : int, optional
        Fixed component count (clamped to the rank).
    quadrature : {"trapezoid", "uniform"}
        Inner-product weights. ``uniform`` (all ones) makes scores equal
        plain PCA scores of the unfolded matrix.

    Returns
    -------
    FpcaModel

    Raises
    ------
    DegenerateData
        For fewer than 2 curves. (A cohort of identical curves is fine
        and yields a K=0 model.)
    """
    X = np.asarray(curves, dtype=float)
    if X.ndim != 2:
        raise SchemaError("curves must be an I x N matrix")
    n_batches, n_points = X.shape
    if n_batches < 2:
        raise DegenerateData("FPCA needs at least 2 curves")
    if not np.isfinite(X).all():
        raise SchemaError("curves contain non-finite values")
    if grid is None:
        grid = Grid(np.arange(n_points, dtype=float))
    elif not isinstance(grid, Grid):
        grid = Grid(np.asarray(grid, dtype=float))
    if len(grid) != n_points:
        raise GridMismatch(f"grid has {len(grid)} points, curves have {n_points}")
    if batch_ids is not None and len(batch_ids) != n_batches:
        raise SchemaError("batch_ids length does not match the curve count")

    w = quadrature_weights(grid, quadrature)
    sqrt_w = np.sqrt(w)
    mean_curve = X.mean(axis=0)
    centered = (X - mean_curve) * sqrt_w
    u, s, vt = np.linalg.svd(centered, full_matrices=False)
    eigenvalues_all = s * s / (n_batches - 1)
    total_variance = float(eigenvalues_all.sum())

    # Rank floor: relative to the top singular value, but never below the
    # rounding noise of the raw (uncentered) data, so a cohort of identical
    # curves comes out rank 0 instead of fitting numerical dust.
    data_scale = float(np.linalg.norm(X * sqrt_w))
    tol = max(s[0] if s.size else 0.0, data_scale)
    tol *= max(n_batches, n_points) * np.finfo(float).eps
    rank = int(np.sum(s > tol))
    if n_components is not None:
        if n_components < 0:
            raise SchemaError("n_components must be >= 0")
        k = min(n_components, rank)
    elif rank == 0 or total_variance == 0.0:
        k = 0
    else:
        fractions = eigenvalues_all[:rank] / total_variance
        k = int(np.searchsorted(np.cumsum(fractions), variance_cutoff - 1e-12) + 1)
        k = min(k, rank)

    eigenfunctions = vt[:k] / sqrt_w
    scores = u[:, :k] * s[:k]
    # Deterministic sign: the largest-magnitude element of each
    # eigenfunction is made positive.
    for idx in range(k):
        j = int(np.argmax(np.abs(eigenfunctions[idx])))
        if eigenfunctions[idx, j] < 0:
            eigenfunctions[idx] = -eigenfunctions[idx]
            scores[:, idx] = -scores[:, idx]

    return FpcaModel(
        tag=tag,
        grid=grid,
        mean_curve=mean_curve,
        eigenfunctions=eigenfunctions,
        eigenvalues=eigenvalues_all[:k].copy(),
        scores=scores,
        quadrature_weights=w,
        total_variance=total_variance,
        batch_ids=tuple(batch_ids) if batch_ids is not None else None,
        smoothing=smoothing,
        quadrature=quadrature,
    )


def project(model: FpcaModel, series: np.ndarray) -> np.ndarray:
    """FPC scores of a new series on the model grid.

    score_k is the quadrature inner product of (series - mean) with
    eigenfunction k.
    """
    x = np.asarray(series, dtype=float)
    if x.shape != model.mean_curve.shape:
        raise GridMismatch(
            f"series has shape {x.shape}, model grid expects {model.mean_curve.shape}"
        )
    centered = (x - model.mean_curve) * model.quadrature_weights
    return model.eigenfunctions @ centered


def reconstruct(model: FpcaModel, scores: np.ndarray) -> np.ndarray:
    """Mean curve plus the given linear combination of eigenfunctions."""
    s = np.asarray(scores, dtype=float).ravel()
    if len(s) > model.n_components:
        raise SchemaError(
            f"{len(s)} scores given but the model keeps {model.n_components} components"
        )
    if len(s) == 0:
        return model.mean_curve.copy()
    return model.mean_curve + s @ model.eigenfunctions[: len(s)]


def explained_variance(model: FpcaModel) -> tuple[np.ndarray, np.ndarray]:
    """Per-component variance fractions and their cumulative sum.

    Fractions are relative to the pre-truncation total, so the cumulative
    vector tops out below 1 when components were discarded. A model with
    zero total variance reports all-zero fractions.
    """
    if model.total_variance <= 0:
        zeros = np.zeros(model.n_components)
        return zeros, zeros.copy()
    fractions = model.eigenvalues / model.total_variance
    return fractions, np.cumsum(fractions)


def scores_matrix(model: FpcaModel) -> FeatureMatrix:
    """Training scores as a FeatureMatrix with columns ``tag|FPC{k}``."""
    ids = model.batch_ids or tuple(str(i) for i in range(model.scores.shape[0]))
    columns = [f"{model.tag}|FPC{k + 1}" for k in range(model.n_components)]
    frame = pd.DataFrame(model.scores, index=pd.Index(ids, name="batch_id"), columns=columns)
    return FeatureMatrix(frame)
