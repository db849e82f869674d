"""Shared alignment types: warping paths, aligned sets, reference choice."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from ..errors import NoEligibleBatch, SchemaError
from ..ingest import BatchDataset, Grid


@dataclass(frozen=True)
class WarpingPath:
    """A monotone mapping between reference and query sample indices.

    ``pairs`` is an (L, 2) integer array of (reference index, query index)
    visits, starting at (0, 0), with per-step increments in {0, 1} for each
    coordinate (never both zero), and strictly increasing lexicographically.
    """

    pairs: np.ndarray
    cost: float

    def __post_init__(self):
        arr = np.asarray(self.pairs, dtype=np.intp)
        if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] == 0:
            raise SchemaError("a warping path must be a non-empty (L, 2) index array")
        if arr[0, 0] != 0 or arr[0, 1] != 0:
            raise SchemaError("a warping path must start at (0, 0)")
        steps = np.diff(arr, axis=0)
        if steps.size and (steps.min() < 0 or steps.max() > 1 or (steps.sum(axis=1) == 0).any()):
            raise SchemaError("warping path steps must advance by 0 or 1 per axis, never neither")
        object.__setattr__(self, "pairs", arr)

    @property
    def reference_indices(self) -> np.ndarray:
        return self.pairs[:, 0]

    @property
    def query_indices(self) -> np.ndarray:
        return self.pairs[:, 1]

    def singularity_count(self, multiplicity: int = 5,
                          axis: str = "both") -> int:
        """Count path segments where one series pauses for >= ``multiplicity`` steps.

        A run of ``k`` consecutive pairs sharing one query index maps that
        single query sample onto ``k`` reference samples; with
        ``axis="query"`` runs of ``k >= multiplicity`` are counted once
        each. ``axis="reference"`` counts the converse (one reference
        sample held against many query samples) and ``axis="both"`` sums
        the two.
        """
        columns = {"reference": (0,), "query": (1,), "both": (0, 1)}
        if axis not in columns:
            raise ValueError(f"axis must be one of {sorted(columns)}, got {axis!r}")
        total = 0
        for column in columns[axis]:
            idx = self.pairs[:, column]
            run = 1
            for a, b in zip(idx, idx[1:]):
                if b == a:
                    run += 1
                else:
                    if run >= multiplicity:
                        total += 1
                    run = 1
            if run >= multiplicity:
                total += 1
        return total


@dataclass(frozen=True)
class AlignedBatchSet:
    """Batches resampled onto one shared grid.

    ``values`` has shape (I batches, J tags, N grid points); ``time_maps``
    has shape (I, N) and holds, for every aligned point, the original batch
    time in seconds that produced it, so every alignment step stays
    invertible for diagnosis.
    """

    batch_ids: tuple[str, ...]
    tags: tuple[str, ...]
    grid: Grid
    values: np.ndarray
    time_maps: np.ndarray
    method: str
    phase_boundaries: dict[str, tuple[int, int]] = field(default_factory=dict)
    reference_id: str | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        maps = np.asarray(self.time_maps, dtype=float)
        n_i, n_j = len(self.batch_ids), len(self.tags)
        if vals.shape != (n_i, n_j, len(self.grid)):
            raise SchemaError(
                f"values shape {vals.shape} does not match "
                f"({n_i} batches, {n_j} tags, {len(self.grid)} points)"
            )
        if maps.shape != (n_i, len(self.grid)):
            raise SchemaError(f"time_maps shape {maps.shape} does not match ({n_i}, {len(self.grid)})")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "time_maps", maps)

    def batch_index(self, batch_id: str) -> int:
        try:
            return self.batch_ids.index(batch_id)
        except ValueError as exc:
            raise KeyError(batch_id) from exc

    def tag_index(self, tag: str) -> int:
        try:
            return self.tags.index(tag)
        except ValueError as exc:
            raise KeyError(tag) from exc

    def curve(self, batch_id: str, tag: str) -> np.ndarray:
        return self.values[self.batch_index(batch_id), self.tag_index(tag)]

    def phase_slice(self, phase: str) -> slice:
        lo, hi = self.phase_boundaries[phase]
        return slice(lo, hi)


def select_reference(dataset: BatchDataset, exclude_batches=()) -> str:
    """Pick the batch other batches are warped onto.

    Returns the eligible batch whose total duration is the median of the
    cohort (lower median for even counts): a typical batch rather than an
    extreme one. Batches in ``exclude_batches`` (known-bad runs) are
    skipped.
    """
    excluded = set(exclude_batches)
    eligible = [b for b in dataset.batches if b.batch_id not in excluded]
    if not eligible:
        raise NoEligibleBatch("no batch left after exclusions")
    ranked = sorted(eligible, key=lambda b: (b.duration, b.batch_id))
    return ranked[(len(ranked) - 1) // 2].batch_id


def aligned_to_frame(aligned: AlignedBatchSet) -> pd.DataFrame:
    """Serialize to a long table: batch_id, tag, grid_index, grid_value, value, source_time."""
    n_i, n_j, n_n = aligned.values.shape
    bidx, tidx, gidx = np.meshgrid(
        np.arange(n_i), np.arange(n_j), np.arange(n_n), indexing="ij"
    )
    return pd.DataFrame({
        "batch_id": np.asarray(aligned.batch_ids, dtype=object)[bidx.ravel()],
        "tag": np.asarray(aligned.tags, dtype=object)[tidx.ravel()],
        "grid_index": gidx.ravel(),
        "grid_value": aligned.grid.points[gidx.ravel()],
        "value": aligned.values.ravel(),
        "source_time": aligned.time_maps[bidx.ravel(), gidx.ravel()],
    })


def frame_to_aligned(frame: pd.DataFrame, method: str = "unknown") -> AlignedBatchSet:
    """Rebuild an :class:`AlignedBatchSet` from its long-table serialization."""
    required = {"batch_id", "tag", "grid_index", "grid_value", "value", "source_time"}
    missing = required - set(frame.columns)
    if missing:
        raise SchemaError(f"aligned table is missing column(s) {sorted(missing)}")
    batch_ids = tuple(pd.unique(frame["batch_id"]))
    tags = tuple(pd.unique(frame["tag"]))
    grid_values = np.asarray(
        frame.drop_duplicates("grid_index").sort_values("grid_index")["grid_value"], dtype=float
    )
    n_i, n_j, n_n = len(batch_ids), len(tags), len(grid_values)
    if len(frame) != n_i * n_j * n_n:
        raise SchemaError("aligned table is not a full batch x tag x grid cube")
    cube = (
        frame.set_index(["batch_id", "tag", "grid_index"])["value"]
        .sort_index()
        .to_numpy()
        .reshape(n_i, n_j, n_n)
    )
    maps = (
        frame[frame["tag"] == tags[0]]
        .set_index(["batch_id", "grid_index"])["source_time"]
        .sort_index()
        .to_numpy()
        .reshape(n_i, n_n)
    )
    order_b = np.argsort(np.asarray(batch_ids, dtype=object))
    order_t = np.argsort(np.asarray(tags, dtype=object))
    inv_b, inv_t = np.argsort(order_b), np.argsort(order_t)
    return AlignedBatchSet(
        batch_ids=batch_ids,
        tags=tags,
        grid=Grid(grid_values),
        values=cube[np.ix_(inv_b, inv_t)],
        time_maps=maps[inv_b],
        method=method,
    )
