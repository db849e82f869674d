"""Multivariate dynamic time warping against a reference batch.

The cost matrix holds weighted Euclidean distances between reference and
query samples (optionally standardized per tag by the reference's own
statistics). Dynamic programming then finds the monotone warping path of
least cumulative cost, subject to a local continuity constraint P (the
number of diagonal steps required after every horizontal or vertical
step), an optional global band, and either closed or open-end boundary
conditions. Derivative variants run the same machinery on pretreated
series so that shape, not level, drives the alignment; the resulting path
still warps the original samples.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
import scipy.signal

from ..errors import (
    AllCandidatesInfeasible,
    EmptyPathSet,
    EmptyTagSet,
    InconsistentPhaseSequence,
    NoFeasiblePath,
    SchemaError,
    SeriesTooShort,
    ZeroVarianceTag,
)
from ..ingest import BatchDataset, BatchRecord, Grid, resample_to_grid
from .base import AlignedBatchSet, WarpingPath

VARIANTS = (
    "classical",
    "derivative_exponential",
    "derivative_savitzky_golay",
    "derivative_piecewise_linear",
)
BANDS = ("none", "sakoe_chiba", "itakura", "envelope")


@dataclass(frozen=True)
class Band:
    """Per-reference-index feasible query-index interval [lo, hi], inclusive."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=np.intp)
        hi = np.asarray(self.hi, dtype=np.intp)
        if lo.shape != hi.shape or lo.ndim != 1 or lo.size == 0:
            raise SchemaError("band bounds must be equal-length 1-d arrays")
        if np.any(lo > hi):
            raise SchemaError("band has lo > hi somewhere")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def contains(self, path: WarpingPath) -> bool:
        i, j = path.pairs[:, 0], path.pairs[:, 1]
        return bool(np.all((j >= self.lo[i]) & (j <= self.hi[i])))


@dataclass(frozen=True)
class DtwConfig:
    """Everything that shapes one DTW run.

    Parameters
    ----------
    variant : str
        ``classical`` warps on raw values; the three ``derivative_*``
        variants warp on first differences of a smoothed series
        (exponential, Savitzky-Golay, piecewise-linear smoothing).
    local_P : int
        Sakoe-Chiba local continuity constraint: every horizontal or
        vertical step must be followed by at least P diagonal steps.
        P=0 leaves steps unconstrained.
    global_band : str
        ``none``, ``sakoe_chiba`` (|i - j| <= band_width), ``itakura``
        (slope-limited parallelogram), or ``envelope`` (band built from
        historical warping paths, see :func:`envelope_band`).
    band_width : int, optional
        Width for the sakoe_chiba band.
    band : Band, optional
        Precomputed band for global_band="envelope".
    boundary : str
        ``closed`` anchors both path ends; ``open_end`` anchors the start
        only and ends wherever the last query column is cheapest.
    weights : dict, optional
        Per-tag non-negative weights in the distance; missing tags weigh
        1.0; tags with weight 0 are excluded from the distance (alignment
        output still carries every tag).
    normalize : str
        ``per_tag_std`` standardizes both series by the reference's
        per-tag mean and std before distances; ``none`` uses raw values.
    variant_params : dict
        Parameters for the derivative pretreatment (``alpha``, ``window``,
        ``polyorder``, ``n_segments``).
    """

    variant: str = "classical"
    local_P: int = 0
    global_band: str = "none"
    band_width: int | None = None
    band: Band | None = None
    boundary: str = "closed"
    weights: dict[str, float] | None = None
    normalize: str = "per_tag_std"
    variant_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise SchemaError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.local_P < 0 or int(self.local_P) != self.local_P:
            raise SchemaError("local_P must be a non-negative integer")
        if self.global_band not in BANDS:
            raise SchemaError(f"unknown global band {self.global_band!r}; expected one of {BANDS}")
        if self.global_band == "sakoe_chiba":
            if self.band_width is None or self.band_width < 0:
                raise SchemaError("sakoe_chiba band needs band_width >= 0")
        if self.global_band == "envelope" and self.band is None:
            raise SchemaError("envelope band needs the band= argument (see envelope_band)")
        if self.boundary not in ("closed", "open_end"):
            raise SchemaError(f"unknown boundary {self.boundary!r}")
        if self.normalize not in ("per_tag_std", "none"):
            raise SchemaError(f"unknown normalize mode {self.normalize!r}")
        if self.weights is not None:
            if any(w < 0 for w in self.weights.values()):
                raise SchemaError("tag weights must be non-negative")
            if self.weights and all(w == 0 for w in self.weights.values()):
                raise EmptyTagSet("all tag weights are zero")


# --- pretreatment ---------------------------------------------------------------


def pretreat_derivative(series, variant: str, variant_params: dict | None = None) -> np.ndarray:
    """First differences of a smoothed series (length N-1).

    Parameters
    ----------
    series : array-like
        1-d sample values (an (n, 2) time-value array is accepted and its
        value column used). Sampling is assumed uniform.
    variant : str
        ``derivative_exponential`` (exponential smoothing, factor
        ``alpha``), ``derivative_savitzky_golay`` (``window``,
        ``polyorder``), or ``derivative_piecewise_linear``
        (``n_segments`` least-squares line segments).
    variant_params : dict, optional

    Returns
    -------
    numpy.ndarray
        np.diff of the smoothed values. The Savitzky-Golay and
        piecewise-linear variants reproduce an affine input exactly (a
        constant sequence of slope times sample spacing); the exponential
        variant converges to it after its warm-up transient.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim == 2 and x.shape[1] == 2:
        x = x[:, 1]
    if x.ndim != 1:
        raise SchemaError("series must be 1-d values or an (n, 2) time-value array")
    n = x.size
    params = variant_params or {}
    if variant == "derivative_exponential":
        if n < 2:
            raise SeriesTooShort("exponential smoothing needs >= 2 samples")
        alpha = float(params.get("alpha", 0.3))
        if not 0 < alpha <= 1:
            raise SchemaError("alpha must be in (0, 1]")
        smoothed, _ = scipy.signal.lfilter(
            [alpha], [1.0, -(1.0 - alpha)], x, zi=[(1.0 - alpha) * x[0]]
        )
    elif variant == "derivative_savitzky_golay":
        window = int(params.get("window", 11))
        polyorder = int(params.get("polyorder", 2))
        if window % 2 == 0 or window < 3:
            raise SchemaError("savitzky-golay window must be odd and >= 3")
        if polyorder >= window:
            raise SchemaError("polyorder must be smaller than the window")
        if n < window:
            raise SeriesTooShort(f"savitzky-golay with window {window} needs >= {window} samples")
        smoothed = scipy.signal.savgol_filter(x, window, polyorder)
    elif variant == "derivative_piecewise_linear":
        k = int(params.get("n_segments", 8))
        if k < 1:
            raise SchemaError("n_segments must be >= 1")
        if n < 2 * k:
            raise SeriesTooShort(f"piecewise-linear with {k} segments needs >= {2 * k} samples")
        bounds = np.linspace(0, n, k + 1).astype(int)
        smoothed = np.empty(n)
        for a, b in zip(bounds, bounds[1:]):
            idx = np.arange(a, b)
            coeff = np.polyfit(idx, x[a:b], 1)
            smoothed[a:b] = np.polyval(coeff, idx)
    else:
        raise SchemaError(f"no derivative pretreatment named {variant!r}")
    return np.diff(smoothed)


# --- cost matrix ----------------------------------------------------------------


def _as_tag_dict(series) -> dict[str, np.ndarray]:
    if isinstance(series, dict):
        return {str(k): np.asarray(v, dtype=float).ravel() for k, v in series.items()}
    arr = np.asarray(series, dtype=float)
    if arr.ndim == 1:
        return {"series": arr}
    if arr.ndim == 2:
        return {str(j): arr[j] for j in range(arr.shape[0])}
    raise SchemaError("series must be a tag dict, a 1-d array, or a (J, N) matrix")


def _band_bounds(n_ref: int, n_query: int, config: DtwConfig) -> tuple[np.ndarray, np.ndarray]:
    i = np.arange(n_ref)
    if config.global_band == "none":
        return np.zeros(n_ref, dtype=np.intp), np.full(n_ref, n_query - 1, dtype=np.intp)
    if config.global_band == "sakoe_chiba":
        w = int(config.band_width)
        return np.maximum(0, i - w), np.minimum(n_query - 1, i + w)
    if config.global_band == "itakura":
        eps = 1e-9
        top, right = n_ref - 1, n_query - 1
        lo = np.ceil(np.maximum(0.5 * i, right - 2.0 * (top - i)) - eps).astype(np.intp)
        hi = np.floor(np.minimum(2.0 * i, right - 0.5 * (top - i)) + eps).astype(np.intp)
        return np.maximum(lo, 0), np.minimum(hi, right)
    band = config.band
    if len(band.lo) != n_ref:
        raise SchemaError(
            f"envelope band covers {len(band.lo)} reference points, matrix has {n_ref}"
        )
    return np.maximum(band.lo, 0), np.minimum(band.hi, n_query - 1)


def dtw_cost_matrix(reference, query, config: DtwConfig | None = None) -> np.ndarray:
    """Weighted Euclidean distance matrix, band-masked with infinities.

    Parameters
    ----------
    reference, query : dict, 1-d array, or (J, N) matrix
        Per-tag sample values. Both must carry the same tags.
    config : DtwConfig, optional
        Supplies variant pretreatment, weights, normalization, and the
        global band. Defaults to classical/unweighted/standardized/no band.

    Returns
    -------
    numpy.ndarray
        (N_ref, N_query) matrix: cell (i, j) is the distance between
        reference sample i and query sample j (after pretreatment and
        normalization); cells outside the global band are ``inf``. For
        derivative variants the matrix lives in difference space, so it is
        one smaller along each axis.
    """
    config = config or DtwConfig()
    ref = _as_tag_dict(reference)
    qry = _as_tag_dict(query)
    if set(ref) != set(qry):
        raise SchemaError(f"reference tags {sorted(ref)} != query tags {sorted(qry)}")
    weights = config.weights or {}
    tags = [t for t in ref if weights.get(t, 1.0) > 0]
    if not tags:
        raise EmptyTagSet("no tag has positive weight")

    rows_ref, rows_qry, w = [], [], []
    for tag in tags:
        a, b = ref[tag], qry[tag]
        if config.variant != "classical":
            a = pretreat_derivative(a, config.variant, config.variant_params)
            b = pretreat_derivative(b, config.variant, config.variant_params)
        if config.normalize == "per_tag_std":
            mu, sd = float(np.mean(a)), float(np.std(a))
            if sd <= 0:
                raise ZeroVarianceTag(tag)
            a, b = (a - mu) / sd, (b - mu) / sd
        rows_ref.append(a)
        rows_qry.append(b)
        w.append(weights.get(tag, 1.0))
    lens_r = {len(r) for r in rows_ref}
    lens_q = {len(q) for q in rows_qry}
    if len(lens_r) != 1 or len(lens_q) != 1:
        raise SchemaError("all tags must have the same sample count within each series")

    ref_mat = np.vstack(rows_ref)
    qry_mat = np.vstack(rows_qry)
    w = np.asarray(w)[:, None, None]
    delta = ref_mat[:, :, None] - qry_mat[:, None, :]
    cost = np.sqrt(np.sum(w * delta * delta, axis=0))

    lo, hi = _band_bounds(cost.shape[0], cost.shape[1], config)
    j = np.arange(cost.shape[1])
    outside = (j[None, :] < lo[:, None]) | (j[None, :] > hi[:, None])
    cost[outside] = np.inf
    return cost


# --- dynamic programming ---------------------------------------------------------


def _dp_tables(d: np.ndarray, local_P: int) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative cost D and move codes (0 diag, 1 vertical, 2 horizontal)."""
    n, m = d.shape
    inf = np.inf
    D = np.full((n, m), inf)
    move = np.full((n, m), -1, dtype=np.int8)
    D[0, 0] = d[0, 0]
    if local_P == 0:
        for j in range(1, m):
            D[0, j] = D[0, j - 1] + d[0, j]
            move[0, j] = 2
        for i in range(1, n):
            di = d[i].tolist()
            diag = D[i - 1].tolist()
            row = [inf] * m
            mrow = [-1] * m
            left = inf
            for j in range(m):
                cell = di[j]
                if cell == inf:
                    left = inf
                    continue
                best = diag[j - 1] if j else inf
                mv = 0 if best < inf else -1
                up = diag[j]
                if up < best:
                    best, mv = up, 1
                if left < best:
                    best, mv = left, 2
                if mv >= 0:
                    left = best + cell
                    row[j] = left
                    mrow[j] = mv
                else:
                    left = inf
            D[i] = row
            move[i] = mrow
        return D, move

    P = local_P
    # Cost of the diagonal run ending at (i, j): sum of P+1 cells up-left.
    R = d.copy()
    for k in range(1, P + 1):
        R[k:, k:] += d[:-k, :-k]
    for i in range(1, n):
        cand = np.concatenate(([inf], D[i - 1, :-1])) + d[i]
        best = cand
        mv = np.where(np.isfinite(cand), 0, -1).astype(np.int8)
        if i >= P + 1 and m > P:
            cand = np.full(m, inf)
            cand[P:] = D[i - P - 1, : m - P] + R[i, P:]
            better = cand < best
            best = np.where(better, cand, best)
            mv = np.where(better, np.int8(1), mv)
        if i >= P and m > P + 1:
            cand = np.full(m, inf)
            cand[P + 1:] = D[i - P, : m - P - 1] + R[i, P + 1:]
            better = cand < best
            best = np.where(better, cand, best)
            mv = np.where(better, np.int8(2), mv)
        D[i] = best
        move[i] = mv
    return D, move


def _backtrack(move: np.ndarray, end: tuple[int, int], local_P: int) -> np.ndarray:
    i, j = end
    rev = [(i, j)]
    while (i, j) != (0, 0):
        mv = int(move[i, j])
        if mv < 0:
            raise NoFeasiblePath(f"backtracking reached unreachable cell ({i}, {j})")
        if mv == 0:
            i, j = i - 1, j - 1
        elif local_P == 0:
            i, j = (i - 1, j) if mv == 1 else (i, j - 1)
        else:
            for k in range(1, local_P + 1):
                rev.append((i - k, j - k))
            if mv == 1:
                i, j = i - local_P - 1, j - local_P
            else:
                i, j = i - local_P, j - local_P - 1
        rev.append((i, j))
    return np.asarray(rev[::-1], dtype=np.intp)


def dtw_optimal_path(cost_matrix: np.ndarray, local_P: int = 0,
                     boundary: str = "closed") -> WarpingPath:
    """Minimum-cost monotone path through a (band-masked) cost matrix.

    Parameters
    ----------
    cost_matrix : numpy.ndarray
        (N_ref, N_query) distances; infeasible cells are ``inf``.
    local_P : int
        Every horizontal/vertical step must be followed by >= P diagonal
        steps; P=0 allows free steps {(1,0), (0,1), (1,1)}.
    boundary : str
        ``closed`` ends at (N_ref-1, N_query-1); ``open_end`` ends at the
        cheapest row of the last query column (lowest row on ties).

    Raises
    ------
    NoFeasiblePath
        When the constraints leave no admissible path.
    """
    d = np.asarray(cost_matrix, dtype=float)
    if d.ndim != 2 or d.size == 0:
        raise SchemaError("cost matrix must be a non-empty 2-d array")
    if not np.isfinite(d[0, 0]):
        raise NoFeasiblePath("the start cell (0, 0) is outside the band")
    if boundary not in ("closed", "open_end"):
        raise SchemaError(f"unknown boundary {boundary!r}")
    D, move = _dp_tables(d, int(local_P))
    n, m = d.shape
    if boundary == "closed":
        end = (n - 1, m - 1)
        if not np.isfinite(D[end]):
            raise NoFeasiblePath(
                f"no path reaches ({n - 1}, {m - 1}) with local_P={local_P} under the band"
            )
    else:
        last = D[:, m - 1]
        if not np.isfinite(last).any():
            raise NoFeasiblePath(f"no path reaches the last query column with local_P={local_P}")
        end = (int(np.argmin(last)), m - 1)
    pairs = _backtrack(move, end, int(local_P))
    return WarpingPath(pairs=pairs, cost=float(D[end]))


def envelope_band(paths: list[WarpingPath]) -> Band:
    """Band hull of historical warping paths, closed to stay monotone.

    For each reference index the raw band is the min/max query index that
    any path visited there; the closure (running max on the upper bound,
    suffix min on the lower) only ever widens the band, so every training
    path stays feasible inside it.
    """
    if not paths:
        raise EmptyPathSet("envelope_band needs at least one path")
    tops = {int(p.pairs[:, 0].max()) for p in paths}
    if len(tops) != 1:
        raise SchemaError(f"paths cover different reference lengths: {sorted(tops)}")
    n = tops.pop() + 1
    lo = np.full(n, np.iinfo(np.intp).max, dtype=np.intp)
    hi = np.full(n, -1, dtype=np.intp)
    for p in paths:
        np.minimum.at(lo, p.pairs[:, 0], p.pairs[:, 1])
        np.maximum.at(hi, p.pairs[:, 0], p.pairs[:, 1])
    hi = np.maximum.accumulate(hi)
    lo = np.minimum.accumulate(lo[::-1])[::-1]
    return Band(lo=lo, hi=hi)


# --- batch-level alignment --------------------------------------------------------


def _batch_matrix(batch: BatchRecord, tags: tuple[str, ...]) -> tuple[np.ndarray, np.ndarray]:
    """Resample all tags of one batch onto its own uniform time grid."""
    missing = [t for t in tags if t not in batch.series]
    if missing:
        raise SchemaError(f"batch {batch.batch_id!r} lacks tag(s) {missing}")
    n = max(batch.series[t].shape[0] for t in tags)
    if n < 2:
        raise SeriesTooShort(f"batch {batch.batch_id!r} has fewer than 2 samples")
    times = np.linspace(0.0, batch.duration, n)
    grid = Grid(times)
    values = np.vstack([resample_to_grid(batch.series[t], grid) for t in tags])
    return times, values


def _collapse(pairs: np.ndarray, n_ref: int, q_rows: np.ndarray) -> np.ndarray:
    """Warp query rows onto reference indices: means on many-to-one collapse."""
    sums = np.zeros((q_rows.shape[0], n_ref))
    counts = np.zeros(n_ref)
    np.add.at(sums, (slice(None), pairs[:, 0]), q_rows[:, pairs[:, 1]])
    np.add.at(counts, pairs[:, 0], 1)
    hit = counts > 0
    out = np.empty_like(sums)
    out[:, hit] = sums[:, hit] / counts[hit]
    if not hit.all():
        # Open-end paths leave trailing reference indices unmapped; hold the
        # last mapped query sample there.
        out[:, ~hit] = q_rows[:, pairs[-1, 1]][:, None]
    return out


def _sample_space_pairs(path: WarpingPath, config: DtwConfig,
                        n_ref: int, n_query: int) -> np.ndarray:
    """Map a path to sample indices; derivative paths gain a final anchor."""
    if config.variant == "classical":
        return path.pairs
    last_i = int(path.pairs[-1, 0])
    anchor = np.array([[min(last_i + 1, n_ref - 1), n_query - 1]], dtype=np.intp)
    return np.vstack([path.pairs, anchor])


def _resolve_tags(dataset: BatchDataset, config: DtwConfig) -> tuple[str, ...]:
    weights = config.weights or {}
    tags = tuple(t for t in dataset.tags if weights.get(t, 1.0) > 0)
    if not tags:
        raise EmptyTagSet("no tag has positive weight")
    return tags


def dtw_align(dataset: BatchDataset, reference_id: str,
              config: DtwConfig | None = None
              ) -> tuple[AlignedBatchSet, dict[str, WarpingPath]]:
    """Warp every batch onto the reference batch's time index.

    Each batch is first resampled onto its own uniform grid (densest tag's
    sample count); the optimal path then maps query samples to reference
    indices, collapsing many-to-one mappings by arithmetic mean. Output
    values are always the original (untreated) samples, even for
    derivative variants, whose pretreatment shapes only the distances.

    Weights restrict only which tags drive the distance; the path they
    produce warps every tag of the dataset, so an alignment computed on a
    few structurally informative tags still carries the whole batch onto
    the grid.

    Returns
    -------
    (AlignedBatchSet, dict)
        The aligned set (grid = the reference's uniform time axis) and one
        WarpingPath per batch. Batches whose alignment is infeasible are
        skipped and reported under ``diagnostics["failures"]``.
    """
    config = config or DtwConfig()
    distance_tags = _resolve_tags(dataset, config)
    tags = dataset.tags
    pos = {t: k for k, t in enumerate(tags)}
    reference = dataset.get(reference_id)
    ref_times, ref_values = _batch_matrix(reference, tags)
    n_ref = len(ref_times)
    ref_dict = {t: ref_values[pos[t]] for t in distance_tags}

    kept_ids: list[str] = []
    values, time_maps = [], []
    paths: dict[str, WarpingPath] = {}
    costs: dict[str, float] = {}
    failures: dict[str, str] = {}
    for batch in dataset.batches:
        if batch.batch_id == reference_id:
            pairs = np.column_stack([np.arange(n_ref)] * 2)
            paths[batch.batch_id] = WarpingPath(pairs=pairs, cost=0.0)
            costs[batch.batch_id] = 0.0
            kept_ids.append(batch.batch_id)
            values.append(ref_values)
            time_maps.append(ref_times)
            continue
        try:
            q_times, q_values = _batch_matrix(batch, tags)
            q_dict = {t: q_values[pos[t]] for t in distance_tags}
            cost = dtw_cost_matrix(ref_dict, q_dict, config)
            path = dtw_optimal_path(cost, config.local_P, config.boundary)
        except (NoFeasiblePath, SeriesTooShort) as exc:
            failures[batch.batch_id] = str(exc)
            continue
        pairs = _sample_space_pairs(path, config, n_ref, len(q_times))
        paths[batch.batch_id] = path
        costs[batch.batch_id] = path.cost
        kept_ids.append(batch.batch_id)
        values.append(_collapse(pairs, n_ref, q_values))
        time_maps.append(_collapse(pairs, n_ref, q_times[None, :])[0])

    if not paths:
        raise NoFeasiblePath("no batch could be aligned")
    aligned = AlignedBatchSet(
        batch_ids=tuple(kept_ids),
        tags=tags,
        grid=Grid(ref_times),
        values=np.stack(values),
        time_maps=np.stack(time_maps),
        method="dtw",
        reference_id=reference_id,
        diagnostics={
            "costs": costs,
            "failures": failures,
            "config": {
                "variant": config.variant,
                "local_P": config.local_P,
                "global_band": config.global_band,
                "band_width": config.band_width,
                "boundary": config.boundary,
                "normalize": config.normalize,
            },
        },
    )
    return aligned, paths


def stagewise_dtw(dataset: BatchDataset, reference_id: str,
                  config: DtwConfig | None = None
                  ) -> tuple[AlignedBatchSet, dict[str, WarpingPath]]:
    """DTW run independently inside each phase, closed per segment.

    Phase boundaries of every batch then land on identical grid indices,
    while samples still warp freely within each phase. Per-phase path
    costs add up to the reported per-batch cost.
    """
    config = config or DtwConfig()
    if config.boundary != "closed":
        raise SchemaError("stagewise DTW warps each phase with closed boundaries")
    if config.global_band == "envelope":
        raise SchemaError("envelope bands are defined for whole-batch DTW only")
    distance_tags = _resolve_tags(dataset, config)
    tags = dataset.tags
    reference = dataset.get(reference_id)
    phase_names = reference.phase_names
    for b in dataset.batches:
        if b.phase_names != phase_names:
            raise InconsistentPhaseSequence(
                b.batch_id, f"phases {list(b.phase_names)} differ from {list(phase_names)}"
            )

    def phase_matrix(batch: BatchRecord, name: str, final: bool):
        start, end = batch.phase_span(name)
        counts = []
        for t in tags:
            times = batch.series[t][:, 0]
            mask = (times >= start) & ((times <= end) if final else (times < end))
            counts.append(int(mask.sum()))
        n = max(max(counts), 2)
        times = start + (end - start) * _segment_fractions(n, final)
        grid = Grid(times)
        rows = np.vstack([resample_to_grid(batch.series[t], grid) for t in tags])
        return times, rows

    ref_segments = [
        phase_matrix(reference, name, k == len(phase_names) - 1)
        for k, name in enumerate(phase_names)
    ]
    seg_lengths = [len(t) for t, _ in ref_segments]
    offsets = np.concatenate([[0], np.cumsum(seg_lengths)])
    boundaries = {
        name: (int(offsets[k]), int(offsets[k + 1])) for k, name in enumerate(phase_names)
    }
    grid_times = np.concatenate([t for t, _ in ref_segments])
    n_total = int(offsets[-1])

    kept_ids, values, time_maps = [], [], []
    paths: dict[str, WarpingPath] = {}
    costs: dict[str, float] = {}
    failures: dict[str, str] = {}
    for batch in dataset.batches:
        if batch.batch_id == reference_id:
            pairs = np.column_stack([np.arange(n_total)] * 2)
            paths[batch.batch_id] = WarpingPath(pairs=pairs, cost=0.0)
            costs[batch.batch_id] = 0.0
            kept_ids.append(batch.batch_id)
            values.append(np.hstack([rows for _, rows in ref_segments]))
            time_maps.append(grid_times)
            continue
        try:
            all_pairs, total_cost = [], 0.0
            warped = np.empty((len(tags), n_total))
            tmap = np.empty(n_total)
            q_offset = 0
            for k, name in enumerate(phase_names):
                final = k == len(phase_names) - 1
                ref_t, ref_rows = ref_segments[k]
                q_t, q_rows = phase_matrix(batch, name, final)
                ref_dict = {t: ref_rows[m] for m, t in enumerate(tags)
                            if t in distance_tags}
                q_dict = {t: q_rows[m] for m, t in enumerate(tags)
                          if t in distance_tags}
                cost = dtw_cost_matrix(ref_dict, q_dict, config)
                path = dtw_optimal_path(cost, config.local_P, "closed")
                pairs = _sample_space_pairs(path, config, len(ref_t), len(q_t))
                lo, hi = boundaries[name]
                warped[:, lo:hi] = _collapse(pairs, len(ref_t), q_rows)
                tmap[lo:hi] = _collapse(pairs, len(ref_t), q_t[None, :])[0]
                all_pairs.append(pairs + np.array([[offsets[k], q_offset]], dtype=np.intp))
                total_cost += path.cost
                q_offset += len(q_t)
            joined = np.vstack(all_pairs)
            paths[batch.batch_id] = WarpingPath(pairs=joined, cost=total_cost)
            costs[batch.batch_id] = total_cost
            kept_ids.append(batch.batch_id)
            values.append(warped)
            time_maps.append(tmap)
        except (NoFeasiblePath, SeriesTooShort) as exc:
            failures[batch.batch_id] = str(exc)

    if not paths:
        raise NoFeasiblePath("no batch could be aligned")
    aligned = AlignedBatchSet(
        batch_ids=tuple(kept_ids),
        tags=tags,
        grid=Grid(grid_times),
        values=np.stack(values),
        time_maps=np.stack(time_maps),
        method="stagewise-dtw",
        phase_boundaries=boundaries,
        reference_id=reference_id,
        diagnostics={"costs": costs, "failures": failures},
    )
    return aligned, paths


def _segment_fractions(n: int, final: bool) -> np.ndarray:
    if final:
        return np.linspace(0.0, 1.0, n)
    return np.arange(n) / n


def choose_local_P(dataset: BatchDataset, reference_id: str, config: DtwConfig,
                   P_candidates, distortion_weight: float = 1.0) -> int:
    """Pick the local constraint P that best trades cost against warping.

    For each candidate, every batch is aligned and scored with
    ``cost / path_length + distortion_weight * mean |i/N_ref - j/N_query|``;
    the candidate with the lowest mean score wins, ties going to the
    smallest P. Candidates that are infeasible for any batch are skipped.

    Raises
    ------
    AllCandidatesInfeasible
        When every candidate fails on some batch.
    """
    candidates = sorted(set(int(p) for p in P_candidates))
    if len(candidates) < 2:
        raise SchemaError("choose_local_P needs at least 2 candidates")
    best_p, best_score = None, np.inf
    for p in candidates:
        trial = dataclasses.replace(config, local_P=p)
        try:
            aligned, paths = dtw_align(dataset, reference_id, trial)
        except (NoFeasiblePath, EmptyTagSet):
            continue
        if aligned.diagnostics["failures"]:
            continue
        scores = []
        for batch in dataset.batches:
            if batch.batch_id == reference_id:
                continue
            path = paths[batch.batch_id]
            n_ref = float(path.pairs[:, 0].max() + 1)
            n_qry = float(path.pairs[:, 1].max() + 1)
            distortion = float(
                np.mean(np.abs(path.pairs[:, 0] / n_ref - path.pairs[:, 1] / n_qry))
            )
            scores.append(path.cost / len(path.pairs) + distortion_weight * distortion)
        score = float(np.mean(scores)) if scores else 0.0
        if score < best_score:
            best_p, best_score = p, score
    if best_p is None:
        raise AllCandidatesInfeasible(
            f"no feasible alignment for any P in {candidates}"
        )
    return best_p
