"""Loading, validation, and restructuring of raw batch data.

Batch histories arrive as long-format CSV files: one trajectory file with
every sensor sample, one event file delimiting the recipe phases of each
batch, and optional initial-condition (Z) and quality (Y) tables. The
loader converts timestamps to float seconds from each batch's start (the
start of its first phase), checks the structural invariants, and returns an
immutable :class:`BatchDataset`. All operations here are pure functions.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np
import pandas as pd

from .errors import (
    DuplicateSample,
    EmptySeries,
    HeterogeneousGrids,
    MissingColumn,
    NonMonotoneTimestamps,
    OverlappingPhases,
    SchemaError,
    SinglePointSeries,
    UnknownBatchInEvents,
)

TRAJECTORY_COLUMNS = ("batch_id", "timestamp", "tag", "value")
EVENT_COLUMNS = ("batch_id", "phase", "order", "start", "end")
SCALAR_COLUMNS = ("batch_id", "name", "value")

#: Gaps wider than this multiple of the median sampling interval are reported.
GAP_WARNING_FACTOR = 5.0


@dataclass(frozen=True)
class PhaseEvent:
    """One recipe phase, in seconds from batch start."""

    name: str
    order: int
    start: float
    end: float

    def __post_init__(self):
        if not self.end > self.start:
            raise OverlappingPhases("?", f"phase {self.name!r} has end <= start")

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class BatchRecord:
    """All recorded data of a single batch.

    ``series`` maps each tag to an (n, 2) float array of (time, value)
    samples with strictly increasing times in [0, duration]. ``start_time``
    is the absolute time of the first phase start and is kept only for
    chronological ordering.
    """

    batch_id: str
    series: dict[str, np.ndarray]
    phases: tuple[PhaseEvent, ...]
    start_time: float = 0.0
    metadata: dict[str, str] = field(default_factory=dict)

    @property
    def duration(self) -> float:
        return self.phases[-1].end

    @property
    def phase_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.phases)

    def times(self, tag: str) -> np.ndarray:
        return self.series[tag][:, 0]

    def values(self, tag: str) -> np.ndarray:
        return self.series[tag][:, 1]

    def phase_span(self, name: str) -> tuple[float, float]:
        for p in self.phases:
            if p.name == name:
                return (p.start, p.end)
        raise KeyError(name)


@dataclass(frozen=True)
class BatchDataset:
    """An ordered collection of batches with shared tag vocabulary."""

    batches: tuple[BatchRecord, ...]
    tags: tuple[str, ...]
    z_table: dict[str, dict[str, float]]
    y_table: dict[str, dict[str, float]]
    metadata: dict[str, dict[str, str]] = field(default_factory=dict)
    warnings: tuple[str, ...] = ()

    @property
    def batch_ids(self) -> tuple[str, ...]:
        return tuple(b.batch_id for b in self.batches)

    def __len__(self) -> int:
        return len(self.batches)

    def get(self, batch_id: str) -> BatchRecord:
        for b in self.batches:
            if b.batch_id == batch_id:
                return b
        raise KeyError(batch_id)


@dataclass(frozen=True)
class Grid:
    """Strictly increasing aligned-time index values."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise SchemaError("a grid needs at least 2 points")
        if not np.all(np.diff(pts) > 0):
            raise SchemaError("grid points must be strictly increasing")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class Issue:
    """One validation finding: what, where, and why."""

    batch_id: str
    kind: str
    subject: str
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    """Structural findings plus per-(batch, tag) sample counts."""

    issues: tuple[Issue, ...]
    sample_counts: dict[tuple[str, str], int]

    @property
    def is_empty(self) -> bool:
        return len(self.issues) == 0

    def summary(self) -> str:
        if self.is_empty:
            return "all invariants hold"
        lines = [f"{i.kind}: batch={i.batch_id} subject={i.subject} {i.detail}".rstrip()
                 for i in self.issues]
        return "\n".join(lines)


# --- CSV parsing --------------------------------------------------------------


def _parse_time(raw: str) -> float:
    """Accept plain numeric seconds or an ISO-8601 timestamp."""
    try:
        return float(raw)
    except ValueError:
        pass
    try:
        dt = datetime.fromisoformat(raw)
    except ValueError as exc:
        raise SchemaError(f"unparseable timestamp {raw!r}") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def _read_rows(path, required, lax_columns):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise MissingColumn(f"{path}: missing column(s) {missing}")
        extra = [c for c in header if c not in required]
        if extra and not lax_columns:
            raise MissingColumn(
                f"{path}: unknown column(s) {extra}; pass lax_columns=True to keep them as metadata"
            )
        return list(reader), extra


def _read_scalar_table(path, lax_columns):
    rows, _ = _read_rows(path, SCALAR_COLUMNS, lax_columns)
    table: dict[str, dict[str, float]] = {}
    for r in rows:
        table.setdefault(r["batch_id"], {})[r["name"]] = float(r["value"])
    return table


def load_dataset(trajectories_path, events_path, z_path=None, y_path=None,
                 lax_columns: bool = False) -> BatchDataset:
    """Load and validate raw batch data from long-format CSV files.

    Parameters
    ----------
    trajectories_path : path-like
        CSV with header ``batch_id,timestamp,tag,value``.
    events_path : path-like
        CSV with header ``batch_id,phase,order,start,end``.
    z_path, y_path : path-like, optional
        Initial-condition and quality CSVs, header ``batch_id,name,value``.
    lax_columns : bool
        Keep unknown trajectory columns as per-batch metadata instead of
        rejecting the file.

    Returns
    -------
    BatchDataset
        Batches sorted by absolute start time, all sample times converted
        to seconds from each batch's first phase start.

    Raises
    ------
    MissingColumn, NonMonotoneTimestamps, DuplicateSample,
    OverlappingPhases, UnknownBatchInEvents
    """
    event_rows, _ = _read_rows(events_path, EVENT_COLUMNS, lax_columns)
    traj_rows, extra_cols = _read_rows(trajectories_path, TRAJECTORY_COLUMNS, lax_columns)

    # Phase table per batch, kept in file order then sorted by `order`.
    phases_raw: dict[str, list[tuple[int, str, float, float]]] = {}
    for r in event_rows:
        try:
            order = int(r["order"])
        except ValueError as exc:
            raise SchemaError(f"non-integer phase order {r['order']!r}") from exc
        phases_raw.setdefault(r["batch_id"], []).append(
            (order, r["phase"], _parse_time(r["start"]), _parse_time(r["end"]))
        )

    warnings: list[str] = []
    batch_phases: dict[str, tuple[PhaseEvent, ...]] = {}
    batch_t0: dict[str, float] = {}
    for bid, entries in phases_raw.items():
        entries.sort(key=lambda e: e[0])
        orders = [e[0] for e in entries]
        if orders != list(range(len(entries))):
            raise OverlappingPhases(bid, f"phase orders {orders} are not 0..{len(entries) - 1}")
        t0 = entries[0][2]
        events = []
        for order, name, start, end in entries:
            if end <= start:
                raise OverlappingPhases(bid, f"phase {name!r} has end <= start")
            events.append(PhaseEvent(name, order, start - t0, end - t0))
        span = events[-1].end
        tol = max(1e-9, 1e-9 * span)
        for a, b in zip(events, events[1:]):
            if abs(b.start - a.end) > tol:
                raise OverlappingPhases(
                    bid, f"phase {a.name!r} ends at {a.end} but {b.name!r} starts at {b.start}"
                )
        batch_phases[bid] = tuple(events)
        batch_t0[bid] = t0

    # Group trajectory rows per (batch, tag), preserving file order.
    series_raw: dict[str, dict[str, list[tuple[float, float]]]] = {}
    batch_meta: dict[str, dict[str, str]] = {}
    for r in traj_rows:
        bid, tag = r["batch_id"], r["tag"]
        raw_value = r["value"]
        value = float(raw_value) if raw_value not in ("", None) else math.nan
        series_raw.setdefault(bid, {}).setdefault(tag, []).append(
            (_parse_time(r["timestamp"]), value)
        )
        if extra_cols and bid not in batch_meta:
            batch_meta[bid] = {c: r.get(c, "") for c in extra_cols}

    for bid in phases_raw:
        if bid not in series_raw:
            raise UnknownBatchInEvents(bid)
    for bid in series_raw:
        if bid not in phases_raw:
            raise SchemaError(f"batch {bid!r} has trajectory data but no events")

    tags = sorted({t for per_batch in series_raw.values() for t in per_batch})

    records = []
    for bid, per_tag in series_raw.items():
        t0 = batch_t0[bid]
        span = batch_phases[bid][-1].end
        clean: dict[str, np.ndarray] = {}
        for tag, samples in per_tag.items():
            times = np.array([s[0] for s in samples], dtype=float) - t0
            values = np.array([s[1] for s in samples], dtype=float)
            deltas = np.diff(times)
            if np.any(deltas < 0):
                raise NonMonotoneTimestamps(bid, tag)
            if np.any(deltas == 0):
                at = times[np.where(deltas == 0)[0][0]]
                raise DuplicateSample(bid, tag, at)
            # NaN values are gaps: drop and let interpolation bridge them.
            nan_mask = np.isnan(values)
            if nan_mask.any():
                warnings.append(f"{bid}/{tag}: dropped {int(nan_mask.sum())} empty sample(s)")
                times, values = times[~nan_mask], values[~nan_mask]
            # Samples outside the batch span are trimmed, not fatal.
            inside = (times >= -1e-9) & (times <= span + 1e-9)
            if not inside.all():
                warnings.append(f"{bid}/{tag}: trimmed {int((~inside).sum())} sample(s) outside [0, {span}]")
                times, values = times[inside], values[inside]
            if times.size:
                dt = np.diff(times)
                if dt.size:
                    median_dt = float(np.median(dt))
                    wide = dt > GAP_WARNING_FACTOR * median_dt
                    if median_dt > 0 and wide.any():
                        worst = float(dt.max())
                        warnings.append(
                            f"{bid}/{tag}: gap of {worst:.6g}s exceeds {GAP_WARNING_FACTOR}x median interval"
                        )
            clean[tag] = np.column_stack([times, values])
        records.append(BatchRecord(
            batch_id=bid,
            series=clean,
            phases=batch_phases[bid],
            start_time=t0,
            metadata=batch_meta.get(bid, {}),
        ))
    records.sort(key=lambda r: (r.start_time, r.batch_id))

    z_table = _read_scalar_table(z_path, lax_columns) if z_path else {}
    y_table = _read_scalar_table(y_path, lax_columns) if y_path else {}

    return BatchDataset(
        batches=tuple(records),
        tags=tuple(tags),
        z_table=z_table,
        y_table=y_table,
        metadata=batch_meta,
        warnings=tuple(warnings),
    )


def write_dataset(dataset: BatchDataset, trajectories_path, events_path,
                  z_path=None, y_path=None) -> None:
    """Write a dataset back to the long-format CSV schemas (inverse of load)."""
    with open(trajectories_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_COLUMNS)
        for b in dataset.batches:
            for tag in sorted(b.series):
                for t, v in b.series[tag]:
                    w.writerow([b.batch_id, repr(float(t)), tag, repr(float(v))])
    with open(events_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(EVENT_COLUMNS)
        for b in dataset.batches:
            for p in b.phases:
                w.writerow([b.batch_id, p.name, p.order, repr(p.start), repr(p.end)])
    for path, table in ((z_path, dataset.z_table), (y_path, dataset.y_table)):
        if path is None:
            continue
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(SCALAR_COLUMNS)
            for bid in dataset.batch_ids:
                for name, value in sorted(table.get(bid, {}).items()):
                    w.writerow([bid, name, repr(float(value))])


# --- validation ----------------------------------------------------------------


def validate(dataset: BatchDataset) -> ValidationReport:
    """Report structural problems without raising.

    The report is empty exactly when every batch carries every tag, every
    tag's samples cover its batch's phases, and Z/Y entries (when those
    tables exist at all) are present for every batch.
    """
    issues: list[Issue] = []
    counts: dict[tuple[str, str], int] = {}
    for b in dataset.batches:
        for tag in dataset.tags:
            if tag not in b.series or b.series[tag].shape[0] == 0:
                issues.append(Issue(b.batch_id, "MissingTag", tag))
                counts[(b.batch_id, tag)] = 0
                continue
            arr = b.series[tag]
            counts[(b.batch_id, tag)] = int(arr.shape[0])
            times = arr[:, 0]
            dt = np.diff(times)
            slack = max(float(np.median(dt)) if dt.size else 0.0, 1e-9)
            if times[0] > b.phases[0].start + slack:
                issues.append(Issue(
                    b.batch_id, "PhaseCoverageGap", tag,
                    f"first sample at {times[0]:.6g}s, batch starts at {b.phases[0].start:.6g}s",
                ))
            if times[-1] < b.phases[-1].end - slack:
                issues.append(Issue(
                    b.batch_id, "PhaseCoverageGap", tag,
                    f"last sample at {times[-1]:.6g}s, batch ends at {b.phases[-1].end:.6g}s",
                ))
        if dataset.z_table and b.batch_id not in dataset.z_table:
            issues.append(Issue(b.batch_id, "MissingZ", ""))
        if dataset.y_table and b.batch_id not in dataset.y_table:
            issues.append(Issue(b.batch_id, "MissingY", ""))
    return ValidationReport(issues=tuple(issues), sample_counts=counts)


# --- resampling and unfolding ----------------------------------------------------


def resample_to_grid(series: np.ndarray, grid: Grid, method: str = "linear") -> np.ndarray:
    """Sample a (time, value) series at the given grid points.

    ``linear`` interpolates between neighbours and is exact on affine
    series; ``previous`` holds the last observed value. Grid points beyond
    either end clamp to the endpoint value.
    """
    arr = np.asarray(series, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise SchemaError("series must be an (n, 2) array of (time, value)")
    if arr.shape[0] == 0:
        raise EmptySeries("cannot resample an empty series")
    if arr.shape[0] == 1:
        raise SinglePointSeries("cannot resample a single-point series")
    t, v = arr[:, 0], arr[:, 1]
    if method == "linear":
        return np.interp(grid.points, t, v)
    if method == "previous":
        idx = np.searchsorted(t, grid.points, side="right") - 1
        return v[np.clip(idx, 0, len(v) - 1)]
    raise SchemaError(f"unknown resampling method {method!r}")


def unfold_batchwise(aligned) -> pd.DataFrame:
    """Unfold an aligned set into an I x (J*N) matrix, tag-major columns.

    Row b, column (tag j, grid point n) holds the aligned value of tag j at
    point n for batch b. The inverse reshape to (I, J, N) reproduces the
    aligned tensor exactly.
    """
    values = aligned.values
    n_batches, n_tags, n_points = values.shape
    if len(aligned.grid) != n_points:
        raise HeterogeneousGrids("value lists do not match the grid length")
    columns = pd.MultiIndex.from_product(
        [aligned.tags, range(n_points)], names=["tag", "grid_index"]
    )
    return pd.DataFrame(
        values.reshape(n_batches, n_tags * n_points),
        index=pd.Index(aligned.batch_ids, name="batch_id"),
        columns=columns,
    )
