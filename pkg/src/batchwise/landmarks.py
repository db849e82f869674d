"""Per-phase scalar features ("landmarks") and duration KPIs.

Each batch is summarized by statistics of every tag over every recipe
phase, optionally after a derivative or cumulative-integral transform.
None of this requires alignment: features are computed on each batch's own
samples, in its own time base.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import SchemaError
from .ingest import BatchDataset

STATISTICS = ("mean", "max", "min", "range", "std", "first", "last",
              "median", "mad", "slope", "cv")
TRANSFORMS = ("raw", "derivative", "integral")

#: Whole-batch scope is encoded as a pseudo-phase with this name.
WHOLE_BATCH = "batch"


@dataclass(frozen=True)
class FeatureSpec:
    """Which statistics to compute, on which transforms, over which scope.

    ``statistics`` come from mean, max, min, range, std, first, last,
    median, mad (median absolute deviation), slope (least squares vs.
    time), and cv (std / |mean|, masked near zero mean). ``transforms``
    are raw, derivative (first differences over elapsed time), and
    integral (running trapezoid integral in value-seconds; its ``last``
    statistic is the phase integral). ``scope`` entries are ``phase``
    (every recipe phase) and/or ``batch`` (the whole batch as one window).
    """

    statistics: tuple[str, ...] = ("mean", "max", "min", "range", "std", "first", "last")
    transforms: tuple[str, ...] = ("raw",)
    scope: tuple[str, ...] = ("phase",)

    def __post_init__(self):
        if not self.statistics:
            raise SchemaError("FeatureSpec needs at least one statistic")
        for s in self.statistics:
            if s not in STATISTICS:
                raise SchemaError(f"unknown statistic {s!r}; expected one of {STATISTICS}")
        for t in self.transforms:
            if t not in TRANSFORMS:
                raise SchemaError(f"unknown transform {t!r}; expected one of {TRANSFORMS}")
        if not self.transforms:
            raise SchemaError("FeatureSpec needs at least one transform")
        for sc in self.scope:
            if sc not in ("phase", "batch"):
                raise SchemaError(f"unknown scope {sc!r}; expected 'phase' or 'batch'")
        if not self.scope:
            raise SchemaError("FeatureSpec needs at least one scope")


@dataclass(frozen=True)
class FeatureMatrix:
    """One row per batch, one column per feature; NaN cells are masked."""

    frame: pd.DataFrame

    def __post_init__(self):
        if self.frame.columns.duplicated().any():
            dupes = self.frame.columns[self.frame.columns.duplicated()].tolist()
            raise SchemaError(f"duplicate feature column(s): {dupes}")
        if self.frame.index.duplicated().any():
            raise SchemaError("duplicate batch ids in the feature matrix")

    @property
    def batch_ids(self) -> tuple[str, ...]:
        return tuple(self.frame.index)

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(self.frame.columns)

    @property
    def values(self) -> np.ndarray:
        return self.frame.to_numpy(dtype=float)

    @property
    def masked_cells(self) -> tuple[tuple[str, str], ...]:
        rows, cols = np.nonzero(self.frame.isna().to_numpy())
        return tuple((self.frame.index[r], self.frame.columns[c]) for r, c in zip(rows, cols))

    def join(self, other: "FeatureMatrix") -> "FeatureMatrix":
        """Column-wise concatenation over the same batches."""
        if tuple(other.frame.index) != tuple(self.frame.index):
            raise SchemaError("feature matrices cover different batches")
        return FeatureMatrix(pd.concat([self.frame, other.frame], axis=1))

    def select(self, columns) -> "FeatureMatrix":
        missing = [c for c in columns if c not in self.frame.columns]
        if missing:
            raise SchemaError(f"no such feature column(s): {missing}")
        return FeatureMatrix(self.frame[list(columns)])

    def to_csv(self, path) -> None:
        out = self.frame.copy()
        out.index.name = "batch_id"
        out.to_csv(path, na_rep="")

    @staticmethod
    def from_csv(path) -> "FeatureMatrix":
        frame = pd.read_csv(path, index_col="batch_id")
        return FeatureMatrix(frame)


def feature_name(tag: str, phase: str, transform: str, statistic: str) -> str:
    return f"{tag}|{phase}|{transform}|{statistic}"


def _transform_window(times: np.ndarray, values: np.ndarray, transform: str):
    """Apply a transform to one window's samples; returns (times, values)."""
    if transform == "raw":
        return times, values
    if transform == "derivative":
        if len(times) < 2:
            return times[:0], values[:0]
        dt = np.diff(times)
        good = dt > 0
        mid = (times[:-1] + times[1:]) / 2.0
        return mid[good], (np.diff(values)[good] / dt[good])
    if transform == "integral":
        if len(times) < 2:
            return times[:0], values[:0]
        steps = np.diff(times) * (values[:-1] + values[1:]) / 2.0
        return times, np.concatenate([[0.0], np.cumsum(steps)])
    raise SchemaError(f"unknown transform {transform!r}")


def _statistic(times: np.ndarray, values: np.ndarray, statistic: str) -> float:
    n = len(values)
    if n == 0:
        return np.nan
    if statistic == "mean":
        return float(np.mean(values))
    if statistic == "max":
        return float(np.max(values))
    if statistic == "min":
        return float(np.min(values))
    if statistic == "range":
        return float(np.max(values) - np.min(values))
    if statistic == "std":
        return float(np.std(values))
    if statistic == "first":
        return float(values[0])
    if statistic == "last":
        return float(values[-1])
    if statistic == "median":
        return float(np.median(values))
    if statistic == "mad":
        return float(np.median(np.abs(values - np.median(values))))
    if statistic == "slope":
        if n < 2 or float(np.ptp(times)) == 0.0:
            return np.nan
        return float(np.polyfit(times, values, 1)[0])
    if statistic == "cv":
        mean = float(np.mean(values))
        if abs(mean) < 1e-12:
            return np.nan
        return float(np.std(values)) / abs(mean)
    raise SchemaError(f"unknown statistic {statistic!r}")


def _window(series: np.ndarray, start: float, end: float, closed: bool,
            with_boundaries: bool) -> tuple[np.ndarray, np.ndarray]:
    """Samples inside [start, end) (or [start, end] when closed).

    With ``with_boundaries``, values at the exact window edges are added by
    linear interpolation so that windowed integrals tile the batch exactly.
    """
    t, v = series[:, 0], series[:, 1]
    mask = (t >= start) & ((t <= end) if closed else (t < end))
    wt, wv = t[mask], v[mask]
    if with_boundaries and len(t) >= 2:
        lo, hi = max(start, t[0]), min(end, t[-1])
        if len(wt) == 0 or wt[0] > lo:
            wt = np.concatenate([[lo], wt])
            wv = np.concatenate([[np.interp(lo, t, v)], wv])
        if wt[-1] < hi:
            wt = np.concatenate([wt, [hi]])
            wv = np.concatenate([wv, [np.interp(hi, t, v)]])
    return wt, wv


def compute_landmarks(dataset: BatchDataset, spec: FeatureSpec | None = None) -> FeatureMatrix:
    """Statistics of every tag per phase (and/or whole batch) per batch.

    Parameters
    ----------
    dataset : BatchDataset
    spec : FeatureSpec, optional
        Defaults to the seven basic statistics on raw values per phase.

    Returns
    -------
    FeatureMatrix
        Columns named ``tag|phase|transform|statistic``; cells whose
        window holds too few samples are NaN-masked. Phase windows are
        half-open [start, end) except the final phase, which is closed.
    """
    spec = spec or FeatureSpec()
    windows: list[tuple[str, bool]] = []
    if "phase" in spec.scope:
        names = dataset.batches[0].phase_names if len(dataset) else ()
        last = names[-1] if names else None
        windows.extend((name, name == last) for name in names)
    if "batch" in spec.scope:
        windows.append((WHOLE_BATCH, True))

    columns: dict[str, list[float]] = {}
    for tag in dataset.tags:
        for phase_name, closed in windows:
            for transform in spec.transforms:
                boundaries = transform == "integral"
                for statistic in spec.statistics:
                    cells = []
                    for batch in dataset.batches:
                        if tag not in batch.series or batch.series[tag].shape[0] == 0:
                            cells.append(np.nan)
                            continue
                        if phase_name == WHOLE_BATCH:
                            start, end = 0.0, batch.duration
                        elif phase_name in batch.phase_names:
                            start, end = batch.phase_span(phase_name)
                        else:
                            cells.append(np.nan)
                            continue
                        wt, wv = _window(batch.series[tag], start, end, closed, boundaries)
                        tt, tv = _transform_window(wt, wv, transform)
                        cells.append(_statistic(tt, tv, statistic))
                    columns[feature_name(tag, phase_name, transform, statistic)] = cells
    frame = pd.DataFrame(columns, index=pd.Index(dataset.batch_ids, name="batch_id"))
    return FeatureMatrix(frame)


def compute_durations(dataset: BatchDataset) -> FeatureMatrix:
    """Per-phase durations and the total, in seconds, as a FeatureMatrix.

    Columns are ``duration|<phase>`` in recipe order plus
    ``duration|total``, directly usable as multivariate SPC input.
    """
    names = dataset.batches[0].phase_names if len(dataset) else ()
    data: dict[str, list[float]] = {f"duration|{n}": [] for n in names}
    data["duration|total"] = []
    for batch in dataset.batches:
        spans = {p.name: p.duration for p in batch.phases}
        for n in names:
            data[f"duration|{n}"].append(spans.get(n, np.nan))
        data["duration|total"].append(batch.duration)
    frame = pd.DataFrame(data, index=pd.Index(dataset.batch_ids, name="batch_id"))
    return FeatureMatrix(frame)
