"""Alignment on a monotone indicator variable instead of time.

A tag that progresses monotonically from a common start value to a common
end value (accumulated feed, conversion, released mass) can serve as the
batch's own progress axis: each batch is resampled at the times where the
indicator crosses a shared ladder of values.
"""

from __future__ import annotations

import numpy as np

from ..errors import IncompatibleEndpoints, NonMonotoneIndicator, SchemaError
from ..ingest import BatchDataset, Grid
from .base import AlignedBatchSet

#: Moving-average window used before monotonicity checks.
SMOOTHING_WINDOW = 5


def _smooth(values: np.ndarray, window: int = SMOOTHING_WINDOW) -> np.ndarray:
    """Centered moving average; edges where the window does not fit stay raw."""
    if len(values) < window or window < 2:
        return values.astype(float)
    kernel = np.ones(window) / window
    out = values.astype(float)
    out[window // 2: len(values) - (window - 1 - window // 2)] = np.convolve(
        values, kernel, mode="valid"
    )
    return out


def align_by_indicator(dataset: BatchDataset, indicator_tag: str,
                       n_points: int = 101, tolerance: float = 0.01) -> AlignedBatchSet:
    """Reparameterize every batch on the values of a monotone indicator tag.

    The grid is ``n_points`` equally spaced indicator values between the
    cohort-median start and end values. For every batch, each grid value's
    crossing time is found on the running-extremum envelope of the smoothed
    indicator, and all tags are resampled at those times. The output is
    invariant to any strictly monotone reparameterization of a batch's
    time axis.

    Parameters
    ----------
    dataset : BatchDataset
    indicator_tag : str
        The tag used as progress axis; must be monotone up to ``tolerance``.
    n_points : int
        Grid resolution.
    tolerance : float
        Allowed relative reversal magnitude of the smoothed indicator and
        allowed relative start/end mismatch across batches, both as a
        fraction of the indicator's own range.

    Raises
    ------
    NonMonotoneIndicator
        When a batch's smoothed indicator reverses by more than
        ``tolerance`` times its range.
    IncompatibleEndpoints
        When a batch's start or end value deviates from the cohort median
        by more than ``tolerance`` times the cohort range.
    """
    if n_points < 2:
        raise SchemaError("n_points must be >= 2")
    if indicator_tag not in dataset.tags:
        raise SchemaError(f"indicator tag {indicator_tag!r} is not in the dataset")

    smoothed: dict[str, np.ndarray] = {}
    starts, ends = [], []
    for b in dataset.batches:
        if indicator_tag not in b.series or b.series[indicator_tag].shape[0] < 2:
            raise SchemaError(f"batch {b.batch_id!r} lacks a usable {indicator_tag!r} series")
        x = _smooth(b.series[indicator_tag][:, 1])
        smoothed[b.batch_id] = x
        starts.append(x[0])
        ends.append(x[-1])

    start_common = float(np.median(starts))
    end_common = float(np.median(ends))
    span = end_common - start_common
    if span == 0:
        raise SchemaError(f"indicator {indicator_tag!r} has no net progress")
    sign = 1.0 if span > 0 else -1.0

    time_maps = np.empty((len(dataset), n_points))
    values = np.empty((len(dataset), len(dataset.tags), n_points))
    # Work in normalized progress z = (x - start) / (end - start): increasing
    # from ~0 to ~1 for both rising and falling indicators.
    ladder = np.linspace(0.0, 1.0, n_points)
    for bi, b in enumerate(dataset.batches):
        x = smoothed[b.batch_id]
        t = b.series[indicator_tag][:, 0]
        z = (x - start_common) / span
        envelope = np.maximum.accumulate(z)
        reversal = float(np.max(envelope - z))
        if reversal > tolerance:
            raise NonMonotoneIndicator(b.batch_id, reversal)
        if abs(z[0]) > tolerance or abs(z[-1] - 1.0) > tolerance:
            raise IncompatibleEndpoints(
                b.batch_id,
                f"indicator runs {x[0]:.6g} -> {x[-1]:.6g}, cohort median "
                f"{start_common:.6g} -> {end_common:.6g}",
            )
        # Keep the first visit of each envelope level so the inverse map is
        # well defined across flat stretches.
        keep = np.concatenate([[True], np.diff(envelope) > 0])
        crossing_times = np.interp(ladder, envelope[keep], t[keep])
        time_maps[bi] = crossing_times
        for ti, tag in enumerate(dataset.tags):
            series = b.series[tag]
            values[bi, ti] = np.interp(crossing_times, series[:, 0], series[:, 1])

    # Grid points must increase; a falling indicator is stored negated.
    grid = Grid(sign * (start_common + ladder * span))
    return AlignedBatchSet(
        batch_ids=dataset.batch_ids,
        tags=dataset.tags,
        grid=grid,
        values=values,
        time_maps=time_maps,
        method="indicator",
        diagnostics={
            "indicator_tag": indicator_tag,
            "start": start_common,
            "end": end_common,
            "direction": "increasing" if sign > 0 else "decreasing",
            "grid_sign": sign,
            "tolerance": tolerance,
        },
    )
