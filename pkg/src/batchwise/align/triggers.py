"""Phase-wise linear warping driven by automation triggers.

Each recipe phase is allotted a fixed number of grid points; within a
phase, every batch's own [start, end) span is mapped affinely onto that
segment. Phase boundaries therefore land on the same grid indices for
every batch regardless of how long the phase actually ran.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InconsistentPhaseSequence, PhaseMissing, SchemaError
from ..ingest import BatchDataset, Grid, resample_to_grid
from .base import AlignedBatchSet


@dataclass(frozen=True)
class TriggerAlignmentConfig:
    """Grid layout for trigger alignment.

    Parameters
    ----------
    points_per_phase : int or dict
        Grid points allotted to each phase: one integer for all phases, or
        a mapping of phase name to integer. Every entry must be >= 2.
    phase_length_mode : {"median_duration", "equal"}
        Controls the grid's x-axis values only (never the point counts):
        ``median_duration`` gives each phase a segment as long as its
        cohort-median duration in seconds, ``equal`` gives every phase a
        unit-length segment.
    """

    points_per_phase: int | dict[str, int] = 100
    phase_length_mode: str = "median_duration"

    def __post_init__(self):
        if self.phase_length_mode not in ("median_duration", "equal"):
            raise SchemaError(f"unknown phase_length_mode {self.phase_length_mode!r}")
        ppp = self.points_per_phase
        counts = ppp.values() if isinstance(ppp, dict) else [ppp]
        for n in counts:
            if int(n) != n or n < 2:
                raise SchemaError("every phase needs an integer point count >= 2")

    def count_for(self, phase: str) -> int:
        if isinstance(self.points_per_phase, dict):
            if phase not in self.points_per_phase:
                raise SchemaError(f"points_per_phase has no entry for phase {phase!r}")
            return int(self.points_per_phase[phase])
        return int(self.points_per_phase)


def _phase_fractions(n_points: int, final: bool) -> np.ndarray:
    """Within-phase positions as fractions of the phase duration.

    Non-final phases are half-open (the end instant belongs to the next
    phase's first point); the final phase includes its end exactly.
    """
    if final:
        return np.linspace(0.0, 1.0, n_points)
    return np.arange(n_points) / n_points


def align_by_triggers(dataset: BatchDataset, config: TriggerAlignmentConfig | None = None,
                      tags: tuple[str, ...] | None = None) -> AlignedBatchSet:
    """Align batches by warping each phase linearly onto a shared segment.

    Parameters
    ----------
    dataset : BatchDataset
        Batches with identical ordered phase-name sequences.
    config : TriggerAlignmentConfig, optional
        Grid layout; defaults to 100 points per phase, median-duration axis.
    tags : tuple of str, optional
        Tags to align; defaults to all tags in the dataset.

    Returns
    -------
    AlignedBatchSet
        ``phase_boundaries[name]`` gives the half-open grid index range of
        each phase, identical for all batches.

    Raises
    ------
    InconsistentPhaseSequence
        When batches disagree on phase names or order.
    PhaseMissing
        When config names a phase a batch does not have.
    """
    if config is None:
        config = TriggerAlignmentConfig()
    if len(dataset) == 0:
        raise SchemaError("cannot align an empty dataset")
    tags = tuple(tags) if tags is not None else dataset.tags
    if not tags:
        raise SchemaError("no tags to align")

    phase_names = dataset.batches[0].phase_names
    for b in dataset.batches[1:]:
        if b.phase_names != phase_names:
            raise InconsistentPhaseSequence(
                b.batch_id,
                f"phases {list(b.phase_names)} differ from {list(phase_names)}",
            )
    if isinstance(config.points_per_phase, dict):
        for name in config.points_per_phase:
            if name not in phase_names:
                raise PhaseMissing(dataset.batches[0].batch_id, name)

    counts = [config.count_for(name) for name in phase_names]
    n_total = sum(counts)

    if config.phase_length_mode == "equal":
        lengths = [1.0] * len(phase_names)
    else:
        lengths = [
            float(np.median([b.phase_span(name)[1] - b.phase_span(name)[0]
                             for b in dataset.batches]))
            for name in phase_names
        ]

    grid_values = np.empty(n_total)
    boundaries: dict[str, tuple[int, int]] = {}
    offset_idx, offset_val = 0, 0.0
    for k, (name, n_p, length) in enumerate(zip(phase_names, counts, lengths)):
        frac = _phase_fractions(n_p, final=(k == len(phase_names) - 1))
        grid_values[offset_idx:offset_idx + n_p] = offset_val + length * frac
        boundaries[name] = (offset_idx, offset_idx + n_p)
        offset_idx += n_p
        offset_val += length
    grid = Grid(grid_values)

    values = np.empty((len(dataset), len(tags), n_total))
    time_maps = np.empty((len(dataset), n_total))
    for bi, batch in enumerate(dataset.batches):
        source_times = np.empty(n_total)
        for k, (name, n_p) in enumerate(zip(phase_names, counts)):
            lo, hi = boundaries[name]
            start, end = batch.phase_span(name)
            frac = _phase_fractions(n_p, final=(k == len(phase_names) - 1))
            source_times[lo:hi] = start + (end - start) * frac
        time_maps[bi] = source_times
        for ti, tag in enumerate(tags):
            if tag not in batch.series:
                raise SchemaError(f"batch {batch.batch_id!r} lacks tag {tag!r}")
            values[bi, ti] = resample_to_grid(
                batch.series[tag], Grid(source_times), method="linear"
            )

    return AlignedBatchSet(
        batch_ids=dataset.batch_ids,
        tags=tags,
        grid=grid,
        values=values,
        time_maps=time_maps,
        method="triggers",
        phase_boundaries=boundaries,
        diagnostics={
            "points_per_phase": {n: c for n, c in zip(phase_names, counts)},
            "phase_length_mode": config.phase_length_mode,
        },
    )
