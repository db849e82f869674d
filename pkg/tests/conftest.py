"""Shared builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from batchwise.ingest import BatchDataset, BatchRecord, PhaseEvent


def make_batch(batch_id, phases, series, start_time=0.0):
    """Build a BatchRecord from (name, start, end) phase triples.

    ``series`` maps tag to either an (n, 2) array or a (times, values)
    pair.
    """
    events = tuple(
        PhaseEvent(name=name, order=k, start=float(start), end=float(end))
        for k, (name, start, end) in enumerate(phases))
    arrays = {}
    for tag, data in series.items():
        arr = np.asarray(data, dtype=float)
        if arr.ndim == 2 and arr.shape[0] == 2 and arr.shape[1] != 2:
            arr = arr.T
        arrays[tag] = arr
    return BatchRecord(batch_id=batch_id, series=arrays, phases=events,
                       start_time=start_time)


def make_dataset(batches, tags=None, z=None, y=None):
    if tags is None:
        tags = tuple(sorted({t for b in batches for t in b.series}))
    return BatchDataset(batches=tuple(batches), tags=tuple(tags),
                        z_table=z or {}, y_table=y or {})


def ramp_batch(batch_id, duration, n, phases=None, start_time=0.0, tags=("x",)):
    """A batch whose every tag equals elapsed time (handy affine oracle)."""
    times = np.linspace(0.0, duration, n)
    if phases is None:
        phases = [("only", 0.0, duration)]
    return make_batch(batch_id, phases,
                      {tag: np.column_stack([times, times]) for tag in tags},
                      start_time=start_time)


@pytest.fixture(scope="session")
def dryer():
    from batchwise.synthetic import make_dryer_dataset
    return make_dryer_dataset(20, seed=7)
