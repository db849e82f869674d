"""Synthetic agitated-dryer process data for demos and tests.

The generator emits a cohort of batches shaped like a vacuum contact
drying process: a short deagglomeration phase with heavy wet-cake torque,
a long heating phase where solvent boils off, and a cooling phase. Ten
tags, two initial-condition scalars (Z) and one quality result (Y,
residual solvent) are produced per batch.

The physics is deliberately coarse. What matters for testing is that
the coupling is honest: residual solvent follows from each batch's
drying-rate and solvent-load latents through the same expressions that
shape the torque and solvent-flow trajectories, so a feature screen has
a true pattern to find, and per-batch durations vary so alignment has
real work to do.
"""

from __future__ import annotations

import numpy as np

from .ingest import BatchDataset, BatchRecord, PhaseEvent

TAGS = (
    "agitator_speed",
    "jacket_temp",
    "level",
    "power",
    "pressure",
    "solvent_flow",
    "temperature",
    "torque",
    "vacuum",
    "weight",
)

PHASES = ("deagglomeration", "heating", "cooling")

# Nominal phase durations in seconds and the sampling interval.
NOMINAL_DURATIONS = {"deagglomeration": 600.0, "heating": 1800.0, "cooling": 900.0}
SAMPLE_INTERVAL = 20.0


def _phase_times(rng, duration_factor: float) -> dict[str, tuple[float, float]]:
    spans = {}
    start = 0.0
    for phase in PHASES:
        length = NOMINAL_DURATIONS[phase] * duration_factor \
            * float(np.exp(rng.normal(0.0, 0.08)))
        spans[phase] = (start, start + length)
        start += length
    return spans


def _batch(rng, batch_id: str, start_time: float,
           duration_factor: float) -> tuple[BatchRecord, dict, dict]:
    spans = _phase_times(rng, duration_factor)
    t_end = spans["cooling"][1]
    times = np.arange(0.0, t_end, SAMPLE_INTERVAL * float(np.exp(rng.normal(0, 0.05))))
    if times[-1] < t_end:
        times = np.append(times, t_end)

    # Latent batch state: cake mass, solvent charged, and drying rate.
    cake_mass = 120.0 * float(np.exp(rng.normal(0.0, 0.05)))
    solvent_in = 30.0 * float(np.exp(rng.normal(0.0, 0.10)))
    rate = 1.6e-3 * float(np.exp(rng.normal(0.0, 0.15)))

    h0, h1 = spans["heating"]
    c0, c1 = spans["cooling"]
    d0, d1 = spans["deagglomeration"]

    # Fraction of solvent removed: zero until heating starts, first-order
    # decay during heating, frozen afterwards.
    heat_elapsed = np.clip(times - h0, 0.0, h1 - h0)
    removed = 1.0 - np.exp(-rate * heat_elapsed)
    solvent_left = solvent_in * (1.0 - removed)
    final_left = float(solvent_left[-1])

    in_deagg = times < d1
    in_heat = (times >= h0) & (times < h1)
    in_cool = times >= c0

    setpoint = np.where(in_heat | (times >= h1), 80.0, 25.0)
    setpoint = np.where(in_cool, 20.0, setpoint)
    jacket = 25.0 + (setpoint - 25.0) * (1.0 - np.exp(
        -np.maximum(times - h0, 0.0) / 300.0))
    jacket = np.where(in_cool, 20.0 + (jacket[np.searchsorted(times, c0) - 1] - 20.0)
                      * np.exp(-(times - c0) / 400.0), jacket)

    # Product temperature: through the constant-rate period the cake sits
    # near the solvent's boiling point under vacuum, because evaporation
    # consumes the jacket heat. Once about three quarters of the solvent
    # is gone the falling-rate period begins and the temperature breaks
    # upward toward the jacket. The plateau means temperature alone says
    # little about drying progress for a long stretch of the batch.
    t_boil = 38.0
    t_break = h0 + np.log(4.0) / rate
    warmup = 1.0 - np.exp(-np.maximum(times - h0, 0.0) / 120.0)
    wet = 25.0 + (t_boil - 25.0) * warmup
    rise = 1.0 - np.exp(-np.maximum(times - t_break, 0.0) / 400.0)
    temperature = np.where(times < t_break, wet, t_boil + (jacket - t_boil) * rise)

    # Torque: wet-cake plateau during deagglomeration, then a decay toward a
    # dry level; the remaining solvent sets how far the decay has come.
    torque_wet = 55.0 + 0.15 * (cake_mass - 120.0)
    torque_dry = 20.0
    torque = torque_dry + (torque_wet - torque_dry) * (solvent_left / solvent_in)
    torque = np.where(in_deagg, torque_wet + 2.0 * np.sin(times / 40.0), torque)

    speed = np.select([in_deagg, in_heat], [60.0, 30.0], default=20.0)
    power = 0.11 * torque * speed / 60.0 + 1.5

    vacuum = np.where(times < h0, 1000.0,
                      30.0 + 970.0 * np.exp(-np.maximum(times - h0, 0.0) / 250.0))
    pressure = vacuum * (1.0 + 0.02 * (solvent_left / solvent_in))

    # Condensed solvent flow is the removal rate, nonzero only while heating.
    flow = solvent_in * rate * np.exp(-rate * heat_elapsed)
    flow = np.where(in_heat, flow, 0.0)

    weight = cake_mass + solvent_left
    # Condensate receiver tank: collected solvent as percent of capacity.
    # Zero-anchored at the start of every batch, it rises with drying
    # progress, which makes it a usable maturity axis.
    level = 100.0 * (solvent_in - solvent_left) / 45.0

    clean = {
        "agitator_speed": speed,
        "jacket_temp": jacket,
        "level": level,
        "power": power,
        "pressure": pressure,
        "solvent_flow": flow,
        "temperature": temperature,
        "torque": torque,
        "vacuum": vacuum,
        "weight": weight,
    }
    noise_scale = {
        "agitator_speed": 0.3, "jacket_temp": 0.15, "level": 0.1,
        "power": 0.05, "pressure": 2.0, "solvent_flow": 0.002,
        "temperature": 0.15, "torque": 0.4, "vacuum": 2.0, "weight": 0.15,
    }
    series = {
        tag: np.column_stack([times, clean[tag]
                              + rng.normal(0.0, noise_scale[tag], len(times))])
        for tag in TAGS
    }
    phases = tuple(
        PhaseEvent(name=phase, order=i, start=spans[phase][0], end=spans[phase][1])
        for i, phase in enumerate(PHASES))
    record = BatchRecord(batch_id=batch_id, series=series, phases=phases,
                         start_time=start_time)
    z = {"cake_mass": cake_mass, "solvent_in": solvent_in}
    y = {"solvent": final_left + float(rng.normal(0.0, 0.02))}
    return record, z, y


def make_dryer_dataset(n_batches: int = 20, seed: int = 0,
                       duration_factors: dict[int, float] | None = None) -> BatchDataset:
    """Generate a dryer-shaped cohort.

    Parameters
    ----------
    n_batches : int
        Number of batches; ids are ``B001`` .. ``B{n:03d}``.
    seed : int
        Seeds every random draw; identical arguments give identical data.
    duration_factors : dict, optional
        Batch index (0-based) to a duration multiplier. A factor stretches
        that batch's phase spans and sample times without changing any
        trajectory's shape against phase progress, which is exactly the
        anomaly that alignment should absorb.

    Returns
    -------
    BatchDataset
        With Z scalars ``cake_mass``/``solvent_in`` and Y ``solvent``.
    """
    if n_batches < 1:
        raise ValueError(f"n_batches must be >= 1, got {n_batches}")
    duration_factors = duration_factors or {}
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    batches, z_table, y_table = [], {}, {}
    for i in range(n_batches):
        batch_id = f"B{i + 1:03d}"
        record, z, y = _batch(rng, batch_id, start_time=i * 5000.0,
                              duration_factor=duration_factors.get(i, 1.0))
        batches.append(record)
        z_table[batch_id] = z
        y_table[batch_id] = y
    return BatchDataset(batches=tuple(batches), tags=TAGS,
                        z_table=z_table, y_table=y_table)
