"""
Catching the right anomaly: shape problems versus slow batches
==============================================================

Two batches in this cohort are off. One simply ran 35 percent long, a
scheduling nuisance best caught on a duration chart. The other hides a
mid-heating temperature excursion inside a batch of ordinary length, the
kind of event a duration chart can never see. This script builds both
monitors: an individuals chart on batch duration, and a functional
Hotelling T-squared chart on the aligned trajectories, whose alignment
step deliberately removes duration effects so that only shape anomalies
remain.
"""

from pathlib import Path

import numpy as np

from batchwise import (
    AlignedBatchSet,
    BatchDataset,
    BatchRecord,
    align_by_triggers,
    compute_durations,
    fit_univariate,
    functional_mspc,
    make_dryer_dataset,
    project,
    t2_score,
    tag_contributions,
)
from batchwise.plots import control_chart_plot, heatmap_plot

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

# Simulate 27 batches; batch index 7 (B008) runs 35 percent long.
dataset = make_dryer_dataset(n_batches=27, seed=9, duration_factors={7: 1.35})

# Inject the shape anomaly: a jacket steam valve sticks open on B015 and
# the product overheats by ~9 degrees for a few minutes mid-heating.
batches = list(dataset.batches)
victim = batches[14]
h0, h1 = victim.phase_span("heating")
temp = victim.series["temperature"].copy()
center = 0.5 * (h0 + h1)
temp[:, 1] += 9.0 * np.exp(-0.5 * ((temp[:, 0] - center) / 60.0) ** 2)
batches[14] = BatchRecord(batch_id=victim.batch_id,
                          series={**victim.series, "temperature": temp},
                          phases=victim.phases,
                          start_time=victim.start_time)
dataset = BatchDataset(batches=tuple(batches), tags=dataset.tags,
                       z_table=dataset.z_table, y_table=dataset.y_table)
print(f"cohort: {len(dataset)} batches; B008 stretched, B015 overheated")

# --- Duration chart ----------------------------------------------------
# An individuals chart on total batch time. Cheap, and exactly where a
# slow batch belongs.
durations = compute_durations(dataset).frame["duration|total"]
duration_chart = fit_univariate(durations.to_numpy(), labels=dataset.batch_ids)
slow = [b for b, f in zip(duration_chart.labels, duration_chart.flags) if f]
print(f"\nduration chart: center {duration_chart.center:.0f} s, "
      f"upper limit {duration_chart.upper:.0f} s, flags {slow}")
assert slow == ["B008"], "only the stretched batch should trip the duration chart"

# --- Functional monitoring --------------------------------------------
# Trigger alignment stretches every phase onto the same grid, so the
# 35 percent duration excess of B008 vanishes before monitoring begins.
# What survives is shape. The monitor is trained on the healthy batches
# only (the usual reference-period workflow; an anomaly inside the
# training set would inflate the very variance it is judged against),
# then the two suspects are scored as new observations.
aligned = align_by_triggers(dataset)
suspects = ("B008", "B015")
healthy = [i for i, b in enumerate(aligned.batch_ids) if b not in suspects]
training = AlignedBatchSet(
    batch_ids=tuple(aligned.batch_ids[i] for i in healthy),
    tags=aligned.tags,
    grid=aligned.grid,
    values=aligned.values[healthy],
    time_maps=aligned.time_maps[healthy],
    method=aligned.method,
    phase_boundaries=aligned.phase_boundaries,
)
watch_tags = ("temperature", "torque", "level")
result = functional_mspc(training, tags=watch_tags, alpha=0.01)
chart = result.chart
print(f"\nfunctional T2 monitor: trained on {len(healthy)} batches, "
      f"limit {chart.t2_limit:.1f} ({chart.limit_rule})")

# Each suspect's aligned curves are projected onto the per-tag FPCA
# models; the concatenated scores are one observation for the chart.
t2 = {}
contributions = {}
for batch_id in suspects:
    observation = {}
    for tag in watch_tags:
        scores = project(result.fpca_models[tag], aligned.curve(batch_id, tag))
        observation.update({f"{tag}|FPC{k + 1}": s
                            for k, s in enumerate(scores)})
    t2[batch_id] = t2_score(chart, observation)
    contributions[batch_id] = tag_contributions(chart, observation)

print(f"  B015 (overheated): T2 = {t2['B015']:8.1f}")
print(f"  B008 (slow):       T2 = {t2['B008']:8.1f}")
assert t2["B015"] > chart.t2_limit, "the shape anomaly should be flagged"
assert t2["B008"] < chart.t2_limit, "a slow batch is not a shape anomaly"

# The per-tag contribution split says what kind of anomaly it is: the
# excursion lives in the temperature trajectory, not torque or level.
print("\nB015 contribution split:")
for tag, value in contributions["B015"].items():
    print(f"  {tag:<12s} {value:8.1f}")
assert max(contributions["B015"], key=contributions["B015"].get) == "temperature"

points = np.array([t2[b] for b in suspects])
written = control_chart_plot(points, chart.t2_limit, list(suspects),
                             str(out_dir / "functional_t2.svg"),
                             title="Functional T2, suspect batches")
written += heatmap_plot(result.per_tag_contributions,
                        str(out_dir / "t2_contributions.svg"),
                        title="Training T2 contributions by tag")
print(f"\nwrote {', '.join(written)}")
