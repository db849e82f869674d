"""
From trajectories to landmarks, and which of them predict quality
=================================================================

A batch trajectory has hundreds of samples, but what a process engineer
writes in the shift log is a handful of landmarks: the torque plateau
during deagglomeration, how steeply the level rose, how long the heating
phase took. This script condenses a simulated dryer cohort into such
landmarks and then asks which of them actually carry information about
the quality result, using a random-forest screen with a synthetic noise
column as the bar to clear.
"""

import pandas as pd

from batchwise import (
    FeatureSpec,
    ForestConfig,
    compute_durations,
    compute_landmarks,
    make_dryer_dataset,
    screen_predictors,
)

# Simulate a cohort large enough for a forest to chew on. The quality
# result Y is the residual solvent left in the cake at batch end.
dataset = make_dryer_dataset(n_batches=60, seed=11)
y = pd.Series({b: dataset.y_table[b]["solvent"] for b in dataset.batch_ids},
              name="solvent")
print(f"cohort: {len(dataset)} batches, "
      f"residual solvent {y.min():.2f}..{y.max():.2f} kg")

# --- Landmarks ---------------------------------------------------------
# Three statistics per tag and phase keep the table readable: the phase
# mean, the value at phase end, and the within-phase slope.
spec = FeatureSpec(statistics=("mean", "last", "slope"))
landmarks = compute_landmarks(dataset, spec)
features = landmarks.join(compute_durations(dataset))
print(f"landmark table: {len(features.batch_ids)} batches x "
      f"{len(features.feature_names)} features")

# --- Screening ---------------------------------------------------------
# A column of pure noise is appended before fitting; only features whose
# contribution beats the noise column's are worth a second look.
report = screen_predictors(features, y, ForestConfig(seed=4))
print(f"\nnoise threshold: {report.noise_contribution:.4f}, "
      f"{len(report.selected)} of {len(features.feature_names)} features selected")

print("\ntop of the ranking (* = selected)")
ranked = sorted(report.contributions.items(), key=lambda kv: -kv[1])
for name, contribution in ranked[:10]:
    mark = "*" if name in report.selected else " "
    print(f" {mark} {name:<40s} {contribution:.4f}")

# The drier the cake, the lower the agitator torque: friction falls as
# solvent leaves. Torque landmarks late in the run are therefore direct
# fingerprints of residual solvent, and the screen should put them
# comfortably above the noise bar.
torque_selected = [n for n in report.selected if n.startswith("torque|")]
print(f"\ntorque landmarks above the noise bar: {torque_selected}")
assert torque_selected, "torque landmarks should rank above noise"

# The agitator runs the same recipe speeds every batch, so its landmarks
# carry next to nothing: the best of them sits two orders of magnitude
# under the torque leader, scraping along the noise floor.
best_speed = max(c for n, c in report.contributions.items()
                 if n.startswith("agitator_speed|"))
top_name, top_contribution = ranked[0]
print(f"best agitator_speed landmark: {best_speed:.4f}, versus "
      f"{top_name} at {top_contribution:.4f}")
assert best_speed < 0.1 * top_contribution
