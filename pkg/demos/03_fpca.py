"""
Compressing aligned trajectories with functional PCA
====================================================

Once batches share a grid, each temperature trajectory is a point in a
few-hundred-dimensional space, and the cohort occupies only a thin sliver
of it. Functional PCA finds that sliver: a mean curve plus a handful of
shape functions whose weighted sum reproduces any batch. This script fits
the decomposition on a simulated dryer cohort and shows how the
reconstruction error falls as shape functions are added back one by one.
"""

from pathlib import Path

import numpy as np

from batchwise import (
    align_by_triggers,
    explained_variance,
    fit_fpca,
    make_dryer_dataset,
    reconstruct,
    scores_matrix,
)
from batchwise.plots import fpca_plot

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

# Simulate and trigger-align a cohort, then pull out the temperature
# curves (30 batches, one row each, on a 300-point grid).
dataset = make_dryer_dataset(n_batches=30, seed=5)
aligned = align_by_triggers(dataset)
curves = aligned.values[:, aligned.tag_index("temperature"), :]
print(f"temperature cohort: {curves.shape[0]} batches x {curves.shape[1]} points")

# Fit with a fixed component count so there is room to watch the error
# fall; normally variance_cutoff picks K for you.
model = fit_fpca(curves, grid=aligned.grid, n_components=6,
                 tag="temperature", batch_ids=aligned.batch_ids)
fractions, cumulative = explained_variance(model)
print("explained variance per component:",
      " ".join(f"{f:.3f}" for f in fractions))
print("cumulative:", " ".join(f"{c:.3f}" for c in cumulative))

# --- Reconstruction error versus component count ----------------------
# With zero components every batch is reconstructed as the mean curve;
# each added shape function claws back the variance it explains, so the
# residual falls monotonically and approaches zero.
weights = model.quadrature_weights
errors = []
for k in range(model.n_components + 1):
    residual = 0.0
    for i in range(curves.shape[0]):
        rebuilt = reconstruct(model, model.scores[i, :k])
        diff = curves[i] - rebuilt
        residual += float(diff @ (weights * diff))
    errors.append(residual / curves.shape[0])

print("\nmean reconstruction residual (energy) by component count")
for k, err in enumerate(errors):
    bar = "#" * max(1, int(round(40 * err / errors[0])))
    print(f"  K={k}: {err:10.3f} {bar}")

drops = np.diff(errors)
assert (drops < 0).all(), "residuals should shrink with every component"
print("residuals shrink monotonically: yes")

# --- Scores as batch fingerprints --------------------------------------
# Each batch is now a short vector of FPC scores. The first score says
# how much of the dominant shape a batch contains, and extreme values
# point at the batches worth pulling up on a screen.
fingerprints = scores_matrix(model)
first = fingerprints.frame.iloc[:, 0]
print(f"\nFPC1 scores: min {first.min():.1f} ({first.idxmin()}), "
      f"max {first.max():.1f} ({first.idxmax()})")

written = fpca_plot(model, str(out_dir / "fpca_temperature.svg"))
print(f"wrote {', '.join(written)}")
