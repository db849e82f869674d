"""Batch-process analytics: alignment, landmark features, FPCA, and SPC.

The package takes long-format historian exports of batch trajectories and
recipe phase events, aligns the batches onto a common maturity grid
(trigger, indicator, or dynamic-time-warping based), extracts landmark
features, screens them against quality results with a random-forest
contribution ranking, compresses aligned trajectories with functional PCA,
and monitors batches with univariate, Hotelling T², and functional
control charts.
"""

from .align import (
    AlignedBatchSet,
    Band,
    DtwConfig,
    TriggerAlignmentConfig,
    WarpingPath,
    align_by_indicator,
    align_by_triggers,
    aligned_to_frame,
    choose_local_P,
    dtw_align,
    dtw_cost_matrix,
    dtw_optimal_path,
    envelope_band,
    frame_to_aligned,
    pretreat_derivative,
    select_reference,
    stagewise_dtw,
)
from .errors import BatchwiseError, InfeasibleError, SchemaError
from .fpca import (
    FpcaModel,
    SmoothingConfig,
    explained_variance,
    fit_fpca,
    project,
    quadrature_weights,
    reconstruct,
    scores_matrix,
    smooth,
)
from .ingest import (
    BatchDataset,
    BatchRecord,
    Grid,
    PhaseEvent,
    ValidationReport,
    load_dataset,
    resample_to_grid,
    unfold_batchwise,
    validate,
    write_dataset,
)
from .landmarks import (
    FeatureMatrix,
    FeatureSpec,
    compute_durations,
    compute_landmarks,
    feature_name,
)
from .screen import (
    ForestConfig,
    ForestModel,
    ScreeningReport,
    contribution_ranking,
    fit_forest,
    screen_predictors,
)
from .spc import (
    ControlChartModel,
    FunctionalMspcResult,
    UnivariateChart,
    contribution_heatmap,
    fit_t2,
    fit_univariate,
    functional_mspc,
    t2_contributions,
    t2_score,
    tag_contributions,
)
from .synthetic import make_dryer_dataset

__version__ = "0.1.0"

__all__ = [
    "AlignedBatchSet",
    "Band",
    "BatchDataset",
    "BatchRecord",
    "BatchwiseError",
    "ControlChartModel",
    "DtwConfig",
    "FeatureMatrix",
    "FeatureSpec",
    "ForestConfig",
    "ForestModel",
    "FpcaModel",
    "FunctionalMspcResult",
    "Grid",
    "InfeasibleError",
    "PhaseEvent",
    "SchemaError",
    "ScreeningReport",
    "SmoothingConfig",
    "TriggerAlignmentConfig",
    "UnivariateChart",
    "ValidationReport",
    "WarpingPath",
    "align_by_indicator",
    "align_by_triggers",
    "aligned_to_frame",
    "choose_local_P",
    "compute_durations",
    "compute_landmarks",
    "contribution_heatmap",
    "contribution_ranking",
    "dtw_align",
    "dtw_cost_matrix",
    "dtw_optimal_path",
    "envelope_band",
    "explained_variance",
    "feature_name",
    "fit_fpca",
    "fit_forest",
    "fit_t2",
    "fit_univariate",
    "frame_to_aligned",
    "functional_mspc",
    "load_dataset",
    "make_dryer_dataset",
    "pretreat_derivative",
    "project",
    "quadrature_weights",
    "reconstruct",
    "resample_to_grid",
    "scores_matrix",
    "screen_predictors",
    "select_reference",
    "smooth",
    "stagewise_dtw",
    "t2_contributions",
    "t2_score",
    "tag_contributions",
    "unfold_batchwise",
    "validate",
    "write_dataset",
]
