"""Alignment of batch trajectories onto a shared grid.

Three families are provided: phase-wise linear warping from automation
triggers (:mod:`.triggers`), reparameterization on a monotone indicator
variable (:mod:`.indicator`), and dynamic time warping against a reference
batch (:mod:`.dtw`).
"""

from .base import (
    AlignedBatchSet,
    WarpingPath,
    aligned_to_frame,
    frame_to_aligned,
    select_reference,
)
from .triggers import TriggerAlignmentConfig, align_by_triggers
from .indicator import align_by_indicator
from .dtw import (
    Band,
    DtwConfig,
    choose_local_P,
    dtw_align,
    dtw_cost_matrix,
    dtw_optimal_path,
    envelope_band,
    pretreat_derivative,
    stagewise_dtw,
)

__all__ = [
    "AlignedBatchSet",
    "WarpingPath",
    "aligned_to_frame",
    "frame_to_aligned",
    "select_reference",
    "TriggerAlignmentConfig",
    "align_by_triggers",
    "align_by_indicator",
    "Band",
    "DtwConfig",
    "choose_local_P",
    "dtw_align",
    "dtw_cost_matrix",
    "dtw_optimal_path",
    "envelope_band",
    "pretreat_derivative",
    "stagewise_dtw",
]
