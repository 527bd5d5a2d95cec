"""Diffusion-based temporal action segmentation with condition masking."""

from .diffusion import ddim_update, forward_corrupt, run_inference
from .losses import LossWeights, loss_boundary, loss_ce, loss_smooth, loss_sum
from .masking import hard_boundaries, make_mask, sample_mask_kind, soften_boundaries
from .metrics import MetricReport, edit_score, f1_at, frame_accuracy, to_segments
from .model import ModelConfig, SegmentationModel, step_embedding
from .schedule import (
    NoiseSchedule,
    from_diffusion_space,
    make_linear_schedule,
    make_skip_trajectory,
    to_diffusion_space,
)

__version__ = "0.1.0"
