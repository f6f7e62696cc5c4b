"""Consistency-tuned video generation on toy latents.

Modules: ``schedule`` (diffusion math), ``denoiser`` (toy noise predictor),
``segmentation`` (masks), ``fusion`` (background averaging), ``tuning``
(masked fine-tuning), ``temporal`` (overlapping-clip merging) and
``pipeline`` (end-to-end orchestration).
"""

from .denoiser import ConditioningEmbedding, DenoiserModel, init_model, predict_noise
from .fusion import FusionConfig, average_fuse, resume_denoise, run_fusion, sample_to_step
from .schedule import (
    NoiseSchedule,
    build_schedule,
    ddim_step,
    forward_jump,
    forward_step,
    posterior_mean,
    predict_x0,
)
from .segmentation import MaskPair, apply_mask, segment_threshold
from .temporal import ClipPlan, generate_long_video, merge_clips, project_clip
from .tuning import LossWeights, TuneConfig, fine_tune, loss_l1, loss_masked, loss_total

__version__ = "0.1.0"
