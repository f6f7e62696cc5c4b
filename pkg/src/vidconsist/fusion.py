"""Average fusion of sampled backgrounds with a principal foreground.

At step ``k`` the fused latent is::

    r'_k = (w1 / n) * sum_i bg * x_k^(i)  +  w2 * fg * x_k^(principal)

after which ordinary DDIM denoising resumes from ``k`` down to 0.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .denoiser import ConditioningEmbedding, DenoiserModel
from .sampling import reverse_process
from .schedule import NoiseSchedule
from .segmentation import MaskPair, apply_mask


@dataclass(frozen=True)
class FusionConfig:
    n: int = 5
    k: int = 995
    w1: float = 1.0
    w2: float = 1.0

    def validate(self, T: int) -> "FusionConfig":
        if self.n < 1:
            raise ValueError(f"fusion.n must be >= 1, got {self.n}")
        if not 1 <= self.k <= T:
            raise ValueError(f"fusion.k must lie in [1, {T}], got {self.k}")
        if not (np.isfinite(self.w1) and np.isfinite(self.w2)):
            raise ValueError("fusion weights must be finite")
        return self


def sample_to_step(
    model: DenoiserModel,
    sched: NoiseSchedule,
    emb: ConditioningEmbedding,
    seed,
    k: int,
    eta: float = 0.0,
) -> np.ndarray:
    """Step-``k`` latent of one seeded reverse trajectory started at ``x_T``."""
    if not 0 <= k <= sched.T:
        raise ValueError(f"k must lie in [0, {sched.T}], got {k}")
    rng = np.random.default_rng(seed)
    x_T = rng.standard_normal(model.frame_shape)
    return reverse_process(x_T, sched.T, k, model, sched, emb, eta, rng)


def average_fuse(
    bg_samples: Sequence[np.ndarray],
    fg_frame,
    masks: MaskPair,
    cfg: FusionConfig,
) -> np.ndarray:
    if len(bg_samples) != cfg.n:
        raise ValueError(f"expected {cfg.n} background samples, got {len(bg_samples)}")
    fg_frame = np.asarray(fg_frame, float)
    acc = np.zeros_like(fg_frame)
    for s in bg_samples:
        if np.shape(s) != fg_frame.shape:
            raise ValueError(f"background sample shape {np.shape(s)} != {fg_frame.shape}")
        acc = acc + apply_mask(s, masks.bg)
    return (cfg.w1 / cfg.n) * acc + cfg.w2 * apply_mask(fg_frame, masks.fg)


def resume_denoise(
    r_k,
    k: int,
    model: DenoiserModel,
    sched: NoiseSchedule,
    emb: ConditioningEmbedding,
    eta: float = 0.0,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    if not 0 <= k <= sched.T:
        raise ValueError(f"k must lie in [0, {sched.T}], got {k}")
    return reverse_process(r_k, k, 0, model, sched, emb, eta, rng)


@dataclass
class FusionResult:
    r_k: np.ndarray
    r0: np.ndarray
    masks: MaskPair
    bg_samples: list[np.ndarray]
    fused_k: np.ndarray
    r_prime: np.ndarray


def run_fusion(
    model: DenoiserModel,
    sched: NoiseSchedule,
    emb: ConditioningEmbedding,
    cfg: FusionConfig,
    principal_seed,
    bg_seeds: Sequence,
    segmenter: Callable[[np.ndarray], MaskPair] | None = None,
    masks: MaskPair | None = None,
    eta: float = 0.0,
    threads: int = 1,
) -> FusionResult:
    """Principal trajectory, segmentation of its clean result, fusion, resume.

    Masks come from ``masks`` if given, otherwise ``segmenter(r0)``. They are
    computed on the clean frame and reused at step ``k``.
    """
    cfg.validate(sched.T)
    if (segmenter is None) == (masks is None):
        raise ValueError("pass exactly one of segmenter or masks")

    rng = np.random.default_rng(principal_seed)
    x_T = rng.standard_normal(model.frame_shape)
    r_k = reverse_process(x_T, sched.T, cfg.k, model, sched, emb, eta, rng)
    r0 = reverse_process(r_k, cfg.k, 0, model, sched, emb, eta, rng)
    if masks is None:
        masks = segmenter(r0)
    if masks.shape != model.frame_shape[:2]:
        raise ValueError(f"mask shape {masks.shape} does not match frame {model.frame_shape[:2]}")

    def one(seed):
        return sample_to_step(model, sched, emb, seed, cfg.k, eta)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            bg = list(pool.map(one, bg_seeds))
    else:
        bg = [one(s) for s in bg_seeds]

    fused = average_fuse(bg, r_k, masks, cfg)
    resume_rng = np.random.default_rng([*np.atleast_1d(principal_seed), 1]) if eta > 0 else None
    r_prime = resume_denoise(fused, cfg.k, model, sched, emb, eta, resume_rng)
    return FusionResult(r_k, r0, masks, bg, fused, r_prime)
