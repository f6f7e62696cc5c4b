"""Overlapping-clip co-denoising of a long video.

A video is a float64 array of shape ``(F, H, W, C)``. Clip ``i`` covers frames
``S*i .. S*i+K-1``; plans must tile the video exactly (``S*(N-1) + K == F``).

After every reverse step the clips are merged back by minimizing::

    sum_i || W_i * (P_i(v) - clip_i) ||^2

whose per-pixel solution is ``sum_i W_i^2 clip_i / sum_i W_i^2``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .denoiser import ConditioningEmbedding, DenoiserModel, predict_noise
from .schedule import NoiseSchedule, ddim_sigma, ddim_step


@dataclass(frozen=True)
class ClipPlan:
    stride: int
    length: int
    count: int
    weights: np.ndarray | None = None  # (N, K, H, W); None means all ones

    def __post_init__(self):
        if min(self.stride, self.length, self.count) < 1:
            raise ValueError(f"stride, length and count must be >= 1: {self.stride}, {self.length}, {self.count}")
        if self.count > 1 and self.stride > self.length:
            raise ValueError(f"stride {self.stride} > clip length {self.length} leaves uncovered frames")
        if self.weights is not None:
            w = np.asarray(self.weights, float)
            if w.ndim != 4 or w.shape[:2] != (self.count, self.length):
                raise ValueError(f"weights must have shape (N, K, H, W), got {w.shape}")
            if not np.all(np.isfinite(w)) or np.any(w < 0):
                raise ValueError("clip weights must be finite and nonnegative")
            object.__setattr__(self, "weights", w)

    @classmethod
    def for_video(cls, n_frames: int, length: int, stride: int, weights=None) -> "ClipPlan":
        if length > n_frames or (n_frames - length) % stride:
            raise ValueError(
                f"clips of length {length} with stride {stride} do not tile {n_frames} frames exactly"
            )
        return cls(stride, length, (n_frames - length) // stride + 1, weights)

    @property
    def n_frames(self) -> int:
        return self.stride * (self.count - 1) + self.length

    def start(self, i: int) -> int:
        return self.stride * i

    def covering(self, j: int) -> list[int]:
        return [i for i in range(self.count) if self.start(i) <= j < self.start(i) + self.length]

    def clip_weights(self, i: int, spatial: tuple[int, int]) -> np.ndarray:
        if self.weights is None:
            return np.ones((self.length, *spatial))
        if self.weights.shape[2:] != tuple(spatial):
            raise ValueError(f"weight grid {self.weights.shape[2:]} vs frame {spatial}")
        return self.weights[i]

    def check_video(self, video: np.ndarray) -> None:
        if len(video) != self.n_frames:
            raise ValueError(f"plan expects {self.n_frames} frames, video has {len(video)}")


def scalar_weights(plan_shape: tuple[int, int], values: Sequence[float], spatial) -> np.ndarray:
    """One constant weight per clip."""
    n, k = plan_shape
    if len(values) != n:
        raise ValueError(f"need {n} clip weights, got {len(values)}")
    return np.asarray(values, float)[:, None, None, None] * np.ones((n, k, *spatial))


def ramp_weights(count: int, length: int, spatial) -> np.ndarray:
    """Triangular weights peaking mid-clip, strictly positive at the ends."""
    pos = np.arange(length)
    ramp = np.minimum(pos + 1, length - pos).astype(float)
    return np.broadcast_to(ramp[None, :, None, None], (count, length, *spatial)).copy()


def project_clip(video, plan: ClipPlan, i: int) -> np.ndarray:
    video = np.asarray(video, float)
    plan.check_video(video)
    if not 0 <= i < plan.count:
        raise IndexError(f"clip index {i} outside [0, {plan.count})")
    s = plan.start(i)
    return video[s:s + plan.length].copy()


def _denoise_one(clip, model, sched, emb, t, sigma, noise):
    out = np.empty_like(clip)
    K = len(clip)
    for j, frame in enumerate(clip):
        eps = predict_noise(model, frame, t, emb, position=j / K)
        out[j] = ddim_step(frame, t, eps, sigma, None if noise is None else noise[j], sched)
    return out


def denoise_clips(
    clips: Sequence[np.ndarray],
    model: DenoiserModel,
    sched: NoiseSchedule,
    embeddings: Sequence[ConditioningEmbedding],
    t: int,
    eta: float = 0.0,
    rng: np.random.Generator | None = None,
    threads: int = 1,
) -> list[np.ndarray]:
    """Advance every clip one DDIM step, frame by frame, under its own embedding."""
    if len(clips) != len(embeddings):
        raise ValueError(f"{len(clips)} clips but {len(embeddings)} embeddings")
    clips = [np.asarray(c, float) for c in clips]
    if clips and any(c.shape != clips[0].shape for c in clips):
        raise ValueError("all clips must share one shape")
    sigma = ddim_sigma(sched, t, eta)
    if sigma > 0:
        if rng is None:
            raise ValueError("eta > 0 needs an rng")
        noises = [rng.standard_normal(c.shape) for c in clips]
    else:
        noises = [None] * len(clips)
    jobs = list(zip(clips, embeddings, noises))

    def run(job):
        clip, emb, noise = job
        return _denoise_one(clip, model, sched, emb, t, sigma, noise)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(run, jobs))
    return [run(j) for j in jobs]


def merge_clips(clips: Sequence[np.ndarray], plan: ClipPlan) -> np.ndarray:
    """Weighted least-squares reassembly of overlapping clips into one video."""
    if len(clips) != plan.count:
        raise ValueError(f"plan has {plan.count} clips, got {len(clips)}")
    clips = [np.asarray(c, float) for c in clips]
    shape = clips[0].shape
    if shape[0] != plan.length or any(c.shape != shape for c in clips):
        raise ValueError(f"clips must all have shape ({plan.length}, H, W, C)")
    frame_shape = shape[1:]
    num = np.zeros((plan.n_frames, *frame_shape))
    den = np.zeros(num.shape)
    cover = np.zeros(plan.n_frames, dtype=int)
    for i, clip in enumerate(clips):
        w2 = plan.clip_weights(i, frame_shape[:2]) ** 2
        w2 = np.broadcast_to(w2.reshape(w2.shape + (1,) * (len(frame_shape) - 2)), shape)
        s = plan.start(i)
        num[s:s + plan.length] += w2 * clip
        den[s:s + plan.length] += w2
        cover[s:s + plan.length] += 1
    if np.any(den == 0):
        j = int(np.argwhere(den == 0)[0][0])
        raise ValueError(f"zero total clip weight at a pixel of frame {j}")
    video = num / den
    for j in np.flatnonzero(cover == 1):
        (i,) = plan.covering(j)
        video[j] = clips[i][j - plan.start(i)]
    return video


def stitch_clips(clips: Sequence[np.ndarray], plan: ClipPlan) -> np.ndarray:
    """Reassemble without merging: each frame comes from its first covering clip."""
    if len(clips) != plan.count:
        raise ValueError(f"plan has {plan.count} clips, got {len(clips)}")
    out = np.empty((plan.n_frames, *np.shape(clips[0])[1:]))
    for j in range(plan.n_frames):
        i = plan.covering(j)[0]
        out[j] = clips[i][j - plan.start(i)]
    return out


def generate_long_video(
    model: DenoiserModel,
    sched: NoiseSchedule,
    plan: ClipPlan,
    embeddings: Sequence[ConditioningEmbedding],
    n_frames: int,
    seed,
    eta: float = 0.0,
    threads: int = 1,
    combine: Callable[[Sequence[np.ndarray], ClipPlan], np.ndarray] = merge_clips,
) -> np.ndarray:
    """Denoise a seeded Gaussian long video from ``t = T`` to 0.

    Each step projects the clips, advances them independently and recombines
    them with ``combine`` (``merge_clips`` by default; ``stitch_clips`` gives
    the unmerged baseline from the same starting noise).
    """
    if n_frames != plan.n_frames:
        raise ValueError(f"plan covers {plan.n_frames} frames, asked for {n_frames}")
    if len(embeddings) != plan.count:
        raise ValueError(f"need {plan.count} clip embeddings, got {len(embeddings)}")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((n_frames, *model.frame_shape))
    for t in range(sched.T, 0, -1):
        clips = [project_clip(v, plan, i) for i in range(plan.count)]
        clips = denoise_clips(clips, model, sched, embeddings, t, eta, rng, threads)
        v = combine(clips, plan)
    return v
