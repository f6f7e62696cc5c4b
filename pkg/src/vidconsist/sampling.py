"""Reverse-process loops shared by fusion and video generation."""

from __future__ import annotations

import numpy as np

from .denoiser import ConditioningEmbedding, DenoiserModel, predict_noise
from .schedule import NoiseSchedule, ddim_sigma, ddim_step


def reverse_process(
    x,
    t_start: int,
    t_stop: int,
    model: DenoiserModel,
    sched: NoiseSchedule,
    emb: ConditioningEmbedding,
    eta: float = 0.0,
    rng: np.random.Generator | None = None,
    position: float = 0.0,
) -> np.ndarray:
    """DDIM steps ``t_start -> t_stop`` (``t_start >= t_stop >= 0``).

    Extra noise is drawn from ``rng`` only when ``eta > 0``.
    """
    if not 0 <= t_stop <= t_start <= sched.T:
        raise ValueError(f"need 0 <= t_stop <= t_start <= T, got {t_stop}, {t_start}")
    if eta > 0 and rng is None:
        raise ValueError("stochastic reverse process (eta > 0) needs an rng")
    x = np.asarray(x, float)
    for t in range(t_start, t_stop, -1):
        eps = predict_noise(model, x, t, emb, position)
        sigma = ddim_sigma(sched, t, eta)
        extra = rng.standard_normal(x.shape) if sigma > 0 else None
        x = ddim_step(x, t, eps, sigma, extra, sched)
    return x

