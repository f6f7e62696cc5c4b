"""Masked diffusion losses and the fine-tuning loop.

All three losses are evaluated on the same noised sample::

    x_t   = sqrt(ab_t) x0 + sqrt(1 - ab_t) eps
    L1    = ||eps - eps_theta(x_t)||^2
    L_fg  = ||M_fg * (eps - eps_theta(x_t))||^2
    L_bg  = ||M_bg * (eps - eps_theta(x_t))||^2
    total = lam1 L1 + lam2 L_fg + lam3 L_bg

Because the masks are binary, ``total`` is a single squared error weighted
elementwise by ``lam1 + lam2 M_fg + lam3 M_bg``; gradients use that form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .denoiser import (
    ConditioningEmbedding,
    DenoiserModel,
    Sample,
    apply_update,
    predict_noise,
    weighted_sample_grads,
)
from .schedule import NoiseSchedule, forward_jump
from .segmentation import MaskPair, apply_mask


@dataclass(frozen=True)
class LossWeights:
    lambda1: float = 1.0
    lambda2: float = 1.0
    lambda3: float = 1.0

    def __post_init__(self):
        lams = (self.lambda1, self.lambda2, self.lambda3)
        if not all(math.isfinite(v) and v >= 0 for v in lams):
            raise ValueError(f"loss weights must be finite and nonnegative, got {lams}")
        if not any(lams):
            raise ValueError("loss weights must not all be zero")

    def scaled(self, c: float) -> "LossWeights":
        return LossWeights(c * self.lambda1, c * self.lambda2, c * self.lambda3)


@dataclass(frozen=True)
class TuneConfig:
    steps: int = 250
    learning_rate: float = 2e-6
    batch_size: int = 1

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError(f"tune.steps must be >= 0, got {self.steps}")
        if not self.learning_rate > 0:
            raise ValueError(f"tune.learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"tune.batch_size must be >= 1, got {self.batch_size}")


def _residual(model, x0, t, emb, noise, sched):
    xt = forward_jump(x0, t, noise, sched)
    return np.asarray(noise, float) - predict_noise(model, xt, t, emb)


def loss_l1(model, x0, t, emb, noise, sched: NoiseSchedule) -> float:
    r = _residual(model, x0, t, emb, noise, sched)
    return float(np.sum(r * r))


def loss_masked(model, x0, t, emb, noise, mask, sched: NoiseSchedule) -> float:
    r = apply_mask(_residual(model, x0, t, emb, noise, sched), mask)
    return float(np.sum(r * r))


class LossTerms(NamedTuple):
    l1: float
    fg: float
    bg: float
    total: float


def loss_terms(model, x0, t, emb, noise, masks: MaskPair, weights: LossWeights, sched) -> LossTerms:
    """All three losses from a single forward pass."""
    r = _residual(model, x0, t, emb, noise, sched)
    sq = r * r
    l1 = float(np.sum(sq))
    lfg = float(np.sum(apply_mask(sq, masks.fg)))
    lbg = float(np.sum(apply_mask(sq, masks.bg)))
    total = weights.lambda1 * l1 + weights.lambda2 * lfg + weights.lambda3 * lbg
    return LossTerms(l1, lfg, lbg, total)


def loss_total(model, x0, t, emb, noise, masks: MaskPair, weights: LossWeights, sched) -> float:
    return loss_terms(model, x0, t, emb, noise, masks, weights, sched).total


def total_weight_map(masks: MaskPair, weights: LossWeights, frame_shape) -> np.ndarray:
    w = weights.lambda1 + weights.lambda2 * masks.fg + weights.lambda3 * masks.bg
    return np.broadcast_to(w[..., None], frame_shape)


def loss_total_gradients(model, batch, masks: MaskPair, weights: LossWeights, sched):
    """Gradient of the batch-mean total loss.

    ``batch`` holds ``(x0, t, emb, noise)`` tuples.
    """
    batch = list(batch)
    if not batch:
        raise ValueError("empty batch")
    wmap = total_weight_map(masks, weights, model.frame_shape)
    grads = {k: np.zeros_like(v) for k, v in model.params.items()}
    total = 0.0
    for x0, t, emb, noise in batch:
        xt = forward_jump(x0, t, noise, sched)
        loss, g = weighted_sample_grads(model, Sample(xt, t, emb, noise), wmap)
        total += loss
        for k in grads:
            grads[k] += g[k]
    n = len(batch)
    return {k: v / n for k, v in grads.items()}, total / n


class LogRecord(NamedTuple):
    step: int
    l1: float
    fg: float
    bg: float
    total: float


def fine_tune(
    model: DenoiserModel,
    targets,
    emb: ConditioningEmbedding,
    masks: MaskPair,
    sched: NoiseSchedule,
    weights: LossWeights,
    cfg: TuneConfig,
    seed,
    log: list | None = None,
) -> DenoiserModel:
    """Gradient-descent fine-tuning on one or more clean target frames.

    Each sample draws a target uniformly, ``t`` uniformly in ``[1, T]`` and a
    fresh Gaussian noise from a generator seeded by ``seed`` only. Per-step
    batch-mean losses (before the update) are appended to ``log`` as
    :class:`LogRecord`.
    """
    targets = np.asarray(targets, float)
    if targets.shape == model.frame_shape:
        targets = targets[None]
    if targets.shape[1:] != model.frame_shape:
        raise ValueError(f"target shape {targets.shape[1:]} does not match model {model.frame_shape}")
    if not np.all(np.isfinite(targets)):
        raise ValueError("fine_tune: targets contain nonfinite values")

    rng = np.random.default_rng(seed)
    model = model.copy()
    for step in range(cfg.steps):
        batch = []
        for _ in range(cfg.batch_size):
            x0 = targets[rng.integers(len(targets))]
            t = int(rng.integers(1, sched.T + 1))
            noise = rng.standard_normal(model.frame_shape)
            batch.append((x0, t, emb, noise))
        grads, batch_loss = loss_total_gradients(model, batch, masks, weights, sched)
        if not math.isfinite(batch_loss):
            raise FloatingPointError(f"fine_tune aborted at step {step}: loss is {batch_loss}")
        if log is not None:
            terms = np.mean(
                [loss_terms(model, x0, t, e, nz, masks, weights, sched) for x0, t, e, nz in batch],
                axis=0,
            )
            log.append(LogRecord(step, *map(float, terms)))
        try:
            model = apply_update(model, grads, cfg.learning_rate)
        except FloatingPointError as exc:
            raise FloatingPointError(f"fine_tune aborted at step {step}: {exc}") from exc
    return model


LOG_HEADER = "step\tL1\tL_fg\tL_bg\tL_total"


def write_training_log(records: Sequence[LogRecord], path) -> None:
    """Tab-separated text, one header line then one line per step."""
    lines = [LOG_HEADER]
    lines += [f"{r.step}\t{r.l1:.17g}\t{r.fg:.17g}\t{r.bg:.17g}\t{r.total:.17g}" for r in records]
    Path(path).write_text("\n".join(lines) + "\n")


def read_training_log(path) -> list[LogRecord]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != LOG_HEADER:
        raise ValueError(f"{path}: missing training log header")
    out = []
    for line in lines[1:]:
        step, *vals = line.split("\t")
        out.append(LogRecord(int(step), *map(float, vals)))
    return out
