"""Discrete diffusion schedule and the closed-form DDPM/DDIM updates.

Steps are 1-based: ``t = 1..T``. Every table on :class:`NoiseSchedule` has
length ``T + 1`` with slot 0 holding the clean-data convention
(``alpha_bar[0] = 1``, ``beta[0] = 0``), so ``table[t]`` reads naturally.

Latents are plain float64 ``numpy`` arrays of any shape; all functions here
are pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step variance tables for ``T`` diffusion steps."""

    T: int
    betas: np.ndarray
    alphas: np.ndarray
    alpha_bars: np.ndarray
    beta_tildes: np.ndarray

    def check_t(self, t: int, lo: int = 1) -> int:
        t = int(t)
        if not lo <= t <= self.T:
            raise ValueError(f"time index {t} outside [{lo}, {self.T}]")
        return t


def build_schedule(T: int, beta_start: float, beta_end: float) -> NoiseSchedule:
    """Scaled-linear schedule: linear in sqrt(beta), then squared.

    The endpoints are stored verbatim so ``betas[1] == beta_start`` and
    ``betas[T] == beta_end`` hold exactly. ``T == 1`` yields ``[beta_start]``.
    """
    if int(T) != T or T < 1:
        raise ValueError(f"T must be a positive integer, got {T!r}")
    T = int(T)
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ValueError(
            f"need 0 < beta_start <= beta_end < 1, got {beta_start!r}, {beta_end!r}"
        )

    betas = np.zeros(T + 1)
    if T == 1:
        betas[1] = beta_start
    else:
        frac = np.arange(T) / (T - 1)
        root = np.sqrt(beta_start) + frac * (np.sqrt(beta_end) - np.sqrt(beta_start))
        betas[1:] = root**2
        betas[1] = beta_start
        betas[T] = beta_end

    alphas = 1.0 - betas
    alpha_bars = np.ones(T + 1)
    for t in range(1, T + 1):
        alpha_bars[t] = alpha_bars[t - 1] * alphas[t]
    beta_tildes = np.zeros(T + 1)
    beta_tildes[1:] = (1.0 - alpha_bars[:-1]) / (1.0 - alpha_bars[1:]) * betas[1:]

    for arr in (betas, alphas, alpha_bars, beta_tildes):
        arr.setflags(write=False)
    return NoiseSchedule(T, betas, alphas, alpha_bars, beta_tildes)


def _same_shape(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if np.shape(a) != np.shape(b):
        raise ValueError(f"{what}: shape mismatch {np.shape(a)} vs {np.shape(b)}")


def forward_step(x_prev, t: int, noise, sched: NoiseSchedule) -> np.ndarray:
    """One forward transition ``x_t = sqrt(alpha_t) x_{t-1} + sqrt(beta_t) eps``."""
    _same_shape(x_prev, noise, "forward_step")
    t = sched.check_t(t)
    return np.sqrt(sched.alphas[t]) * np.asarray(x_prev, float) + np.sqrt(
        sched.betas[t]
    ) * np.asarray(noise, float)


def forward_jump(x0, t: int, noise, sched: NoiseSchedule) -> np.ndarray:
    """Sample ``q(x_t | x_0)`` directly; ``t = 0`` returns ``x0``."""
    _same_shape(x0, noise, "forward_jump")
    t = sched.check_t(t, lo=0)
    ab = sched.alpha_bars[t]
    return np.sqrt(ab) * np.asarray(x0, float) + np.sqrt(1.0 - ab) * np.asarray(
        noise, float
    )


def posterior_mean(x0, xt, t: int, sched: NoiseSchedule) -> np.ndarray:
    """Mean of ``q(x_{t-1} | x_t, x_0)``; its variance is ``sched.beta_tildes[t]``."""
    _same_shape(x0, xt, "posterior_mean")
    t = sched.check_t(t)
    if t == 1:
        # 1 - alpha_bar[1] == beta[1] analytically; avoid the rounding in that ratio
        return np.array(x0, dtype=float)
    ab, ab_prev = sched.alpha_bars[t], sched.alpha_bars[t - 1]
    c0 = np.sqrt(ab_prev) * sched.betas[t] / (1.0 - ab)
    ct = np.sqrt(sched.alphas[t]) * (1.0 - ab_prev) / (1.0 - ab)
    return c0 * np.asarray(x0, float) + ct * np.asarray(xt, float)


def predict_x0(xt, eps_pred, t: int, sched: NoiseSchedule) -> np.ndarray:
    """Invert the forward jump given a noise estimate (cumulative alpha)."""
    _same_shape(xt, eps_pred, "predict_x0")
    t = sched.check_t(t)
    ab = sched.alpha_bars[t]
    return (np.asarray(xt, float) - np.sqrt(1.0 - ab) * np.asarray(eps_pred, float)) / np.sqrt(ab)


def ddim_sigma(sched: NoiseSchedule, t: int, eta: float) -> float:
    """Standard DDIM noise level; ``eta=0`` is deterministic, ``eta=1`` DDPM-like."""
    t = sched.check_t(t)
    if eta == 0:
        return 0.0
    ab, ab_prev = sched.alpha_bars[t], sched.alpha_bars[t - 1]
    return float(eta * np.sqrt((1.0 - ab_prev) / (1.0 - ab) * (1.0 - ab / ab_prev)))


def ddim_step(
    xt,
    t: int,
    eps_pred,
    sigma_t: float,
    extra_noise,
    sched: NoiseSchedule,
) -> np.ndarray:
    """One DDIM reverse step from ``t`` to ``t - 1``.

    ``extra_noise`` is ignored (and may be ``None``) when ``sigma_t == 0``.
    """
    _same_shape(xt, eps_pred, "ddim_step")
    t = sched.check_t(t)
    ab_prev = sched.alpha_bars[t - 1]
    var_budget = 1.0 - ab_prev
    if sigma_t < 0 or sigma_t**2 > var_budget * (1.0 + 1e-12):
        raise ValueError(
            f"sigma_t={sigma_t!r} violates 0 <= sigma^2 <= 1 - alpha_bar[t-1] = {var_budget!r}"
        )
    eps_pred = np.asarray(eps_pred, float)
    x0_hat = predict_x0(xt, eps_pred, t, sched)
    direction = np.sqrt(max(var_budget - sigma_t**2, 0.0))
    out = np.sqrt(ab_prev) * x0_hat + direction * eps_pred
    if sigma_t > 0:
        if extra_noise is None:
            raise ValueError("ddim_step: sigma_t > 0 requires extra_noise")
        _same_shape(xt, extra_noise, "ddim_step")
        out = out + sigma_t * np.asarray(extra_noise, float)
    return out
