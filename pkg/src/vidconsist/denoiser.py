"""Toy noise-prediction network with exact gradients.

The network is a two-hidden-layer tanh perceptron. Its input is the
concatenation ``[flatten(x_t), time_enc(t), h, c, pos_enc(j)]`` and its output
is reshaped back to the frame shape. ``pos_dim`` defaults to 0 (no frame
position input).

Loss for one sample with elementwise mask ``M`` is ``||M * (target - pred)||^2``
(sum over elements); a batch loss is the plain mean over samples.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

PARAM_NAMES = ("W1", "b1", "W2", "b2", "W3", "b3")

CHECKPOINT_MAGIC = b"VCDM"
CHECKPOINT_VERSION = 1
_HEADER = struct.Struct("<4sI8IQ")


@dataclass(frozen=True)
class ConditioningEmbedding:
    """Prompt surrogate ``h`` and condition surrogate ``c``."""

    h: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        for name in ("h", "c"):
            v = np.asarray(getattr(self, name), dtype=float).ravel()
            if not np.all(np.isfinite(v)):
                raise ValueError(f"conditioning vector {name} has nonfinite entries")
            object.__setattr__(self, name, v)


def sinusoidal_encoding(value: float, length: int) -> np.ndarray:
    """``[sin(pi 2^i v), cos(pi 2^i v)]`` for ``i < ceil(length/2)``, cut to ``length``."""
    if length == 0:
        return np.zeros(0)
    half = (length + 1) // 2
    angles = np.pi * 2.0 ** np.arange(half) * value
    return np.concatenate([np.sin(angles), np.cos(angles)])[:length]


def timestep_encoding(t: int, T: int, length: int) -> np.ndarray:
    return sinusoidal_encoding(t / T, length)


@dataclass
class DenoiserModel:
    frame_shape: tuple[int, int, int]
    hidden: int
    t_dim: int
    h_dim: int
    c_dim: int
    T: int
    pos_dim: int = 0
    params: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def in_dim(self) -> int:
        return int(np.prod(self.frame_shape)) + self.t_dim + self.h_dim + self.c_dim + self.pos_dim

    @property
    def out_dim(self) -> int:
        return int(np.prod(self.frame_shape))

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params.values())

    def copy(self) -> "DenoiserModel":
        return replace(self, params={k: v.copy() for k, v in self.params.items()})

    def flat_params(self) -> np.ndarray:
        return np.concatenate([self.params[k].ravel() for k in PARAM_NAMES])

    def features(self, xt, t: int, emb: ConditioningEmbedding, position: float = 0.0) -> np.ndarray:
        xt = np.asarray(xt, float)
        if xt.shape != self.frame_shape:
            raise ValueError(f"frame shape {xt.shape} does not match model {self.frame_shape}")
        if emb.h.size != self.h_dim or emb.c.size != self.c_dim:
            raise ValueError(
                f"embedding sizes ({emb.h.size}, {emb.c.size}) do not match model "
                f"({self.h_dim}, {self.c_dim})"
            )
        return np.concatenate(
            [
                xt.ravel(),
                timestep_encoding(t, self.T, self.t_dim),
                emb.h,
                emb.c,
                sinusoidal_encoding(position, self.pos_dim),
            ]
        )


def parameter_count(frame_shape, hidden: int, t_dim: int, h_dim: int, c_dim: int, pos_dim: int = 0) -> int:
    d = int(np.prod(frame_shape))
    d_in = d + t_dim + h_dim + c_dim + pos_dim
    return (d_in * hidden + hidden) + (hidden * hidden + hidden) + (hidden * d + d)


def init_model(
    frame_shape,
    hidden: int,
    embed_dims: tuple[int, int],
    seed: int,
    *,
    t_dim: int = 8,
    T: int = 1000,
    pos_dim: int = 0,
) -> DenoiserModel:
    """Seeded LeCun-normal weights (std ``1/sqrt(fan_in)``), zero biases."""
    frame_shape = tuple(int(s) for s in frame_shape)
    h_dim, c_dim = (int(d) for d in embed_dims)
    if len(frame_shape) != 3 or min(frame_shape) < 1 or hidden < 1:
        raise ValueError(f"bad model dimensions: frame {frame_shape}, hidden {hidden}")
    if min(h_dim, c_dim, t_dim, pos_dim) < 0 or T < 1:
        raise ValueError("embedding/encoding dimensions must be nonnegative and T >= 1")

    model = DenoiserModel(frame_shape, int(hidden), int(t_dim), h_dim, c_dim, int(T), int(pos_dim))
    rng = np.random.default_rng(seed)
    sizes = [(model.in_dim, hidden), (hidden, hidden), (hidden, model.out_dim)]
    for i, (fan_in, fan_out) in enumerate(sizes, start=1):
        model.params[f"W{i}"] = rng.standard_normal((fan_out, fan_in)) / np.sqrt(fan_in)
        model.params[f"b{i}"] = np.zeros(fan_out)
    return model


def _forward(model: DenoiserModel, u: np.ndarray):
    p = model.params
    a1 = np.tanh(p["W1"] @ u + p["b1"])
    a2 = np.tanh(p["W2"] @ a1 + p["b2"])
    y = p["W3"] @ a2 + p["b3"]
    return a1, a2, y


def predict_noise(model: DenoiserModel, xt, t: int, emb: ConditioningEmbedding, position: float = 0.0) -> np.ndarray:
    u = model.features(xt, t, emb, position)
    return _forward(model, u)[2].reshape(model.frame_shape)


class Sample(NamedTuple):
    """One training example; ``mask`` is H x W (broadcast over channels) or full-shape."""

    xt: np.ndarray
    t: int
    emb: ConditioningEmbedding
    target: np.ndarray
    mask: np.ndarray | None = None
    position: float = 0.0


def _expand_mask(mask, frame_shape) -> np.ndarray:
    if mask is None:
        return np.ones(frame_shape)
    m = np.asarray(mask, float)
    if m.shape == frame_shape[:2]:
        m = m[..., None]
    try:
        return np.broadcast_to(m, frame_shape)
    except ValueError:
        raise ValueError(f"mask shape {np.shape(mask)} incompatible with frame {frame_shape}") from None


def weighted_sample_grads(model: DenoiserModel, sample: Sample, sq_weight: np.ndarray):
    """Loss ``sum(sq_weight * r^2)`` with ``r = target - pred``, and its gradients.

    ``sq_weight`` is the elementwise square of a Hadamard mask, or any
    nonnegative combination of such squares.
    """
    u = model.features(sample.xt, sample.t, sample.emb, sample.position)
    target = np.asarray(sample.target, float)
    if target.shape != model.frame_shape:
        raise ValueError(f"target shape {target.shape} does not match model {model.frame_shape}")
    a1, a2, y = _forward(model, u)
    w = np.asarray(sq_weight, float).ravel()
    r = target.ravel() - y
    loss = float(np.sum(w * r * r))

    p = model.params
    dy = -2.0 * w * r
    grads = {"W3": np.outer(dy, a2), "b3": dy}
    dz2 = (p["W3"].T @ dy) * (1.0 - a2**2)
    grads["W2"] = np.outer(dz2, a1)
    grads["b2"] = dz2
    dz1 = (p["W2"].T @ dz2) * (1.0 - a1**2)
    grads["W1"] = np.outer(dz1, u)
    grads["b1"] = dz1
    return loss, grads


def loss_gradients(model: DenoiserModel, batch: Iterable[Sample]):
    """Mean masked squared-error loss over ``batch`` and its exact gradients."""
    batch = list(batch)
    if not batch:
        raise ValueError("loss_gradients: empty batch")
    total = 0.0
    grads = {k: np.zeros_like(v) for k, v in model.params.items()}
    for s in batch:
        m = _expand_mask(s.mask, model.frame_shape)
        loss, g = weighted_sample_grads(model, s, m * m)
        total += loss
        for k in grads:
            grads[k] += g[k]
    n = len(batch)
    return {k: v / n for k, v in grads.items()}, total / n


def apply_update(model: DenoiserModel, gradients: dict[str, np.ndarray], learning_rate: float) -> DenoiserModel:
    """Plain gradient descent; returns a new model and leaves ``model`` untouched."""
    if set(gradients) != set(model.params):
        raise ValueError(f"gradient keys {sorted(gradients)} do not match parameters")
    for k, g in gradients.items():
        if g.shape != model.params[k].shape:
            raise ValueError(f"gradient {k} shape {g.shape} != {model.params[k].shape}")
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"nonfinite gradient in {k}")
    new = model.copy()
    for k, g in gradients.items():
        new.params[k] -= learning_rate * g
    return new


# Checkpoint layout (all little-endian):
#   magic "VCDM" | u32 version | u32 x8: H W C hidden t_dim h_dim c_dim pos_dim
#   | u64 T | float64 params: W1 b1 W2 b2 W3 b3, each row-major


def save_checkpoint(model: DenoiserModel, path) -> None:
    H, W, C = model.frame_shape
    header = _HEADER.pack(
        CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
        H, W, C, model.hidden, model.t_dim, model.h_dim, model.c_dim, model.pos_dim,
        model.T,
    )
    Path(path).write_bytes(header + model.flat_params().astype("<f8").tobytes())


def load_checkpoint(path) -> DenoiserModel:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated checkpoint header")
    magic, version, H, W, C, hidden, t_dim, h_dim, c_dim, pos_dim, T = _HEADER.unpack_from(data)
    if magic != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: bad checkpoint magic {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    model = DenoiserModel((H, W, C), hidden, t_dim, h_dim, c_dim, T, pos_dim)
    flat = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    expected = parameter_count((H, W, C), hidden, t_dim, h_dim, c_dim, pos_dim)
    if flat.size != expected or (len(data) - _HEADER.size) % 8:
        raise ValueError(f"{path}: expected {expected} parameters, found {flat.size}")
    shapes = {
        "W1": (hidden, model.in_dim), "b1": (hidden,),
        "W2": (hidden, hidden), "b2": (hidden,),
        "W3": (model.out_dim, hidden), "b3": (model.out_dim,),
    }
    offset = 0
    for k in PARAM_NAMES:
        n = int(np.prod(shapes[k]))
        model.params[k] = flat[offset:offset + n].astype(float).reshape(shapes[k])
        offset += n
    return model
