"""Foreground/background masks and the Hadamard masking primitive.

Mask file layout (little-endian)::

    magic  b"VMSK"
    u32    width
    u32    height
    u8     planes   1 = fg only, 2 = fg then bg
    planes * height * width bytes, row-major, each 0 or 1

``threshold_segmenter`` stands in for a learned segmenter; anything with the
signature ``frame -> MaskPair`` can be plugged into the pipeline.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MASK_MAGIC = b"VMSK"
_MASK_HEADER = struct.Struct("<4sIIB")


@dataclass(frozen=True)
class MaskPair:
    fg: np.ndarray
    bg: np.ndarray

    def __post_init__(self):
        fg = np.asarray(self.fg)
        bg = np.asarray(self.bg)
        if fg.ndim != 2 or fg.shape != bg.shape:
            raise ValueError(f"mask planes must be matching 2-D grids, got {fg.shape} and {bg.shape}")
        for name, m in (("fg", fg), ("bg", bg)):
            if not np.all((m == 0) | (m == 1)):
                raise ValueError(f"{name} mask is not binary")
        fg, bg = fg.astype(bool), bg.astype(bool)
        if np.any(fg == bg):
            raise ValueError("fg and bg masks do not partition the frame")
        object.__setattr__(self, "fg", fg)
        object.__setattr__(self, "bg", bg)

    @classmethod
    def from_fg(cls, fg) -> "MaskPair":
        fg = np.asarray(fg).astype(bool)
        return cls(fg, ~fg)

    @property
    def shape(self) -> tuple[int, int]:
        return self.fg.shape


def segment_threshold(frame, threshold: float = 0.0) -> MaskPair:
    """Foreground is every pixel whose channel-mean exceeds ``threshold``."""
    frame = np.asarray(frame, float)
    if frame.ndim == 2:
        frame = frame[..., None]
    if not np.all(np.isfinite(frame)):
        raise ValueError("segment_threshold: frame has nonfinite values")
    return MaskPair.from_fg(frame.mean(axis=-1) > threshold)


def threshold_segmenter(threshold: float = 0.0):
    return lambda frame: segment_threshold(frame, threshold)


def apply_mask(frame, mask) -> np.ndarray:
    """Elementwise product of ``frame`` (H, W[, C]) with an H x W mask."""
    frame = np.asarray(frame, float)
    mask = np.asarray(mask)
    if frame.shape[:2] != mask.shape:
        raise ValueError(f"apply_mask: mask {mask.shape} vs frame {frame.shape}")
    if frame.ndim == 3:
        mask = mask[..., None]
    return frame * mask


def save_mask(masks: MaskPair, path, *, fg_only: bool = False) -> None:
    h, w = masks.shape
    planes = [masks.fg] if fg_only else [masks.fg, masks.bg]
    body = b"".join(p.astype(np.uint8).tobytes(order="C") for p in planes)
    Path(path).write_bytes(_MASK_HEADER.pack(MASK_MAGIC, w, h, len(planes)) + body)


def load_mask(path, expected_shape: tuple[int, int] | None = None) -> MaskPair:
    data = Path(path).read_bytes()
    if len(data) < _MASK_HEADER.size:
        raise ValueError(f"{path}: truncated mask header")
    magic, w, h, planes = _MASK_HEADER.unpack_from(data)
    if magic != MASK_MAGIC:
        raise ValueError(f"{path}: bad mask magic {magic!r}")
    if planes not in (1, 2):
        raise ValueError(f"{path}: plane count must be 1 or 2, got {planes}")
    body = np.frombuffer(data, dtype=np.uint8, offset=_MASK_HEADER.size)
    if body.size != planes * h * w:
        raise ValueError(f"{path}: expected {planes * h * w} mask bytes, found {body.size}")
    if expected_shape is not None and (h, w) != tuple(expected_shape):
        raise ValueError(f"{path}: mask is {h}x{w}, expected {expected_shape[0]}x{expected_shape[1]}")
    grids = body.reshape(planes, h, w)
    if np.any(grids > 1):
        raise ValueError(f"{path}: mask bytes must be 0 or 1")
    if planes == 1:
        return MaskPair.from_fg(grids[0])
    return MaskPair(grids[0], grids[1])
