"""Frame and video containers on disk.

Frame file (``.vcf``), little-endian::

    magic   b"VCFR"
    u32     version (1)
    u32     height, width, channels
    float64 values, row-major (H, W, C)

A 1x1x1 frame holding 0.5 is therefore the 28 bytes
``56 43 46 52 01000000 01000000 01000000 01000000 000000000000e03f``.

``write_frame`` also drops an 8-bit binary PGM preview (channel mean,
``[-1, 1]`` mapped to ``[0, 255]``, clipped) next to the frame.

A video directory holds ``frame_0000.vcf`` ... plus ``manifest.json`` with
``F, H, W, C`` and the clip plan (``stride``, ``length``, ``count``).
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

FRAME_MAGIC = b"VCFR"
FRAME_VERSION = 1
_FRAME_HEADER = struct.Struct("<4sIIII")
MANIFEST = "manifest.json"


def frame_bytes(frame) -> bytes:
    frame = np.asarray(frame, float)
    if frame.ndim != 3:
        raise ValueError(f"frames must be (H, W, C), got shape {frame.shape}")
    h, w, c = frame.shape
    return _FRAME_HEADER.pack(FRAME_MAGIC, FRAME_VERSION, h, w, c) + frame.astype("<f8").tobytes(order="C")


def parse_frame(data: bytes, source="<bytes>") -> np.ndarray:
    if len(data) < _FRAME_HEADER.size:
        raise ValueError(f"{source}: truncated frame header")
    magic, version, h, w, c = _FRAME_HEADER.unpack_from(data)
    if magic != FRAME_MAGIC:
        raise ValueError(f"{source}: bad frame magic {magic!r}")
    if version != FRAME_VERSION:
        raise ValueError(f"{source}: unsupported frame version {version}")
    n = h * w * c
    if len(data) - _FRAME_HEADER.size != 8 * n:
        raise ValueError(f"{source}: expected {8 * n} payload bytes, found {len(data) - _FRAME_HEADER.size}")
    return np.frombuffer(data, dtype="<f8", offset=_FRAME_HEADER.size).astype(float).reshape(h, w, c)


def preview_pgm(frame) -> bytes:
    gray = np.asarray(frame, float).mean(axis=-1)
    px = np.round((np.clip(gray, -1.0, 1.0) + 1.0) * 127.5).astype(np.uint8)
    h, w = px.shape
    return f"P5\n{w} {h}\n255\n".encode() + px.tobytes()


def write_frame(frame, path, preview: bool = True) -> None:
    path = Path(path)
    path.write_bytes(frame_bytes(frame))
    if preview:
        path.with_suffix(".pgm").write_bytes(preview_pgm(frame))


def read_frame(path) -> np.ndarray:
    return parse_frame(Path(path).read_bytes(), path)


def frame_name(j: int) -> str:
    return f"frame_{j:04d}.vcf"


def write_video(video, directory, plan=None, preview: bool = True) -> None:
    video = np.asarray(video, float)
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    F, H, W, C = video.shape
    for j, frame in enumerate(video):
        write_frame(frame, d / frame_name(j), preview)
    manifest = {"F": F, "H": H, "W": W, "C": C}
    if plan is not None:
        manifest.update(stride=plan.stride, length=plan.length, count=plan.count)
    (d / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def read_video(directory) -> tuple[np.ndarray, dict]:
    d = Path(directory)
    try:
        manifest = json.loads((d / MANIFEST).read_text())
    except FileNotFoundError:
        raise ValueError(f"{d}: no {MANIFEST}") from None
    frames = [read_frame(d / frame_name(j)) for j in range(manifest["F"])]
    shape = (manifest["H"], manifest["W"], manifest["C"])
    for j, f in enumerate(frames):
        if f.shape != shape:
            raise ValueError(f"{d / frame_name(j)}: shape {f.shape} disagrees with manifest {shape}")
    return np.stack(frames), manifest
