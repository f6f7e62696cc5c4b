"""Adjacent-frame difference metrics for generated videos."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .segmentation import MaskPair, apply_mask


@dataclass
class ConsistencyReport:
    pair_diffs: list[float]
    mean: float
    max: float
    fg_pair_diffs: list[float] | None = None
    bg_pair_diffs: list[float] | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")


def _region_means(diffs: np.ndarray, mask: np.ndarray) -> list[float]:
    count = mask.sum() * diffs.shape[-1]
    if count == 0:
        return [0.0] * len(diffs)
    return [float(apply_mask(d, mask).sum() / count) for d in diffs]


def compute_consistency(video, masks: MaskPair | None = None) -> ConsistencyReport:
    """Mean absolute difference of each adjacent frame pair.

    Region breakdowns average only over the pixels inside each mask (an empty
    region reports zeros).
    """
    video = np.asarray(video, float)
    if video.ndim != 4 or len(video) < 2:
        raise ValueError("compute_consistency needs a (F, H, W, C) video with F >= 2")
    diffs = np.abs(np.diff(video, axis=0))
    pairs = [float(d.mean()) for d in diffs]
    report = ConsistencyReport(pairs, float(np.mean(pairs)), float(np.max(pairs)))
    if masks is not None:
        report.fg_pair_diffs = _region_means(diffs, masks.fg)
        report.bg_pair_diffs = _region_means(diffs, masks.bg)
    return report
