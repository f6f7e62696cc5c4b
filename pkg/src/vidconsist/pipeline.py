"""End-to-end orchestration of the four stages.

Stages and the state each one persists under ``output.dir``:

``init``    model_init.vcm
``fusion``  fusion/{r0,r_k,fused_k,r_prime}.vcf, fusion/masks.vmsk
``tune``    model_tuned.vcm, train_log.tsv
``video``   video/ (frames + manifest.json), video/report.json,
            baseline_report.json (same noise, clips stitched without merging)

Each stage reads only what earlier stages wrote, so any stage can be re-run
from disk and reproduces its outputs exactly.
"""

from __future__ import annotations

import logging
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import frames
from .config import PipelineConfig, clip_embeddings, prompt_embedding
from .denoiser import init_model, load_checkpoint, save_checkpoint
from .fusion import FusionConfig, run_fusion
from .report import compute_consistency
from .schedule import NoiseSchedule, build_schedule
from .segmentation import load_mask, save_mask, threshold_segmenter
from .temporal import ClipPlan, generate_long_video, ramp_weights, stitch_clips
from .tuning import LossWeights, TuneConfig, fine_tune, write_training_log

log = logging.getLogger(__name__)

STAGES = ("init", "fusion", "tune", "video")

# stream ids mixed into the root seed
_FUSION, _TUNE, _VIDEO = 1, 2, 3


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


def _finite(arr, what: str) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"{what} contains nonfinite values")
    return arr


def make_schedule(cfg: PipelineConfig) -> NoiseSchedule:
    s = cfg.schedule
    return build_schedule(s.T, s.beta_start, s.beta_end)


def make_plan(cfg: PipelineConfig) -> ClipPlan:
    te = cfg.temporal
    plan = ClipPlan.for_video(te.frames, te.length, te.stride)
    if te.weights == "ramp":
        plan = replace(plan, weights=ramp_weights(plan.count, plan.length, cfg.frame_shape[:2]))
    return plan


def stage_init(cfg: PipelineConfig, **_) -> None:
    m = cfg.model
    model = init_model(
        cfg.frame_shape, m.hidden, (m.h_dim, m.c_dim), m.seed,
        t_dim=m.t_dim, T=cfg.schedule.T, pos_dim=m.pos_dim,
    )
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, cfg.output_dir / "model_init.vcm")


def stage_fusion(cfg: PipelineConfig, threads: int = 1, dump_intermediates: bool = False) -> None:
    out = cfg.output_dir
    model = load_checkpoint(out / "model_init.vcm")
    sched = make_schedule(cfg)
    fu = cfg.fusion
    fcfg = FusionConfig(fu.n, cfg.fusion_k, fu.w1, fu.w2)
    masks = load_mask(fu.mask_file, cfg.frame_shape[:2]) if fu.mask_file else None
    result = run_fusion(
        model, sched, prompt_embedding(cfg), fcfg,
        principal_seed=[cfg.seed, _FUSION, 0],
        bg_seeds=[[cfg.seed, _FUSION, i + 1] for i in range(fu.n)],
        segmenter=None if masks is not None else threshold_segmenter(fu.threshold),
        masks=masks, eta=fu.eta, threads=threads,
    )
    d = out / "fusion"
    d.mkdir(parents=True, exist_ok=True)
    for name in ("r0", "r_k", "fused_k", "r_prime"):
        frames.write_frame(_finite(getattr(result, name), name), d / f"{name}.vcf")
    save_mask(result.masks, d / "masks.vmsk")
    if dump_intermediates:
        for i, bg in enumerate(result.bg_samples):
            frames.write_frame(bg, d / f"bg_{i:02d}.vcf")


def stage_tune(cfg: PipelineConfig, **_) -> None:
    out = cfg.output_dir
    model = load_checkpoint(out / "model_init.vcm")
    r_prime = frames.read_frame(out / "fusion" / "r_prime.vcf")
    masks = load_mask(out / "fusion" / "masks.vmsk", cfg.frame_shape[:2])
    tu = cfg.tune
    records: list = []
    tuned = fine_tune(
        model, r_prime, prompt_embedding(cfg), masks, make_schedule(cfg),
        LossWeights(tu.lambda1, tu.lambda2, tu.lambda3),
        TuneConfig(tu.steps, tu.learning_rate, tu.batch_size),
        seed=[cfg.seed, _TUNE], log=records,
    )
    save_checkpoint(tuned, out / "model_tuned.vcm")
    write_training_log(records, out / "train_log.tsv")


def stage_video(cfg: PipelineConfig, threads: int = 1, **_) -> None:
    out = cfg.output_dir
    model = load_checkpoint(out / "model_tuned.vcm")
    masks = load_mask(out / "fusion" / "masks.vmsk", cfg.frame_shape[:2])
    sched = make_schedule(cfg)
    plan = make_plan(cfg)
    embs = clip_embeddings(cfg, plan.count)
    seed = [cfg.seed, _VIDEO]
    eta = cfg.temporal.eta
    video = generate_long_video(model, sched, plan, embs, plan.n_frames, seed, eta, threads)
    frames.write_video(_finite(video, "video"), out / "video", plan)
    if len(video) > 1:
        compute_consistency(video, masks).save(out / "video" / "report.json")
        baseline = generate_long_video(
            model, sched, plan, embs, plan.n_frames, seed, eta, threads, combine=stitch_clips
        )
        compute_consistency(baseline, masks).save(out / "baseline_report.json")


_RUNNERS = {"init": stage_init, "fusion": stage_fusion, "tune": stage_tune, "video": stage_video}


def run_stage(name: str, cfg: PipelineConfig, threads: int = 1, dump_intermediates: bool = False) -> None:
    if name not in _RUNNERS:
        raise ValueError(f"unknown stage {name!r}; choose from {', '.join(STAGES)}")
    log.info("stage %s -> %s", name, cfg.output_dir)
    try:
        _RUNNERS[name](cfg, threads=threads, dump_intermediates=dump_intermediates)
    except (ValueError, FloatingPointError, OSError) as exc:
        raise StageError(name, exc) from exc


def run_pipeline(cfg: PipelineConfig, threads: int = 1, dump_intermediates: bool = False) -> Path:
    for name in STAGES:
        run_stage(name, cfg, threads, dump_intermediates)
    return cfg.output_dir
