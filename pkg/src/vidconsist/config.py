"""Pipeline configuration: a strict TOML schema with desk-scale defaults.

Every key is optional; missing keys take the defaults below and unknown keys
are rejected. Errors name the offending field as ``section.key``.

.. code-block:: toml

    seed = 0                      # root of every random stream

    [schedule]
    T = 50
    beta_start = 8.5e-4
    beta_end = 1.2e-2

    [model]
    height = 8
    width = 8
    channels = 1
    hidden = 32
    t_dim = 8
    h_dim = 8
    c_dim = 8
    pos_dim = 0
    seed = 0

    [prompt]
    text = "a person dancing on a beach"
    condition = "pose sequence"

    [fusion]
    n = 5
    k = 45                        # defaults to T - 5
    w1 = 1.0
    w2 = 1.0
    eta = 0.0
    threshold = 0.0
    mask_file = ""                # optional; overrides the threshold segmenter

    [tune]
    lambda1 = 1.0
    lambda2 = 1.0
    lambda3 = 1.0
    learning_rate = 1e-3
    steps = 250
    batch_size = 1

    [temporal]
    frames = 6
    length = 4
    stride = 2
    eta = 0.0
    weights = "ones"              # or "ramp"
    clip_prompts = []             # defaults to "<text> | clip <i>"

    [output]
    dir = "out"
"""

from __future__ import annotations

import hashlib
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .denoiser import ConditioningEmbedding


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class ScheduleSection:
    T: int = 50
    beta_start: float = 8.5e-4
    beta_end: float = 1.2e-2


@dataclass(frozen=True)
class ModelSection:
    height: int = 8
    width: int = 8
    channels: int = 1
    hidden: int = 32
    t_dim: int = 8
    h_dim: int = 8
    c_dim: int = 8
    pos_dim: int = 0
    seed: int = 0


@dataclass(frozen=True)
class PromptSection:
    text: str = "a person dancing on a beach"
    condition: str = "pose sequence"


@dataclass(frozen=True)
class FusionSection:
    n: int = 5
    k: int = -1
    w1: float = 1.0
    w2: float = 1.0
    eta: float = 0.0
    threshold: float = 0.0
    mask_file: str = ""


@dataclass(frozen=True)
class TuneSection:
    lambda1: float = 1.0
    lambda2: float = 1.0
    lambda3: float = 1.0
    learning_rate: float = 1e-3
    steps: int = 250
    batch_size: int = 1


@dataclass(frozen=True)
class TemporalSection:
    frames: int = 6
    length: int = 4
    stride: int = 2
    eta: float = 0.0
    weights: str = "ones"
    clip_prompts: tuple[str, ...] = ()


@dataclass(frozen=True)
class OutputSection:
    dir: str = "out"


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    schedule: ScheduleSection = field(default_factory=ScheduleSection)
    model: ModelSection = field(default_factory=ModelSection)
    prompt: PromptSection = field(default_factory=PromptSection)
    fusion: FusionSection = field(default_factory=FusionSection)
    tune: TuneSection = field(default_factory=TuneSection)
    temporal: TemporalSection = field(default_factory=TemporalSection)
    output: OutputSection = field(default_factory=OutputSection)

    @property
    def frame_shape(self) -> tuple[int, int, int]:
        return (self.model.height, self.model.width, self.model.channels)

    @property
    def fusion_k(self) -> int:
        return self.fusion.k if self.fusion.k >= 0 else max(self.schedule.T - 5, 1)

    @property
    def output_dir(self) -> Path:
        return Path(self.output.dir)


SECTIONS = {
    "schedule": ScheduleSection,
    "model": ModelSection,
    "prompt": PromptSection,
    "fusion": FusionSection,
    "tune": TuneSection,
    "temporal": TemporalSection,
    "output": OutputSection,
}


def _coerce(name: str, value, typ):
    if typ == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(name, f"expected a number, got {value!r}")
        return float(value)
    if typ == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(name, f"expected an integer, got {value!r}")
        return value
    if typ == "str":
        if not isinstance(value, str):
            raise ConfigError(name, f"expected a string, got {value!r}")
        return value
    if typ == "tuple[str, ...]":
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise ConfigError(name, f"expected a list of strings, got {value!r}")
        return tuple(value)
    raise AssertionError(typ)


def _build_section(name: str, cls, raw) -> object:
    if not isinstance(raw, dict):
        raise ConfigError(name, "expected a table")
    known = {f.name: f for f in fields(cls)}
    values = {}
    for key, value in raw.items():
        if key not in known:
            raise ConfigError(f"{name}.{key}", "unknown key")
        values[key] = _coerce(f"{name}.{key}", value, known[key].type)
    return cls(**values)


def config_from_dict(raw: dict) -> PipelineConfig:
    raw = dict(raw)
    kwargs = {}
    if "seed" in raw:
        kwargs["seed"] = _coerce("seed", raw.pop("seed"), "int")
    for key, value in raw.items():
        if key not in SECTIONS:
            raise ConfigError(key, "unknown section")
        kwargs[key] = _build_section(key, SECTIONS[key], value)
    return validate(PipelineConfig(**kwargs))


def load_config(path) -> PipelineConfig:
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError("<file>", f"{path} not found") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<file>", f"{path}: {exc}") from None
    cfg = config_from_dict(raw)
    out = cfg.output_dir
    if not out.is_absolute():
        cfg = replace(cfg, output=OutputSection(str(path.parent / out)))
    if cfg.fusion.mask_file and not Path(cfg.fusion.mask_file).is_absolute():
        cfg = replace(cfg, fusion=replace(cfg.fusion, mask_file=str(path.parent / cfg.fusion.mask_file)))
    return cfg


def _require(cond: bool, name: str, message: str) -> None:
    if not cond:
        raise ConfigError(name, message)


def validate(cfg: PipelineConfig) -> PipelineConfig:
    s, m, fu, tu, te = cfg.schedule, cfg.model, cfg.fusion, cfg.tune, cfg.temporal
    _require(s.T >= 1, "schedule.T", "must be >= 1")
    _require(0 < s.beta_start < 1, "schedule.beta_start", "must lie in (0, 1)")
    _require(0 < s.beta_end < 1, "schedule.beta_end", "must lie in (0, 1)")
    _require(s.beta_start <= s.beta_end, "schedule.beta_start", "must not exceed schedule.beta_end")
    for name in ("height", "width", "channels", "hidden"):
        _require(getattr(m, name) >= 1, f"model.{name}", "must be >= 1")
    for name in ("t_dim", "h_dim", "c_dim", "pos_dim"):
        _require(getattr(m, name) >= 0, f"model.{name}", "must be >= 0")
    _require(fu.n >= 1, "fusion.n", "must be >= 1")
    _require(fu.k == -1 or 1 <= fu.k <= s.T, "fusion.k", f"must lie in [1, T={s.T}]")
    _require(np.isfinite(fu.w1), "fusion.w1", "must be finite")
    _require(np.isfinite(fu.w2), "fusion.w2", "must be finite")
    for sec, eta in (("fusion", fu.eta), ("temporal", te.eta)):
        _require(0 <= eta <= 1, f"{sec}.eta", "must lie in [0, 1]")
    lams = (tu.lambda1, tu.lambda2, tu.lambda3)
    for i, lam in enumerate(lams, start=1):
        _require(np.isfinite(lam) and lam >= 0, f"tune.lambda{i}", "must be finite and >= 0")
    _require(any(lams), "tune.lambda1", "loss weights must not all be zero")
    _require(tu.learning_rate > 0, "tune.learning_rate", "must be > 0")
    _require(tu.steps >= 0, "tune.steps", "must be >= 0")
    _require(tu.batch_size >= 1, "tune.batch_size", "must be >= 1")
    _require(te.frames >= 1, "temporal.frames", "must be >= 1")
    _require(1 <= te.length <= te.frames, "temporal.length", "must lie in [1, temporal.frames]")
    _require(te.stride >= 1, "temporal.stride", "must be >= 1")
    _require(te.stride <= te.length or te.frames == te.length, "temporal.stride", "must not exceed temporal.length")
    _require(
        (te.frames - te.length) % te.stride == 0,
        "temporal.stride",
        "clips must tile the video exactly: (frames - length) % stride == 0",
    )
    n_clips = (te.frames - te.length) // te.stride + 1
    _require(
        not te.clip_prompts or len(te.clip_prompts) == n_clips,
        "temporal.clip_prompts",
        f"need exactly {n_clips} prompts (one per clip)",
    )
    _require(te.weights in ("ones", "ramp"), "temporal.weights", "must be 'ones' or 'ramp'")
    return cfg


def paper_profile(**overrides) -> PipelineConfig:
    """Schedule, fusion and tuning constants of the original recipe at full scale."""
    cfg = PipelineConfig(
        schedule=ScheduleSection(T=1000, beta_start=8.5e-4, beta_end=1.2e-2),
        fusion=FusionSection(n=5, k=995),
        tune=TuneSection(learning_rate=2e-6, steps=250, batch_size=1),
    )
    return validate(replace(cfg, **overrides))


def text_vector(text: str, dim: int) -> np.ndarray:
    """Deterministic Gaussian vector from a string (sha256 -> seed)."""
    seed = int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "little")
    return np.random.default_rng(seed).standard_normal(dim)


def prompt_embedding(cfg: PipelineConfig, text: str | None = None) -> ConditioningEmbedding:
    return ConditioningEmbedding(
        text_vector(cfg.prompt.text if text is None else text, cfg.model.h_dim),
        text_vector(cfg.prompt.condition, cfg.model.c_dim),
    )


def clip_embeddings(cfg: PipelineConfig, n_clips: int) -> list[ConditioningEmbedding]:
    texts = cfg.temporal.clip_prompts or [f"{cfg.prompt.text} | clip {i}" for i in range(n_clips)]
    return [prompt_embedding(cfg, t) for t in texts]
