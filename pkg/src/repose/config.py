"""Pipeline configuration.

Config files are JSON. Keys may be nested (``{"gen": {"steps": 30}}``) or
dotted (``{"gen.steps": 30}``); both spellings address the same field.
Unknown keys are rejected so that typos do not silently fall back to defaults.
"""
from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

STAGES = (
    "gate",
    "preprocess",
    "logo_suppress",
    "coarse",
    "unsample",
    "shape_match",
    "parts_compose",
    "seam_fix",
    "color_realign",
    "upscale",
    "logo_inject",
)

# (before, after) pairs; enforced only when both stages are selected
STAGE_ORDER = (
    ("coarse", "unsample"),
    ("unsample", "shape_match"),
    ("shape_match", "parts_compose"),
    ("parts_compose", "seam_fix"),
    ("seam_fix", "color_realign"),
    ("color_realign", "upscale"),
    ("logo_suppress", "coarse"),
    ("upscale", "logo_inject"),
)

# ablation rows, cumulative
PRESETS: dict[str, tuple[str, ...]] = {}
PRESETS["coarse"] = ("gate", "preprocess", "coarse")
PRESETS["+cond-unsampling"] = PRESETS["coarse"] + ("unsample",)
PRESETS["+parts-composition"] = PRESETS["+cond-unsampling"] + (
    "shape_match",
    "parts_compose",
    "seam_fix",
    "color_realign",
)
PRESETS["+logo-restoration"] = PRESETS["+parts-composition"] + ("logo_suppress", "logo_inject", "upscale")

PRESET_LABELS = {
    "coarse": "Coarse generation",
    "+cond-unsampling": "+ cond. unsampling",
    "+parts-composition": "+ parts composition",
    "+logo-restoration": "+ logo restoration",
}


class ConfigError(ValueError):
    pass


def canonical_order(stages) -> list[str]:
    """Sort a stage subset into the pipeline's execution order."""
    unknown = set(stages) - set(STAGES)
    if unknown:
        raise ConfigError(f"unknown stages: {sorted(unknown)}")
    return [s for s in STAGES if s in set(stages)]


def validate_stage_order(stages) -> None:
    stages = list(stages)
    unknown = [s for s in stages if s not in STAGES]
    if unknown:
        raise ConfigError(f"unknown stages: {unknown}")
    if len(set(stages)) != len(stages):
        raise ConfigError(f"duplicate stages in {stages}")
    pos = {s: i for i, s in enumerate(stages)}
    for before, after in STAGE_ORDER:
        if before in pos and after in pos and pos[before] > pos[after]:
            raise ConfigError(f"stage {before!r} must run before {after!r}")


def preset_stages(name: str) -> list[str]:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {list(PRESETS)}")
    return canonical_order(PRESETS[name])


def stage_label(stages) -> str:
    """Ablation row label for a stage list, or ``"custom"``."""
    chosen = set(stages)
    for name, members in PRESETS.items():
        if chosen == set(members):
            return PRESET_LABELS[name]
    return "custom"


@dataclass
class PreprocessConfig:
    white_mean_min: float = 245.0
    white_std_max: float = 4.0
    corner_patch: int = 32
    min_size: int = 1024
    enforce: bool = True


@dataclass
class LogoConfig:
    dilate_radius: int = 5  # at 512 px; scaled with resolution
    labels: list[str] = field(default_factory=lambda: ["brand logo", "brand icon"])


@dataclass
class GenConfig:
    steps: int = 30
    stop_fraction: float = 0.6
    seed: int | None = None  # falls back to the top-level seed
    ramp: int = 8
    adapter_weight: float = 1.0
    control_weights: dict[str, float] = field(default_factory=lambda: {"openpose": 1.0, "canny": 1.0})
    target_pose: str | None = None
    negative_pose: str | None = None
    canny_threshold: float = 64.0


@dataclass
class SeamConfig:
    stop_fraction: float = 0.25


@dataclass
class ShapeConfig:
    band_width: int = 30
    background_threshold: int = 240


@dataclass
class ComposeConfig:
    padding: int = 12
    row_fracs: list[float] = field(default_factory=lambda: [0.55, 0.65])
    default_fracs: list[float] = field(default_factory=lambda: [0.30, 0.70])


@dataclass
class MetricsConfig:
    resolution: int = 512
    std: str = "sample"  # or "population"
    dataset: str | None = None


@dataclass
class BackendConfig:
    url: str | None = None
    token: str | None = None
    timeout_s: float = 120.0
    retries: int = 2
    backoff_s: float = 1.0
    max_inflight: int = 1
    models: dict[str, str] = field(default_factory=dict)


@dataclass
class WorkerConfig:
    workers: int = 1


@dataclass
class MockConfig:
    """Knobs for the deterministic mock suite (``--mock``)."""

    detections: list[dict] = field(default_factory=list)
    caption: str | None = None
    classify_label: str = "long_sleeve"
    llm_reply: str = "True"
    coarse_shift: int = 0
    latent_factor: int = 8
    noise_scale: float = 1.0
    sample_bias: float = 0.0
    perceptual: bool = True


_SECTIONS = {
    "preprocess": PreprocessConfig,
    "logo": LogoConfig,
    "gen": GenConfig,
    "seam": SeamConfig,
    "shape": ShapeConfig,
    "compose": ComposeConfig,
    "metrics": MetricsConfig,
    "backend": BackendConfig,
    "pipeline": WorkerConfig,
    "mock": MockConfig,
}


@dataclass
class PipelineConfig:
    stages: list[str] = field(default_factory=lambda: list(STAGES))
    seed: int = 0
    output_dir: str = "out"
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    logo: LogoConfig = field(default_factory=LogoConfig)
    gen: GenConfig = field(default_factory=GenConfig)
    seam: SeamConfig = field(default_factory=SeamConfig)
    shape: ShapeConfig = field(default_factory=ShapeConfig)
    compose: ComposeConfig = field(default_factory=ComposeConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    backend: BackendConfig = field(default_factory=BackendConfig)
    pipeline: WorkerConfig = field(default_factory=WorkerConfig)
    mock: MockConfig = field(default_factory=MockConfig)

    def __post_init__(self):
        validate_stage_order(self.stages)

    @property
    def gen_seed(self) -> int:
        return self.seed if self.gen.seed is None else self.gen.seed

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "PipelineConfig":
        nested = _nest(data)
        kwargs: dict[str, Any] = {}
        for key, value in nested.items():
            if key in _SECTIONS:
                if not isinstance(value, dict):
                    raise ConfigError(f"section {key!r} must be an object")
                kwargs[key] = _build_section(key, _SECTIONS[key], value)
            elif key == "preset":
                if "stages" in nested:
                    raise ConfigError("give either 'preset' or 'stages', not both")
                kwargs["stages"] = preset_stages(value)
            elif key in ("stages", "seed", "output_dir"):
                kwargs[key] = list(value) if key == "stages" else value
            else:
                raise ConfigError(f"unknown config key {key!r}")
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def with_overrides(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)

    def backend_url(self) -> str | None:
        return self.backend.url or os.environ.get("REPOSE_BACKEND_URL")

    def backend_token(self) -> str | None:
        return self.backend.token or os.environ.get("REPOSE_BACKEND_TOKEN")


def _nest(data: dict[str, Any]) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for key, value in data.items():
        head, _, rest = key.partition(".")
        if rest:
            out.setdefault(head, {})
            if not isinstance(out[head], dict):
                raise ConfigError(f"key {key!r} conflicts with scalar {head!r}")
            out[head].update(_nest({rest: value}))
        elif isinstance(value, dict) and head in _SECTIONS:
            out.setdefault(head, {}).update(value)
        else:
            out[head] = value
    return out


def _build_section(name: str, klass, values: dict[str, Any]):
    known = {f.name for f in dataclasses.fields(klass)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
    return klass(**values)
