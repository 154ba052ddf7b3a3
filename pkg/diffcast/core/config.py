"""Run configuration: YAML file + dotted overrides, validated by pydantic.

Every section forbids unknown keys. ``load_run_config`` is the only place
pydantic ``ValidationError`` is allowed to surface; it is converted to
:class:`ConfigError` there.
"""

import copy
import logging
from pathlib import Path
from typing import Any, Literal, Mapping, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from diffcast.core.errors import ConfigError
from diffcast.data.synthetic import SyntheticSpec
from diffcast.data.windows import SplitSpec
from diffcast.diffusion.guidance import GuidanceWeights

logger = logging.getLogger(__name__)

CONFIG_FILENAME = "config.yaml"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class DataConfig(_Section):
    csv_path: Optional[str] = None
    reports_path: Optional[str] = None
    frequency: Optional[Literal["daily", "weekly", "monthly"]] = None
    l_in: int = Field(32, ge=1)
    l_out: int = Field(8, ge=1)
    horizons: Optional[list[int]] = None
    lookback_intervals: int = Field(36, ge=0)
    split: SplitSpec = SplitSpec()

    @property
    def horizon_list(self) -> list[int]:
        return list(self.horizons) if self.horizons else [self.l_out]


class ModelConfig(_Section):
    d_model: int = Field(64, ge=1)
    patch_len: int = Field(16, ge=1)
    stride: int = Field(8, ge=1)
    layers: int = Field(2, ge=0)
    heads: int = Field(4, ge=1)
    lam: float = Field(1.0, ge=0)
    fusion_mode: Literal["unified", "sequential", "simple"] = "unified"
    use_timestamps: bool = True
    use_text: bool = True
    coupled_cfg: bool = False
    text_encoder: Literal["hashed", "precomputed"] = "hashed"
    text_vocab: int = Field(4096, ge=1)
    max_text_tokens: int = Field(256, ge=1)
    text_embeddings_path: Optional[str] = None
    head_hidden: int = Field(64, ge=1)
    ln_eps: float = Field(1e-5, gt=0)
    init_std: float = Field(0.02, gt=0)

    @model_validator(mode="after")
    def check_shapes(self) -> "ModelConfig":
        if self.d_model % self.heads:
            raise ValueError(f"d_model={self.d_model} is not divisible by heads={self.heads}")
        if self.stride > self.patch_len:
            raise ValueError(f"stride={self.stride} exceeds patch_len={self.patch_len}")
        if self.text_encoder == "precomputed" and not self.text_embeddings_path:
            raise ValueError("text_encoder 'precomputed' requires text_embeddings_path")
        return self


class DiffusionConfig(_Section):
    k_steps: int = Field(200, ge=1)
    beta_start: float = Field(1e-4, gt=0, lt=1)
    beta_end: float = Field(0.1, gt=0, lt=1)
    sampler: Literal["ddim", "ddpm"] = "ddim"
    inference_steps: int = Field(50, ge=1)

    @model_validator(mode="after")
    def check_ranges(self) -> "DiffusionConfig":
        if self.beta_start > self.beta_end:
            raise ValueError("beta_start must not exceed beta_end")
        if self.inference_steps > self.k_steps:
            raise ValueError(
                f"inference_steps={self.inference_steps} exceeds k_steps={self.k_steps}"
            )
        return self


class TrainConfig(_Section):
    steps: int = Field(20000, ge=1)
    batch_size: int = Field(32, ge=1)
    lr: float = Field(1e-3, ge=0)
    p_uncond_t: float = Field(0.1, ge=0, le=1)
    p_uncond_d: float = Field(0.1, ge=0, le=1)
    grad_clip: Optional[float] = Field(1.0, gt=0)
    val_every: int = Field(200, ge=1)
    val_windows: int = Field(16, ge=1)
    patience: int = Field(10, ge=1)
    prefetch: int = Field(2, ge=1)
    progress: bool = True


class EvalConfig(_Section):
    seeds: list[int] = [0, 1, 2]
    variants: list[str] = ["full"]
    max_windows: Optional[int] = Field(64, ge=1)
    denormalized: bool = False
    workers: int = Field(1, ge=1)
    guidance_grid: list[float] = [0.0, 0.5, 1.0, 2.0]
    lambda_values: list[float] = [0.0, 0.25, 0.5, 0.75, 1.0]
    p_uncond_values: list[float] = [0.1, 0.2, 0.3, 0.5]


class RunConfig(_Section):
    seed: int = 0
    data: DataConfig = DataConfig()
    model: ModelConfig = ModelConfig()
    diffusion: DiffusionConfig = DiffusionConfig()
    guidance: GuidanceWeights = GuidanceWeights()
    train: TrainConfig = TrainConfig()
    eval: EvalConfig = EvalConfig()
    synthetic: Optional[SyntheticSpec] = None

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.model_dump(mode="json"), sort_keys=True)

    def with_overrides(self, overrides: Mapping[str, Any]) -> "RunConfig":
        return validate_run_config(_apply_overrides(self.model_dump(mode="json"), overrides))


def _apply_overrides(raw: dict, overrides: Mapping[str, Any]) -> dict:
    """Set ``"section.key"`` paths on a nested dict; ``None`` values are skipped."""
    raw = copy.deepcopy(raw)
    for dotted, value in overrides.items():
        if value is None:
            continue
        node = raw
        *parents, leaf = dotted.split(".")
        for key in parents:
            child = node.get(key)
            if child is None:
                child = node[key] = {}
            elif not isinstance(child, dict):
                raise ConfigError(f"cannot override {dotted!r}: {key!r} is not a section")
            node = child
        node[leaf] = value
    return raw


def validate_run_config(raw: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in exc.errors()
        )
        raise ConfigError(f"invalid configuration: {problems}") from exc


def load_run_config(path: Optional[Union[str, Path]] = None,
                    overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """Read a YAML run config (or start from defaults) and apply dotted overrides."""
    raw: dict = {}
    if path is not None:
        path = Path(path)
        try:
            raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
    config = validate_run_config(_apply_overrides(raw, overrides or {}))
    logger.debug("Loaded run config from %s", path or "<defaults>")
    return config


def write_effective_config(config: RunConfig, out_dir: Union[str, Path]) -> Path:
    """Echo the config into ``out_dir`` so the run can be reproduced from it."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    target = out_dir / CONFIG_FILENAME
    target.write_text(config.to_yaml(), encoding="utf-8")
    return target
