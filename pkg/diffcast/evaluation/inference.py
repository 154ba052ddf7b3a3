"""Config-driven sampling helpers shared by validation, evaluation and the CLI."""

from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from diffcast.diffusion.guidance import GuidanceWeights
from diffcast.diffusion.samplers import SampleResult, SamplerConfig, sample
from diffcast.diffusion.schedule import NoiseSchedule, make_quadratic_schedule
from diffcast.models.forecaster import DiffusionForecaster, Example
from diffcast.models.fusion import TraceEntry
from diffcast.utils.container import write_container
from diffcast.utils.seeding import SAMPLING, rng_stream


def build_schedule(diffusion_cfg) -> NoiseSchedule:
    return make_quadratic_schedule(diffusion_cfg.k_steps, diffusion_cfg.beta_start, diffusion_cfg.beta_end)


def sampler_config(diffusion_cfg, seed: int = 0) -> SamplerConfig:
    return SamplerConfig(kind=diffusion_cfg.sampler, num_inference_steps=diffusion_cfg.inference_steps, seed=seed)


def effective_guidance(config, weights: Optional[GuidanceWeights] = None) -> GuidanceWeights:
    """Guidance actually applied for a run's model variant.

    Coupled models share one weight. A condition the variant never sees gets
    weight 0, since its null pass would equal the full pass.
    """
    w = weights or config.guidance
    if config.model.coupled_cfg:
        w = w.coupled()
    return GuidanceWeights(
        w_t=w.w_t if config.model.use_timestamps else 0.0,
        w_d=w.w_d if config.model.use_text else 0.0,
    )


def sample_example(model: DiffusionForecaster, example: Example, schedule: NoiseSchedule,
                   sampler_cfg: SamplerConfig, guidance: GuidanceWeights, seed: int,
                   stream: int = SAMPLING, capture_trace: bool = False) -> SampleResult:
    """Sample one window with its own ``(seed, stream, sample_id)`` generator."""
    rng = rng_stream(seed, stream, example.sample_id)
    return sample(model, example.conditions, schedule, sampler_cfg, guidance, rng=rng,
                  capture_trace=capture_trace)


def forecast_examples(model: DiffusionForecaster, examples: Sequence[Example], schedule: NoiseSchedule,
                      sampler_cfg: SamplerConfig, guidance: GuidanceWeights, seed: int,
                      stream: int = SAMPLING) -> np.ndarray:
    """Normalized forecasts ``[n x L_out x C]`` for every example."""
    if not examples:
        return np.zeros((0,) + model.target_shape)
    return np.stack([
        sample_example(model, ex, schedule, sampler_cfg, guidance, seed, stream).forecast
        for ex in examples
    ])


def evenly_spaced(items: Sequence, limit: Optional[int]) -> list:
    """At most ``limit`` items, spread evenly over the sequence."""
    if limit is None or len(items) <= limit:
        return list(items)
    idx = np.unique(np.round(np.linspace(0, len(items) - 1, limit)).astype(int))
    return [items[i] for i in idx]


def write_trace(trace: Sequence[TraceEntry], path: Union[str, Path], metadata: Optional[dict] = None) -> Path:
    """Store attention weights as ``layer<l>/<stage>`` records with their column layout."""
    arrays = {f"layer{e.layer}/{e.stage}": e.weights for e in trace}
    columns = {
        f"layer{e.layer}/{e.stage}": {"n_time": e.columns.n_time, "n_text": e.columns.n_text}
        for e in trace
    }
    meta = {"kind": "attention-trace", "columns": columns, **(metadata or {})}
    return write_container(path, arrays, meta)
