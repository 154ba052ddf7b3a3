from .guidance import (
    NULL_TEXT,
    NULL_TIME,
    ConditionMask,
    GuidanceWeights,
    NullTokens,
    apply_condition_dropout,
    combine,
)
from .samplers import (
    SampleResult,
    SamplerConfig,
    ddim_step,
    ddim_update,
    ddpm_step,
    inference_timesteps,
    predicted_noise,
    sample,
)
from .schedule import (
    NoiseSchedule,
    forward_noise,
    make_quadratic_schedule,
    posterior_coefficients,
    posterior_mean,
)

__all__ = [
    "NULL_TEXT",
    "NULL_TIME",
    "ConditionMask",
    "GuidanceWeights",
    "NoiseSchedule",
    "NullTokens",
    "SampleResult",
    "SamplerConfig",
    "apply_condition_dropout",
    "combine",
    "ddim_step",
    "ddim_update",
    "ddpm_step",
    "forward_noise",
    "inference_timesteps",
    "make_quadratic_schedule",
    "posterior_coefficients",
    "posterior_mean",
    "predicted_noise",
    "sample",
]
