"""Transmission and manipulation conditions."""

from .conditions import (
    ALL_CONDITIONS,
    DEFAULT_PARTIALLY_SEEN,
    MANIPULATION,
    TRANSMISSION,
    Category,
    ConditionKind,
    ConditionSpec,
    Group,
    Resources,
    TrialSeed,
    apply_condition,
    apply_with_params,
    check_params,
    default_category,
    draw_params,
    sample_params,
)
from .dynamics import clip_percentile, compress_dynamics, overdrive, quantize
from .external import ToolSpec, external_condition, run_tool
from .noise import add_noise, convolve_rir, mix_at_snr, synthetic_noise, synthetic_rir
from .spectral import equalize, mask_frequencies, noise_gate, peaking_biquad
from .timescale import pitch_shift, time_stretch, trim, trim_random

__all__ = [
    "ALL_CONDITIONS", "DEFAULT_PARTIALLY_SEEN", "MANIPULATION", "TRANSMISSION",
    "Category", "ConditionKind", "ConditionSpec", "Group", "Resources", "TrialSeed",
    "apply_condition", "apply_with_params", "check_params", "default_category",
    "draw_params", "sample_params",
    "clip_percentile", "compress_dynamics", "overdrive", "quantize",
    "ToolSpec", "external_condition", "run_tool",
    "add_noise", "convolve_rir", "mix_at_snr", "synthetic_noise", "synthetic_rir",
    "equalize", "mask_frequencies", "noise_gate", "peaking_biquad",
    "pitch_shift", "time_stretch", "trim", "trim_random",
]
