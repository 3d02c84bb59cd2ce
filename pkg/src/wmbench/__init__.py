"""Robustness benchmark for passive deepfake-speech detectors and audio watermarks."""

from .audio import StftConfig, Waveform, istft, read_pcm, stft, write_pcm
from .kernels import BACKEND
from .metrics import EerResult, ScoredTrial, estimate_eer, far_frr_at
from .scorer import MessagePair, fuse_score
from .watermark import Message, WatermarkConfig, bit_accuracy, detect_bits, embed

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "EerResult", "Message", "MessagePair", "ScoredTrial", "StftConfig",
    "WatermarkConfig", "Waveform", "bit_accuracy", "detect_bits", "embed", "estimate_eer",
    "far_frr_at", "fuse_score", "istft", "read_pcm", "stft", "write_pcm",
]
