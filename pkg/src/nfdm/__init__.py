"""Dual-polarisation NFDM link simulator with b- and qc-modulation over a Manakov fibre."""
from .channel import b2b_noise_load, propagate_link
from .config import PRESETS, LinkConfig, load_config, preset
from .framing import FrameGeometry, SymbolFrame, build_u, extract_symbols, map_bits
from .metrics import MetricsReport, compute_metrics
from .nft import accuracy_probe, forward_nft, inverse_nft
from .rx import demodulate
from .spectral_maps import ConstraintViolation, NlSpectrum
from .tx import LinkPlan, modulate
from .units import ConfigurationError, FibreParams, NormScales, TimeBurst, make_scales

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError", "ConstraintViolation", "FibreParams", "FrameGeometry", "LinkConfig", "LinkPlan",
    "MetricsReport", "NlSpectrum", "NormScales", "PRESETS", "SymbolFrame", "TimeBurst", "accuracy_probe",
    "b2b_noise_load", "build_u", "compute_metrics", "demodulate", "extract_symbols", "forward_nft",
    "inverse_nft", "load_config", "make_scales", "map_bits", "modulate", "preset", "propagate_link",
]
