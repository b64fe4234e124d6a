"""
Transmitter chain and the derived per-run constants shared with the receiver.

bits -> 32-QAM -> u(lambda) -> (b, a) or qc -> pre-compensation -> inverse
NFT -> physical units -> truncation to the transmitted period.

The launch power is set by scaling u before the nonlinear map. Scaling the
burst after synthesis would change its nonlinear spectrum.
"""
from __future__ import annotations

from functools import cached_property

import numpy as np
from scipy.optimize import brentq

from .config import LinkConfig
from .framing import BITS_PER_SYMBOL, SymbolFrame, build_u, map_bits, truncate_burst
from .nft import ab_from_qc, inverse_nft, lambda_grid
from .rx import EqualizerSettings, precompensate
from .spectral_maps import NlSpectrum, a_from_b, b_from_u, qc_from_u
from .units import dbm_to_w, from_normalized, make_scales

# Random streams; each burst draws from SeedSequence(seed, spawn_key=(stream, burst)).
BITS, NOISE, TRAIN_BITS, TRAIN_NOISE, LAUNCH = range(5)


def burst_rng(seed: int, stream: int, burst_id: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, burst_id)))


class LinkPlan:
    """Everything derived from a :class:`LinkConfig` that tx and rx share."""

    def __init__(self, config: LinkConfig):
        self.config = config
        self.geometry = config.geometry
        self.scales = make_scales(config.fibre, config.t_scale_s)
        self.dt_norm = self.geometry.dt / config.t_scale_s
        self.lam = lambda_grid(self.geometry.n_burst, self.dt_norm)
        self.equalizer = EqualizerSettings(self.scales.length, config.rho, config.channel == "link")

    @classmethod
    def from_config(cls, config) -> "LinkPlan":
        return config if isinstance(config, cls) else cls(config)

    @property
    def mode(self) -> str:
        return self.config.mode

    @cached_property
    def kappa(self) -> float:
        return launch_scale(self)

    @cached_property
    def target_energy_norm(self) -> float:
        """Normalized energy per polarisation for the configured launch power."""
        g = self.geometry
        energy = dbm_to_w(self.config.power_dbm) * g.frame_duration_s
        return float(energy / (self.scales.p_scale_w * self.scales.t_scale_s))


def draw_frame(plan: LinkPlan, burst_id: int, stream: int = BITS) -> SymbolFrame:
    rng = burst_rng(plan.config.seed, stream, burst_id)
    bits = rng.integers(0, 2, size=(2, BITS_PER_SYMBOL * plan.geometry.n_carriers), dtype=np.uint8)
    return map_bits(bits)


def _qc_energy(u_sq, kappa, dlam):
    """Mean energy per polarisation of qc-modulated frames with unit-power ``|u|^2`` samples."""
    x = kappa**2 * u_sq
    top = x.max(axis=-2, keepdims=True)
    # ln(exp(x1) + exp(x2) - 1), evaluated without overflow
    log_sum = top[..., 0, :] + np.log(np.sum(np.exp(x - top), axis=-2) - np.exp(-top[..., 0, :]))
    return float(np.mean(np.sum(log_sum, axis=-1)) * dlam / np.pi / 2)


def launch_scale(plan: LinkPlan) -> float:
    """Factor applied to the unit-power u(lambda) to hit the target launch power.

    For b-modulation the burst energy is exactly ``(1/pi) int |u|^2 dlam``, so
    the factor follows from the mean constellation energy. For qc-modulation
    the mean energy is matched on a fixed set of random frames.
    """
    g = plan.geometry
    dlam = plan.lam[1] - plan.lam[0]
    target = plan.target_energy_norm
    if plan.mode == "B":
        u_energy = g.n_burst / g.n_symbol * g.n_carriers
        return float(np.sqrt(np.pi * target / (dlam * u_energy)))
    frames = [draw_frame(plan, k, LAUNCH).symbols for k in range(plan.config.kappa_frames)]
    u_sq = np.abs(build_u(np.stack(frames), g)) ** 2
    # upper bracket: the largest kappa keeping exp(kappa^2 |u|^2) finite
    hi = np.sqrt(600.0 / u_sq.max())
    if _qc_energy(u_sq, hi, dlam) < target:
        raise ValueError("launch power beyond the representable qc range")
    return float(brentq(lambda k: _qc_energy(u_sq, k, dlam) - target, 0.0, hi, xtol=1e-14, rtol=1e-13))


def synthesize_spectrum(symbols, plan: LinkPlan) -> NlSpectrum:
    """Launch-scaled nonlinear spectrum for the given symbols (before pre-compensation)."""
    u = plan.kappa * build_u(symbols, plan.geometry)
    oversample = plan.config.a_oversample
    if plan.mode == "B":
        b1, b2 = b_from_u(u[0], u[1])
        a, clipped = a_from_b(b1, b2, plan.lam, oversample, return_clipped=True)
        return NlSpectrum(plan.lam, "B", a=a, b=np.stack([b1, b2]), meta={"clipped": clipped})
    qc1, qc2 = qc_from_u(u[0], u[1])
    return ab_from_qc(NlSpectrum(plan.lam, "QC", qc=np.stack([qc1, qc2]), meta={"clipped": 0}), oversample)


def modulate(frame: SymbolFrame, plan: LinkPlan, return_spectrum: bool = False):
    """Physical transmitted burst (``geometry.n_tx`` samples) for one frame."""
    plan = LinkPlan.from_config(plan)
    spectrum = precompensate(synthesize_spectrum(frame.symbols, plan), plan.equalizer)
    burst = from_normalized(inverse_nft(spectrum, plan.dt_norm), plan.scales)
    burst = burst.replace(truncate_burst(burst.q, plan.geometry))
    return (burst, spectrum) if return_spectrum else burst
