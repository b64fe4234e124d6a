"""
Receiver chain: forward NFT, removal of the deterministic channel phase, the
inverse of the modulation map, and recovery of the subcarrier symbols.

Also holds the transmitter-side pre-compensation, which shares its phase
convention with back-rotation, and an optional per-subcarrier 2x2 one-tap
equalizer fitted on known training frames.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .framing import demap_hard, extract_symbols, map_bits, recover_burst
from .nft import CONVENTION, forward_nft
from .spectral_maps import ConstraintViolation, NlSpectrum, clip_unit_ball, u_from_b, u_from_qc
from .units import TimeBurst, to_normalized

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EqualizerSettings:
    """Nonlinear-domain dispersion handling.

    ``length`` is the normalized link length, ``rho`` the fraction of the
    channel phase applied at the transmitter, and ``propagated`` whether the
    signal actually traversed the link (False for back-to-back runs).
    """

    length: float
    rho: float = 0.5
    propagated: bool = True

    def __post_init__(self):
        if self.length < 0 or not 0 <= self.rho <= 1:
            raise ValueError("need length >= 0 and 0 <= rho <= 1")


def precompensate(spectrum: NlSpectrum, eq: EqualizerSettings) -> NlSpectrum:
    """Apply the channel phase of a distance ``-rho * length`` to b (and qc)."""
    if eq.rho == 0:
        return spectrum
    return _rotate(spectrum, CONVENTION.channel_phase(spectrum.lam, -eq.rho * eq.length))


def backrotate(spectrum: NlSpectrum, eq: EqualizerSettings) -> NlSpectrum:
    """Remove the residual channel phase left after pre-compensation and propagation."""
    travelled = eq.length if eq.propagated else 0.0
    net = travelled - eq.rho * eq.length
    if net == 0:
        return spectrum
    return _rotate(spectrum, CONVENTION.channel_phase(spectrum.lam, -net))


def _rotate(spectrum: NlSpectrum, phase) -> NlSpectrum:
    return NlSpectrum(
        spectrum.lam, spectrum.mode, a=spectrum.a,
        b=None if spectrum.b is None else spectrum.b * phase,
        qc=None if spectrum.qc is None else spectrum.qc * phase,
        meta=dict(spectrum.meta),
    )




def demodulate(burst: TimeBurst, plan, *, burst_id: int | None = None, decide: bool = False,
               info: dict | None = None):
    """Soft symbol estimates (2, N_C) from a received physical burst.

    Accepts either the transmitted length (recovered by zero padding) or the
    full processing window. With ``decide=True`` also returns the hard
    decisions as a :class:`SymbolFrame`. If ``info`` is given it receives
    NFT diagnostics.
    """
    from .tx import LinkPlan

    plan = LinkPlan.from_config(plan)
    g = plan.geometry
    q = burst.q
    if q.shape[-1] != g.n_burst:
        q = recover_burst(q, g)
    normalized = to_normalized(burst.replace(q), plan.scales)
    cfg = plan.config
    spectrum = forward_nft(normalized, plan.lam, scheme=cfg.nft_scheme, upsample=cfg.rx_upsample)
    b, clipped = clip_unit_ball(spectrum.b)
    if clipped:
        log.debug("burst %s: %d received spectral samples clipped", burst_id, clipped)
    if info is not None:
        info.update(spectrum.meta, rx_clipped=clipped)
    spectrum = backrotate(NlSpectrum(spectrum.lam, "B", a=spectrum.a, b=b, meta=spectrum.meta), plan.equalizer)
    try:
        if plan.mode == "B":
            u = np.stack(u_from_b(spectrum.b[0], spectrum.b[1]))
        else:
            if np.any(spectrum.a == 0):
                raise ConstraintViolation("a vanishes", int(np.flatnonzero(spectrum.a == 0)[0]))
            qc = spectrum.b / spectrum.a
            u = np.stack(u_from_qc(qc[0], qc[1]))
    except ConstraintViolation as exc:
        raise ConstraintViolation(f"burst {burst_id}: {exc}", exc.index) from exc
    soft = extract_symbols(u / plan.kappa, g)
    if not decide:
        return soft
    bits, _ = demap_hard(soft)
    return soft, map_bits(bits)


# --- one-tap calibration ---------------------------------------------------------

def fit_calibration(received, reference, ridge: float = 1e-12) -> np.ndarray:
    """Least-squares 2x2 tap per subcarrier mapping received onto reference symbols.

    ``received`` and ``reference`` have shape (n_frames, 2, N_C); the result
    has shape (N_C, 2, 2).
    """
    Y = np.moveaxis(np.asarray(received), 0, -1).transpose(1, 0, 2)   # (N_C, 2, T)
    X = np.moveaxis(np.asarray(reference), 0, -1).transpose(1, 0, 2)
    if Y.shape[-1] < 2:
        raise ValueError("calibration needs at least two training frames")
    yy = Y @ Y.conj().transpose(0, 2, 1)
    yy = yy + ridge * np.trace(yy, axis1=1, axis2=2).real[:, None, None] * np.eye(2)
    yx = Y @ X.conj().transpose(0, 2, 1)
    return np.linalg.solve(yy, yx).conj().transpose(0, 2, 1)


def apply_calibration(taps, received) -> np.ndarray:
    """Apply taps from :func:`fit_calibration` to (..., 2, N_C) soft symbols."""
    received = np.asarray(received)
    return np.einsum("kij,...jk->...ik", taps, received)
