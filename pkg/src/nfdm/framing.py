"""
Symbol framing: 32-QAM mapping, construction of the subcarrier-multiplexed
nonlinear-domain signal u(lambda), guard-interval bookkeeping and burst
truncation/recovery.

All DFTs here are unitary and "centred": index n//2 of an array of length n
holds the zero time / zero frequency sample.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

log = logging.getLogger(__name__)

BITS_PER_SYMBOL = 5


def fft_c(x, axis=-1):
    """Unitary DFT with centred input and output ordering."""
    x = np.fft.ifftshift(x, axes=axis)
    return np.fft.fftshift(np.fft.fft(x, axis=axis, norm="ortho"), axes=axis)


def ifft_c(x, axis=-1):
    """Unitary inverse DFT with centred input and output ordering."""
    x = np.fft.ifftshift(x, axes=axis)
    return np.fft.fftshift(np.fft.ifft(x, axis=axis, norm="ortho"), axes=axis)


def _round_even(x: float) -> int:
    return int(2 * round(x / 2))


# --- constellation -----------------------------------------------------------

def _cross32():
    gray = [i ^ (i >> 1) for i in range(8)]
    xs = [-7, -5, -3, -1, 1, 3, 5, 7]
    ys = [-3, -1, 1, 3]
    # outer columns of the 8x4 Gray rectangle are folded onto the top/bottom arms
    fold = {
        (-7, -3): (-3, -5), (-7, -1): (-1, -5), (-7, 1): (-3, 5), (-7, 3): (-1, 5),
        (7, -3): (3, -5), (7, -1): (1, -5), (7, 1): (3, 5), (7, 3): (1, 5),
    }
    points = np.empty(32, dtype=np.complex128)
    for i, x in enumerate(xs):
        for j, y in enumerate(ys):
            label = (gray[i] << 2) | gray[j]
            px, py = fold.get((x, y), (x, y))
            points[label] = px + 1j * py
    return points / np.sqrt(np.mean(np.abs(points) ** 2))


CONSTELLATIONS = {"32-cross": _cross32()}


def constellation(constellation_id: str = "32-cross") -> np.ndarray:
    """Constellation points indexed by their bit label (MSB first)."""
    return CONSTELLATIONS[constellation_id]


@dataclass(frozen=True)
class SymbolFrame:
    """One burst worth of symbols: ``symbols`` is (2, N_C), ``bits`` is (2, 5*N_C)."""

    symbols: np.ndarray
    bits: np.ndarray
    constellation_id: str = "32-cross"

    @property
    def n_carriers(self) -> int:
        return self.symbols.shape[-1]

    @property
    def labels(self) -> np.ndarray:
        return bits_to_labels(self.bits)


def bits_to_labels(bits):
    b = np.asarray(bits, dtype=np.int64).reshape(*np.shape(bits)[:-1], -1, BITS_PER_SYMBOL)
    weights = 1 << np.arange(BITS_PER_SYMBOL - 1, -1, -1)
    return b @ weights


def labels_to_bits(labels):
    labels = np.asarray(labels, dtype=np.int64)
    shifts = np.arange(BITS_PER_SYMBOL - 1, -1, -1)
    bits = (labels[..., None] >> shifts) & 1
    return bits.reshape(*labels.shape[:-1], -1).astype(np.uint8)


def map_bits(bits, constellation_id: str = "32-cross") -> SymbolFrame:
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.ndim == 1:
        if bits.size % (2 * BITS_PER_SYMBOL):
            raise ValueError("bit count must be a multiple of 10 (two polarisations, 5 bits each)")
        bits = bits.reshape(2, -1)
    if bits.shape[-1] % BITS_PER_SYMBOL:
        raise ValueError("bits per polarisation must be a multiple of 5")
    pts = constellation(constellation_id)
    return SymbolFrame(pts[bits_to_labels(bits)], bits, constellation_id)


def demap_hard(samples, constellation_id: str = "32-cross"):
    """Minimum-distance decisions. Returns ``(bits, decided_symbols)``.

    Exact ties resolve to the lowest label.
    """
    pts = constellation(constellation_id)
    samples = np.asarray(samples)
    d = np.abs(samples[..., None] - pts) ** 2
    labels = np.argmin(d, axis=-1)
    return labels_to_bits(labels), pts[labels]


# --- geometry ----------------------------------------------------------------

@dataclass(frozen=True)
class FrameGeometry:
    n_carriers: int
    oversampling: int = 8
    eta: float = 4.0
    W_hz: float = 56e9

    def __post_init__(self):
        if self.n_carriers < 2 or self.n_carriers % 2:
            raise ValueError("number of subcarriers must be even and >= 2")
        if int(self.oversampling) != self.oversampling or self.oversampling < 2:
            raise ValueError("oversampling must be an integer >= 2")
        if not self.eta > 1:
            raise ValueError("eta must exceed 1")
        if not self.W_hz > 0:
            raise ValueError("bandwidth must be positive")

    @property
    def T0_s(self) -> float:
        return self.n_carriers / self.W_hz

    @property
    def TG_s(self) -> float:
        return (self.eta - 1) * self.T0_s

    @property
    def dt(self) -> float:
        return 1.0 / (self.oversampling * self.W_hz)

    @property
    def n_symbol(self) -> int:
        """Samples spanning one OFDM symbol (T0)."""
        return self.n_carriers * self.oversampling

    @cached_property
    def n_burst(self) -> int:
        """Length of the processing window (and of the lambda grid)."""
        if self.eta >= 2:
            return self.n_symbol + _pad_count(self.n_symbol * (self.eta - 1))
        return 2 * self.n_symbol

    @cached_property
    def n_tx(self) -> int:
        """Transmitted burst length (the burst period eta*T0)."""
        if self.eta >= 2:
            return self.n_burst
        return self.n_symbol + _pad_count(self.n_symbol * (self.eta - 1))

    @property
    def frame_duration_s(self) -> float:
        return self.eta * self.T0_s


def _pad_count(x: float) -> int:
    n = _round_even(x)
    if not np.isclose(n, x, rtol=0, atol=1e-9):
        log.warning("non-integer pad length %.6g rounded to %d", x, n)
    return n


def guard_interval(W_hz: float, beta2_s2_per_m: float, length_m: float) -> float:
    """Guard time needed to absorb dispersive broadening of a band of width W."""
    return np.pi * W_hz * abs(beta2_s2_per_m) * length_m


def carriers_for_eta(eta: float, W_hz: float, guard_s: float) -> int:
    """Even subcarrier count satisfying eta = 1 + W*T_G/N_C as closely as possible."""
    return max(2, _round_even(W_hz * guard_s / (eta - 1)))


def eta_for_carriers(n_carriers: int, W_hz: float, guard_s: float) -> float:
    return 1.0 + W_hz * guard_s / n_carriers


# --- signal construction -----------------------------------------------------

def zero_pad(x, n_zeros: int):
    """Pad ``n_zeros/2`` zeros on both ends of the last axis."""
    if n_zeros < 0 or n_zeros % 2:
        raise ValueError("zero count must be a non-negative even integer")
    x = np.asarray(x)
    half = n_zeros // 2
    return np.pad(x, [(0, 0)] * (x.ndim - 1) + [(half, half)])


def crop(x, n: int):
    """Keep the centred ``n`` samples of the last axis."""
    x = np.asarray(x)
    extra = x.shape[-1] - n
    if extra < 0 or extra % 2:
        raise ValueError("cannot crop symmetrically")
    return x[..., extra // 2: extra // 2 + n]


def build_u(symbols, geometry: FrameGeometry) -> np.ndarray:
    """Sample the subcarrier-multiplexed signal u(lambda) on the processing grid.

    ``symbols`` has subcarriers on the last axis in centred order. The output
    has ``geometry.n_burst`` samples and equals the symbols at the subcarrier
    grid points (the grid point spacing between subcarriers is n_burst/n_symbol).
    """
    symbols = np.asarray(symbols, dtype=np.complex128)
    if symbols.shape[-1] != geometry.n_carriers:
        raise ValueError("symbol count does not match the geometry")
    g = geometry
    d = ifft_c(zero_pad(symbols, g.n_symbol - g.n_carriers))
    u = fft_c(zero_pad(d, g.n_burst - g.n_symbol))
    return u * np.sqrt(g.n_burst / g.n_symbol)


def extract_symbols(u, geometry: FrameGeometry) -> np.ndarray:
    """Inverse of :func:`build_u`: window the symbol period and read the subcarriers."""
    g = geometry
    d = ifft_c(np.asarray(u) / np.sqrt(g.n_burst / g.n_symbol))
    return crop(fft_c(crop(d, g.n_symbol)), g.n_carriers)


def subcarrier_lambda_index(geometry: FrameGeometry) -> np.ndarray:
    """Fractional grid index of each subcarrier on the processing grid."""
    k = np.arange(geometry.n_carriers) - geometry.n_carriers // 2
    return geometry.n_burst // 2 + k * geometry.n_burst / geometry.n_symbol


def truncate_burst(q, geometry: FrameGeometry):
    """Cut a processing-window burst down to the transmitted period (eta < 2)."""
    q = np.asarray(q)
    if q.shape[-1] != geometry.n_burst:
        raise ValueError(f"expected {geometry.n_burst} samples, got {q.shape[-1]}")
    if geometry.eta >= 2:
        return q
    return crop(q, geometry.n_tx)


def recover_burst(q, geometry: FrameGeometry):
    """Zero-pad a transmitted burst back to the processing window."""
    q = np.asarray(q)
    if q.shape[-1] != geometry.n_tx:
        raise ValueError(f"expected {geometry.n_tx} samples, got {q.shape[-1]}")
    if geometry.eta >= 2:
        return q
    return zero_pad(q, geometry.n_burst - geometry.n_tx)
