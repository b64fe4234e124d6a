"""
Maps between the modulated signal u(lambda) and the continuous nonlinear
spectrum, for both modulation schemes.

qc-modulation transforms each polarisation separately,

    qc_i = sqrt(exp(|u_i|^2) - 1) * exp(j arg u_i),

while b-modulation scales both polarisations jointly into the open unit ball,

    b_i = u_i * sqrt((1 - exp(-s_u)) / s_u),   s_u = |u_1|^2 + |u_2|^2,

and completes the spectrum with the minimum-phase a(lambda) whose modulus is
sqrt(1 - |b_1|^2 - |b_2|^2).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

SERIES_THRESHOLD = 1e-8
CLIP_LIMIT = 0.9999
# exp(|u|^2) overflows float64 just above 709
MAX_ENERGY_DENSITY = 700.0

# +1 selects the completion analytic in the upper half lambda-plane.
HILBERT_SIGN = +1


class AmplitudeRangeError(OverflowError):
    pass


class ConstraintViolation(ValueError):
    """|b_1|^2 + |b_2|^2 >= 1 (or a vanishing a) somewhere on the grid."""

    def __init__(self, message, index=None):
        super().__init__(message if index is None else f"{message} at grid index {index}")
        self.index = index


@dataclass
class NlSpectrum:
    """Continuous nonlinear spectrum on a uniform, centred lambda grid.

    In mode ``"B"`` the fields ``a`` and ``b`` (shape (..., 2, n)) are set; in
    mode ``"QC"`` ``qc`` (shape (..., 2, n)) is set and ``a``/``b`` may be
    attached as well.
    """

    lam: np.ndarray
    mode: str
    a: np.ndarray | None = None
    b: np.ndarray | None = None
    qc: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("B", "QC"):
            raise ValueError(f"unknown spectrum mode {self.mode!r}")
        n = self.lam.shape[-1]
        for arr in (self.a, self.b, self.qc):
            if arr is not None and arr.shape[-1] != n:
                raise ValueError("spectrum arrays must share the grid length")

    @property
    def b1(self):
        return self.b[..., 0, :]

    @property
    def b2(self):
        return self.b[..., 1, :]

    @property
    def s_b(self):
        return np.sum(np.abs(self.b) ** 2, axis=-2)


def _phase_scale(x, f):
    """x * sqrt(f(|x|^2)/|x|^2), pointwise; f handles the small-argument series."""
    s = np.abs(x) ** 2
    return x * np.sqrt(f(s))


def qc_from_u(u1, u2):
    u1, u2 = np.asarray(u1), np.asarray(u2)
    if max(np.max(np.abs(u1) ** 2, initial=0), np.max(np.abs(u2) ** 2, initial=0)) > MAX_ENERGY_DENSITY:
        raise AmplitudeRangeError("|u|^2 too large for the qc transform")

    def ratio(s):
        small = s < SERIES_THRESHOLD
        out = np.empty_like(s)
        out[small] = 1 + s[small] / 2 + s[small] ** 2 / 6
        out[~small] = np.expm1(s[~small]) / s[~small]
        return out

    return _phase_scale(u1, ratio), _phase_scale(u2, ratio)


def u_from_qc(qc1, qc2):
    def ratio(s):
        small = s < SERIES_THRESHOLD
        out = np.empty_like(s)
        out[small] = 1 - s[small] / 2 + s[small] ** 2 / 3
        out[~small] = np.log1p(s[~small]) / s[~small]
        return out

    return _phase_scale(np.asarray(qc1), ratio), _phase_scale(np.asarray(qc2), ratio)


def b_from_u(u1, u2):
    u1, u2 = np.asarray(u1), np.asarray(u2)
    s = np.abs(u1) ** 2 + np.abs(u2) ** 2
    small = s < SERIES_THRESHOLD
    A2 = np.empty_like(s)
    A2[small] = 1 - s[small] / 2 + s[small] ** 2 / 6
    A2[~small] = -np.expm1(-s[~small]) / s[~small]
    A = np.sqrt(A2)
    return A * u1, A * u2


def u_from_b(b1, b2):
    b1, b2 = np.asarray(b1), np.asarray(b2)
    s = np.abs(b1) ** 2 + np.abs(b2) ** 2
    bad = np.flatnonzero(s >= 1)
    if bad.size:
        raise ConstraintViolation("|b1|^2+|b2|^2 >= 1", int(bad[0]))
    small = s < SERIES_THRESHOLD
    g2 = np.empty_like(s)
    g2[small] = 1 + s[small] / 2 + s[small] ** 2 / 3
    g2[~small] = -np.log1p(-s[~small]) / s[~small]
    g = np.sqrt(g2)
    return g * b1, g * b2


def clip_unit_ball(b, limit: float = CLIP_LIMIT):
    """Radially clip (..., 2, n) coefficients to |b1|^2+|b2|^2 <= limit.

    Returns the clipped array and the number of clipped grid points.
    """
    b = np.asarray(b)
    s = np.sum(np.abs(b) ** 2, axis=-2, keepdims=True)
    over = s > limit
    count = int(np.count_nonzero(over))
    if count:
        log.info("clipped %d spectral samples to |b|^2=%g", count, limit)
        b = np.where(over, b * np.sqrt(limit / np.where(over, s, 1.0)), b)
    return b, count


def _check_grid(lam):
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    if n < 4 or n % 2:
        raise ValueError("lambda grid must have an even number of points")
    d = np.diff(lam)
    if not np.allclose(d, d[0], rtol=1e-9, atol=0):
        raise ValueError("lambda grid must be uniform")
    if abs(lam[n // 2]) > 1e-9 * abs(d[0]):
        raise ValueError("lambda grid must be centred (lambda = 0 at index n//2)")
    return n


def hilbert_periodic(x, axis=-1):
    """Discrete Hilbert transform on a periodic grid (spectral sign multiplier).

    DC and Nyquist components map to zero. With ``HILBERT_SIGN = +1``,
    ``x + 1j*hilbert_periodic(x)`` extends to a function analytic in the upper
    half lambda-plane.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[axis]
    X = np.fft.fft(np.fft.ifftshift(x, axes=axis), axis=axis)
    k = np.fft.fftfreq(n) * n
    mult = -1j * np.sign(k) * HILBERT_SIGN
    mult[np.abs(k) == n // 2] = 0
    shape = [1] * x.ndim
    shape[axis] = n
    out = np.fft.ifft(X * mult.reshape(shape), axis=axis)
    return np.fft.fftshift(out.real, axes=axis)


def _interpolate(f, factor: int):
    """Trigonometric interpolation of centred samples onto a grid ``factor`` times denser."""
    if factor == 1:
        return f
    n = f.shape[-1]
    coeffs = np.fft.fftshift(np.fft.ifft(np.fft.ifftshift(f, axes=-1), axis=-1), axes=-1)
    pad = n * (factor - 1) // 2
    coeffs = np.pad(coeffs, [(0, 0)] * (f.ndim - 1) + [(pad, n * (factor - 1) - pad)])
    return np.fft.fftshift(np.fft.fft(np.fft.ifftshift(coeffs, axes=-1), axis=-1), axes=-1)


def minimum_phase(log_abs, oversample: int = 1):
    """exp(log|a| + j H(log|a|)) for samples on a fine grid, decimated by ``oversample``."""
    n_fine = log_abs.shape[-1]
    a = np.exp(log_abs + 1j * hilbert_periodic(log_abs))
    n = n_fine // oversample
    start = n_fine // 2 - (n // 2) * oversample
    return a[..., start::oversample][..., :n]


def a_from_b(b1, b2, lam, oversample: int = 8, clip: float = CLIP_LIMIT, return_clipped=False):
    """Minimum-phase a(lambda) with |a|^2 = 1 - |b1|^2 - |b2|^2.

    The samples of b are interpolated trigonometrically onto a grid
    ``oversample`` times denser before the log-modulus is formed, which
    suppresses cepstral aliasing when |b| approaches 1.
    """
    _check_grid(lam)
    b = np.stack([np.asarray(b1), np.asarray(b2)], axis=-2)
    s0 = np.sum(np.abs(b) ** 2, axis=-2)
    bad = np.flatnonzero(s0.reshape(-1) >= 1)
    if bad.size:
        raise ConstraintViolation("|b1|^2+|b2|^2 >= 1", int(bad[0] % s0.shape[-1]))
    s = np.sum(np.abs(_interpolate(b, oversample)) ** 2, axis=-2)
    over = s > clip
    n_clipped = int(np.count_nonzero(over))
    if n_clipped:
        log.info("a_from_b: %d interpolated samples clipped to %g", n_clipped, clip)
        s = np.minimum(s, clip)
    a = minimum_phase(0.5 * np.log1p(-s), oversample)
    return (a, n_clipped) if return_clipped else a


def a_from_qc(qc1, qc2, lam, oversample: int = 8):
    """Minimum-phase a(lambda) with |a|^2 = 1 / (1 + |qc1|^2 + |qc2|^2)."""
    _check_grid(lam)
    qc = np.stack([np.asarray(qc1), np.asarray(qc2)], axis=-2)
    p = np.sum(np.abs(_interpolate(qc, oversample)) ** 2, axis=-2)
    return minimum_phase(-0.5 * np.log1p(p), oversample)
