"""
Physical constants, unit conversions and soliton-unit normalization.

The normalized channel is the lossless Manakov equation

    dq/dz = j * (1/2 * d^2q/dt^2 + ||q||^2 q)

obtained from the physical model with t = T_n * tau, z = Z_n * xi and
Q = sqrt(P_n) * q, where Z_n = T_n^2 / |beta2| and P_n = 1 / (gamma_eff * Z_n).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT
from scipy.constants import h as PLANCK

# Averaging factor of the Kerr term over rapidly varying polarisation states.
MANAKOV_FACTOR = 8.0 / 9.0

DB_PER_NEPER = 10.0 * np.log10(np.e)


class ConfigurationError(ValueError):
    """Raised when physical parameters cannot produce a valid normalization."""


@dataclass(frozen=True)
class FibreParams:
    carrier_freq_hz: float = 193.44e12
    loss_db_per_km: float = 0.2
    gamma_per_w_km: float = 1.3
    dispersion_ps_nm_km: float = 16.89
    span_km: float = 80.0
    n_spans: int = 12
    noise_figure_db: float = 5.0

    def __post_init__(self):
        for name in ("carrier_freq_hz", "span_km"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be strictly positive")
        # zero loss, nonlinearity or dispersion are allowed for reference channels;
        # make_scales rejects the ones that cannot be normalized
        for name in ("loss_db_per_km", "gamma_per_w_km", "dispersion_ps_nm_km"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be non-negative")
        if self.n_spans < 1:
            raise ConfigurationError("n_spans must be at least 1")

    @property
    def loss_np_per_m(self) -> float:
        """Power loss coefficient in nepers per metre."""
        return self.loss_db_per_km / DB_PER_NEPER / 1e3

    @property
    def gamma_per_w_m(self) -> float:
        return self.gamma_per_w_km / 1e3

    @property
    def span_m(self) -> float:
        return self.span_km * 1e3

    @property
    def length_m(self) -> float:
        return self.span_m * self.n_spans

    @property
    def beta2_s2_per_m(self) -> float:
        if self.dispersion_ps_nm_km == 0:
            return 0.0
        return beta2_from_D(self.dispersion_ps_nm_km, self.carrier_freq_hz)

    @property
    def span_gain_db(self) -> float:
        return self.loss_db_per_km * self.span_km

    def with_(self, **changes) -> "FibreParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class NormScales:
    t_scale_s: float
    z_scale_m: float
    p_scale_w: float
    beta2_s2_per_m: float
    gamma_eff_per_w_m: float
    length: float = field(default=0.0)  # normalized total link length

    def __post_init__(self):
        if self.beta2_s2_per_m >= 0:
            raise ConfigurationError("normalization requires anomalous dispersion (beta2 < 0)")


def beta2_from_D(dispersion_ps_nm_km: float, carrier_freq_hz: float) -> float:
    """Group-velocity dispersion in s^2/m from the dispersion parameter D.

    Parameters
    ----------
    dispersion_ps_nm_km : float
        D in ps/(nm km); must be positive (anomalous regime).
    carrier_freq_hz : float
        Carrier frequency in Hz.
    """
    if not dispersion_ps_nm_km > 0 or not carrier_freq_hz > 0:
        raise ConfigurationError("D and carrier frequency must be strictly positive")
    D = dispersion_ps_nm_km * 1e-6  # s/m^2
    wavelength = SPEED_OF_LIGHT / carrier_freq_hz
    return -D * wavelength**2 / (2 * np.pi * SPEED_OF_LIGHT)


def path_averaged_gamma(gamma_per_w_km: float, loss_db_per_km: float, span_km: float) -> float:
    """Manakov nonlinearity averaged over the power profile of one span, in 1/(W m).

    The 8/9 polarisation-averaging factor is applied here.
    """
    if loss_db_per_km < 0 or not span_km > 0:
        raise ConfigurationError("need loss >= 0 and span > 0")
    gamma = MANAKOV_FACTOR * gamma_per_w_km / 1e3
    x = loss_db_per_km / DB_PER_NEPER / 1e3 * span_km * 1e3
    if x < 1e-8:
        return gamma * (1.0 - x / 2 + x * x / 6)
    return gamma * -np.expm1(-x) / x


def manakov_gamma(fibre: FibreParams) -> float:
    """Instantaneous Manakov nonlinearity (no loss averaging), in 1/(W m)."""
    return path_averaged_gamma(fibre.gamma_per_w_km, 0.0, fibre.span_km)


def make_scales(fibre: FibreParams, t_scale_s: float = 1e-12) -> NormScales:
    if not t_scale_s > 0:
        raise ConfigurationError("time scale must be positive")
    beta2 = fibre.beta2_s2_per_m
    if beta2 == 0:
        raise ConfigurationError("normalization requires non-zero dispersion")
    gamma_eff = path_averaged_gamma(fibre.gamma_per_w_km, fibre.loss_db_per_km, fibre.span_km)
    if gamma_eff <= 0:
        raise ConfigurationError("effective nonlinearity must be positive")
    z_scale = t_scale_s**2 / abs(beta2)
    p_scale = 1.0 / (gamma_eff * z_scale)
    return NormScales(
        t_scale_s=t_scale_s,
        z_scale_m=z_scale,
        p_scale_w=p_scale,
        beta2_s2_per_m=beta2,
        gamma_eff_per_w_m=gamma_eff,
        length=fibre.length_m / z_scale,
    )


@dataclass(frozen=True)
class TimeBurst:
    """Dual-polarisation complex envelope on a uniform, centred time grid.

    ``q`` has shape (2, n) (or (..., 2, n) for batches); sample k sits at
    time (k - n//2) * dt.
    """

    q: np.ndarray
    dt: float
    normalized: bool = False

    def __post_init__(self):
        q = np.asarray(self.q, dtype=np.complex128)
        if q.ndim < 2 or q.shape[-2] != 2:
            raise ValueError("burst must have a polarisation axis of length 2")
        if not np.all(np.isfinite(q)):
            raise ValueError("burst contains non-finite samples")
        object.__setattr__(self, "q", q)

    @property
    def n(self) -> int:
        return self.q.shape[-1]

    @property
    def t(self) -> np.ndarray:
        return (np.arange(self.n) - self.n // 2) * self.dt

    def energy(self) -> np.ndarray:
        """Energy per polarisation (last axis integrated)."""
        return np.sum(np.abs(self.q) ** 2, axis=-1) * self.dt

    def replace(self, q) -> "TimeBurst":
        return TimeBurst(q, self.dt, self.normalized)


def to_normalized(burst: TimeBurst, scales: NormScales) -> TimeBurst:
    if burst.normalized:
        return burst
    return TimeBurst(burst.q / np.sqrt(scales.p_scale_w), burst.dt / scales.t_scale_s, True)


def from_normalized(burst: TimeBurst, scales: NormScales) -> TimeBurst:
    if not burst.normalized:
        return burst
    return TimeBurst(burst.q * np.sqrt(scales.p_scale_w), burst.dt * scales.t_scale_s, False)


def dbm_to_w(p_dbm):
    return 1e-3 * 10 ** (np.asarray(p_dbm) / 10)


def w_to_dbm(p_w):
    return 10 * np.log10(np.asarray(p_w) / 1e-3)


def photon_energy(carrier_freq_hz: float) -> float:
    return PLANCK * carrier_freq_hz
