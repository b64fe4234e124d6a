"""Link quality metrics: EVM and Q-factor, BER, mutual information, rates."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import erfcinv, logsumexp

from .framing import constellation, demap_hard

log = logging.getLogger(__name__)

Q_CAP_DB = 60.0
MI_REGULARIZATION = 1e-12


def evm_q(estimates, reference):
    """RMS error vector magnitude and Q = -20 log10(EVM), capped at 60 dB."""
    est = np.ravel(estimates)
    ref = np.ravel(reference)
    if est.size == 0:
        raise ValueError("no symbols to evaluate")
    if est.size < 1000:
        log.warning("EVM from only %d symbols", est.size)
    evm = float(np.sqrt(np.mean(np.abs(est - ref) ** 2) / np.mean(np.abs(ref) ** 2)))
    return evm, _q_from_evm(evm)


def _q_from_evm(evm: float) -> float:
    return Q_CAP_DB if evm <= 10 ** (-Q_CAP_DB / 20) else float(-20 * np.log10(evm))


def bit_error_rate(bits_hat, bits) -> float:
    bits_hat, bits = np.ravel(bits_hat), np.ravel(bits)
    if bits.size == 0:
        raise ValueError("no bits to evaluate")
    return float(np.count_nonzero(bits_hat != bits) / bits.size)


def q_from_ber(ber: float) -> float:
    """Q-factor in dB implied by a BER through the Gaussian tail relation."""
    if ber <= 0:
        return Q_CAP_DB
    if ber >= 0.5:
        return float("nan")
    return min(Q_CAP_DB, float(20 * np.log10(np.sqrt(2) * erfcinv(2 * ber))))


def _as_real_pairs(z):
    return np.stack([z.real, z.imag], axis=-1)


def mi_estimate(samples, reference, constellation_id: str = "32-cross", return_density: bool = False):
    """Mutual information (bits/symbol) under a per-point bivariate Gaussian auxiliary channel.

    Each constellation point gets its own fitted mean and full 2x2 covariance.
    The estimate is the average information density, clipped to [0, log2 M].
    With ``return_density`` the per-sample densities are returned as well,
    which is what the standard error is computed from.
    """
    pts = constellation(constellation_id)
    m = pts.size
    y = np.ravel(samples)
    ref = np.ravel(reference)
    labels = np.argmin(np.abs(ref[:, None] - pts) ** 2, axis=1)
    yr = _as_real_pairs(y)
    counts = np.bincount(labels, minlength=m)
    if counts.min() < 30:
        log.warning("MI estimate with only %d samples for some constellation point", counts.min())

    pooled = np.cov((yr - _as_real_pairs(pts[labels])).T) if y.size > 2 else np.eye(2)
    logp = np.empty((y.size, m))
    for x in range(m):
        sel = labels == x
        if counts[x] >= 3:
            mu = yr[sel].mean(axis=0)
            cov = np.cov(yr[sel].T)
        else:
            mu = _as_real_pairs(pts[x])
            cov = pooled
        cov = cov + MI_REGULARIZATION * np.eye(2)
        det = np.linalg.det(cov)
        if det <= 0:
            log.info("singular covariance for point %d regularized", x)
            cov = cov + MI_REGULARIZATION * max(1.0, np.trace(cov)) * np.eye(2)
            det = np.linalg.det(cov)
        d = yr - mu
        maha = np.einsum("ni,ij,nj->n", d, np.linalg.inv(cov), d)
        logp[:, x] = -0.5 * maha - 0.5 * np.log(det) - np.log(2 * np.pi)
    density = (logp[np.arange(y.size), labels] - (logsumexp(logp, axis=1) - np.log(m))) / np.log(2)
    mi = float(np.clip(np.mean(density), 0.0, np.log2(m)))
    return (mi, density) if return_density else mi


def awgn_mi(snr_db: float, constellation_id: str = "32-cross", order: int = 48) -> float:
    """Exact mutual information of the constellation over complex AWGN (Gauss-Hermite quadrature)."""
    pts = constellation(constellation_id)
    m = pts.size
    es = np.mean(np.abs(pts) ** 2)
    sigma = np.sqrt(es / 10 ** (snr_db / 10))
    x, w = np.polynomial.hermite.hermgauss(order)
    z = sigma * (x[:, None] + 1j * x[None, :]).ravel()
    wz = (w[:, None] * w[None, :]).ravel() / np.pi
    diff = pts[:, None, None] - pts[None, :, None] + z[None, None, :]   # (x, x', z)
    expo = -(np.abs(diff) ** 2 - np.abs(z) ** 2) / sigma**2
    inner = logsumexp(expo, axis=1) / np.log(2)   # (x, z)
    return float(np.log2(m) - np.mean(inner @ wz))


def rates(mi_bits: float, eta: float, W_hz: float) -> dict:
    """Spectral efficiencies (bit/s/Hz) and rates (bit/s) for dual-polarisation transmission."""
    if not eta > 1:
        raise ValueError("eta must exceed 1")
    se_per_pol = mi_bits / eta
    gross = 2 * np.log2(32) * W_hz
    return {
        "se_per_pol": se_per_pol,
        "se_total": 2 * se_per_pol,
        "net_rate": 2 * se_per_pol * W_hz,
        "gross_rate": gross,
        "line_rate": gross / eta,
    }


@dataclass
class MetricsReport:
    evm_rms: float
    q_db: float
    q_db_se: float
    ber: float
    q_ber_db: float
    mi_bits: float
    mi_bits_se: float
    se_per_pol: float
    se_per_pol_se: float
    se_total: float
    net_rate_gbps: float
    gross_rate_gbps: float
    line_rate_gbps: float
    n_symbols_measured: int
    power_dbm_per_pol: float

    def as_dict(self) -> dict:
        return asdict(self)


def compute_metrics(soft, symbols, bits, *, eta: float, W_hz: float, power_dbm: float) -> MetricsReport:
    """Aggregate metrics over bursts.

    ``soft`` and ``symbols`` have shape (n_bursts, 2, N_C) and ``bits``
    (n_bursts, 2, 5 N_C). Standard errors use burst-to-burst spread for Q and
    the sample spread of the information density for MI.
    """
    soft = np.asarray(soft)
    symbols = np.asarray(symbols)
    n_bursts = soft.shape[0]
    evm, q_db = evm_q(soft, symbols)
    per_burst = np.mean(np.abs(soft - symbols) ** 2, axis=(1, 2)) / np.mean(np.abs(symbols) ** 2)
    mse = per_burst.mean()
    q_se = (10 / np.log(10)) * per_burst.std(ddof=1) / np.sqrt(n_bursts) / mse if n_bursts > 1 and mse > 0 else 0.0
    bits_hat, _ = demap_hard(soft)
    ber = bit_error_rate(bits_hat, bits)
    mi, density = mi_estimate(soft, symbols, return_density=True)
    mi_se = float(density.std(ddof=1) / np.sqrt(density.size)) if density.size > 1 else 0.0
    r = rates(mi, eta, W_hz)
    return MetricsReport(
        evm_rms=evm, q_db=q_db, q_db_se=float(q_se), ber=ber, q_ber_db=q_from_ber(ber),
        mi_bits=mi, mi_bits_se=mi_se, se_per_pol=r["se_per_pol"], se_per_pol_se=mi_se / eta,
        se_total=r["se_total"], net_rate_gbps=r["net_rate"] / 1e9, gross_rate_gbps=r["gross_rate"] / 1e9,
        line_rate_gbps=r["line_rate"] / 1e9, n_symbols_measured=int(soft.size), power_dbm_per_pol=power_dbm,
    )
