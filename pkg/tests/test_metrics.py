import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nfdm.framing import constellation, map_bits
from nfdm.metrics import (
    Q_CAP_DB, awgn_mi, bit_error_rate, compute_metrics, evm_q, mi_estimate, q_from_ber, rates,
)

PTS = constellation()


def awgn(snr_db, n, seed):
    rng = np.random.default_rng(seed)
    x = PTS[rng.integers(0, 32, n)]
    sigma = np.sqrt(10 ** (-snr_db / 10) / 2)
    return x, x + sigma * (rng.standard_normal(n) + 1j * rng.standard_normal(n))


def exact_mi_monte_carlo(snr_db, n=300_000, seed=99):
    """MI from the true AWGN likelihoods, by sampling."""
    x, y = awgn(snr_db, n, seed)
    n0 = 10 ** (-snr_db / 10)
    d = -np.abs(y[:, None] - PTS[None, :]) ** 2 / n0
    own = -np.abs(y - x) ** 2 / n0
    top = d.max(axis=1)
    log_mix = top + np.log(np.mean(np.exp(d - top[:, None]), axis=1))
    return float(np.mean(own - log_mix) / np.log(2))


def test_evm_exact_value():
    ref = np.tile(PTS, 40)
    est = ref + 0.1 * np.exp(1j * np.arange(ref.size))
    evm, q = evm_q(est, ref)
    assert evm == pytest.approx(0.1, rel=1e-12)
    assert q == pytest.approx(20.0, rel=1e-12)
    assert evm_q(ref, ref) == (0.0, Q_CAP_DB)
    with pytest.raises(ValueError):
        evm_q([], [])


@given(st.floats(1e-2, 1.0))
@settings(max_examples=30, deadline=None)
def test_evm_scales_linearly_with_error(scale):
    ref = np.tile(PTS, 4)
    err = np.exp(0.3j * np.arange(ref.size))
    evm1, _ = evm_q(ref + err, ref)
    evm2, q2 = evm_q(ref + scale * err, ref)
    assert evm2 == pytest.approx(scale * evm1, rel=1e-9)
    assert q2 == pytest.approx(-20 * np.log10(scale * evm1), rel=1e-9)


def test_q_from_ber_reference_values():
    # 20 log10(sqrt(2) erfcinv(2 BER)), 30-digit references
    assert q_from_ber(1e-3) == pytest.approx(9.79982256904397966, rel=1e-12)
    assert q_from_ber(2e-2) == pytest.approx(6.25094692161500081, rel=1e-12)
    assert q_from_ber(0.0) == Q_CAP_DB
    assert np.isnan(q_from_ber(0.5))


@given(st.floats(1e-12, 0.49), st.floats(1e-12, 0.49))
def test_q_from_ber_is_decreasing(b1, b2):
    lo, hi = sorted((b1, b2))
    assert q_from_ber(lo) >= q_from_ber(hi)


def test_bit_error_rate():
    bits = np.zeros(1000, np.uint8)
    flipped = bits.copy()
    flipped[:7] = 1
    assert bit_error_rate(flipped, bits) == 0.007
    with pytest.raises(ValueError):
        bit_error_rate([], [])


def test_awgn_mi_limits_and_monotonicity():
    assert awgn_mi(40.0) == pytest.approx(5.0, abs=1e-9)
    assert awgn_mi(-30.0) < 0.01
    values = [awgn_mi(s) for s in range(0, 30, 3)]
    assert np.all(np.diff(values) > 0)


@pytest.mark.parametrize("snr_db", [10.0, 15.0, 20.0])
def test_awgn_mi_matches_exact_likelihood_sampling(snr_db):
    assert awgn_mi(snr_db) == pytest.approx(exact_mi_monte_carlo(snr_db), abs=0.01)


@pytest.mark.parametrize("snr_db", [10.0, 15.0, 20.0])
def test_mi_estimator_against_quadrature(snr_db):
    x, y = awgn(snr_db, 64_000, int(snr_db))
    mi, density = mi_estimate(y, x, return_density=True)
    se = density.std(ddof=1) / np.sqrt(density.size)
    assert abs(mi - awgn_mi(snr_db)) < max(0.02, 4 * se)
    _, q = evm_q(y, x)
    assert q == pytest.approx(snr_db, abs=0.1)


def test_mi_estimator_clipping_and_noiseless():
    x = np.tile(PTS, 50)
    assert mi_estimate(x, x) == pytest.approx(5.0, abs=1e-12)
    rng = np.random.default_rng(0)
    junk = rng.standard_normal(x.size) * 10 + 0j
    assert 0.0 <= mi_estimate(junk, x) < 0.1


def test_mi_estimator_captures_correlated_noise():
    """A full-covariance auxiliary channel beats a circular one on elliptical noise."""
    rng = np.random.default_rng(3)
    x = PTS[rng.integers(0, 32, 64_000)]
    y = x + 0.25 * rng.standard_normal(x.size) + 0.02j * rng.standard_normal(x.size)
    snr_circular = 10 * np.log10(1 / np.mean(np.abs(y - x) ** 2))
    assert mi_estimate(y, x) > awgn_mi(snr_circular) + 0.1


def test_rates_reproduce_headline_arithmetic():
    # 3.6 bit/s/Hz per polarisation at eta = 1.2 over 56 GHz: about 400 Gbps net, 560 Gbps gross
    r = rates(3.6 * 1.2, 1.2, 56e9)
    assert r["se_per_pol"] == pytest.approx(3.6)
    assert r["se_total"] == pytest.approx(7.2)
    assert r["net_rate"] / 1e9 == pytest.approx(403.2)
    assert r["gross_rate"] / 1e9 == pytest.approx(560.0)
    assert r["line_rate"] / 1e9 == pytest.approx(560.0 / 1.2)
    with pytest.raises(ValueError):
        rates(5.0, 1.0, 56e9)


def test_compute_metrics_aggregates_bursts():
    rng = np.random.default_rng(8)
    bits = rng.integers(0, 2, size=(40, 2, 5 * 64), dtype=np.uint8)
    frames = [map_bits(b) for b in bits]
    symbols = np.stack([f.symbols for f in frames])
    soft = symbols + 0.05 * (rng.standard_normal(symbols.shape) + 1j * rng.standard_normal(symbols.shape))
    m = compute_metrics(soft, symbols, bits, eta=4.0, W_hz=56e9, power_dbm=-6.0)
    assert m.n_symbols_measured == soft.size
    nsr = np.mean(np.abs(soft - symbols) ** 2) / np.mean(np.abs(symbols) ** 2)
    assert m.q_db == pytest.approx(-10 * np.log10(nsr), rel=1e-12)
    assert m.q_db == pytest.approx(-10 * np.log10(2 * 0.05**2), abs=0.2)
    assert 0 < m.q_db_se < 0.1
    assert m.ber < 1e-3
    assert m.se_per_pol == pytest.approx(m.mi_bits / 4.0)
    assert m.se_per_pol_se == pytest.approx(m.mi_bits_se / 4.0)
    assert m.power_dbm_per_pol == -6.0
