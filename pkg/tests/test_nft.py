import numpy as np
import pytest
from scipy.special import loggamma

from nfdm.framing import FrameGeometry
from nfdm.nft import (
    CONVENTION, accuracy_probe, forward_nft, inverse_nft, lambda_grid, qc_from_ab, roundtrip_report,
    spectral_energy, time_grid,
)
from nfdm.spectral_maps import ConstraintViolation, NlSpectrum, a_from_b
from nfdm.units import TimeBurst


def sech_burst(amplitude, n, window=40.0):
    h = window / n
    t = time_grid(n, h)
    q = np.stack([amplitude / np.cosh(t), np.zeros(n)]).astype(complex)
    return TimeBurst(q, h, normalized=True)


def sech_scattering(amplitude, lam):
    """Closed-form scattering data of A sech(t) in this module's convention."""
    z = 0.5 - 1j * lam
    a = np.exp(2 * loggamma(z) - loggamma(z + amplitude) - loggamma(z - amplitude))
    b = np.sin(np.pi * amplitude) / np.cosh(np.pi * lam)
    return a, b


def test_sech_oracle_is_unimodular():
    lam = np.linspace(-3, 3, 101)
    a, b = sech_scattering(0.4, lam)
    np.testing.assert_allclose(np.abs(a) ** 2 + np.abs(b) ** 2, 1.0, atol=1e-13)


def test_zero_burst():
    burst = TimeBurst(np.zeros((2, 64)), 0.1, normalized=True)
    s = forward_nft(burst)
    np.testing.assert_allclose(s.a, 1.0, atol=1e-15)
    assert not np.any(s.b)
    assert not s.meta["boundary_violation"]


@pytest.mark.parametrize("scheme", ["split", "exact"])
def test_sech_oracle_second_order(scheme):
    lam = np.linspace(-3, 3, 61)
    a_ref, b_ref = sech_scattering(0.4, lam)
    errs = []
    for n in (1000, 2000, 4000):
        s = forward_nft(sech_burst(0.4, n), lam, scheme=scheme)
        errs.append(max(np.max(np.abs(s.b[0] - b_ref)), np.max(np.abs(s.a - a_ref))))
        assert np.max(np.abs(s.b[1])) == 0
    assert errs[-1] < 1e-4
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.9)


def test_weak_signal_matches_fourier_transform():
    n, h = 1024, 0.05
    t = time_grid(n, h)
    q1 = 0.01 * np.exp(-t**2 / 2) * np.exp(0.4j * t)
    burst = TimeBurst(np.stack([q1, 0.5 * q1]), h, normalized=True)
    s = forward_nft(burst)
    # b_i(lam) ~ h * sum q_i exp(-2j lam t)
    ft = h * np.exp(-2j * np.outer(s.lam, t)) @ burst.q.T
    peak = np.argmax(np.abs(ft[:, 0]))
    for i in range(2):
        assert abs(abs(s.b[i, peak]) - abs(ft[peak, i])) < 0.01 * abs(ft[peak, i])


def test_polarisation_symmetries():
    rng = np.random.default_rng(4)
    n, h = 256, 0.1
    t = time_grid(n, h)
    env = np.exp(-t**2 / 8)
    q = env * (rng.normal(size=(2, n)) + 1j * rng.normal(size=(2, n))) * 0.3
    s = forward_nft(TimeBurst(q, h, True))
    swapped = forward_nft(TimeBurst(q[::-1], h, True))
    np.testing.assert_array_equal(swapped.b, s.b[::-1])
    np.testing.assert_array_equal(swapped.a, s.a)
    rotated = forward_nft(TimeBurst(q * np.array([[1], [np.exp(0.9j)]]), h, True))
    np.testing.assert_allclose(np.abs(rotated.b), np.abs(s.b), atol=1e-13)
    np.testing.assert_allclose(np.abs(rotated.a), np.abs(s.a), atol=1e-13)


def test_boundary_violation_flag():
    n, h = 128, 0.1
    q = np.ones((2, n), complex) * 0.1
    assert forward_nft(TimeBurst(q, h, True)).meta["boundary_violation"]


def _random_b_frame(n_carriers=32, oversampling=8, s_max=0.5, seed=0):
    from nfdm.framing import build_u, constellation
    from nfdm.spectral_maps import b_from_u

    g = FrameGeometry(n_carriers, oversampling, 4.0)
    h = 1.0 / oversampling
    lam = lambda_grid(g.n_burst, h)
    rng = np.random.default_rng(seed)
    u = build_u(constellation()[rng.integers(0, 32, size=(2, n_carriers))], g)
    target = -np.log1p(-s_max)
    u *= np.sqrt(target / np.max(np.sum(np.abs(u) ** 2, axis=0)))
    b = np.stack(b_from_u(u[0], u[1]))
    return NlSpectrum(lam, "B", a=a_from_b(b[0], b[1], lam), b=b), h


def test_round_trip_on_b_modulated_frame():
    spectrum, h = _random_b_frame()
    assert spectrum.s_b.max() == pytest.approx(0.5)
    report = roundtrip_report(spectrum, h)
    assert report.roundtrip_rel_rms < 1e-3
    assert report.unimodularity_residual < 1e-4
    assert report.energy_residual < 5e-3


def test_energy_identity_for_exact_discrete_spectrum():
    n, h = 512, 0.05
    t = time_grid(n, h)
    q = np.stack([0.6 * np.exp(-t**2), 0.3j * np.exp(-(t - 1) ** 2)])
    burst = TimeBurst(q, h, True)
    s = forward_nft(burst)
    assert spectral_energy(s) == pytest.approx(np.sum(burst.energy()), rel=1e-3)
    rebuilt = inverse_nft(s, h)
    np.testing.assert_allclose(rebuilt.q, q, atol=1e-10)


def test_inverse_of_zero_spectrum():
    lam = lambda_grid(64, 0.1)
    s = NlSpectrum(lam, "B", a=np.ones(64, complex), b=np.zeros((2, 64), complex))
    assert not np.any(inverse_nft(s, 0.1).q)


def test_inverse_rejects_bad_inputs():
    lam = lambda_grid(64, 0.1)
    s = NlSpectrum(lam, "B", a=np.ones(64, complex), b=np.zeros((2, 64), complex))
    with pytest.raises(ValueError):
        inverse_nft(s, 0.2)
    b = np.zeros((2, 64), complex)
    b[0, 3] = 1.0
    with pytest.raises(ConstraintViolation):
        inverse_nft(NlSpectrum(lam, "B", a=np.ones(64, complex), b=b), 0.1)


def test_qc_from_ab():
    lam = lambda_grid(16, 0.1)
    zero = qc_from_ab(NlSpectrum(lam, "B", a=np.ones(16, complex), b=np.zeros((2, 16), complex)))
    assert not np.any(zero.qc)
    b = np.zeros((2, 16), complex)
    b[0] = np.sqrt(0.5)
    qc = qc_from_ab(NlSpectrum(lam, "B", a=np.full(16, np.sqrt(0.5) + 0j), b=b)).qc
    np.testing.assert_allclose(np.abs(qc[0]) ** 2, 1.0)
    with pytest.raises(ConstraintViolation):
        qc_from_ab(NlSpectrum(lam, "B", a=np.zeros(16, complex), b=b))


def test_qc_round_trip_through_min_phase():
    from nfdm.nft import ab_from_qc

    spectrum, _ = _random_b_frame(s_max=0.8)
    qc = qc_from_ab(spectrum)
    np.testing.assert_allclose(qc.qc * spectrum.a, spectrum.b, atol=1e-15)
    # without interpolation both completions see the same |a| on the grid
    b = spectrum.b
    a = a_from_b(b[0], b[1], spectrum.lam, oversample=1)
    qc = qc_from_ab(NlSpectrum(spectrum.lam, "B", a=a, b=b))
    back = ab_from_qc(NlSpectrum(spectrum.lam, "QC", qc=qc.qc), oversample=1)
    assert np.max(np.abs(back.b - b)) < 1e-9


def _normalized_ssfm(q, h, z, steps):
    """Lossless normalized Manakov split-step: dq/dz = j(q_tt/2 + ||q||^2 q)."""
    w = 2 * np.pi * np.fft.fftfreq(q.shape[-1], h)
    dz = z / steps
    half = np.exp(-0.5j * w**2 * dz / 2)
    for _ in range(steps):
        q = np.fft.ifft(np.fft.fft(q) * half)
        q = q * np.exp(1j * np.sum(np.abs(q) ** 2, axis=0) * dz)
        q = np.fft.ifft(np.fft.fft(q) * half)
    return q


def test_channel_phase_convention_under_nonlinear_propagation():
    n, h = 1024, 0.05
    t = time_grid(n, h)
    q0 = np.stack([0.7 * np.exp(-t**2 / 2), 0.5 * np.exp(-(t - 0.5) ** 2 / 2) * np.exp(0.3j * t)])
    z = 1.5
    qz = _normalized_ssfm(q0, h, z, 3000)
    lam = np.linspace(-2, 2, 41)
    s0 = forward_nft(TimeBurst(q0, h, True), lam, scheme="exact", upsample=4)
    sz = forward_nft(TimeBurst(qz, h, True), lam, scheme="exact", upsample=4)
    predicted = s0.b * CONVENTION.channel_phase(lam, z)
    assert np.max(np.abs(sz.b - predicted)) < 1e-3
    assert np.max(np.abs(sz.a - s0.a)) < 1e-3
    # the opposite sign is clearly wrong
    assert np.max(np.abs(sz.b - s0.b * CONVENTION.channel_phase(lam, -z))) > 0.1


def test_accuracy_probe_trivial_at_low_power():
    report = accuracy_probe(FrameGeometry(16, 8, 8.0), -30.0, "B", n_bursts=4, rx_upsample=2)
    assert report.mi_bits > 4.9
    assert np.isfinite(report.snr_db) and report.snr_db > 30
    assert all(np.isfinite(v) for v in (report.evm_rms, report.unimodularity_residual))
