import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nfdm.units import (
    ConfigurationError, FibreParams, NormScales, TimeBurst, beta2_from_D, dbm_to_w, from_normalized,
    make_scales, path_averaged_gamma, to_normalized, w_to_dbm,
)

# Frozen with 30-digit arithmetic: -D lambda^2 / (2 pi c) and a quadrature of exp(-alpha z).
BETA2_REF_PS2_PER_KM = -21.5366384394042597
GAMMA_EFF_REF_PER_W_KM = 0.305778415034104434
Z_SCALE_REF_M = 46.4325016558926698
P_SCALE_REF_W = 70.4321736934970051


def test_beta2_reference_value():
    assert beta2_from_D(16.89, 193.44e12) * 1e27 == pytest.approx(BETA2_REF_PS2_PER_KM, rel=1e-12)


@pytest.mark.parametrize("D, nu", [(0.0, 193e12), (-1.0, 193e12), (16.0, 0.0)])
def test_beta2_rejects_non_positive(D, nu):
    with pytest.raises(ConfigurationError):
        beta2_from_D(D, nu)


def test_beta2_linear_in_D():
    assert beta2_from_D(2 * 16.89, 193.44e12) == pytest.approx(2 * beta2_from_D(16.89, 193.44e12), rel=1e-15)


def test_path_averaged_gamma_reference():
    assert path_averaged_gamma(1.3, 0.2, 80.0) * 1e3 == pytest.approx(GAMMA_EFF_REF_PER_W_KM, rel=1e-12)


def test_path_averaged_gamma_lossless_and_short_span_limits():
    assert path_averaged_gamma(1.3, 0.0, 80.0) == pytest.approx(8 / 9 * 1.3e-3, rel=1e-15)
    assert path_averaged_gamma(1.3, 0.2, 1e-9) == pytest.approx(8 / 9 * 1.3e-3, rel=1e-10)


@given(st.floats(0.0, 1.0), st.floats(1.0, 200.0), st.floats(1.0, 200.0))
def test_path_averaged_gamma_decreases_with_loss_length(alpha, l1, l2):
    lo, hi = sorted((l1, l2))
    assert path_averaged_gamma(1.3, alpha, hi) <= path_averaged_gamma(1.3, alpha, lo) * (1 + 1e-12)


def test_make_scales_reference_and_scaling():
    s = make_scales(FibreParams())
    assert s.z_scale_m == pytest.approx(Z_SCALE_REF_M, rel=1e-12)
    assert s.p_scale_w == pytest.approx(P_SCALE_REF_W, rel=1e-12)
    assert s.length == pytest.approx(960e3 / Z_SCALE_REF_M, rel=1e-12)
    s3 = make_scales(FibreParams(), 3e-12)
    assert s3.z_scale_m == pytest.approx(9 * s.z_scale_m, rel=1e-14)
    assert s3.p_scale_w == pytest.approx(s.p_scale_w / 9, rel=1e-14)


def test_invalid_parameters_rejected():
    with pytest.raises(ConfigurationError):
        FibreParams(n_spans=0)
    with pytest.raises(ConfigurationError):
        FibreParams(gamma_per_w_km=-1.0)
    with pytest.raises(ConfigurationError):
        make_scales(FibreParams(gamma_per_w_km=0.0))
    with pytest.raises(ConfigurationError):
        make_scales(FibreParams(dispersion_ps_nm_km=0.0))
    with pytest.raises(ConfigurationError):
        make_scales(FibreParams(), 0.0)
    with pytest.raises(ConfigurationError):
        NormScales(1e-12, 1.0, 1.0, beta2_s2_per_m=1e-27, gamma_eff_per_w_m=1e-3)


def test_normalization_round_trip_and_energy():
    rng = np.random.default_rng(3)
    scales = make_scales(FibreParams())
    q = rng.normal(size=(2, 256)) + 1j * rng.normal(size=(2, 256))
    burst = TimeBurst(q * 1e-2, 1 / (8 * 56e9))
    norm = to_normalized(burst, scales)
    back = from_normalized(norm, scales)
    assert np.sqrt(np.mean(np.abs(back.q - burst.q) ** 2) / np.mean(np.abs(burst.q) ** 2)) < 1e-12
    assert back.dt == pytest.approx(burst.dt, rel=1e-15)
    np.testing.assert_allclose(norm.energy(), burst.energy() / (scales.p_scale_w * scales.t_scale_s), rtol=1e-12)
    zero = to_normalized(TimeBurst(np.zeros((2, 8)), 1e-12), scales)
    assert not np.any(zero.q)


def test_time_burst_validation():
    with pytest.raises(ValueError):
        TimeBurst(np.zeros((3, 4)), 1.0)
    with pytest.raises(ValueError):
        TimeBurst(np.array([[np.nan, 0], [0, 0]]), 1.0)
    b = TimeBurst(np.zeros((2, 6)), 0.5)
    np.testing.assert_array_equal(b.t, [-1.5, -1.0, -0.5, 0.0, 0.5, 1.0])


def test_dbm_round_trip():
    assert dbm_to_w(0.0) == pytest.approx(1e-3)
    assert w_to_dbm(dbm_to_w(-8.0)) == pytest.approx(-8.0)
