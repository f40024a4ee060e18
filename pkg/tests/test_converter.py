import cmath
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from freqsplit import converter
from freqsplit.converter import ConverterParams, apply_conversion, efficiency
from freqsplit.errors import DomainError
from freqsplit.modes import Band, ModeLabel, OpticalState, TimeBin

VE = ModeLabel(Band.VISIBLE, TimeBin.EARLY)
VL = ModeLabel(Band.VISIBLE, TimeBin.LATE)
TE = ModeLabel(Band.TELECOM, TimeBin.EARLY)
TL = ModeLabel(Band.TELECOM, TimeBin.LATE)


def _R_mp(A, eta, P):
    # independent evaluation at 30 digits
    mpmath.mp.dps = 30
    return float(mpmath.mpf(A) * mpmath.sin(mpmath.sqrt(mpmath.mpf(eta) * P)) ** 2)


def test_efficiency_zero_power(params):
    assert efficiency(params, 0.0) == (1.0, 0.0)


def test_efficiency_at_165mw(params):
    T, R = efficiency(params, 165.0)
    assert R == pytest.approx(_R_mp(0.94, 0.0044, 165), abs=1e-14)
    # close to the quoted 0.4676 / 0.5324
    assert T == pytest.approx(0.4676, abs=1e-4)
    assert R == pytest.approx(0.5324, abs=1e-4)


def test_efficiency_maximum_near_560(params):
    _, R = efficiency(params, 560.0)
    assert R == pytest.approx(0.94, abs=1e-5)
    assert params.peak_power == pytest.approx(560.77, abs=0.01)


def test_efficiency_negative_power(params):
    with pytest.raises(DomainError):
        efficiency(params, -1.0)


@given(P=st.floats(0, 1e4), A=st.floats(0.01, 1), eta=st.floats(1e-5, 0.1))
def test_T_plus_R_is_one(P, A, eta):
    T, R = efficiency(ConverterParams(A=A, eta=eta), P)
    assert T + R == 1.0


def test_R_monotone_up_to_peak(params):
    P = np.linspace(0, params.peak_power, 2001)
    _, R = efficiency(params, P)
    assert np.all(np.diff(R) > 0)
    assert R[-1] == pytest.approx(params.A, abs=1e-15)


def test_conversion_identity_at_zero_power(params):
    s = OpticalState({VE: 0.3 + 0.1j, VL: -0.2j, TE: 0.05})
    assert apply_conversion(s, params, 0.0).isclose(s, 1e-15)


def test_full_conversion_ideal():
    P = (math.pi / 2) ** 2 / 0.0044
    p = ConverterParams(A=1.0, eta=0.0044, phi_pump=0.7)
    alpha = 0.3 - 0.2j
    out = apply_conversion(OpticalState({VE: alpha}), p, P)
    assert abs(out[VE]) < 1e-15
    assert abs(out[TE] - cmath.exp(-0.7j) * alpha) < 1e-15


def test_conversion_at_165mw_split(params):
    out = apply_conversion(OpticalState({VE: math.sqrt(0.1)}), params, 165.0)
    assert abs(out[VE]) ** 2 == pytest.approx(0.04676, abs=1e-5)
    assert abs(out[TE]) ** 2 == pytest.approx(0.05324, abs=1e-5)


@given(P=st.floats(0, 2000), A=st.floats(0.05, 1), phi=st.floats(-4, 4),
       v=st.complex_numbers(max_magnitude=3), t=st.complex_numbers(max_magnitude=3))
def test_conversion_preserves_photon_number(P, A, phi, v, t):
    p = ConverterParams(A=A, phi_pump=phi)
    s = OpticalState({VE: v, TE: t, VL: t, TL: v})
    out = apply_conversion(s, p, P)
    assert abs(out.total_photon_number() - s.total_photon_number()) < 1e-12 * max(
        1.0, s.total_photon_number())


def _arg_diff(a, b):
    return abs(cmath.phase(a / b))


def test_phase_preservation_up_to_peak():
    rng = np.random.default_rng(5)
    p = ConverterParams(phi_pump=0.83)
    for P in np.linspace(1.0, p.peak_power - 1.0, 200):
        theta = rng.uniform(-np.pi, np.pi)
        out = apply_conversion(OpticalState({VE: 0.3 * cmath.exp(1j * theta)}), p, P)
        assert _arg_diff(out[VE], cmath.exp(1j * theta)) < 1e-12
        assert _arg_diff(out[TE], cmath.exp(1j * (theta - 0.83))) < 1e-12


def test_phase_beyond_peak_follows_signs():
    # past sqrt(eta P) = pi/2 the unconverted amplitude picks up the sign of cos
    p = ConverterParams(phi_pump=0.2)
    for P in (600.0, 700.0, 1500.0, 2500.0):
        x = math.sqrt(p.eta * P)
        theta = 1.1
        out = apply_conversion(OpticalState({VE: cmath.exp(1j * theta)}), p, P)
        want_v = theta + (math.pi if math.cos(x) < 0 else 0.0)
        want_t = theta - 0.2 + (math.pi if math.sin(x) < 0 else 0.0)
        assert _arg_diff(out[VE], cmath.exp(1j * want_v)) < 1e-12
        assert _arg_diff(out[TE], cmath.exp(1j * want_t)) < 1e-12


@pytest.mark.parametrize("P", [0.0, 50.0, 165.0, 560.0, 700.0, 1200.0, 3000.0])
def test_ideal_matrix_reduction(P):
    p = ConverterParams(A=1.0, phi_pump=-1.3)
    x = math.sqrt(p.eta * P)
    e = cmath.exp(1j * p.phi_pump)
    want = np.array([[math.cos(x), -e * math.sin(x)], [e.conjugate() * math.sin(x), math.cos(x)]])
    assert np.max(np.abs(converter.conversion_matrix(p, P) - want)) < 1e-12


def test_matrix_is_unitary_for_saturated_converter(params):
    for P in (0.0, 100.0, 165.0, 560.0, 700.0):
        M = converter.conversion_matrix(params, P)
        assert np.max(np.abs(M.conj().T @ M - np.eye(2))) < 1e-12


def test_noise_telecom():
    p = ConverterParams(kappa_tel=0.1)
    assert converter.noise_rate_telecom(p, 0.0) == 0.0
    assert converter.noise_rate_telecom(p, 165.0) == pytest.approx(16.5)
    assert converter.noise_rate_telecom(p, 330.0) == pytest.approx(
        2 * converter.noise_rate_telecom(p, 165.0))


def test_noise_visible():
    p = ConverterParams(kappa_vis2=3e-5, kappa_vis1=0.0)
    assert converter.noise_rate_visible(p, 0.0) == 0.0
    assert converter.noise_rate_visible(p, 400.0) == pytest.approx(
        4 * converter.noise_rate_visible(p, 200.0))
    with pytest.raises(DomainError):
        converter.noise_rate_visible(p, -5.0)


def test_signal_leak():
    p = ConverterParams(leak0=2.0, leak1=0.0)
    assert converter.noise_rate_signal_leak(p, 0.0) == 2.0
    assert converter.noise_rate_signal_leak(p, 1e-3) == converter.noise_rate_signal_leak(p, 0.5)
    p = ConverterParams(leak0=2.0, leak1=10.0)
    assert converter.noise_rate_signal_leak(p, 0.5) == pytest.approx(7.0)
    with pytest.raises(DomainError):
        converter.noise_rate_signal_leak(p, -0.1)


def test_calibrated_background_at_operating_point(params):
    # visible: the 15.3 counts/s that gives V = 0.98 at T = 0.5
    assert converter.background_rate(params, Band.VISIBLE, 165.0, 0.1) == pytest.approx(15.3, abs=0.01)
    # telecom: 2250 (1/0.99 - 1) / 2 with T_in T_T = 0.045 and R = 0.5
    assert converter.background_rate(params, Band.TELECOM, 165.0, 0.1) == pytest.approx(
        2250 * (1 / 0.99 - 1) / 2, abs=0.01)
    assert converter.background_rate(params, Band.TELECOM, 0.0, 0.1) == 0.0


@pytest.mark.parametrize("kw", [dict(A=0.0), dict(A=1.2), dict(eta=0.0), dict(kappa_tel=-1.0),
                                dict(leak1=-0.5)])
def test_param_validation(kw):
    with pytest.raises(DomainError):
        ConverterParams(**kw)
