import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from freqsplit import analysis, converter
from freqsplit.analysis import (conversion_jacobian, conversion_model, fit_conversion_curve,
                                fit_noise_polynomial, net_visibility, predict_visibility,
                                transmittance_ratio)
from freqsplit.converter import ConverterParams
from freqsplit.detection import make_rng
from freqsplit.errors import DomainError, FitError

POWERS = np.linspace(0, 700, 10)


def synthetic_T(A=0.94, eta=0.0044, P=POWERS):
    return list(zip(P, conversion_model(P, A, eta)))


def poisson_dataset(seed, c0=1e4, A=0.94, eta=0.0044, P=POWERS):
    rng = make_rng(seed, (77,))
    counts = rng.poisson(c0 * conversion_model(P, A, eta))
    ref = counts[0]
    return list(zip(P, counts / ref)), ref


@pytest.mark.parametrize("A,eta", [(0.94, 0.0044), (0.7, 0.002), (1.0, 0.01)])
def test_jacobian_against_central_differences(A, eta):
    P = np.array([1.0, 10.0, 165.0, 400.0, 560.0, 700.0])
    J = conversion_jacobian(P, A, eta)
    for k, (x, h) in enumerate(((A, 1e-6), (eta, 1e-9))):
        up = [A, eta]
        dn = [A, eta]
        up[k] += h
        dn[k] -= h
        fd = (conversion_model(P, *up) - conversion_model(P, *dn)) / (2 * h)
        assert np.all(np.abs(J[:, k] - fd) <= 1e-6 * np.abs(fd))


def test_jacobian_small_power_limit():
    J = conversion_jacobian(np.array([0.0, 1e-9]), 0.94, 0.0044)
    assert np.all(np.isfinite(J))
    assert J[0, 1] == 0.0
    assert J[1, 1] == pytest.approx(-0.94 * 1e-9, rel=1e-9)


def test_noiseless_round_trip():
    res = fit_conversion_curve(synthetic_T())
    assert res.converged
    assert res["A"] == pytest.approx(0.94, abs=1e-9)
    assert res["eta"] == pytest.approx(0.0044, rel=1e-9)
    assert res.rss < 1e-20


def test_objective_is_non_increasing():
    data, c0 = poisson_dataset(4)
    res = fit_conversion_curve(data, c0=c0, x0=(0.5, 0.01))
    assert res.converged
    h = np.array(res.history)
    assert len(h) > 2
    assert np.all(np.diff(h) <= 0)


def test_watt_reparameterisation():
    data, c0 = poisson_dataset(9)
    mw = fit_conversion_curve(data, c0=c0)
    w = fit_conversion_curve([(P / 1000, T) for P, T in data], c0=c0)
    assert w["eta"] == pytest.approx(1000 * mw["eta"], rel=1e-8)
    assert w["A"] == pytest.approx(mw["A"], rel=1e-8)


def test_poisson_recovery_monte_carlo():
    ok = 0
    for seed in range(100):
        data, c0 = poisson_dataset(seed)
        res = fit_conversion_curve(data, c0=c0)
        ok += (res.converged and abs(res["A"] - 0.94) <= 0.02
               and abs(res["eta"] / 0.0044 - 1) <= 0.05)
    assert ok >= 95


def test_reported_errors_match_scatter():
    fits = [fit_conversion_curve(*poisson_dataset(s)[:1], c0=poisson_dataset(s)[1])
            for s in range(200)]
    A = np.array([f["A"] for f in fits])
    err = np.mean([f.error("A") for f in fits])
    assert np.std(A) == pytest.approx(err, rel=0.25)


def test_fit_errors():
    with pytest.raises(FitError):
        fit_conversion_curve([(0, 1.0), (0, 1.0), (0, 1.0)])
    with pytest.raises(FitError):
        fit_conversion_curve([(0, 1.0), (100, 0.8)])
    with pytest.raises(DomainError):
        fit_conversion_curve([(0, 1.0), (100, -0.2), (200, 0.5)])


def test_non_convergence_is_flagged():
    res = fit_conversion_curve(synthetic_T(), x0=(0.2, 0.02), max_iter=2)
    assert not res.converged and not res.reliable
    assert "no convergence" in res.message


def test_peak_power_from_fit():
    res = fit_conversion_curve(synthetic_T())
    assert analysis.peak_power(res) == pytest.approx(ConverterParams().peak_power, rel=1e-9)


def test_noise_polynomial_constant():
    pts = [(x, 3.0 + 0.1 * (-1) ** i) for i, x in enumerate(range(10))]
    res = fit_noise_polynomial(pts, 0)
    assert res["c0"] == pytest.approx(np.mean([d for _, d in pts]), rel=1e-12)


def test_noise_polynomial_exact_quadratic():
    x = np.linspace(0, 700, 8)
    y = 0.3 + 0.02 * x + 7.5e-5 * x ** 2
    res = fit_noise_polynomial(zip(x, y), 2)
    np.testing.assert_allclose(res.values, [0.3, 0.02, 7.5e-5], rtol=1e-9)


def test_noise_polynomial_stays_non_negative():
    x = np.linspace(0, 1, 12)
    y = np.where(x < 0.5, 0.0, 10 * (x - 0.5))
    res = fit_noise_polynomial(zip(x, y), 1)
    fitted = res.values[0] + res.values[1] * x
    assert np.all(fitted >= -1e-9)
    assert res.converged


def test_noise_polynomial_underdetermined():
    with pytest.raises(FitError):
        fit_noise_polynomial([(0, 1), (1, 2)], 2)


def test_noise_polynomial_signal_leak_shape():
    # flat below 0.01, rising above: refit the forward model
    p = ConverterParams()
    alphas = np.geomspace(1e-3, 1, 13)
    rng = make_rng(12, (3,))
    d = converter.noise_rate_signal_leak(p, alphas)
    observed = rng.poisson(d * 100) / 100
    res = fit_noise_polynomial(zip(alphas, observed), 2, weights=100 / np.maximum(observed, 0.01))
    fitted, sd = analysis.evaluate_polynomial(res, alphas)
    z = (fitted - d) / np.sqrt(d / 100)
    assert np.all(np.abs(z) < 4)
    low = fitted[alphas < 0.01]
    assert low.max() - low.min() < 2.0


def test_noise_polynomial_round_trip_visible_noise():
    p = ConverterParams(kappa_vis2=2e-5, kappa_vis1=0.01)
    P = np.linspace(0, 700, 15)
    rng = make_rng(1, (5,))
    observed = rng.poisson(converter.noise_rate_visible(p, P) * 1000) / 1000
    res = fit_noise_polynomial(zip(P, observed), 2)
    assert res["c2"] == pytest.approx(2e-5, rel=0.1)
    assert res["c1"] == pytest.approx(0.01, abs=0.005)


def test_predict_visibility_examples():
    assert predict_visibility(0.1, 0.015, 1e6, 0.0) == 1.0
    assert predict_visibility(0.1, 0.015, 1e6, 15.3) == pytest.approx(0.98, abs=1e-4)
    assert predict_visibility(1e-12, 0.015, 1e6, 5.0) < 1e-8
    with pytest.raises(DomainError):
        predict_visibility(0.0, 0.015, 1e6, 0.0)


@given(a=st.floats(1e-4, 1), b=st.floats(1e-4, 1), d=st.floats(0.1, 100))
def test_predict_visibility_monotone(a, b, d):
    lo, hi = sorted((a, b))
    assert predict_visibility(lo, 0.015, 1e6, d) <= predict_visibility(hi, 0.015, 1e6, d)
    assert predict_visibility(a, 0.015, 1e6, d) >= predict_visibility(a, 0.015, 1e6, 2 * d)


def test_net_visibility_examples():
    raw = net_visibility(1000, 50, 0)
    assert raw.V == pytest.approx(950 / 1050)
    assert net_visibility(1000, 50, 50).V == 1.0
    with pytest.warns(RuntimeWarning):
        assert net_visibility(1000, 50, 60).V == 1.0
    with pytest.raises(DomainError):
        net_visibility(10, 10, 10)


def test_net_visibility_recovers_high_value():
    # raw V = 0.88 from S = 276, d = 18.8 per window; subtracting d restores ~1
    S, d = 276.0, 18.8
    raw = net_visibility(S + d, d, 0.0)
    assert raw.V == pytest.approx(0.88, abs=1e-3)
    assert net_visibility(S + d, d, d).V > 0.98


def test_net_visibility_sigma_matches_finite_differences():
    N1, N2, b, vb = 3000.0, 400.0, 250.0, 4.0
    f = lambda x, y, z: (x - y) / (x + y - 2 * z)
    h = 1e-3
    g = [(f(N1 + h, N2, b) - f(N1 - h, N2, b)) / (2 * h),
         (f(N1, N2 + h, b) - f(N1, N2 - h, b)) / (2 * h),
         (f(N1, N2, b + h) - f(N1, N2, b - h)) / (2 * h)]
    want = math.sqrt(g[0] ** 2 * N1 + g[1] ** 2 * N2 + g[2] ** 2 * vb)
    assert net_visibility(N1, N2, b, b_var=vb).sigma == pytest.approx(want, rel=1e-6)


def test_transmittance_ratio_recovers_forward_value():
    p = ConverterParams()
    C0 = 1e5
    P = np.linspace(0, 700, 15)
    T, R = converter.efficiency(p, P)
    pts = list(zip(P, C0 * T, 1.5 * C0 * R))
    out = transmittance_ratio(pts, C0)
    assert len(out) == 14
    for _, r in out:
        assert r == pytest.approx(1.5, rel=1e-12)


def test_transmittance_ratio_skips_unconverted(caplog):
    with caplog.at_level("INFO"):
        out = transmittance_ratio([(0.0, 100.0, 0.0), (50.0, 100.0, 3.0), (100.0, 80.0, 30.0)], 100.0)
    assert len(out) == 1 and out[0][0] == 100.0
    assert out[0][1] == pytest.approx(1.5, rel=1e-12)
    assert "skipping" in caplog.text
    with pytest.raises(DomainError):
        transmittance_ratio([(1.0, 1.0, 1.0)], 0.0)
