import numpy as np
import pytest
from hypothesis import given, strategies as st

from couplernoise.device import (DEFAULT_DEVICE, TWO_PI, ChiPolynomial, DeviceParams,
                                 coupler_frequency, coupling_g, coupling_vs_flux, exact_larmor,
                                 fit_chi_polynomial, flux_sensitivity, flux_sensitivity_phi,
                                 g_noise_amplitude, instantaneous_larmor, operating_lambda)

P = DEFAULT_DEVICE
G_WINDOW = -TWO_PI * np.linspace(10, 50, 41)


def test_params_validation_and_roundtrip():
    assert DeviceParams.from_dict(P.to_dict()) == P
    assert P.k_qq == pytest.approx(P.k_d + P.k**2)
    with pytest.raises(ValueError):
        DeviceParams(omega_q=10.0, omega_max=5.0)
    with pytest.raises(ValueError):
        DeviceParams(k=0.0)
    with pytest.raises(ValueError):
        DeviceParams.from_dict({"omega_x": 1.0})


def test_coupler_frequency_examples():
    assert coupler_frequency(0.0) == pytest.approx(P.omega_max)
    assert coupler_frequency(0.5) == pytest.approx(0.0, abs=1e-8 * P.omega_max)
    assert coupler_frequency(1 / 3) == pytest.approx(P.omega_max / np.sqrt(2))


def test_coupling_examples():
    no_indirect = DeviceParams(k=1e-12)
    assert coupling_g(P.omega_max, no_indirect) == pytest.approx(P.k_d * P.omega_q / 2)
    assert coupling_g(1e12, P) == pytest.approx(P.k_d * P.omega_q / 2, rel=1e-9)
    with pytest.raises(ZeroDivisionError):
        coupling_g(P.omega_q, P)


def test_coupling_monotone_on_branch():
    phi = np.linspace(0, 0.999 * P.resonance_flux, 400)
    g = coupling_vs_flux(phi)
    c = np.abs(np.cos(np.pi * phi))
    order = np.argsort(c)
    assert np.all(np.diff(g[order]) > 0)


def test_sensitivity_zero_and_branch_error():
    assert flux_sensitivity(P.k_d * P.omega_q / 2) == 0.0
    with pytest.raises(ValueError):
        flux_sensitivity(P.k_d * P.omega_q)
    with pytest.raises(ValueError):
        flux_sensitivity(0.9 * P.k_d * P.omega_q / 2)


def test_sensitivity_matches_finite_difference(frozen):
    for g, chi in frozen["chi_finite_difference"]:
        assert flux_sensitivity(g) == pytest.approx(chi, rel=1e-4)


def test_phi_and_g_forms_agree():
    phi = np.linspace(0.01, 0.99 * P.resonance_flux, 50)
    g = coupling_vs_flux(phi)
    np.testing.assert_allclose(flux_sensitivity(g), flux_sensitivity_phi(phi), rtol=1e-8)


def test_sensitivity_positive_on_branch():
    assert np.all(flux_sensitivity(G_WINDOW) > 0)


def test_quadratic_residual_in_window():
    chi = fit_chi_polynomial(G_WINDOW, flux_sensitivity(G_WINDOW))
    assert chi.max_rel_residual <= 0.01


def test_chi_polynomial_examples():
    g = np.linspace(-300, -60, 9)
    c = fit_chi_polynomial(g, 2.0 - 0.5 * g + 0.01 * g**2)
    np.testing.assert_allclose([c.chi0, c.chi1, c.chi2], [2.0, -0.5, 0.01], rtol=1e-10)
    c = fit_chi_polynomial(g, np.full(g.size, 3.0))
    np.testing.assert_allclose([c.chi0, c.chi1, c.chi2], [3.0, 0, 0], atol=1e-10)
    with pytest.raises(ValueError):
        fit_chi_polynomial([1.0, 1.0, 2.0], [1.0, 1.0, 2.0])
    assert ChiPolynomial(1, 2, 3)(2.0) == 17.0


def test_noise_amplitude_examples():
    g = -TWO_PI * 30
    assert g_noise_amplitude(g, DeviceParams(delta_phi_m=0.0)) == 0.0
    a = g_noise_amplitude(g, DeviceParams(delta_phi_m=1e-5))
    b = g_noise_amplitude(g, DeviceParams(delta_phi_m=3e-5))
    assert b == pytest.approx(3 * a)
    lam = operating_lambda(TWO_PI * np.array([10.0, 50.0]))
    assert 5 < lam[1] / lam[0] < 50


def test_larmor_examples():
    assert instantaneous_larmor(3.0, 0.0, 0.0) == 6.0
    with pytest.raises(ZeroDivisionError):
        instantaneous_larmor(0.0, 0.1, 0.1)
    g, dg = 50.0, 0.3
    s1 = instantaneous_larmor(g, dg, 2.0) - instantaneous_larmor(g, dg, 0.0)
    s2 = instantaneous_larmor(g, dg, 4.0) - instantaneous_larmor(g, dg, 0.0)
    assert s2 == pytest.approx(4 * s1)


@given(st.floats(10, 300), st.floats(-1, 1), st.floats(0, 20))
def test_larmor_second_order(g, dg, dw):
    exact = exact_larmor(g, dg, dw)
    approx = instantaneous_larmor(g, dg, dw)
    # error terms: dw^4/g^3 and dg*dw^2/g^2
    bound = 2 * g * ((dw / (2 * g)) ** 4 + abs(dg) * dw**2 / (4 * g**3)) + 1e-12 * g
    assert abs(approx - exact) <= 2 * bound
