import numpy as np
import pytest

from couplernoise.curves import DecayCurve
from couplernoise.engine.lindblad import (MeasurementError, averaged_generator,
                                          lindblad_generator, lindblad_propagate,
                                          normalized_sigma_z, reference_interaction_generator)
from couplernoise.engine.montecarlo import (SimResult, effective_noise, mc_cpmg, mc_cpmg_chi,
                                            mc_ramsey, mc_ramsey_chi)
from couplernoise.engine.ode import (BlochState, CapacityError, MAX_CENTRAL_SPINS,
                                     central_spin_propagate, shapiro_loginov_propagate,
                                     transfer_matrix_cpmg, xzx_eigenvalues)
from couplernoise.envelopes import cpmg_rtn, ramsey_rtn
from couplernoise.noise import Fluctuator, NoiseModel
from couplernoise.sequences import GatePulse, SequenceSpec, gate_pulse_area

RAMSEY = SequenceSpec("ramsey", n_gates=200, stride=10)
CPMG = SequenceSpec("cpmg", n=2, m=30)


def within(mean, err, ref, k=3.0, floor=1e-12):
    return np.all(np.abs(mean - ref) <= np.maximum(k * err, floor))


# ---------------------------------------------------------------- Monte Carlo

def test_mc_ramsey_noiseless_is_coherent_swap():
    r = mc_ramsey(NoiseModel(), RAMSEY, n_traj=10)
    k = RAMSEY.curve_points()
    np.testing.assert_allclose(r.curve.values, np.cos(2 * k * gate_pulse_area(RAMSEY.pulse)),
                               atol=1e-12)
    assert isinstance(r, SimResult) and r.n_traj == 10


def test_mc_cpmg_noiseless_is_one():
    r = mc_cpmg(NoiseModel(), CPMG, n_traj=10)
    np.testing.assert_allclose(r.curve.values, 1.0, atol=1e-14)


def test_mc_ramsey_chi_single_and_pair():
    f1, f2 = Fluctuator(2 * np.pi * 0.3, 0.05), Fluctuator(0.4, 2.0)
    t = np.linspace(0.1, 30, 60)
    m, e = mc_ramsey_chi([f1], t, 100_000, seed=2)
    assert within(m, e, ramsey_rtn(f1, t))
    m, e = mc_ramsey_chi([f1, f2], t, 50_000, seed=3)
    assert within(m, e, ramsey_rtn(f1, t) * ramsey_rtn(f2, t))


@pytest.mark.parametrize("n", [1, 2, 4])
def test_mc_cpmg_chi_matches_closed_form(n):
    f = Fluctuator(2 * np.pi * 0.3, 0.1)
    T = np.linspace(0.2, 10, 20)
    m, e = mc_cpmg_chi([f], n, T, 50_000, seed=n)
    assert within(m, e, cpmg_rtn(f, n, T))


def test_white_noise_is_sequence_independent():
    T = np.linspace(0.1, 5, 12)
    sigma = 0.2
    for n in (1, 3):
        m, e = mc_cpmg_chi([], n, T, 20_000, seed=3, white_sigma=sigma)
        assert within(m, e, np.exp(-2 * sigma**2 * n * T))


def test_stderr_is_sample_std_over_root_n():
    f = Fluctuator(1.0, 0.3)
    t = np.array([0.5, 1.5])
    m, e = mc_ramsey_chi([f], t, 1000, seed=4)
    # values are cosines, so the sample variance is <cos^2> - <cos>^2
    assert np.all(e > 0) and np.all(e < 1 / np.sqrt(1000) + 1e-12)


def test_determinism_independent_of_workers():
    f = Fluctuator(1.0, 0.3)
    T = np.linspace(0.2, 3, 6)
    a = mc_cpmg_chi([f], 2, T, 10_000, seed=3, workers=1)
    b = mc_cpmg_chi([f], 2, T, 10_000, seed=3, workers=4)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])
    model = NoiseModel((f,))
    r1 = mc_ramsey(model, RAMSEY, n_traj=5000, seed=9, workers=1)
    r2 = mc_ramsey(model, RAMSEY, n_traj=5000, seed=9, workers=3)
    assert r1.curve.to_csv() == r2.curve.to_csv()


def test_invalid_trajectory_count():
    with pytest.raises(ValueError):
        mc_ramsey(NoiseModel(), RAMSEY, n_traj=0)
    with pytest.raises(ValueError):
        mc_cpmg(NoiseModel(), CPMG, n_traj=0)
    with pytest.raises(ValueError):
        mc_cpmg(NoiseModel(), RAMSEY)


def _cpmg_with_idle(f, n, half, t_p):
    """Transfer-matrix oracle with a noise-free window of length ``t_p`` at each pulse."""
    from scipy.linalg import expm
    X = expm(np.array([[0.0, -2 * f.lambda_], [2 * f.lambda_, -2 * f.gamma]]) * half)
    P = np.diag([1.0, -np.exp(-2 * f.gamma * t_p)])  # pi pulse plus idle switching
    M = np.linalg.matrix_power(X @ P @ X, n)
    if n % 2:
        M = np.diag([1.0, -1.0]) @ M
    return M[0, 0]


def test_mc_cpmg_with_finite_pi_pulse():
    f = Fluctuator(1.2, 0.2)
    model = NoiseModel((f,), gamma_phi=0.02)
    for t_p in (0.0, 0.02):
        seq = SequenceSpec("cpmg", n=2, m=30, t_p=t_p)
        r = mc_cpmg(model, seq, n_traj=20_000, seed=1, profile="constant")
        half = seq.curve_points() * seq.pulse.duration
        ref = np.array([_cpmg_with_idle(f, 2, h, t_p) for h in half])
        ref = ref * np.exp(-0.25 * 0.02 * r.curve.times)
        assert within(r.curve.values, r.stderr, ref)


def test_effective_noise_resolves_flux_scaled_sources():
    seq = SequenceSpec("cpmg", pulse=GatePulse(g_max=2 * np.pi * 30))
    model = NoiseModel((Fluctuator(0.0, 0.1, flux_scale=2.0), Fluctuator(0.3, 0.2)),
                       white_flux_scale=0.5)
    fls, sigma = effective_noise(model, seq)
    assert fls[1].lambda_ == 0.3
    assert fls[0].lambda_ == pytest.approx(4 * sigma)


# ---------------------------------------------------------------- ODE oracles

def test_shapiro_loginov_closed_solution():
    f = Fluctuator(2 * np.pi * 0.3, 0.02)
    t = np.linspace(0.05, 10, 120)
    s = shapiro_loginov_propagate(f, 5.0, t)
    np.testing.assert_allclose(s.N, np.cos(10.0 * t) * ramsey_rtn(f, t), atol=1e-8)
    np.testing.assert_allclose(s.P, 0.0, atol=1e-12)
    assert np.all(s.norm <= 1 + 1e-9)


def test_shapiro_loginov_without_noise_preserves_norm():
    s = shapiro_loginov_propagate(Fluctuator(0.0, 0.3), lambda t: 3 + np.sin(t), np.linspace(0.1, 5, 30),
                                  omega_of_t=0.7)
    np.testing.assert_allclose(s.norm, 1.0, atol=1e-10)


def test_central_spin_reductions():
    f = Fluctuator(0.6, 0.3)
    t = np.linspace(0.1, 8, 40)
    a = shapiro_loginov_propagate(f, 2.0, t)
    b = central_spin_propagate([f], 2.0, t)
    np.testing.assert_allclose(b.N, a.N, atol=1e-8)
    fs = [Fluctuator(0.5, 0.1), Fluctuator(1.0, 3.0), Fluctuator(0.2, 0.01)]
    c = central_spin_propagate(fs, 0.0, t)
    np.testing.assert_allclose(c.N, np.prod([ramsey_rtn(x, t) for x in fs], axis=0), atol=1e-6)
    z = central_spin_propagate([Fluctuator(0, 1.0)] * 2, 1.5, t)
    np.testing.assert_allclose(z.N, np.cos(3.0 * t), atol=1e-8)
    with pytest.raises(CapacityError):
        central_spin_propagate([f] * (MAX_CENTRAL_SPINS + 1), 0.0, t)


def test_central_spin_product_with_rotation():
    fs = [Fluctuator(0.5, 0.1), Fluctuator(0.8, 2.0), Fluctuator(0.3, 0.4)]
    g = 2.0
    t = np.linspace(0.2, 6, 30)
    c = central_spin_propagate(fs, g, t)
    prod = np.prod([ramsey_rtn(x, t) for x in fs], axis=0)
    np.testing.assert_allclose(c.N, np.cos(2 * g * t) * prod, atol=1e-6)


def test_transfer_matrix_examples():
    assert transfer_matrix_cpmg(Fluctuator(0.0, 0.4), 3, 1.2) == pytest.approx(1.0)
    f = Fluctuator(0.3, 0.9)
    T = 1.7
    ev = xzx_eigenvalues(f, T)
    om = np.sqrt(f.gamma**2 - 4 * f.lambda_**2)
    alpha = np.arcsinh(f.gamma / om * np.sinh(om * T))
    np.testing.assert_allclose(ev.real, np.sort([-np.exp(-alpha) * np.exp(-f.gamma * T),
                                                 np.exp(alpha) * np.exp(-f.gamma * T)]), rtol=1e-10)
    with pytest.raises(ValueError):
        transfer_matrix_cpmg(f, 0, 1.0)


def test_bloch_state_norm():
    s = BlochState(np.zeros(1), np.array([0.6]), np.array([0.0]), np.array([0.8]))
    assert s.norm[0] == pytest.approx(1.0)


# ---------------------------------------------------------------- master equation

def test_normalized_sigma_z_examples():
    rho = np.zeros((4, 4))
    rho[1, 1] = 1.0
    assert normalized_sigma_z(rho) == 1.0
    rho[1, 1] = rho[2, 2] = 0.5
    assert normalized_sigma_z(rho) == 0.0
    with pytest.raises(MeasurementError):
        normalized_sigma_z(np.diag([1.0, 0, 0, 0]))
    block = np.array([[0.7, 0.1], [0.1, 0.3]])
    lossy = 0.4 * block  # uniform relaxation scales the block
    assert normalized_sigma_z(lossy) == pytest.approx(normalized_sigma_z(block))
    with pytest.raises(ValueError):
        normalized_sigma_z(np.eye(3))


def test_generator_matches_reference_form():
    """Rotating the lab-frame generator into the sigma_x basis and control frame
    reproduces the reference generator (up to fast terms)."""
    model = NoiseModel(gamma_phi=0.1, gamma_1=0.15, delta_gamma_1=0.05)
    L = lindblad_generator(model, g=0.0, noise=0.0)
    # sigma_x eigenbasis |+> = (|01>+|10>)/sqrt2, |-> = (|10>-|01>)/sqrt2
    U = np.array([[1, 1], [-1, 1]]) / np.sqrt(2)
    U = U.T  # columns are |+>, |->
    S = np.kron(U.conj().T, U.T)
    Lx = S @ L @ np.linalg.inv(S)
    ref = reference_interaction_generator(model, G=0.0, lam_xi=0.0)
    np.testing.assert_allclose(Lx, ref, atol=1e-12)


def test_averaged_generator_shape():
    model = NoiseModel((Fluctuator(0.3, 0.05), Fluctuator(0.1, 1.0)), gamma_phi=0.1)
    L = averaged_generator(model)
    assert L.shape == (16, 16)
    assert averaged_generator(NoiseModel()).shape == (4, 4)


def test_lindblad_rates_zero_reduce_to_mc():
    f = Fluctuator(1.0, 0.2)
    model = NoiseModel((f,))
    seq = SequenceSpec("cpmg", n=1, m=20)
    r = lindblad_propagate(model, seq, n_traj=2000, seed=1, substeps=8, profile="constant")
    ref = cpmg_rtn(f, 1, 2 * seq.curve_points() * 0.040)
    assert within(r.curve.values, r.stderr, ref, k=4)
    a = lindblad_propagate(model, seq, mode="averaged")
    np.testing.assert_allclose(a.curve.values, ref, atol=5e-3)
    assert a.n_traj == 0 and np.all(a.stderr == 0)


def test_relaxation_only_leaves_normalised_observable():
    model = NoiseModel(gamma_1=0.3)
    seq = SequenceSpec("ramsey", n_gates=200, stride=20)
    r = lindblad_propagate(model, seq, n_traj=2, substeps=8)
    np.testing.assert_allclose(r.curve.values, 1.0, atol=1e-9)
    # the unnormalised population difference decays as exp(-gamma_1 t / 2)
    L = lindblad_generator(model, g=0.0)
    from scipy.linalg import expm
    rho0 = np.array([1, 0, 0, 0], dtype=complex)
    rho_t = (expm(L * 4.0) @ rho0).reshape(2, 2)
    assert (rho_t[0, 0] - rho_t[1, 1]).real == pytest.approx(np.exp(-0.3 * 4.0 / 2), rel=1e-10)


def test_lindblad_mode_errors():
    with pytest.raises(ValueError):
        lindblad_propagate(NoiseModel(), CPMG, mode="magic")
    with pytest.raises(ValueError):
        lindblad_propagate(NoiseModel(), CPMG, n_traj=0)
