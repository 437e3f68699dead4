"""Pseudo-qubit dynamics with single-qubit relaxation and dephasing.

The one-excitation subspace ``{|01>, |10>}`` carries ``H = (g(t) +
lambda(t) xi(t)) sigma_x``.  Pure dephasing of qubit ``m`` acts through its
number operator, and relaxation moves population out of the subspace; the
latter enters the 2x2 block as the anti-Hermitian term ``-{K, rho}/2`` with
``K = diag(Gamma_1 of qubit 2, Gamma_1 of qubit 1)``.  The normalised
observable divides that loss out again.

Two propagation modes are offered.  ``trajectory`` integrates individual
telegraph realisations on a fine piecewise-constant grid (full time
dependence, vectorised over trajectories).  ``averaged`` solves the
Shapiro-Loginov-averaged equations in the frame of the control rotation
after discarding terms that oscillate at ``2 g``.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.linalg import expm
from scipy.sparse.linalg import expm_multiply

from ..curves import DecayCurve
from ..device import DeviceParams, DEFAULT_DEVICE
from ..noise import BLOCK_SIZE, NoiseModel, block_rng
from ..sequences import SequenceSpec, gate_profile, gate_pulse_value
from .montecarlo import SimResult, effective_noise, _reduce, _meta

__all__ = [
    "MeasurementError",
    "normalized_sigma_z",
    "lindblad_generator",
    "reference_interaction_generator",
    "averaged_generator",
    "lindblad_propagate",
    "MAX_TRAJECTORY_FLUCTUATORS",
]

MAX_TRAJECTORY_FLUCTUATORS = 4

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)
I2 = np.eye(2, dtype=complex)
N_Q2 = np.diag([1.0, 0.0]).astype(complex)  # |01><01|: qubit 2 excited
N_Q1 = np.diag([0.0, 1.0]).astype(complex)  # |10><10|: qubit 1 excited


class MeasurementError(ValueError):
    """The normalised observable is undefined (no population in the subspace)."""


def normalized_sigma_z(rho) -> np.ndarray | float:
    """``(rho_01,01 - rho_10,10) / (rho_01,01 + rho_10,10)``.

    ``rho`` is a two-qubit density matrix in the basis ``|00>, |01>, |10>,
    |11>`` (shape ``(..., 4, 4)``) or the one-excitation block (``(..., 2, 2)``).
    """
    rho = np.asarray(rho)
    if rho.shape[-2:] == (4, 4):
        p01, p10 = rho[..., 1, 1].real, rho[..., 2, 2].real
    elif rho.shape[-2:] == (2, 2):
        p01, p10 = rho[..., 0, 0].real, rho[..., 1, 1].real
    else:
        raise ValueError("rho must be 4x4 (two qubits) or 2x2 (one-excitation block)")
    tot = p01 + p10
    if np.any(tot <= 0):
        raise MeasurementError("no population in the one-excitation subspace")
    out = (p01 - p10) / tot
    return out if np.ndim(out) else float(out)


def _dissipators(model: NoiseModel, white_sigma: float = 0.0) -> np.ndarray:
    """Time-independent part of the vectorised (row-major) 2x2 generator."""
    g1_q2 = 0.5 * (model.gamma_1 + model.delta_gamma_1)
    g1_q1 = 0.5 * (model.gamma_1 - model.delta_gamma_1)
    K = np.diag([g1_q2, g1_q1]).astype(complex)
    L = -0.5 * (np.kron(K, I2) + np.kron(I2, K.T))
    gphi = 0.5 * model.gamma_phi  # split equally between the qubits
    for n in (N_Q1, N_Q2):
        L += gphi * (np.kron(n, n.T) - 0.5 * np.kron(n, I2) - 0.5 * np.kron(I2, n.T))
    if white_sigma > 0:
        L += white_sigma**2 * (np.kron(SX, SX.T) - np.eye(4))
    return L


def _hamiltonian_part(h: float) -> np.ndarray:
    H = h * SX
    return -1j * (np.kron(H, I2) - np.kron(I2, H.T))


def lindblad_generator(model: NoiseModel, g: float, noise: float = 0.0) -> np.ndarray:
    """4x4 generator of ``vec(rho)`` (row-major) for coupling ``g`` plus noise ``lambda xi``."""
    return _dissipators(model) + _hamiltonian_part(g + noise)


def reference_interaction_generator(model: NoiseModel, G: float, lam_xi: float) -> np.ndarray:
    """Reference generator in the sigma_x basis of the control frame.

    Components are ordered ``<+|r|+>, <+|r|->, <-|r|+>, <-|r|->`` with
    ``|+> = (|01> + |10>)/sqrt(2)`` and ``|-> = (|10> - |01>)/sqrt(2)``;
    ``G`` is the accumulated control angle and ``lam_xi`` the instantaneous
    noise.  Used to cross-check :func:`lindblad_generator`.
    """
    gp, g1, dg = model.gamma_phi, model.gamma_1, model.delta_gamma_1
    e2p, e2m = np.exp(2j * G), np.exp(-2j * G)
    d = -gp - 2 * g1
    L = np.array([
        [d, dg * e2m, dg * e2p, gp],
        [dg * e2p, -8j * lam_xi + d, np.exp(4j * G) * gp, dg * e2p],
        [dg * e2m, np.exp(-4j * G) * gp, 8j * lam_xi + d, dg * e2m],
        [gp, dg * e2m, dg * e2p, d],
    ])
    return 0.25 * L


def averaged_generator(model: NoiseModel, fluctuators=None):
    """Rotating-wave, noise-averaged generator on ``(rho, <xi_S rho>)`` blocks.

    One block of four (vectorised ``rho`` in the ``|01>, |10>`` basis) per
    subset ``S`` of fluctuators; a single fluctuator gives the 8x8 system
    ``[[A, B], [B, A - 2 gamma]]``.
    """
    fls = list(model.fluctuators if fluctuators is None else fluctuators)
    G1, Gp = model.gamma_1, model.gamma_phi
    A = np.array([
        [-4 * G1 - Gp, 0, 0, Gp],
        [0, -4 * G1 - 3 * Gp, -Gp, 0],
        [0, -Gp, -4 * G1 - 3 * Gp, 0],
        [Gp, 0, 0, -4 * G1 - Gp],
    ], dtype=complex) / 8.0
    Bs = np.array([[0, 1, -1, 0], [1, 0, 0, -1], [-1, 0, 0, 1], [0, -1, 1, 0]], dtype=complex)
    M = len(fls)
    dim = 2**M
    L = sparse.kron(sparse.identity(dim), sparse.csr_matrix(A), format="csr")
    sx = sparse.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
    zm = sparse.csr_matrix(np.array([[0.0, 0.0], [0.0, -2.0]]))
    for i, f in enumerate(fls):
        X = Z = None
        for k in range(M):
            ox = sx if k == i else sparse.identity(2, format="csr")
            oz = zm if k == i else sparse.identity(2, format="csr")
            X = ox if X is None else sparse.kron(X, ox, format="csr")
            Z = oz if Z is None else sparse.kron(Z, oz, format="csr")
        L = L + sparse.kron(X, sparse.csr_matrix(1j * f.lambda_ * Bs), format="csr") \
            + f.gamma * sparse.kron(Z, sparse.identity(4), format="csr")
    return L.tocsr()


def _subset_parity(M: int) -> np.ndarray:
    """``(-1)^|S|`` for every subset index (refocusing flips each xi factor)."""
    idx = np.arange(2**M)
    pop = np.array([bin(i).count("1") for i in idx])
    return np.where(pop % 2 == 0, 1.0, -1.0)


def _averaged(model: NoiseModel, seq: SequenceSpec, fls, sigma: float):
    if sigma > 0:
        # white noise on sigma_x averages to an extra sigma^2 dephasing in the frame
        model = NoiseModel(model.fluctuators, 0.0, model.gamma_phi + 8 * sigma**2,
                           model.gamma_1, model.delta_gamma_1)
    L = averaged_generator(model, fls)
    M = len(fls)
    y0 = np.zeros(4 * 2**M, dtype=complex)
    y0[0] = 1.0
    times = seq.curve_times()
    if seq.kind == "ramsey":
        ys = expm_multiply(L, y0, start=0.0, stop=float(times[-1]), num=len(times),
                           endpoint=True) if times.size > 1 else y0[None, :]
        vals = [normalized_sigma_z(np.array([[y[0], y[1]], [y[2], y[3]]])) for y in ys]
        return times, np.array(vals)
    flip = np.repeat(_subset_parity(M), 4)
    vals = []
    for m in seq.curve_points():
        half = m * seq.pulse.duration
        y = y0.copy()
        for _ in range(seq.n):
            y = expm_multiply(L * half, y)
            y = flip * y
            y = expm_multiply(L * half, y)
        vals.append(normalized_sigma_z(np.array([[y[0], y[1]], [y[2], y[3]]])))
    return times, np.array(vals)


def _substep_tables(seq: SequenceSpec, p: DeviceParams, substeps: int, profile: str):
    """Per-substep mean coupling and mean noise profile over one gate."""
    tg = seq.pulse.duration
    edges = np.linspace(0.0, tg, substeps + 1)
    xg, wg = np.polynomial.legendre.leggauss(12)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = mid[:, None] + half[:, None] * xg[None, :]
    gbar = 0.5 * np.sum(wg[None, :] * gate_pulse_value(seq.pulse, nodes), axis=1)
    if profile == "constant":
        ubar = np.ones(substeps)
    else:
        prof = gate_profile(seq.pulse, p)
        cum = np.interp(edges, prof.nodes, prof.cum)
        ubar = np.diff(cum) / np.diff(edges)
    return gbar, ubar, tg / substeps


def _trajectory(model: NoiseModel, seq: SequenceSpec, p: DeviceParams, fls, sigma: float,
                n_traj: int, seed: int, substeps: int, profile: str):
    M = len(fls)
    if M > MAX_TRAJECTORY_FLUCTUATORS:
        raise ValueError(f"trajectory mode supports at most {MAX_TRAJECTORY_FLUCTUATORS} fluctuators")
    gbar, ubar, dt = _substep_tables(seq, p, substeps, profile)
    D = _dissipators(model, sigma)
    lam = np.array([f.lambda_ for f in fls])
    gam = np.array([f.gamma for f in fls])
    # all sign patterns of the M telegraph values
    patterns = np.array([[1.0 if (c >> (M - 1 - i)) & 1 == 0 else -1.0 for i in range(M)]
                         for c in range(2**M)]).reshape(2**M, M)
    noise_vals = patterns @ lam if M else np.zeros(1)
    props = np.empty((substeps, len(noise_vals), 4, 4), dtype=complex)
    for k in range(substeps):
        for c, x in enumerate(noise_vals):
            props[k, c] = expm((D + _hamiltonian_part(gbar[k] + ubar[k] * x)) * dt)
    p_flip = 0.5 * (-np.expm1(-2.0 * gam * dt))
    weights_bits = 2 ** np.arange(M - 1, -1, -1) if M else np.zeros(0, dtype=int)

    def run_segment(v, state, rng, n_gates):
        """Advance ``n_gates`` gates; ``state`` holds +-1 per fluctuator per row."""
        for _ in range(n_gates):
            for k in range(substeps):
                code = ((state < 0).astype(int) @ weights_bits) if M else np.zeros(len(v), int)
                v = np.einsum("rij,rj->ri", props[k][code], v)
                if M:
                    flips = rng.random(state.shape) < p_flip[None, :]
                    state = np.where(flips, -state, state)
        return v, state

    vec0 = np.array([1.0, 0.0, 0.0, 0.0], dtype=complex)
    times = seq.curve_times()
    area = np.sum(gbar) * dt

    def frame_value(v, G):
        """Normalised sigma_z of the state rotated back by the control angle."""
        rho = v.reshape(-1, 2, 2)
        U = np.cos(G) * I2 - 1j * np.sin(G) * SX
        rt = np.einsum("ij,rjk,kl->ril", U.conj().T, rho, U)
        return normalized_sigma_z(rt)

    n_blocks = -(-int(n_traj) // BLOCK_SIZE)
    blocks = []
    for b in range(n_blocks):
        size = min(BLOCK_SIZE, n_traj - b * BLOCK_SIZE)
        rng = block_rng(seed, b)
        if seq.kind == "ramsey":
            state = np.where(rng.random((size, M)) < 0.5, 1.0, -1.0)
            v = np.tile(vec0, (size, 1))
            out = np.empty((size, times.size))
            out[:, 0] = 1.0
            gates = seq.curve_points()
            for j in range(1, gates.size):
                v, state = run_segment(v, state, rng, int(gates[j] - gates[j - 1]))
                out[:, j] = frame_value(v, gates[j] * area)
        else:
            idle = expm(D * seq.t_p / 2) if seq.t_p > 0 else None
            zz = np.kron(SZ, SZ.T)
            out = np.empty((size, times.size))
            for j, m in enumerate(seq.curve_points()):
                state = np.where(rng.random((size, M)) < 0.5, 1.0, -1.0)
                v = np.tile(vec0, (size, 1))
                for _ in range(seq.n):
                    v, state = run_segment(v, state, rng, int(m))
                    if idle is not None:
                        v = v @ idle.T
                    v = v @ zz.T
                    if idle is not None:
                        v = v @ idle.T
                    v, state = run_segment(v, state, rng, int(m))
                # the control rotation cancels between refocusing pulses
                out[:, j] = frame_value(v, 0.0)
        blocks.append((out.sum(axis=0), (out * out).sum(axis=0)))
    mean, err = _reduce(blocks, int(n_traj))
    return times, mean, err


def lindblad_propagate(model: NoiseModel, seq: SequenceSpec, p: DeviceParams = DEFAULT_DEVICE,
                       mode: str = "trajectory", n_traj: int = 2000, seed: int = 0,
                       substeps: int = 40, profile: str = "pulse") -> SimResult:
    """Normalised population difference including relaxation and dephasing.

    Parameters
    ----------
    mode : {'trajectory', 'averaged'}
        ``trajectory`` averages ``n_traj`` telegraph realisations of the
        full time-dependent master equation (``substeps`` piecewise-constant
        steps per gate, at most four fluctuators).  ``averaged`` integrates
        the rotating-wave Shapiro-Loginov system; its stderr is zero.
    profile : {'pulse', 'constant'}
        Whether the noise amplitude follows the pulse shape within a gate.

    The returned values are the envelope in the frame of the control
    rotation, i.e. without the ``cos(2 G)`` swap factor.
    """
    fls, sigma = effective_noise(model, seq, p)
    fls = [f for f in fls if f.lambda_ > 0]
    if mode == "averaged":
        times, vals = _averaged(model, seq, fls, sigma)
        err = np.zeros_like(vals)
        n_used = 0
    elif mode == "trajectory":
        if int(n_traj) < 1:
            raise ValueError("n_traj must be >= 1")
        times, vals, err = _trajectory(model, seq, p, fls, sigma, int(n_traj), int(seed),
                                       int(substeps), profile)
        n_used = int(n_traj)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    curve = DecayCurve(times, np.clip(vals, -1, 1), err, dict(_meta(seq), envelope=True))
    return SimResult(curve, n_used, int(seed))
