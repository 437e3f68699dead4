"""Deterministic oracles: Shapiro-Loginov systems and CPMG transfer matrices.

The pseudo-qubit Bloch vector is stored in the order ``(P, Q, N)`` (x, y, z).
Under ``H = (g + lambda xi) sigma_x`` and detuning ``omega`` it obeys
``d/dt r = (L_q + 2 lambda xi L_x) r``.  Averaging with the Shapiro-Loginov
rule couples ``rho = <r>`` to ``mu = <xi r>``, and ``M`` independent
fluctuators lead to the central-spin system of dimension ``3 * 2**M``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import sparse
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from ..noise import Fluctuator

__all__ = [
    "BlochState",
    "StiffnessError",
    "CapacityError",
    "MAX_CENTRAL_SPINS",
    "bloch_generators",
    "shapiro_loginov_propagate",
    "central_spin_propagate",
    "transfer_matrix_cpmg",
    "xzx_eigenvalues",
]

MAX_CENTRAL_SPINS = 12


class StiffnessError(RuntimeError):
    """The adaptive integrator could not advance."""


class CapacityError(ValueError):
    """Too many fluctuators for the dense central-spin state."""


@dataclass(frozen=True)
class BlochState:
    times: np.ndarray
    N: np.ndarray
    Q: np.ndarray
    P: np.ndarray

    @property
    def norm(self) -> np.ndarray:
        return np.sqrt(self.N**2 + self.Q**2 + self.P**2)


def bloch_generators():
    """``(K_omega, K_g, L_x)`` with ``L_q = omega K_omega + g K_g`` and noise ``2 lambda L_x``."""
    K_w = np.array([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    L_x = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]])
    return K_w, 2.0 * L_x, L_x


def _as_func(v) -> Callable[[float], float]:
    if callable(v):
        return v
    c = float(v)
    return lambda t: c


def _integrate(rhs, y0, t_grid, rtol, atol, max_step):
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0 or np.any(np.diff(t) <= 0) or t[0] < 0:
        raise ValueError("t_grid must be non-negative and strictly increasing")
    t0 = 0.0
    sol = solve_ivp(rhs, (t0, float(t[-1])), y0, method="DOP853", t_eval=t,
                    rtol=rtol, atol=atol, max_step=max_step)
    if sol.status < 0:
        raise StiffnessError(sol.message)
    return sol.y


def shapiro_loginov_propagate(f: Fluctuator, g_of_t, t_grid, omega_of_t=0.0,
                              rtol: float = 1e-11, atol: float = 1e-13,
                              max_step: float = np.inf) -> BlochState:
    """Noise-averaged Bloch vector for one fluctuator (6 coupled equations).

    Parameters
    ----------
    g_of_t, omega_of_t : callable or float
        Coupling and detuning (rad/us) as functions of time.
    t_grid : array_like
        Output times (us); integration starts at 0 from ``N = 1``.
    max_step : float
        Upper bound on the step, useful when ``g_of_t`` has short features.
    """
    g, w = _as_func(g_of_t), _as_func(omega_of_t)
    K_w, K_g, L_x = bloch_generators()
    noise = 2.0 * f.lambda_ * L_x
    damp = 2.0 * f.gamma

    def rhs(t, y):
        Lq = w(t) * K_w + g(t) * K_g
        r, m = y[:3], y[3:]
        return np.concatenate([Lq @ r + noise @ m, noise @ r + Lq @ m - damp * m])

    y0 = np.array([0.0, 0.0, 1.0, 0.0, 0.0, 0.0])
    y = _integrate(rhs, y0, t_grid, rtol, atol, max_step)
    return BlochState(np.asarray(t_grid, dtype=float), y[2], y[1], y[0])


def _central_spin_operators(fs: Sequence[Fluctuator]):
    M = len(fs)
    dim = 2**M
    sx = sparse.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
    zm = sparse.csr_matrix(np.array([[0.0, 0.0], [0.0, -2.0]]))  # sigma_z - I
    eye2 = sparse.identity(2, format="csr")
    K_w, K_g, L_x = bloch_generators()
    static = sparse.csr_matrix((3 * dim, 3 * dim))
    for i, f in enumerate(fs):
        ops_x = [eye2] * M
        ops_x[i] = sx
        ops_z = [eye2] * M
        ops_z[i] = zm
        X = ops_x[0]
        Z = ops_z[0]
        for k in range(1, M):
            X = sparse.kron(X, ops_x[k], format="csr")
            Z = sparse.kron(Z, ops_z[k], format="csr")
        static = static + sparse.kron(X, 2.0 * f.lambda_ * L_x, format="csr") \
            + f.gamma * sparse.kron(Z, sparse.identity(3), format="csr")
    I = sparse.identity(dim, format="csr")
    return (static.tocsr(), sparse.kron(I, K_g, format="csr"),
            sparse.kron(I, K_w, format="csr"))


def central_spin_propagate(fs: Sequence[Fluctuator], g_of_t, t_grid, omega_of_t=0.0,
                           rtol: float = 1e-10, atol: float = 1e-12,
                           max_step: float = np.inf) -> BlochState:
    """Noise-averaged Bloch vector for ``M`` independent fluctuators.

    The state holds ``<xi_S r>`` for every subset ``S`` of fluctuators, with
    the empty subset first; only that component is returned.
    """
    fs = list(fs)
    if len(fs) > MAX_CENTRAL_SPINS:
        raise CapacityError(f"at most {MAX_CENTRAL_SPINS} fluctuators (state size 3*2**M)")
    g, w = _as_func(g_of_t), _as_func(omega_of_t)
    if not fs:
        K_w, K_g, _ = bloch_generators()
        S, G, Wm = sparse.csr_matrix((3, 3)), sparse.csr_matrix(K_g), sparse.csr_matrix(K_w)
    else:
        S, G, Wm = _central_spin_operators(fs)
    rhs = lambda t, y: S @ y + g(t) * (G @ y) + w(t) * (Wm @ y)
    y0 = np.zeros(S.shape[0])
    y0[2] = 1.0
    y = _integrate(rhs, y0, t_grid, rtol, atol, max_step)
    return BlochState(np.asarray(t_grid, dtype=float), y[2], y[1], y[0])


def _half_cycle(f: Fluctuator, T_C: float) -> np.ndarray:
    A = np.array([[0.0, -2.0 * f.lambda_], [2.0 * f.lambda_, -2.0 * f.gamma]])
    return expm(A * (0.5 * T_C))


def transfer_matrix_cpmg(f: Fluctuator, n: int, T_C):
    """CPMG envelope from the product of 2x2 transfer matrices.

    ``X = exp(A T_C/2)`` propagates ``(<e^{i phi}>, <xi e^{i phi}>)`` between
    pulses and ``Z = diag(1, -1)`` is a refocusing pulse; the envelope is the
    first entry of ``Z^(n mod 2) (X Z X)^n (1, 0)^T``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    Z = np.diag([1.0, -1.0])
    T = np.atleast_1d(np.asarray(T_C, dtype=float))
    out = np.empty_like(T)
    for i, tc in enumerate(T):
        X = _half_cycle(f, tc)
        M = np.linalg.matrix_power(X @ Z @ X, int(n))
        if n % 2:
            M = Z @ M
        out[i] = M[0, 0]
    return out if np.ndim(T_C) else float(out[0])


def xzx_eigenvalues(f: Fluctuator, T_C: float) -> np.ndarray:
    """Eigenvalues of ``X Z X`` for one cycle, sorted by real part."""
    X = _half_cycle(f, T_C)
    ev = np.linalg.eigvals(X @ np.diag([1.0, -1.0]) @ X)
    return ev[np.argsort(ev.real)]
