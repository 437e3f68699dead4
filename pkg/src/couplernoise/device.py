"""Flux -> coupler frequency -> qubit-qubit coupling, and the resulting g-noise.

All angular frequencies are in rad/us and fluxes are fractions of the flux
quantum (``phi0 = 1``).  The coupling is negative on the branch where the
indirect (coupler-mediated) path dominates; callers that work with the gate
amplitude ``|g|`` go through :func:`operating_lambda`.
"""
from __future__ import annotations

from dataclasses import dataclass, asdict, fields

import numpy as np

TWO_PI = 2.0 * np.pi

__all__ = [
    "DeviceParams",
    "ChiPolynomial",
    "DEFAULT_DEVICE",
    "coupler_frequency",
    "coupling_g",
    "coupling_vs_flux",
    "flux_sensitivity",
    "flux_sensitivity_phi",
    "fit_chi_polynomial",
    "g_noise_amplitude",
    "operating_lambda",
    "instantaneous_larmor",
    "exact_larmor",
]


@dataclass(frozen=True)
class DeviceParams:
    """Circuit constants of a qubit pair sharing a tunable coupler.

    Defaults are representative, not measured: 6 GHz qubits, a 9 GHz coupler
    sweet spot, indirect efficiency ``k = 0.02`` and a small direct
    efficiency ``k_d`` that puts ``g = 0`` inside the tunable range.
    """

    omega_q: float = TWO_PI * 6000.0
    omega_max: float = TWO_PI * 9000.0
    k: float = 0.02
    k_d: float = 4.0e-4
    phi0: float = 1.0
    delta_phi_m: float = 6.0e-5

    def __post_init__(self):
        if not (self.omega_max > self.omega_q > 0):
            raise ValueError("need omega_max > omega_q > 0")
        if not (0 < self.k < 1):
            raise ValueError("indirect coupling efficiency k must lie in (0, 1)")
        if self.phi0 <= 0 or self.delta_phi_m < 0:
            raise ValueError("phi0 must be positive and delta_phi_m non-negative")

    @property
    def k_qq(self) -> float:
        """Total coupling efficiency ``k_d + k**2``."""
        return self.k_d + self.k**2

    @property
    def resonance_flux(self) -> float:
        """Flux at which the coupler comes down to the qubit frequency."""
        return self.phi0 / np.pi * np.arccos((self.omega_q / self.omega_max) ** 2)

    @property
    def g_at_sweet_spot(self) -> float:
        return coupling_g(self.omega_max, self)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DeviceParams":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown device field(s): {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in d.items()})


DEFAULT_DEVICE = DeviceParams()


@dataclass(frozen=True)
class ChiPolynomial:
    """Quadratic model ``chi(g) = chi0 + chi1 g + chi2 g**2`` with its fit residual."""

    chi0: float
    chi1: float
    chi2: float
    max_rel_residual: float = 0.0

    def __call__(self, g):
        return self.chi0 + self.chi1 * g + self.chi2 * np.square(g)

    @property
    def ratio(self) -> float:
        """``chi2 / chi1`` -- in us when ``g`` is expressed in rad/us."""
        return self.chi2 / self.chi1


def coupler_frequency(phi, p: DeviceParams = DEFAULT_DEVICE):
    return p.omega_max * np.sqrt(np.abs(np.cos(np.pi * np.asarray(phi) / p.phi0)))


def coupling_g(omega_c, p: DeviceParams = DEFAULT_DEVICE):
    """Effective coupling of two resonant qubits through a coupler at ``omega_c``."""
    omega_c = np.asarray(omega_c, dtype=float)
    detuning = omega_c**2 - p.omega_q**2
    if np.any(detuning == 0):
        raise ZeroDivisionError("coupler resonant with the qubits: coupling diverges")
    g = (p.k_d - p.k**2 * p.omega_q**2 / detuning) * p.omega_q / 2.0
    return g if g.ndim else float(g)


def coupling_vs_flux(phi, p: DeviceParams = DEFAULT_DEVICE):
    return coupling_g(coupler_frequency(phi, p), p)


def flux_sensitivity_phi(phi, p: DeviceParams = DEFAULT_DEVICE):
    """``|dg/dPhi| / 2pi`` written as a function of coupler flux."""
    x = np.pi * np.asarray(phi, dtype=float) / p.phi0
    den = 4.0 * p.phi0 * (p.omega_max**2 * np.cos(x) - p.omega_q**2) ** 2
    return np.abs(p.k**2 * p.omega_q**3 * p.omega_max**2 * np.sin(x) / den)


def flux_sensitivity(g, p: DeviceParams = DEFAULT_DEVICE):
    """Flux sensitivity ``|dg/dPhi| / 2pi`` expressed through the (signed) coupling.

    Valid on the branch ``omega_c > omega_q`` with ``g <= k_d omega_q / 2``;
    outside it the radicand turns negative and ``ValueError`` is raised.  The
    endpoint ``g = k_d omega_q / 2`` (coupler detuned to infinity) gives 0.
    """
    g = np.asarray(g, dtype=float)
    wq = p.omega_q
    a = p.k_d * wq - 2.0 * g
    b = p.k_qq * wq - 2.0 * g
    radicand = p.omega_max**4 * a**2 - wq**4 * b**2
    if np.any(a < 0) or np.any((radicand < 0) & (a > 0)):
        raise ValueError("coupling outside the operating branch (omega_c > omega_q)")
    chi = a * np.sqrt(np.maximum(radicand, 0.0)) / (4.0 * p.phi0 * p.k**2 * wq**3)
    return chi if chi.ndim else float(chi)


def g_noise_amplitude(g, p: DeviceParams = DEFAULT_DEVICE):
    """Amplitude of coupling noise ``lambda(g) = 2 pi chi(g) delta_phi_m`` (rad/us)."""
    return TWO_PI * flux_sensitivity(g, p) * p.delta_phi_m


def operating_lambda(g_abs, p: DeviceParams = DEFAULT_DEVICE):
    """g-noise amplitude for a gate of strength ``|g|`` on the indirect branch."""
    return g_noise_amplitude(-np.abs(g_abs), p)


def fit_chi_polynomial(g_samples, chi_samples) -> ChiPolynomial:
    """Least-squares quadratic through ``(g, chi)`` samples."""
    g = np.asarray(g_samples, dtype=float)
    chi = np.asarray(chi_samples, dtype=float)
    if g.shape != chi.shape or g.ndim != 1:
        raise ValueError("g and chi samples must be 1-d arrays of equal length")
    if np.unique(g).size < 3:
        raise ValueError("need at least three distinct g values for a quadratic")
    # scale the abscissa so the Vandermonde matrix stays well conditioned
    scale = np.max(np.abs(g)) or 1.0
    V = np.vander(g / scale, 3, increasing=True)
    coef, _, rank, _ = np.linalg.lstsq(V, chi, rcond=None)
    if rank < 3:
        raise ValueError("rank-deficient sample set")
    c0, c1, c2 = coef[0], coef[1] / scale, coef[2] / scale**2
    fit = c0 + c1 * g + c2 * g**2
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.abs(fit - chi) / np.abs(chi)
    rel = np.where(chi == 0, np.abs(fit - chi), rel)
    return ChiPolynomial(float(c0), float(c1), float(c2), float(np.max(rel)))


def instantaneous_larmor(g, delta_g, delta_omega):
    """Second-order Larmor frequency ``2g + 2dg + dw**2 / (4g)``."""
    if np.any(np.asarray(g) == 0):
        raise ZeroDivisionError("Larmor expansion needs g != 0")
    return 2.0 * g + 2.0 * delta_g + np.square(delta_omega) / (4.0 * g)


def exact_larmor(g, delta_g, delta_omega):
    return 2.0 * np.sqrt((g + delta_g) ** 2 + np.square(delta_omega) / 4.0)
