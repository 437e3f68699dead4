"""Closed-form decay envelopes for telegraph noise.

A fluctuator of amplitude ``lambda`` and switching rate ``gamma`` is
underdamped when ``2 lambda > gamma`` and then ``Omega = sqrt(gamma**2 -
4 lambda**2)`` is imaginary.  Every expression here is written through the
entire functions

    shc(z) = sinh(sqrt z) / sqrt z,     c2(z) = (cosh(sqrt z) - 1) / z,

of ``z = (Omega t)**2``, which are real on both sides of critical damping and
have no singularity at ``Omega = 0``.  Large overdamped arguments go through
logarithms so that long sequences neither overflow nor lose precision.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .noise import Fluctuator

__all__ = [
    "EnvelopeResult",
    "RegimeError",
    "regime",
    "ramsey_rtn",
    "ramsey_envelope",
    "cpmg_rtn",
    "cpmg_envelope",
    "multi_fluctuator_envelope",
    "underdamped_approx",
    "dephasing_prefactor",
]


class RegimeError(ValueError):
    """Raised when an approximation is used outside its damping regime."""


@dataclass(frozen=True)
class EnvelopeResult:
    times: np.ndarray
    chi: np.ndarray
    regime: str


def regime(f: Fluctuator) -> str:
    two_l = 2.0 * f.lambda_
    if two_l > f.gamma:
        return "underdamped"
    if two_l < f.gamma:
        return "overdamped"
    return "critical"


_SMALL = 1e-4


def _shc(z):
    """``sinh(sqrt z)/sqrt z`` for real ``z`` of either sign (bounded arguments)."""
    z = np.asarray(z, dtype=float)
    x = np.sqrt(np.abs(z))
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        pos = np.sinh(x) / x
        neg = np.sin(x) / x
    series = 1.0 + z / 6.0 + z * z / 120.0
    return np.where(np.abs(z) < _SMALL, series, np.where(z > 0, pos, neg))


def _c2(z):
    """``(cosh(sqrt z) - 1)/z`` for real ``z``; written as ``2 sinh^2(x/2)/x^2``."""
    z = np.asarray(z, dtype=float)
    x = np.sqrt(np.abs(z))
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        pos = 2.0 * (np.sinh(0.5 * x) / x) ** 2
        neg = 2.0 * (np.sin(0.5 * x) / x) ** 2
    series = 0.5 + z / 24.0 + z * z / 720.0
    return np.where(np.abs(z) < _SMALL, series, np.where(z > 0, pos, neg))


def _ch(z):
    """``cosh(sqrt z)``, i.e. ``cos(sqrt(-z))`` for negative ``z``."""
    z = np.asarray(z, dtype=float)
    x = np.sqrt(np.abs(z))
    with np.errstate(over="ignore"):
        return np.where(z >= 0, np.cosh(x), np.cos(x))


_ZBIG = 400.0


def _log_sinh(x):
    """``log(sinh x)`` for ``x > 0`` without overflow."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        big = x - np.log(2.0) + np.log1p(-np.exp(-2.0 * x))
        small = np.log(np.sinh(np.minimum(x, 20.0)))
    return np.where(x > 20.0, big, small)


def _log_shc(z):
    """``log shc(z)`` for ``z >= 0``."""
    z = np.asarray(z, dtype=float)
    x = np.sqrt(z)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = _log_sinh(x) - np.log(x)
    return np.where(z < _SMALL, np.log1p(z / 6.0 + z * z / 120.0), val)


def _log_c2(z):
    z = np.asarray(z, dtype=float)
    x = np.sqrt(z)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.log(2.0) + 2.0 * (_log_sinh(0.5 * x) - np.log(x))
    return np.where(z < _SMALL, np.log(0.5 + z / 24.0 + z * z / 720.0), val)


def ramsey_rtn(f: Fluctuator, t):
    """Free-evolution envelope ``e^{-gamma t}(cosh Omega t + gamma/Omega sinh Omega t)``.

    Parameters
    ----------
    f : Fluctuator
    t : array_like
        Evolution time(s) in us, ``t >= 0``.

    Returns
    -------
    ndarray or float
        ``chi(t)``; ``cos(2 lambda t)`` for a frozen fluctuator and 1 when
        ``lambda = 0``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be >= 0")
    g, lam = f.gamma, f.lambda_
    d2 = (g - 2 * lam) * (g + 2 * lam)  # Omega^2
    z = d2 * t * t
    a = g * t
    zc = np.minimum(z, 1.0)
    out = np.exp(-a) * (_ch(zc) + a * _shc(zc))
    if d2 > 0:
        om = np.sqrt(d2)
        r = g / om
        # Omega t > 1: sum of two decaying exponentials, no overflow
        two_exp = 0.5 * (1 + r) * np.exp((om - g) * t) + 0.5 * (1 - r) * np.exp(-(om + g) * t)
        out = np.where(z > 1.0, two_exp, out)
    return out if out.ndim else float(out)


def _alpha_and_ratio(lam: float, gamma: float, T):
    """``alpha`` and ``q / cosh(alpha)`` for one CPMG cycle of length ``T``."""
    T = np.asarray(T, dtype=float)
    a = gamma * T
    z = (gamma - 2 * lam) * (gamma + 2 * lam) * T * T
    zc = np.minimum(z, _ZBIG)
    s = a * _shc(zc)
    alpha = np.arcsinh(s)
    ratio = (1.0 + a * a * _c2(zc)) / np.sqrt(1.0 + s * s)
    big = z > _ZBIG
    if np.any(big):
        # overdamped with large Omega T: the same quantities through logarithms
        zb = np.where(big, z, _ZBIG)
        log_a = np.log(np.where(big, a, 1.0))
        log_s = log_a + _log_shc(zb)
        log_q = np.logaddexp(0.0, 2 * log_a + _log_c2(zb))
        alpha_b = log_s + np.log1p(np.sqrt(1.0 + np.exp(-2 * log_s)))
        ratio_b = np.exp(log_q - 0.5 * np.logaddexp(0.0, 2 * log_s))
        alpha = np.where(big, alpha_b, alpha)
        ratio = np.where(big, ratio_b, ratio)
    return alpha, ratio


def cpmg_rtn(f: Fluctuator, n: int, T_C):
    """CPMG envelope after ``n`` cycles of length ``T_C`` (instantaneous pi-pulses).

    With ``sinh alpha = gamma T_C shc`` and ``q = 1 + (gamma T_C)**2 c2``::

        n odd : e^{-n gamma T_C} (q cosh(n alpha)/cosh(alpha) + sinh(n alpha))
        n even: e^{-n gamma T_C} (q sinh(n alpha)/cosh(alpha) + cosh(n alpha))

    The exponentials are combined as ``e^{n(alpha - gamma T_C)}`` and
    ``e^{-n(alpha + gamma T_C)}`` so arbitrarily long sequences stay finite.
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    T = np.asarray(T_C, dtype=float)
    if np.any(T < 0):
        raise ValueError("T_C must be >= 0")
    alpha, r = _alpha_and_ratio(f.lambda_, f.gamma, T)
    a = f.gamma * T
    ep = np.exp(n * (alpha - a))
    em = np.exp(-n * (alpha + a))
    ch, sh = 0.5 * (ep + em), 0.5 * (ep - em)
    out = r * ch + sh if n % 2 else r * sh + ch
    return out if out.ndim else float(out)


def ramsey_envelope(f: Fluctuator, times) -> EnvelopeResult:
    t = np.asarray(times, dtype=float)
    return EnvelopeResult(t, np.atleast_1d(ramsey_rtn(f, t)), regime(f))


def cpmg_envelope(f: Fluctuator, n: int, T_C) -> EnvelopeResult:
    """CPMG envelope on a ``T_C`` grid, reported against total time ``n T_C``."""
    T = np.asarray(T_C, dtype=float)
    return EnvelopeResult(n * T, np.atleast_1d(cpmg_rtn(f, n, T)), regime(f))


def multi_fluctuator_envelope(fs: Iterable[Fluctuator], mode: str, t, n: int | None = None):
    """Product of single-fluctuator envelopes for independent sources.

    ``mode='ramsey'`` takes evolution times ``t``; ``mode='cpmg'`` takes cycle
    times ``t = T_C`` and needs ``n``.
    """
    t = np.asarray(t, dtype=float)
    out = np.ones_like(t)
    if mode == "ramsey":
        for f in fs:
            out = out * ramsey_rtn(f, t)
    elif mode == "cpmg":
        if n is None:
            raise ValueError("cpmg mode needs n")
        for f in fs:
            out = out * cpmg_rtn(f, n, t)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return out if out.ndim else float(out)


def underdamped_approx(f: Fluctuator, n: int, T_C):
    """Leading-order CPMG envelope for ``gamma << 2 lambda``.

    ``e^{-n gamma T_C} (1 + n (gamma/w) sin(w T_C))`` with
    ``w = sqrt(4 lambda**2 - gamma**2)``; valid while ``n gamma / w << 1``.
    """
    if not 2 * f.lambda_ > f.gamma:
        raise RegimeError("underdamped approximation needs 2*lambda > gamma")
    T = np.asarray(T_C, dtype=float)
    w = np.sqrt((2 * f.lambda_ - f.gamma) * (2 * f.lambda_ + f.gamma))
    out = np.exp(-n * f.gamma * T) * (1.0 + n * f.gamma / w * np.sin(w * T))
    return out if out.ndim else float(out)


def dephasing_prefactor(gamma_phi: float, t):
    """Single-qubit dephasing factor on the normalised observable, ``e^{-gamma_phi t/4}``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be >= 0")
    out = np.exp(-0.25 * gamma_phi * t)
    return out if out.ndim else float(out)
