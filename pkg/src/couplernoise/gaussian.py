"""Decay under Gaussian noise: filter functions, spectra and decay exponents.

For Gaussian noise the envelope is ``exp(-Gamma)`` with

    Gamma = (2/pi) int_0^inf S(w) F(w) dw,   F(w) = |int h(t) e^{iwt} dt|^2.

``S`` is the two-sided spectrum of the coupling fluctuation itself (so a
telegraph source of amplitude ``lambda`` has the Lorentzian
``4 lambda^2 gamma / (w^2 + 4 gamma^2)``).

The quadrature splits the frequency axis.  Below a crossover ``W`` the
integrand is written with ``sinc`` factors so the ``w -> 0`` cancellation is
exact; above it the filter is a finite cosine series and each term is
integrated against ``S(w)/w^2`` with QUADPACK's Fourier-integral routine.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, special

from .sequences import FilterFunction, build_filter, ramsey_filter

__all__ = [
    "GaussianSpectrum",
    "CutoffRequiredError",
    "PoleError",
    "ramsey_filter_function",
    "cpmg_filter_function",
    "cpmg_filter_time_derivative",
    "filter_value",
    "gaussian_decay",
    "gaussian_decay_filter",
    "gaussian_cpmg_lorentzian_exact",
    "gaussian_one_over_f_ramsey",
    "gaussian_one_over_f_ramsey_asymptotic",
    "gaussian_one_over_f_cpmg_exact",
    "xi_cpmg",
    "xi_infinity",
    "DEFAULT_CUTOFF",
]

#: low-frequency cutoff of 1/f spectra when none is given (rad/us)
DEFAULT_CUTOFF = 2 * np.pi * 1e-4


class CutoffRequiredError(ValueError):
    """The decay integral diverges without a low-frequency cutoff."""


class PoleError(ValueError):
    """Closed-form filter evaluated exactly on a removable pole."""


@dataclass(frozen=True)
class GaussianSpectrum:
    """Two-sided, even noise spectrum ``S(w)`` in (rad/us)^2 per rad/us.

    Use the constructors :meth:`one_over_f`, :meth:`lorentzian` and
    :meth:`custom`.  ``S = amplitude / |w|`` above ``cutoff`` and zero below
    for the 1/f kind.
    """

    kind: str
    amplitude: float = 0.0
    cutoff: float = 0.0
    gamma: float = 0.0
    omega: np.ndarray | None = None
    values: np.ndarray | None = None
    func: Callable | None = field(default=None, compare=False)

    @classmethod
    def one_over_f(cls, lambda_sq: float, cutoff: float = DEFAULT_CUTOFF) -> "GaussianSpectrum":
        if lambda_sq < 0 or cutoff < 0:
            raise ValueError("amplitude and cutoff must be >= 0")
        return cls("one_over_f", amplitude=float(lambda_sq), cutoff=float(cutoff))

    @classmethod
    def lorentzian(cls, lambda_: float, gamma: float) -> "GaussianSpectrum":
        if lambda_ < 0 or gamma <= 0:
            raise ValueError("need lambda >= 0 and gamma > 0")
        return cls("lorentzian", amplitude=float(lambda_) ** 2, gamma=float(gamma))

    @classmethod
    def custom(cls, omega, values) -> "GaussianSpectrum":
        """Tabulated spectrum, linearly interpolated and zero beyond the table."""
        omega = np.asarray(omega, dtype=float)
        values = np.asarray(values, dtype=float)
        if omega.ndim != 1 or omega.shape != values.shape or np.any(np.diff(omega) <= 0):
            raise ValueError("custom spectrum needs increasing omega and matching values")
        if np.any(values < 0) or omega[0] < 0:
            raise ValueError("custom spectrum must be non-negative on omega >= 0")
        return cls("custom", omega=omega, values=values)

    def __call__(self, w):
        w = np.abs(np.asarray(w, dtype=float))
        if self.kind == "lorentzian":
            out = 4 * self.amplitude * self.gamma / (w * w + 4 * self.gamma**2)
        elif self.kind == "one_over_f":
            with np.errstate(divide="ignore"):
                out = np.where(w >= self.cutoff, self.amplitude / w, 0.0)
        elif self.kind == "custom":
            out = np.interp(w, self.omega, self.values, left=self.values[0], right=0.0)
        else:
            raise ValueError(f"unknown spectrum kind {self.kind!r}")
        return out if out.ndim else float(out)

    @property
    def is_zero(self) -> bool:
        if self.kind == "custom":
            return not np.any(self.values)
        return self.amplitude == 0

    @property
    def upper_edge(self) -> float:
        return float(self.omega[-1]) if self.kind == "custom" else np.inf

    def features(self) -> list[float]:
        """Frequencies where the spectrum changes character (quadrature breakpoints)."""
        if self.kind == "lorentzian":
            return [2 * self.gamma * x for x in (0.1, 1.0, 10.0)]
        if self.kind == "one_over_f":
            return [self.cutoff] if self.cutoff > 0 else []
        return list(self.omega)


def ramsey_filter_function(omega, t):
    """``F = 4 sin^2(w t/2)/w^2``; equals ``t^2`` at ``w = 0``."""
    omega = np.asarray(omega, dtype=float)
    out = (t * np.sinc(omega * t / (2 * np.pi))) ** 2
    return out if out.ndim else float(out)


def cpmg_filter_function(n: int, omega, t):
    """Closed-form CPMG filter for ``n`` cycles of total length ``t``.

    ``F = (4/w^2)(1 - sec(w T_C/2))^2 x {sin^2, cos^2}(n w T_C/2)`` for
    ``n`` even/odd, ``T_C = t/n``.  The factors ``cos(w T_C/2) = 0`` are
    removable singularities; they are excluded and evaluating within 1e-12 of
    one raises :class:`PoleError`.  Use :func:`filter_value` for a pole-free
    evaluation.
    """
    if t <= 0 or n < 1:
        raise ValueError("need t > 0 and n >= 1")
    omega = np.asarray(omega, dtype=float)
    x = omega * t / (2 * n)
    c = np.cos(x)
    if np.any(np.abs(c) < 1e-12):
        raise PoleError("cos(w T_C / 2) = 0: removable pole of the closed form")
    # 1 - sec x = -2 sin^2(x/2)/cos x keeps the w -> 0 limit accurate
    one_minus_sec = -2.0 * np.sin(0.5 * x) ** 2 / c
    osc = np.sin(n * x) ** 2 if n % 2 == 0 else np.cos(n * x) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 4.0 * one_minus_sec**2 * osc / omega**2
    # F ~ w^2 (T_C^2 t / 8)^2 ... -> 0 as w -> 0
    out = np.where(omega == 0, 0.0, out)
    return out if out.ndim else float(out)


def cpmg_filter_time_derivative(n: int, omega, t):
    """``dF/dt`` of :func:`cpmg_filter_function` at fixed ``n`` (even ``n``)."""
    if n % 2:
        raise ValueError("closed-form derivative is given for even n")
    omega = np.asarray(omega, dtype=float)
    y = omega * t / 2
    x = y / n
    sec = 1.0 / np.cos(x)
    d = (np.sin(y) * (sec - 1) * (n * np.cos(y) * (sec - 1) + np.sin(y) * np.tan(x) * sec)
         / (n * omega))
    return 4.0 * d


def _e2(theta):
    """``(1 + i th - e^{i th}) / th^2`` split into real and imaginary parts."""
    th = np.asarray(theta, dtype=float)
    re = 0.5 * np.sinc(th / (2 * np.pi)) ** 2
    small = np.abs(th) < 0.1
    ts = np.where(small, th, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        im = np.where(small, ts / 6 - ts**3 / 120 + ts**5 / 5040 - ts**7 / 362880,
                      (th - np.sin(th)) / th**2)
    return re, im


def filter_value(fl: FilterFunction, omega):
    """``|int h e^{iwt} dt|^2`` for any sign filter, stable at all ``w``.

    With ``(e^z - 1)/z = 1 + z E2(z)`` the transform is
    ``int h + i w sum_p a_p b_p^2 E2(i w b_p)`` (up to sign), so balanced
    filters lose no precision as ``w -> 0``.
    """
    b, a = fl.edge_terms()
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    er, ei = _e2(omega[:, None] * b[None, :])
    ab2 = a * b * b
    sr = np.sum(ab2 * er, axis=1)
    si = np.sum(ab2 * ei, axis=1)
    d = -fl.integral()
    # H = d + i w (sr + i si)
    re = d - omega * si
    im = omega * sr
    return re * re + im * im


def _cosine_series(fl: FilterFunction):
    """``w^2 F = c0 + sum_j c_j cos(w d_j)`` grouped by distinct lags ``d_j``."""
    b, a = fl.edge_terms()
    c0 = float(np.sum(a * a))
    i, j = np.triu_indices(len(b), k=1)
    lags = np.round(b[j] - b[i], 12)
    coef = 2 * a[i] * a[j]
    uniq, inv = np.unique(lags, return_inverse=True)
    cj = np.bincount(inv, weights=coef, minlength=uniq.size)
    keep = np.abs(cj) > 1e-14
    return c0, uniq[keep], cj[keep]


def gaussian_decay_filter(spectrum: GaussianSpectrum, fl: FilterFunction,
                          rtol: float = 1e-8) -> float:
    """Decay exponent for an arbitrary sign filter."""
    if spectrum.is_zero:
        return 0.0
    dc = fl.integral()
    if spectrum.kind == "one_over_f" and spectrum.cutoff == 0 and abs(dc) > 1e-12 * fl.duration:
        raise CutoffRequiredError(
            "filter passes DC; a 1/f spectrum needs a non-zero low-frequency cutoff")
    b = np.diff(fl.breakpoints)
    shortest = float(np.min(b[b > 0]))
    T = fl.duration
    W = 4 * np.pi / shortest
    if spectrum.upper_edge < W:
        W = spectrum.upper_edge

    def f_low(w):
        return spectrum(w) * filter_value(fl, w)[0]

    lo = spectrum.cutoff if spectrum.kind == "one_over_f" else 0.0
    # breakpoints: spectral features, a log ladder near the origin, then ~one
    # oscillation of the slowest filter component per panel
    pts = [p for p in spectrum.features() if lo < p < W]
    start = max(lo, 1e-6 / T)
    pts += list(np.geomspace(start, 2 * np.pi / T, 12)) if start < 2 * np.pi / T else []
    pts += list(np.arange(2 * np.pi / T, W, 2 * np.pi / T))
    edges = np.unique(np.clip(np.array([lo] + pts + [W]), lo, W))
    panels = [(x0, x1) for x0, x1 in zip(edges[:-1], edges[1:]) if x1 - x0 > 1e-9 * W]
    # a cheap pass fixes the absolute scale so panels near filter zeros converge
    xg, wg = np.polynomial.legendre.leggauss(32)
    scale = 0.0
    for x0, x1 in panels:
        mid, half = 0.5 * (x0 + x1), 0.5 * (x1 - x0)
        scale += half * np.dot(wg, spectrum(mid + half * xg) * filter_value(fl, mid + half * xg))
    atol = abs(scale) * rtol * 1e-2 / len(panels)
    low = 0.0
    for x0, x1 in panels:
        low += integrate.quad(f_low, x0, x1, epsabs=atol, epsrel=rtol * 1e-2, limit=200)[0]
    high = 0.0
    if np.isfinite(spectrum.upper_edge) and W >= spectrum.upper_edge:
        pass
    else:
        c0, lags, cj = _cosine_series(fl)
        g = lambda w: spectrum(w) / (w * w)
        tol = max(abs(low), 1e-300) * rtol * 1e-2
        v, _ = integrate.quad(g, W, np.inf, epsabs=tol, epsrel=0.0, limit=200)
        high += c0 * v
        for d, c in zip(lags, cj):
            v, _ = integrate.quad(g, W, np.inf, weight="cos", wvar=d,
                                  epsabs=tol / max(1.0, abs(c)), limlst=200)
            high += c * v
    return float(2.0 / np.pi * (low + high))


def gaussian_decay(spectrum: GaussianSpectrum, mode: str, t: float, n: int | None = None,
                   rtol: float = 1e-8) -> float:
    """``Gamma`` for a Ramsey window of length ``t`` or an ``n``-cycle CPMG of total ``t``."""
    if t <= 0:
        raise ValueError("t must be > 0")
    if mode == "ramsey":
        fl = ramsey_filter(t)
    elif mode == "cpmg":
        if n is None or n < 1:
            raise ValueError("cpmg mode needs n >= 1")
        fl = build_filter(n, t / n)
    else:
        raise ValueError(f"unknown filter mode {mode!r}")
    return gaussian_decay_filter(spectrum, fl, rtol)


def gaussian_cpmg_lorentzian_exact(lambda_: float, gamma: float, n: int, T_C):
    """Exact ``Gamma(n, T_C)`` for Gaussian noise with a Lorentzian spectrum.

    ``(2 lambda^2 n/gamma^2)(gamma T_C - tanh gamma T_C) - dGamma`` where
    ``dGamma = 8 lambda^2 e^{-n gamma T_C} sinh^4(gamma T_C/2)
    / (gamma^2 cosh^2 gamma T_C)`` times ``sinh`` (even ``n``) or ``cosh``
    (odd ``n``) of ``n gamma T_C``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    T = np.asarray(T_C, dtype=float)
    if gamma == 0:
        out = np.zeros_like(T)
        return out if out.ndim else 0.0
    a = gamma * T
    with np.errstate(invalid="ignore", divide="ignore"):
        series = a**3 / 3 - 2 * a**5 / 15 + 17 * a**7 / 315
        lead = np.where(a < 1e-3, series, a - np.tanh(a))
        # sinh^2(a/2)/cosh(a) = (1 - sech a)/2, and 1 - sech a = 2 sinh^2(a/2)/cosh a
        h = np.sinh(np.minimum(0.5 * a, 300.0)) ** 2 / np.cosh(np.minimum(a, 600.0))
        h = np.where(a > 600.0, 0.5, h)
    tail = 0.5 * (1 - np.exp(-2 * n * a)) if n % 2 == 0 else 0.5 * (1 + np.exp(-2 * n * a))
    out = 2 * lambda_**2 * n / gamma**2 * lead - 8 * lambda_**2 * h * h * tail / gamma**2
    return out if out.ndim else float(out)


def _one_minus_sech(x):
    x = np.asarray(x, dtype=float)
    xc = np.minimum(x, 300.0)
    return np.where(x > 300.0, 1.0, 2 * np.sinh(0.5 * xc) ** 2 / np.cosh(xc))


def _first_term(x):
    """``(x - tanh x)/x^3`` with its small-x series."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        v = (x - np.tanh(x)) / x**3
    return np.where(x < 1e-2, 1 / 3 - 2 * x**2 / 15 + 17 * x**4 / 315, v)


def xi_infinity() -> float:
    """``int_0^inf (x - tanh x)/x^3 dx``."""
    a, _ = integrate.quad(_first_term, 0, 1, epsabs=0, epsrel=1e-12)
    b, _ = integrate.quad(_first_term, 1, np.inf, epsabs=0, epsrel=1e-12, limit=200)
    return a + b


def xi_cpmg(n: int) -> float:
    """The weakly ``n``-dependent constant of the 1/f CPMG decay rate.

    ``int_0^inf [(x - tanh x)/x^3 + 8 e^{-2nx} sech^2 x sinh^4(x/2)/x^2] dx``;
    the second term is evaluated as ``2 e^{-2nx} (1 - sech x)^2 / x^2``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    second = lambda x: 2 * np.exp(-2 * n * x) * (_one_minus_sech(x) / x) ** 2
    extra, _ = integrate.quad(second, 0, np.inf, epsabs=0, epsrel=1e-12, limit=200)
    return xi_infinity() + extra


def _d_integral(n: int) -> float:
    """``int_0^inf e^{-2nx} sinh^4(x/2) sech^2(x) / x^3 dx``."""
    f = lambda x: np.exp(-2 * n * x) * _one_minus_sech(x) ** 2 / (4 * x**3) if x > 0 else 0.0
    a, _ = integrate.quad(f, 0, 1, epsabs=0, epsrel=1e-12)
    b, _ = integrate.quad(f, 1, np.inf, epsabs=0, epsrel=1e-12, limit=200)
    return a + b


def gaussian_one_over_f_cpmg_exact(lambda_: float, n: int, T_C: float) -> float:
    """``Gamma`` for ``S = lambda^2/w`` (no cutoff) under an ``n``-cycle CPMG.

    Writing ``1/w`` as a superposition of Lorentzians over their widths and
    integrating the exact Lorentzian result gives

        (2 lambda^2 T_C^2 / pi) [n xi_inf - 2 D(0) + 2 (-1)^n D(n)],

    ``D(n) = int_0^inf e^{-2nx} sinh^4(x/2) sech^2 x / x^3 dx``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    br = n * xi_infinity() - 2 * _d_integral(0) + 2 * (-1) ** n * _d_integral(n)
    return float(2 * lambda_**2 * T_C**2 / np.pi * br)


def gaussian_one_over_f_ramsey(lambda_: float, t, cutoff: float = DEFAULT_CUTOFF):
    """Closed form of ``Gamma`` for ``S = lambda^2/w`` (``w > cutoff``) in a Ramsey window."""
    if cutoff <= 0:
        raise CutoffRequiredError("Ramsey decay under 1/f noise needs cutoff > 0")
    t = np.asarray(t, dtype=float)
    x = cutoff * t
    with np.errstate(divide="ignore", invalid="ignore"):
        _, ci = special.sici(x)
        # (1 - cos x + x sin x - x^2 Ci x)/x^2 with each piece kept stable at small x
        br = 2 * (np.sin(0.5 * x) / x) ** 2 + np.sinc(x / np.pi) - ci
    out = np.where(t > 0, 2 * lambda_**2 * t * t / np.pi * br, 0.0)
    return out if out.ndim else float(out)


def gaussian_one_over_f_ramsey_asymptotic(lambda_: float, t, cutoff: float = DEFAULT_CUTOFF):
    """Small ``cutoff * t`` limit ``(lambda^2 t^2/pi)(3 - 2 gamma_E + 2 ln(1/(cutoff t)))``."""
    t = np.asarray(t, dtype=float)
    out = lambda_**2 * t**2 / np.pi * (3 - 2 * np.euler_gamma - 2 * np.log(cutoff * t))
    return out if out.ndim else float(out)
