"""Closed-form curves and synthetic "measured" data.

Curves here use the exact single-fluctuator envelopes with gate-averaged
amplitudes, times the white-noise and dephasing factors.  Adding binomial
shot noise turns them into stand-ins for measured data.
"""
from __future__ import annotations

import numpy as np

from .curves import DecayCurve, sample_shots
from .device import DEFAULT_DEVICE, TWO_PI, ChiPolynomial, DeviceParams
from .envelopes import cpmg_rtn, ramsey_rtn
from .engine.montecarlo import _meta, effective_noise
from .fitting import pulse_moments
from .noise import NoiseModel
from .sequences import SequenceSpec, gate_pulse_area

__all__ = ["chi_averaged_lambda", "closed_form_curve", "synthesize"]


def chi_averaged_lambda(chi: ChiPolynomial, seq: SequenceSpec,
                        p: DeviceParams = DEFAULT_DEVICE) -> float:
    """Gate-averaged ``2 pi chi(g) delta_phi_m`` for a quadratic sensitivity.

    ``chi`` is written in the signed coupling, which is negative on the
    indirect branch, so ``<chi> = chi0 - chi1 <|g|> + chi2 <g^2>``.
    """
    a1, a2 = pulse_moments(seq.pulse.duration, seq.pulse.rise_time)
    g = seq.pulse.g_max
    return float(TWO_PI * p.delta_phi_m * abs(chi.chi0 - chi.chi1 * a1 * g + chi.chi2 * a2 * g * g))


def _resolve(model: NoiseModel, seq: SequenceSpec, p: DeviceParams, chi: ChiPolynomial | None):
    if chi is None:
        return effective_noise(model, seq, p)
    lam_dev = chi_averaged_lambda(chi, seq, p)
    fls = [f.with_lambda(f.flux_scale * lam_dev) if f.flux_scale is not None else f
           for f in model.fluctuators]
    sigma = model.white_sigma if model.white_flux_scale is None else model.white_flux_scale * lam_dev
    return fls, float(sigma)


def closed_form_curve(model: NoiseModel, seq: SequenceSpec, p: DeviceParams = DEFAULT_DEVICE,
                      chi: ChiPolynomial | None = None, envelope_only: bool = False) -> DecayCurve:
    """Noise-free curve for ``seq`` from the closed-form envelopes.

    Parameters
    ----------
    chi : ChiPolynomial, optional
        Replace the device sensitivity by this polynomial when resolving
        flux-scaled sources.
    envelope_only : bool
        For Ramsey, drop the coherent ``cos(2 G)`` factor.
    """
    fls, sigma = _resolve(model, seq, p, chi)
    t = seq.curve_times()
    val = np.exp(-0.25 * model.gamma_phi * t - 2.0 * sigma**2 * t)
    meta = _meta(seq)
    if seq.kind == "cpmg":
        T = t / seq.n
        for f in fls:
            val = val * cpmg_rtn(f, seq.n, T)
    else:
        for f in fls:
            val = val * ramsey_rtn(f, t)
        if envelope_only:
            meta["envelope"] = True
        else:
            val = val * np.cos(2.0 * seq.curve_points() * gate_pulse_area(seq.pulse))
    return DecayCurve(t, np.clip(val, -1.0, 1.0), np.zeros_like(t), meta)


def synthesize(model: NoiseModel, seq: SequenceSpec, p: DeviceParams = DEFAULT_DEVICE,
               shots: int = 10_000, seed: int = 0, chi: ChiPolynomial | None = None,
               envelope_only: bool = False) -> DecayCurve:
    """Closed-form curve with ``shots``-sample binomial noise (seeded)."""
    clean = closed_form_curve(model, seq, p, chi, envelope_only)
    return sample_shots(clean, shots, np.random.default_rng(seed))
