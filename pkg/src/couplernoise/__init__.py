"""Coupling noise in tunable-coupler qubit pairs.

Random-telegraph and 1/f models of coupler flux noise, their decay
envelopes under coupler Ramsey and CPMG sequences, Monte Carlo and
master-equation engines, and fits that recover noise parameters from
decay curves.  Units throughout: us, 1/us and rad/us.
"""
__version__ = "0.1.0"

from .curves import DecayCurve, sample_shots, shot_stderr
from .device import (DEFAULT_DEVICE, ChiPolynomial, DeviceParams, coupling_g, coupling_vs_flux,
                     fit_chi_polynomial, flux_sensitivity, g_noise_amplitude, operating_lambda)
from .envelopes import (EnvelopeResult, RegimeError, cpmg_envelope, cpmg_rtn, dephasing_prefactor,
                        multi_fluctuator_envelope, ramsey_envelope, ramsey_rtn, regime,
                        underdamped_approx)
from .gaussian import (GaussianSpectrum, gaussian_cpmg_lorentzian_exact, gaussian_decay,
                       gaussian_decay_filter, xi_cpmg, xi_infinity)
from .noise import Fluctuator, NoiseModel, make_one_over_f_ensemble, sample_rtn_trajectory
from .sequences import FilterFunction, GatePulse, SequenceSpec, build_filter
from .fitting import (FitError, FitModel, FitResult, fit_cpmg_family, fit_g_scaling,
                      fit_ramsey_gaussian)
from .synth import closed_form_curve, synthesize

__all__ = [
    "DecayCurve", "sample_shots", "shot_stderr",
    "DeviceParams", "DEFAULT_DEVICE", "ChiPolynomial", "coupling_g", "coupling_vs_flux",
    "flux_sensitivity", "g_noise_amplitude", "operating_lambda", "fit_chi_polynomial",
    "EnvelopeResult", "RegimeError", "ramsey_rtn", "cpmg_rtn", "ramsey_envelope",
    "cpmg_envelope", "multi_fluctuator_envelope", "underdamped_approx", "dephasing_prefactor",
    "regime",
    "GaussianSpectrum", "gaussian_decay", "gaussian_decay_filter",
    "gaussian_cpmg_lorentzian_exact", "xi_cpmg", "xi_infinity",
    "Fluctuator", "NoiseModel", "make_one_over_f_ensemble", "sample_rtn_trajectory",
    "GatePulse", "SequenceSpec", "FilterFunction", "build_filter",
    "FitError", "FitModel", "FitResult", "fit_cpmg_family", "fit_g_scaling",
    "fit_ramsey_gaussian", "closed_form_curve", "synthesize",
]
