"""Synthetic measurement and fit, end to end.

1. Generate 10000-shot CPMG curves for n = 1, 2, 4 from one telegraph
   fluctuator plus single-qubit dephasing, and fit them jointly.
2. Generate n = 1 CPMG curves at eleven gate strengths from a noise model
   whose amplitude follows a quadratic flux sensitivity, and recover the
   curvature ratio chi2/chi1 and the dephasing rate.
"""
import numpy as np

from couplernoise.device import TWO_PI, ChiPolynomial
from couplernoise.fitting import FitModel, fit_cpmg_family, fit_g_scaling
from couplernoise.noise import Fluctuator, NoiseModel
from couplernoise.sequences import GatePulse, SequenceSpec
from couplernoise.synth import synthesize

truth = NoiseModel((Fluctuator(TWO_PI * 0.3, 0.02),), gamma_phi=1 / 90)
curves = [synthesize(truth, SequenceSpec("cpmg", n=n, m=800 // n), shots=10_000, seed=n)
          for n in (1, 2, 4)]
res = fit_cpmg_family(curves, FitModel(include_gamma_phi=True))
print("family fit")
print(res.report())
print(f"truth: lambda_1 = {TWO_PI * 0.3:.5g}, gamma_1 = 0.02, gamma_phi = {1 / 90:.5g}\n")

chi = ChiPolynomial(2.5, -1.0, 0.12)
scaled = NoiseModel((Fluctuator(0.0, 1 / 70, flux_scale=1.0),), gamma_phi=1 / 90,
                    white_flux_scale=0.08)
g_set = (3, 4, 5, 6, 8, 10, 15, 20, 30, 40, 50)
g_curves = [synthesize(scaled, SequenceSpec("cpmg", n=1, m=500, pulse=GatePulse(g_max=TWO_PI * g)),
                       shots=10_000, seed=i, chi=chi) for i, g in enumerate(g_set)]
res = fit_g_scaling(g_curves, FitModel(share_chi_shape=True, include_white=True,
                                       include_gamma_phi=True))
print("gate-strength scaling fit")
print(res.report())
print(f"truth: chi2/chi1 magnitude 0.12 us, gamma_phi = {1 / 90:.5g}, gamma_1 = {1 / 70:.5g}")
for w in res.warnings:
    print("warning:", w)
