"""Numerical engines: trajectory Monte Carlo, deterministic ODE oracles and master equations."""
from .lindblad import (MeasurementError, averaged_generator, lindblad_generator,
                       lindblad_propagate, normalized_sigma_z, reference_interaction_generator)
from .montecarlo import SimResult, effective_noise, mc_cpmg, mc_cpmg_chi, mc_ramsey, mc_ramsey_chi
from .ode import (MAX_CENTRAL_SPINS, BlochState, CapacityError, StiffnessError,
                  central_spin_propagate, shapiro_loginov_propagate, transfer_matrix_cpmg,
                  xzx_eigenvalues)

__all__ = [
    "SimResult", "effective_noise", "mc_ramsey", "mc_cpmg", "mc_ramsey_chi", "mc_cpmg_chi",
    "BlochState", "StiffnessError", "CapacityError", "MAX_CENTRAL_SPINS",
    "shapiro_loginov_propagate", "central_spin_propagate", "transfer_matrix_cpmg",
    "xzx_eigenvalues", "MeasurementError", "normalized_sigma_z", "lindblad_generator",
    "reference_interaction_generator", "averaged_generator", "lindblad_propagate",
]
