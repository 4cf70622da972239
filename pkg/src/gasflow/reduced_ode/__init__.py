from .integrator import integrate, Trajectory, Event
from .systems import SystemKind, ParamSet, STATE_NAMES, make_rhs
from .analysis import (
    run, energy, kinetic_energy, potential_energy, energy_rate, closed_form_mu0,
    equilibria, Equilibrium, asymptotic_fit, FitResult, phase_portrait, Portrait, reflection_defect,
)

__all__ = [
    "integrate", "Trajectory", "Event", "SystemKind", "ParamSet", "STATE_NAMES", "make_rhs",
    "run", "energy", "kinetic_energy", "potential_energy", "energy_rate", "closed_form_mu0",
    "equilibria", "Equilibrium", "asymptotic_fit", "FitResult", "phase_portrait", "Portrait",
    "reflection_defect",
]
