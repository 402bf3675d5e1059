"""Pseudospectral simulator for a quasi-incompressible Navier-Stokes/Cahn-Hilliard mixture
with fractional interfacial energy on the periodic torus."""

from .constitutive import EnergyReport, PhysParams, dissipation, total_energy
from .modelh import ModelHState, step_modelh
from .relent import RateReport, RelEnergyReport, alpha_sweep, relative_energy
from .spectral import TorusGrid
from .stepper import MixtureState, PicardSettings, StepDiagnostics, run, step

__version__ = "0.1.0"

__all__ = [
    "EnergyReport", "MixtureState", "ModelHState", "PhysParams", "PicardSettings", "RateReport",
    "RelEnergyReport", "StepDiagnostics", "TorusGrid", "alpha_sweep", "dissipation",
    "relative_energy", "run", "step", "step_modelh", "total_energy",
]
