"""Diagnostics CSV sink.  Column order is fixed for format version 1."""

from __future__ import annotations

import csv
from typing import TextIO

import numpy as np

from . import constitutive as cst
from .constitutive import PhysParams
from .spectral import TorusGrid
from .stepper import MixtureState, StepDiagnostics, constraint_residual

COLUMNS = ("t", "E_total", "E_kin", "E_free", "E_frac", "D_visc", "D_mu", "D_p",
           "mass_phi", "mass_rho", "phi_min", "phi_max", "constraint_residual",
           "picard_iters", "energy_defect")


def row(grid: TorusGrid, state: MixtureState, p: PhysParams, diag: StepDiagnostics | None = None) -> dict:
    """One CSV row; ``diag`` is ``None`` for the initial state."""
    e = cst.total_energy(grid, state, p)
    if diag is None:
        d_visc, d_mu, d_p = cst.dissipation(grid, state, p)
        iters, defect, cres = 0, 0.0, constraint_residual(grid, state, p)
    else:
        d_visc, d_mu, d_p = diag.dissipation_terms
        iters, defect, cres = diag.picard_iters, diag.energy_defect, diag.constraint_residual
    return {
        "t": float(state.t), "E_total": e.total, "E_kin": e.kinetic, "E_free": e.free,
        "E_frac": e.fractional, "D_visc": d_visc, "D_mu": d_mu, "D_p": d_p,
        "mass_phi": grid.integrate(state.phi),
        "mass_rho": grid.integrate(cst.density(state.phi, p, warn=False)),
        "phi_min": float(np.min(state.phi)), "phi_max": float(np.max(state.phi)),
        "constraint_residual": cres, "picard_iters": int(iters), "energy_defect": defect,
    }


class DiagnosticsWriter:
    """Writes rows with ``repr`` formatting so identical runs give identical bytes."""

    def __init__(self, stream: TextIO):
        self._w = csv.writer(stream, lineterminator="\n")
        self._w.writerow(COLUMNS)

    def write(self, r: dict) -> None:
        self._w.writerow([str(r[c]) if c == "picard_iters" else repr(float(r[c])) for c in COLUMNS])


def read_csv(stream: TextIO) -> list[dict]:
    reader = csv.DictReader(stream)
    if tuple(reader.fieldnames or ()) != COLUMNS:
        raise ValueError(f"unexpected diagnostics columns {reader.fieldnames}")
    return [{k: (int(v) if k == "picard_iters" else float(v)) for k, v in r.items()} for r in reader]
