"""Manufactured-solution temporal order study for the phase-field subsystem.

The exact solution ``phi*(x, t) = exp(-t) cos(x1)`` is made exact by the
forcing ``f = d/dt phi* - Lap mu*`` with ``mu* = F'(phi*) + Lambda^{2s} phi*``.
The velocity and pressure are held at zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import constitutive as cst
from .constitutive import PhysParams
from .relent import fit_loglog
from .spectral import TorusGrid, frac_laplacian
from .stepper import MixtureState, PicardSettings, iterate, step_phase_only


def exact_phi(grid: TorusGrid, t: float) -> np.ndarray:
    x1 = 2 * math.pi * grid.coords[0] / grid.length[0]
    return np.broadcast_to(math.exp(-t) * np.cos(x1), grid.shape).copy()


def forcing_for(p: PhysParams):
    def forcing(t: float, grid: TorusGrid):
        phi = exact_phi(grid, t)
        mu = cst.potential_prime(phi, p.kappa) + frac_laplacian(grid, phi, p.s)
        lap_mu = grid.ifft(-grid.k2 * grid.fft(mu))
        return None, -phi - lap_mu
    return forcing


@dataclass
class OrderStudy:
    dts: list[float]
    errors: list[float]
    order: float

    def table(self) -> str:
        lines = ["dt            L2 error", *(f"{dt:<12.6g}  {e:.6e}" for dt, e in zip(self.dts, self.errors)),
                 f"observed order: {self.order:.4f}"]
        return "\n".join(lines)


def manufactured_order(dts: Sequence[float], n: int = 32, t_end: float = 1.0,
                       p: PhysParams | None = None, settings: PicardSettings = PicardSettings(tol=1e-12)
                       ) -> OrderStudy:
    if len(dts) < 2:
        raise ValueError("an order study needs at least two time steps")
    if any(not dt > 0 for dt in dts):
        raise ValueError("time steps must be positive")
    p = p or PhysParams(epsilon=0.0, delta=0.0)
    grid = TorusGrid.square(n, 2)
    forcing = forcing_for(p)
    errors = []
    for dt in dts:
        st = MixtureState.initial(grid, np.zeros((2,) + grid.shape), exact_phi(grid, 0.0), p)
        for st, _ in iterate(grid, st, p, dt, t_end, settings, forcing, step_phase_only):
            pass
        diff = st.phi - exact_phi(grid, t_end)
        errors.append(grid.l2_norm(diff))
    order, _ = fit_loglog(dts, errors)
    return OrderStudy(list(dts), errors, order)
