"""Incompressible model H on the same spectral stack.

The step mirrors :mod:`qinsch.stepper` with ``alpha = delta = 0`` and a
Leray projection in place of the pressure block, so the quasi-incompressible
stepper at matched densities reproduces it to round-off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import constitutive as cst
from .constitutive import PhysParams
from .spectral import TorusGrid, cube_hat, resample, truncate
from .stepper import PicardDiverged, PicardSettings, _norm


@dataclass
class ModelHState:
    t: float
    u: np.ndarray
    phi: np.ndarray
    p: np.ndarray
    mu: np.ndarray

    @classmethod
    def initial(cls, grid: TorusGrid, u: np.ndarray, phi: np.ndarray, p: PhysParams,
                t: float = 0.0) -> "ModelHState":
        u = np.stack([truncate(grid, c) for c in u])
        phi = truncate(grid, phi)
        return cls(t, u, phi, np.zeros_like(phi), cst.chemical_potential(grid, phi, p))


def energy(grid: TorusGrid, state: ModelHState, p: PhysParams) -> float:
    return cst.total_energy(grid, state, p.matched()).total


def _operators(grid: TorusGrid, p: PhysParams, h: float, eta_bar: float):
    k2 = grid.k2
    mass = 1.0 / h + eta_bar * k2
    ch = 1.0 / h + k2 * (k2**p.s - 0.5 * p.kappa)
    return mass, ch


def step_modelh(grid: TorusGrid, prev: ModelHState, h: float, p: PhysParams,
                settings: PicardSettings = PicardSettings()) -> ModelHState:
    """One backward-Euler step with convex-split chemical potential."""
    if not h > 0:
        raise ValueError("time step must be positive")
    d = grid.dim
    ks = grid.deriv_wavenumbers
    k2, kd2 = grid.k2, grid.kd2
    mask = grid.dealias_mask
    eta_k = cst.viscosity(prev.phi, p)
    eta_bar = float(np.mean(eta_k))
    eta_fluct = eta_k - eta_bar
    mass, ch = _operators(grid, p, h, eta_bar)
    chsym = k2**p.s - 0.5 * p.kappa
    base_u = grid.fft(prev.u) / h
    phik_hat = grid.fft(prev.phi)
    base_phi = phik_hat / h
    base_mu = -0.5 * p.kappa * phik_hat
    safe_kd2 = np.where(kd2 > 0, kd2, 1.0)

    uhat = grid.fft(prev.u) * mask
    phihat = phik_hat * mask
    muhat = grid.fft(prev.mu) * mask
    muhat.flat[0] = 0.0
    phat = grid.fft(prev.p) * mask
    res = math.inf
    for it in range(1, settings.max_iter + 1):
        u = grid.ifft(uhat)
        phi = grid.ifft(phihat)
        G = np.stack([np.stack([grid.ifft(1j * ks[j] * uhat[i]) for j in range(d)]) for i in range(d)])
        grad_mu = grid.ifft(np.stack([1j * k * muhat for k in ks]))
        conv = np.stack([sum(u[j] * G[i, j] for j in range(d)) for i in range(d)])
        R = -conv - phi * grad_mu
        divu = sum(G[i, i] for i in range(d))
        Rhat = grid.fft(R)
        T = {}
        for i in range(d):
            for j in range(i, d):
                t = eta_fluct * (G[i, j] + G[j, i])
                if i == j:
                    t = t - (2.0 / 3.0) * eta_fluct * divu
                T[i, j] = grid.fft(t)
        fu = np.stack([base_u[i] + Rhat[i] + sum(1j * ks[j] * T[min(i, j), max(i, j)] for j in range(d))
                       for i in range(d)]) * mask
        flux = grid.fft(phi * u)
        fphi = (base_phi - sum(1j * ks[j] * flux[j] for j in range(d))) * mask
        fmu = (cube_hat(grid, phi) + base_mu) * mask

        kdotf = sum(ks[j] * fu[j] for j in range(d))
        new_p = np.where(kd2 > 0, -1j * kdotf / safe_kd2, 0.0)
        new_u = np.stack([(fu[i] - ks[i] * kdotf / safe_kd2) / mass for i in range(d)])
        # the mean force vanishes at the fixed point; keep the mean velocity exactly
        for i in range(d):
            new_u[i].flat[0] = base_u[i].flat[0] * h
        new_phi = (fphi - k2 * fmu) / ch
        new_phi.flat[0] = phik_hat.flat[0]
        new_mu = fmu + chsym * new_phi
        new_mu.flat[0] = 0.0
        new_p *= mask
        new_u *= mask
        new_phi *= mask
        new_mu *= mask

        old = np.concatenate([uhat, phat[None], phihat[None], muhat[None]])
        w = np.concatenate([new_u, new_p[None], new_phi[None], new_mu[None]])
        nrm = _norm(w)
        res = _norm(w - old) / nrm if nrm > 0 else 0.0
        uhat, phat, phihat, muhat = new_u, new_p, new_phi, new_mu
        if res <= settings.tol:
            break
    else:
        raise PicardDiverged(settings.max_iter, res)
    phi = grid.ifft(phihat)
    mu = grid.ifft(muhat) + cst.mean_chemical_potential(phi, p)
    return ModelHState(prev.t + h, grid.ifft(uhat), phi, grid.ifft(phat), mu)


def run_modelh(grid: TorusGrid, initial: ModelHState, p: PhysParams, dt: float, t_end: float,
               settings: PicardSettings = PicardSettings(), every: int = 1) -> list[ModelHState]:
    nsteps = int(round(t_end / dt))
    if abs(nsteps * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError(f"t_end={t_end} is not a multiple of dt={dt}")
    out = [initial]
    st = initial
    for k in range(1, nsteps + 1):
        st = step_modelh(grid, st, dt, p, settings)
        st.t = initial.t + k * dt
        if k % every == 0:
            out.append(st)
    return out


def refine_reference(grid: TorusGrid, u0: np.ndarray, phi0: np.ndarray, p: PhysParams, dt: float,
                     t_end: float, settings: PicardSettings = PicardSettings(),
                     grid_factor: int = 2, dt_factor: int = 4) -> list[ModelHState]:
    """Model H at ``grid_factor`` x resolution and ``dt/dt_factor``, resampled to ``grid``.

    Returns states at the coarse time stamps ``k*dt``, each spectrally
    truncated onto the coarse grid's dealiased band.
    """
    fine = TorusGrid(tuple(m * grid_factor for m in grid.n), grid.length)
    u0f = resample(grid, np.stack([truncate(grid, c) for c in u0]), fine)
    phi0f = resample(grid, truncate(grid, phi0), fine)
    init = ModelHState.initial(fine, u0f, phi0f, p)
    fine_traj = run_modelh(fine, init, p, dt / dt_factor, t_end, settings, every=dt_factor)
    out = []
    for k, st in enumerate(fine_traj):
        out.append(coarsen(fine, st, grid, k * dt))
    return out


def coarsen(fine: TorusGrid, st: ModelHState, coarse: TorusGrid, t: float) -> ModelHState:
    def down(f):
        return truncate(coarse, resample(fine, f, coarse))
    return ModelHState(t, np.stack([down(c) for c in st.u]), down(st.phi), down(st.p), down(st.mu))
