"""Implicit time stepping of the delta-regularized quasi-incompressible system.

One step solves, for the new level ``(u, p0, phi, mu_p0)`` given ``(u_k, phi_k)``::

    rho_k (u - u_k)/h + rho u.grad u - div S(phi_k, Du) + zeta rho grad p0
        + phi grad mu_p0 + (eps delta / 4 alpha) p0 u = 0
    div u + delta p0 = alpha Lap mu_p0
    (phi - phi_k)/h + div(phi u) = Lap mu_p0
    mu_p0 - alpha p0 - phi^3 + kappa (phi + phi_k)/2 + mu_bar = Lambda^{2s} phi

by Picard iteration ``w <- L^{-1} F(w)``.  ``L`` freezes the spatial means of
density, viscosity and ``zeta rho`` so that it is block diagonal in Fourier
space; every variable-coefficient and nonlinear remainder lives in ``F``.
All iterates are kept inside the 2/3-rule band.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Iterator

import numpy as np

from . import constitutive as cst
from .constitutive import PhysParams
from .spectral import TOL_MEAN, TorusGrid, cube_hat, helmholtz, sobolev_norm, truncate

log = logging.getLogger(__name__)

Forcing = Callable[[float, TorusGrid], tuple]


class PicardDiverged(RuntimeError):
    def __init__(self, iters: int, residual: float):
        super().__init__(f"Picard iteration stalled after {iters} sweeps (update {residual:.3e})")
        self.iters = iters
        self.residual = residual


class StepSizeExhausted(RuntimeError):
    def __init__(self, t: float, h: float, last: PicardDiverged):
        super().__init__(f"no convergence at t={t:.6g} even with h={h:.3e}: {last}")
        self.t = t
        self.h = h
        self.last = last


@dataclass
class MixtureState:
    t: float
    u: np.ndarray
    phi: np.ndarray
    p0: np.ndarray
    mu_p0: np.ndarray
    mu_bar: float

    @classmethod
    def initial(cls, grid: TorusGrid, u: np.ndarray, phi: np.ndarray, p: PhysParams,
                t: float = 0.0) -> "MixtureState":
        """Band-limit the data and fill the chemical potential with ``p0 = 0``."""
        u = np.stack([truncate(grid, c) for c in u])
        phi = truncate(grid, phi)
        mu = cst.chemical_potential(grid, phi, p)
        mu_bar = cst.mean_chemical_potential(phi, p)
        return cls(t, u, phi, np.zeros_like(phi), mu - np.mean(mu), mu_bar)

    def copy(self) -> "MixtureState":
        return MixtureState(self.t, self.u.copy(), self.phi.copy(), self.p0.copy(),
                            self.mu_p0.copy(), self.mu_bar)


@dataclass(frozen=True)
class PicardSettings:
    tol: float = 1e-10
    max_iter: int = 200
    dt_backoff: float = 0.5
    max_backoffs: int = 10

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("picard tol must be positive")
        if self.max_iter < 1:
            raise ValueError("picard max_iter must be >= 1")
        if not 0 < self.dt_backoff < 1:
            raise ValueError("dt_backoff must lie in (0, 1)")


@dataclass
class StepDiagnostics:
    picard_iters: int
    residual: float
    constraint_residual: float
    energy_before: float
    energy_after: float
    dissipation_terms: tuple[float, float, float]
    inertial_dissipation: float
    energy_defect: float
    dt: float
    eta_clamped: int = 0


# linear block ---------------------------------------------------------------

@dataclass(frozen=True)
class _Frozen:
    """Means of the step-k coefficients entering the diagonal operator."""

    rho_bar: float
    eta_bar: float
    zr_bar: float


@lru_cache(maxsize=16)
def _block_inverse(grid: TorusGrid, p: PhysParams, h: float, fr: _Frozen):
    mask = grid.dealias_mask & (grid.k2 > 0)
    idx = np.nonzero(mask)
    kv = np.stack([np.broadcast_to(k, grid.spectral_shape)[idx] for k in grid.deriv_wavenumbers], axis=1)
    k2 = grid.k2[idx]
    ks = k2**p.s
    d = grid.dim
    m = k2.size
    A = np.zeros((m, d + 3, d + 3), dtype=complex)
    iu, ip, iphi, imu = slice(0, d), d, d + 1, d + 2
    for i in range(d):
        A[:, i, i] = fr.rho_bar / h + fr.eta_bar * k2
        for j in range(d):
            A[:, i, j] += fr.eta_bar / 3.0 * kv[:, i] * kv[:, j]
        A[:, i, ip] = 1j * fr.zr_bar * kv[:, i]
        A[:, ip, i] = 1j * kv[:, i]
    A[:, ip, ip] = p.delta
    A[:, ip, imu] = p.alpha * k2
    A[:, iphi, iphi] = 1.0 / h
    A[:, iphi, imu] = k2
    A[:, imu, ip] = -p.alpha
    A[:, imu, iphi] = 0.5 * p.kappa - ks
    A[:, imu, imu] = 1.0
    inv = np.linalg.inv(A)
    return idx, inv


def _solve_block(grid: TorusGrid, p: PhysParams, h: float, fr: _Frozen, rhs_hat: np.ndarray) -> np.ndarray:
    """Apply ``L^{-1}`` to stacked spectral data ordered ``(u_1..u_d, p0, phi, mu)``."""
    idx, inv = _block_inverse(grid, p, h, fr)
    d = grid.dim
    out = np.zeros_like(rhs_hat)
    sel = (slice(None),) + idx
    out[sel] = np.einsum("mij,jm->im", inv, rhs_hat[sel])
    zero = (0,) * d
    out[(slice(0, d),) + zero] = rhs_hat[(slice(0, d),) + zero] * (h / fr.rho_bar)
    out[(d + 1,) + zero] = rhs_hat[(d + 1,) + zero] * h
    return out


def frozen_means(phi_k: np.ndarray, p: PhysParams) -> _Frozen:
    rho_k = cst.density(phi_k, p, warn=False)
    eta_k = cst.viscosity(phi_k, p)
    zr = cst.zeta_rho(phi_k, p)
    return _Frozen(float(np.mean(rho_k)), float(np.mean(eta_k)), float(np.mean(zr)))


def apply_Lk_inverse(grid: TorusGrid, rhs: np.ndarray, phi_k: np.ndarray, h: float,
                     p: PhysParams) -> np.ndarray:
    """Solve the frozen-coefficient per-mode system for a stacked real right side.

    ``rhs`` has shape ``(d+3, *grid.shape)`` ordered ``(u_1..u_d, p0, phi, mu)``;
    the rows are momentum, constraint, phase transport and chemical potential.
    Modes outside the 2/3 band are returned as zero.
    """
    if h <= 0:
        raise ValueError("time step must be positive")
    fr = frozen_means(phi_k, p)
    assert fr.rho_bar > 0 and fr.eta_bar > 0
    return grid.ifft(_solve_block(grid, p, h, fr, grid.fft(rhs)))


# nonlinear right side -------------------------------------------------------

class _Residual:
    """Evaluates ``F_k`` for a fixed previous level."""

    def __init__(self, grid: TorusGrid, prev: MixtureState, h: float, p: PhysParams,
                 forcing_u=None, forcing_phi=None):
        self.grid, self.h, self.p = grid, h, p
        g = grid
        self.mask = g.dealias_mask
        self.ks = g.deriv_wavenumbers
        self.d = g.dim
        phi_k = prev.phi
        self.rho_k = cst.density(phi_k, p)
        self.phi_bar = float(np.mean(phi_k))
        self.fr = frozen_means(phi_k, p)
        eta_k = cst.viscosity(phi_k, p)
        self.eta_fluct = eta_k - self.fr.eta_bar
        self.rho_fluct = self.rho_k - self.fr.rho_bar
        self.eta_clamped = cst.viscosity_clamp_count(phi_k, p)
        mom = g.fft(self.rho_k * prev.u) / h
        phik_hat = g.fft(phi_k)
        self.base_phi = phik_hat / h
        self.base_mu = -0.5 * p.kappa * phik_hat
        if forcing_u is not None:
            mom = mom + g.fft(forcing_u)
        if forcing_phi is not None:
            self.base_phi = self.base_phi + g.fft(forcing_phi)
        self.base_mom = mom

    def __call__(self, w_hat: np.ndarray) -> np.ndarray:
        g, p, d, ks = self.grid, self.p, self.d, self.ks
        uhat = w_hat[:d]
        phat, phihat, muhat = w_hat[d], w_hat[d + 1], w_hat[d + 2]
        u = g.ifft(uhat)
        phi = g.ifft(phihat)
        p0 = g.ifft(phat)
        G = np.stack([np.stack([g.ifft(1j * ks[j] * uhat[i]) for j in range(d)]) for i in range(d)])
        grad_p = g.ifft(np.stack([1j * k * phat for k in ks]))
        grad_mu = g.ifft(np.stack([1j * k * muhat for k in ks]))
        rho = cst.density(phi, p, warn=False)

        conv = rho * np.stack([sum(u[j] * G[i, j] for j in range(d)) for i in range(d)])
        # zeta*rho - mean = -alpha (phi - mean phi)
        R = (-self.rho_fluct * u / self.h - conv
             + p.alpha * (phi - self.phi_bar) * grad_p
             - phi * grad_mu
             - p.momentum_damping_coeff * p0 * u)
        divu = sum(G[i, i] for i in range(d))
        # variable part of the viscous stress, only its divergence is needed
        T = {}
        for i in range(d):
            for j in range(i, d):
                t = self.eta_fluct * (G[i, j] + G[j, i])
                if i == j:
                    t = t - (2.0 / 3.0) * self.eta_fluct * divu
                T[i, j] = g.fft(t)
        Rhat = g.fft(R)
        fu = np.empty_like(uhat)
        for i in range(d):
            acc = self.base_mom[i] + Rhat[i]
            for j in range(d):
                acc = acc + 1j * ks[j] * T[min(i, j), max(i, j)]
            fu[i] = acc
        flux = g.fft(phi * u)
        fphi = self.base_phi - sum(1j * ks[j] * flux[j] for j in range(d))
        fmu = cube_hat(g, phi) + self.base_mu
        out = np.empty_like(w_hat)
        out[:d] = fu
        out[d] = 0.0
        out[d + 1] = fphi
        out[d + 2] = fmu
        out *= self.mask
        return out


def _stack_hat(grid: TorusGrid, st: MixtureState) -> np.ndarray:
    return grid.fft(np.concatenate([st.u, st.p0[None], st.phi[None], st.mu_p0[None]]))


def _norm(x: np.ndarray) -> float:
    return math.sqrt(float(np.sum(np.abs(x) ** 2)))


def _picard(grid: TorusGrid, prev: MixtureState, h: float, p: PhysParams, settings: PicardSettings,
            forcing: Forcing | None):
    fu = fphi = None
    if forcing is not None:
        fu, fphi = forcing(prev.t + h, grid)
    F = _Residual(grid, prev, h, p, fu, fphi)
    w = _stack_hat(grid, prev) * grid.dealias_mask
    res = math.inf
    for it in range(1, settings.max_iter + 1):
        w_new = _solve_block(grid, p, h, F.fr, F(w))
        nrm = _norm(w_new)
        res = _norm(w_new - w) / nrm if nrm > 0 else 0.0
        w = w_new
        if not math.isfinite(res):
            break
        if res <= settings.tol:
            return w, it, res, F
    raise PicardDiverged(it, res)


def _unstack(grid: TorusGrid, w_hat: np.ndarray, t: float, p: PhysParams) -> MixtureState:
    d = grid.dim
    x = grid.ifft(w_hat)
    phi = x[d + 1]
    p0 = x[d] - np.mean(x[d])
    mu = x[d + 2] - np.mean(x[d + 2])
    return MixtureState(t, x[:d], phi, p0, mu, cst.mean_chemical_potential(phi, p))


def constraint_residual(grid: TorusGrid, state: MixtureState, p: PhysParams) -> float:
    """``L^2`` norm of ``div u + delta p0 - alpha Lap mu_p0``."""
    ks = grid.deriv_wavenumbers
    uhat = grid.fft(state.u)
    r = sum(1j * k * uhat[i] for i, k in enumerate(ks)) + p.delta * grid.fft(state.p0) \
        + p.alpha * grid.k2 * grid.fft(state.mu_p0)
    return math.sqrt(grid.volume * grid.spectral_sum(1.0, r))


def _energy_budget(grid, prev, new, h, p, iters, res, eta_clamped) -> StepDiagnostics:
    e0 = cst.total_energy(grid, prev, p).total
    e1 = cst.total_energy(grid, new, p).total
    rho_k = cst.density(prev.phi, p, warn=False)
    inertial = 0.5 * grid.integrate(rho_k * np.sum((new.u - prev.u) ** 2, axis=0))
    d_visc = cst.viscous_dissipation(grid, prev.phi, new.u, p)
    _, d_mu, d_p = cst.dissipation(grid, new, p)
    defect = e1 + inertial + h * (d_visc + d_mu + d_p) - e0
    return StepDiagnostics(
        picard_iters=iters, residual=res,
        constraint_residual=constraint_residual(grid, new, p),
        energy_before=e0, energy_after=e1,
        dissipation_terms=(d_visc, d_mu, d_p), inertial_dissipation=inertial,
        energy_defect=defect, dt=h, eta_clamped=eta_clamped)


def step(grid: TorusGrid, prev: MixtureState, h: float, p: PhysParams,
         settings: PicardSettings = PicardSettings(),
         forcing: Forcing | None = None) -> tuple[MixtureState, StepDiagnostics]:
    """Advance one implicit step of size ``h``; raises :class:`PicardDiverged`."""
    if not h > 0:
        raise ValueError("time step must be positive")
    w, iters, res, F = _picard(grid, prev, h, p, settings, forcing)
    new = _unstack(grid, w, prev.t + h, p)
    return new, _energy_budget(grid, prev, new, h, p, iters, res, F.eta_clamped)


def step_phase_only(grid: TorusGrid, prev: MixtureState, h: float, p: PhysParams,
                    settings: PicardSettings = PicardSettings(),
                    forcing: Forcing | None = None) -> tuple[MixtureState, StepDiagnostics]:
    """Step the phase-field subsystem with ``u = 0`` and ``p0 = 0`` imposed.

    Solves ``(phi - phi_k)/h = Lap mu_p0 + f`` with the same convex-split
    chemical potential; used for manufactured-solution studies.
    """
    fphi = None
    if forcing is not None:
        _, fphi = forcing(prev.t + h, grid)
    mask = grid.dealias_mask
    k2 = grid.k2
    denom = 1.0 / h + k2 * (k2**p.s - 0.5 * p.kappa)
    phik_hat = grid.fft(prev.phi)
    base = phik_hat / h
    if fphi is not None:
        base = base + grid.fft(fphi)
    phihat = grid.fft(prev.phi) * mask
    res = math.inf
    for it in range(1, settings.max_iter + 1):
        phi = grid.ifft(phihat)
        fmu = cube_hat(grid, phi) - 0.5 * p.kappa * phik_hat
        new = (base - k2 * fmu) / denom * mask
        new.flat[0] = phik_hat.flat[0]
        nrm = _norm(new)
        res = _norm(new - phihat) / nrm if nrm > 0 else 0.0
        phihat = new
        if res <= settings.tol:
            break
    else:
        raise PicardDiverged(settings.max_iter, res)
    phi = grid.ifft(phihat)
    fmu = cube_hat(grid, phi) * mask - 0.5 * p.kappa * phik_hat
    muhat = fmu + (k2**p.s - 0.5 * p.kappa) * phihat
    muhat.flat[0] = 0.0
    zero = np.zeros_like(prev.u)
    st = MixtureState(prev.t + h, zero, phi, np.zeros_like(phi), grid.ifft(muhat),
                      cst.mean_chemical_potential(phi, p))
    return st, _energy_budget(grid, prev, st, h, p, it, res, 0)


def reconstruct_p1(grid: TorusGrid, window: list[MixtureState], p: PhysParams) -> np.ndarray:
    """Pressure ``zeta p0 + d/dt G(u)`` at the middle of three equally spaced states."""
    if len(window) != 3:
        raise ValueError("reconstruct_p1 needs exactly three states")
    a, b, c = window
    h1, h2 = b.t - a.t, c.t - b.t
    if not (h1 > 0 and math.isclose(h1, h2, rel_tol=1e-9, abs_tol=1e-14)):
        raise ValueError(f"nonuniform window: dt = {h1}, {h2}")
    ga = helmholtz(grid, a.u)[1]
    gc = helmholtz(grid, c.u)[1]
    return p.zeta * b.p0 + (gc - ga) / (h1 + h2)


def reconstruct_p1_onesided(grid: TorusGrid, pair: list[MixtureState], p: PhysParams) -> np.ndarray:
    """Backward-difference variant at the later of two states."""
    a, b = pair
    return p.zeta * b.p0 + (helmholtz(grid, b.u)[1] - helmholtz(grid, a.u)[1]) / (b.t - a.t)


# time loop ------------------------------------------------------------------

StepFn = Callable[..., tuple]


def advance(grid: TorusGrid, prev: MixtureState, dt: float, p: PhysParams, settings: PicardSettings,
            forcing: Forcing | None = None, stepper: StepFn = step):
    """Reach ``prev.t + dt``, halving the step on Picard failure.

    Returns the new state and the diagnostics of every accepted substep.
    """
    def attempt(st, h, depth):
        try:
            new, diag = stepper(grid, st, h, p, settings, forcing)
            return new, [diag]
        except PicardDiverged as exc:
            if depth >= settings.max_backoffs:
                raise StepSizeExhausted(st.t, h, exc) from exc
            sub = h * settings.dt_backoff
            nsub = max(2, round(h / sub))
            sub = h / nsub
            log.info("backing off: t=%.6g h=%.3e -> %d x %.3e", st.t, h, nsub, sub)
            diags = []
            for _ in range(nsub):
                st, dd = attempt(st, sub, depth + 1)
                diags.extend(dd)
            return st, diags

    return attempt(prev, dt, 0)


@dataclass
class Trajectory:
    states: list[MixtureState] = field(default_factory=list)
    diagnostics: list[StepDiagnostics] = field(default_factory=list)


def iterate(grid: TorusGrid, initial: MixtureState, p: PhysParams, dt: float, t_end: float,
            settings: PicardSettings = PicardSettings(), forcing: Forcing | None = None,
            stepper: StepFn = step) -> Iterator[tuple[MixtureState, StepDiagnostics]]:
    """Yield ``(state, diagnostics)`` after each output step ``t = k dt``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    nsteps = int(round(t_end / dt))
    if nsteps < 0 or abs(nsteps * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError(f"t_end={t_end} is not a multiple of dt={dt}")
    st = initial
    for k in range(1, nsteps + 1):
        st, diags = advance(grid, st, dt, p, settings, forcing, stepper)
        st.t = initial.t + k * dt
        diag = diags[-1]
        if len(diags) > 1:
            diag = _merge(diags)
        yield st, diag


def _merge(diags: list[StepDiagnostics]) -> StepDiagnostics:
    last = diags[-1]
    return replace(
        last,
        picard_iters=sum(d.picard_iters for d in diags),
        residual=max(d.residual for d in diags),
        constraint_residual=max(d.constraint_residual for d in diags),
        energy_before=diags[0].energy_before,
        dissipation_terms=tuple(sum(d.dt * d.dissipation_terms[i] for d in diags) / sum(d.dt for d in diags)
                                for i in range(3)),
        inertial_dissipation=sum(d.inertial_dissipation for d in diags),
        energy_defect=max(d.energy_defect for d in diags),
        dt=min(d.dt for d in diags),
    )


def run(grid: TorusGrid, initial: MixtureState, p: PhysParams, dt: float, t_end: float,
        settings: PicardSettings = PicardSettings(), forcing: Forcing | None = None,
        stepper: StepFn = step, observer: Callable | None = None, keep: bool = True) -> Trajectory:
    """Integrate to ``t_end``; ``observer(state, diag)`` sees every accepted output step."""
    traj = Trajectory([initial] if keep else [])
    for st, diag in iterate(grid, initial, p, dt, t_end, settings, forcing, stepper):
        if keep:
            traj.states.append(st)
        traj.diagnostics.append(diag)
        if observer is not None:
            observer(st, diag)
    return traj


def h1_norm_u(grid: TorusGrid, u: np.ndarray) -> float:
    return math.sqrt(sum(sobolev_norm(grid, c, 1.0) ** 2 for c in u))


def check_means(grid: TorusGrid, state: MixtureState, tol: float = TOL_MEAN) -> None:
    for name in ("p0", "mu_p0"):
        f = getattr(state, name)
        if abs(np.mean(f)) > tol * max(1.0, math.sqrt(float(np.mean(f * f)))):
            raise ValueError(f"{name} is not mean-zero")
