"""Relative energy between quasi-incompressible and model-H solutions, and the alpha sweep."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import constitutive as cst
from .constitutive import PhysParams
from .modelh import ModelHState, refine_reference
from .spectral import TorusGrid, helmholtz, integrate_padded, sobolev_norm
from .stepper import MixtureState, PicardSettings, iterate

log = logging.getLogger(__name__)


class RelEnergyReport(NamedTuple):
    t: float
    kinetic_part: float
    fractional_part: float
    bregman_part: float

    @property
    def total(self) -> float:
        return self.kinetic_part + self.fractional_part + self.bregman_part


def relative_energy(grid: TorusGrid, weak: MixtureState, strong: ModelHState, p: PhysParams,
                    time_tol: float = 1e-9) -> RelEnergyReport:
    """Kinetic, fractional and Bregman parts of the distance from ``strong`` to ``weak``."""
    if weak.phi.shape != grid.shape or strong.phi.shape != grid.shape:
        raise ValueError("states are not sampled on the given grid")
    if abs(weak.t - strong.t) > time_tol * max(1.0, abs(weak.t)):
        raise ValueError(f"time stamps differ: {weak.t} vs {strong.t}")
    rho = cst.density(weak.phi, p, warn=False)
    kin = 0.5 * grid.integrate(rho * np.sum((strong.u - weak.u) ** 2, axis=0))
    frac = cst.fractional_energy(grid, strong.phi - weak.phi, p.s)
    breg = integrate_padded(grid, cst.bregman_convex, weak.phi, strong.phi)
    return RelEnergyReport(weak.t, kin, frac, breg)


def hs_gamma_diagnostic(grid: TorusGrid, trajectory: Sequence, gamma: float, p: PhysParams) -> float:
    """Trapezoid-in-time integral of ``||phi||^2_{H^{s+gamma/2}}``."""
    if not trajectory:
        raise ValueError("empty trajectory")
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    order = p.s + 0.5 * gamma
    t = np.array([st.t for st in trajectory])
    vals = np.array([sobolev_norm(grid, st.phi, order) ** 2 for st in trajectory])
    if len(t) == 1:
        return 0.0
    return float(np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(t)))


@dataclass
class PhiBoundReport:
    phi_min: float
    phi_max: float
    theta: float
    passed: bool


def phi_bound_check(trajectory: Sequence, theta: float = 0.5) -> PhiBoundReport:
    lo = min(float(np.min(st.phi)) for st in trajectory)
    hi = max(float(np.max(st.phi)) for st in trajectory)
    return PhiBoundReport(lo, hi, theta, -1.0 - theta < lo and hi < 1.0 + theta)


# sweep ------------------------------------------------------------------------

@dataclass
class RateReport:
    alphas: list[float]
    sup_rel_energy: list[float]
    t_at_sup: list[float]
    fitted_slope: float
    r_squared: float
    halving_ratios: list[float]
    dissipation_gaps: list[tuple[float, float]]
    hs_values: list[float]
    phi_ranges: list[tuple[float, float]]
    distance_slope: float = math.nan
    partial: bool = False
    failures: list[str] = field(default_factory=list)

    @property
    def poor_fit(self) -> bool:
        return not (self.r_squared >= 0.9)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["alpha", "sup_rel_energy", "t_at_sup", "mu_gap", "u_h1_gap",
                    "hs_norm", "phi_min", "phi_max"])
        for i, a in enumerate(self.alphas):
            w.writerow([repr(float(a)), repr(float(self.sup_rel_energy[i])), repr(float(self.t_at_sup[i])),
                        repr(float(self.dissipation_gaps[i][0])), repr(float(self.dissipation_gaps[i][1])),
                        repr(float(self.hs_values[i])), repr(float(self.phi_ranges[i][0])), repr(float(self.phi_ranges[i][1]))])
        return buf.getvalue()

    def summary(self) -> str:
        lines = ["alpha sweep summary",
                 f"  alphas           : {', '.join(f'{a:g}' for a in self.alphas)}",
                 f"  sup E_rel        : {', '.join(f'{e:.4e}' for e in self.sup_rel_energy)}",
                 f"  fitted slope     : {self.fitted_slope:.4f} (R^2 = {self.r_squared:.4f})",
                 f"  halving ratios   : {', '.join(f'{r:.3f}' for r in self.halving_ratios)}",
                 f"  sqrt(E) slope    : {self.distance_slope:.4f}",
                 f"  H^(s+g/2) spread : {hs_spread(self.hs_values):.4f}"]
        if self.poor_fit:
            lines.append("  WARNING: poor log-log fit (R^2 < 0.9)")
        if self.partial:
            lines.append(f"  PARTIAL: {'; '.join(self.failures)}")
        return "\n".join(lines)


def hs_spread(values: Sequence[float]) -> float:
    v = [x for x in values if x > 0]
    return max(v) / min(v) if v else math.nan


def fit_loglog(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope and R^2 of ``log y`` against ``log x``."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    if len(lx) < 2:
        return math.nan, math.nan
    slope, icpt = np.polyfit(lx, ly, 1)
    pred = slope * lx + icpt
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2


class _PhiSample(NamedTuple):
    t: float
    phi: np.ndarray


@dataclass
class _RunSummary:
    sup: float
    t_sup: float
    mu_gap: float
    u_gap: float
    hs: float
    phi_min: float
    phi_max: float


def _quasi_vs_reference(grid, u0, phi0, p, dt, t_end, settings, reference, gamma) -> _RunSummary:
    st = MixtureState.initial(grid, u0, phi0, p)
    best = relative_energy(grid, st, reference[0], p)
    sup, t_sup = best.total, 0.0
    mu_gap = u_gap = 0.0
    phis = [_PhiSample(st.t, st.phi)]
    for k, (st, _) in enumerate(iterate(grid, st, p, dt, t_end, settings), 1):
        ref = reference[k]
        e = relative_energy(grid, st, ref, p).total
        if e > sup:
            sup, t_sup = e, st.t
        dmu = grid.fft(st.mu_p0 - ref.mu)
        mu_gap += dt * grid.volume * grid.spectral_sum(grid.kd2, dmu)
        u_gap += dt * sum(sobolev_norm(grid, a - b, 1.0) ** 2 for a, b in zip(st.u, ref.u))
        phis.append(_PhiSample(st.t, st.phi))
    hs = hs_gamma_diagnostic(grid, phis, gamma, p)
    bounds = phi_bound_check(phis)
    return _RunSummary(sup, t_sup, mu_gap, u_gap, hs, bounds.phi_min, bounds.phi_max)


def alpha_sweep(grid: TorusGrid, u0: np.ndarray, phi0: np.ndarray, base: PhysParams,
                alphas: Sequence[float], dt: float, t_end: float,
                settings: PicardSettings = PicardSettings(), well_prepared: bool = True,
                gamma: float = 1.0, reference: list[ModelHState] | None = None,
                refinement: tuple[int, int] = (2, 4),
                force_alpha_zero: bool = False) -> RateReport:
    """Run the quasi-incompressible solver per alpha against one refined model-H reference.

    With ``well_prepared`` the same divergence-free ``u0`` and ``phi0`` start
    every run and the reference; otherwise the reference starts from the
    divergence-free part of ``u0``.  ``refinement`` is the (grid, time step)
    refinement factor of the reference.  ``force_alpha_zero`` runs every member
    at matched densities (a control for the reduction property).
    """
    alphas = [float(a) for a in alphas]
    if any(not 0 < a < 1 for a in alphas):
        raise ValueError("alphas must lie in (0, 1)")
    if any(b >= a for a, b in zip(alphas, alphas[1:])):
        raise ValueError("alphas must be strictly decreasing")
    u0 = np.asarray(u0, float)
    pu0, g0 = helmholtz(grid, u0)
    if well_prepared:
        scale = max(1.0, math.sqrt(grid.inner(u0, u0)))
        if math.sqrt(grid.inner(u0 - pu0, u0 - pu0)) > 1e-10 * scale:
            raise ValueError("well-prepared data requires a divergence-free initial velocity")
    if reference is None:
        log.info("computing refined model-H reference")
        reference = refine_reference(grid, pu0, phi0, base.matched(), dt, t_end, settings,
                                     grid_factor=refinement[0], dt_factor=refinement[1])

    out: dict[float, _RunSummary] = {}
    failures = []
    for a in alphas:
        p = PhysParams.from_alpha(0.0 if force_alpha_zero else a, nu=base.nu, kappa=base.kappa,
                                  s=base.s, delta=0.0 if force_alpha_zero else base.delta)
        log.info("alpha=%g: running quasi-incompressible solver", a)
        try:
            out[a] = _quasi_vs_reference(grid, u0, phi0, p, dt, t_end, settings, reference, gamma)
        except RuntimeError as exc:
            failures.append(f"alpha={a:g}: {exc}")
            log.error("alpha=%g failed: %s", a, exc)
            break

    done = sorted(out, reverse=True)
    sups = [out[a].sup for a in done]
    positive = [(a, e) for a, e in zip(done, sups) if e > 0]
    slope, r2 = fit_loglog([a for a, _ in positive], [e for _, e in positive]) if len(positive) > 1 \
        else (math.nan, math.nan)
    dslope, _ = fit_loglog([a for a, _ in positive], [math.sqrt(e) for _, e in positive]) \
        if len(positive) > 1 else (math.nan, math.nan)
    ratios = [sups[i] / sups[i + 1] if sups[i + 1] > 0 else math.inf for i in range(len(sups) - 1)]
    return RateReport(
        alphas=done, sup_rel_energy=sups, t_at_sup=[out[a].t_sup for a in done],
        fitted_slope=slope, r_squared=r2, halving_ratios=ratios,
        dissipation_gaps=[(out[a].mu_gap, out[a].u_gap) for a in done],
        hs_values=[out[a].hs for a in done],
        phi_ranges=[(out[a].phi_min, out[a].phi_max) for a in done],
        distance_slope=dslope, partial=bool(failures), failures=failures)
