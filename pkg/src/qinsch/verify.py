"""Invariant suites behind the ``verify`` command."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .config import Config, parse_config
from .constitutive import PhysParams
from .driver import RunResult, phi_extrema, run_config
from .modelh import ModelHState, step_modelh
from .presets import phase_field, velocity_field
from .spectral import TorusGrid, frac_laplacian, helmholtz, inv_laplacian_zero_mean
from .stepper import MixtureState, PicardSettings, h1_norm_u, step

ENERGY_TOL = 1e-8
MEAN_TOL = 1e-11


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str


def spectral_suite(n: int = 64) -> SuiteResult:
    grid = TorusGrid.square(n, 2)
    x1, x2 = grid.mesh()

    def _rel(a, b):
        # L2-relative: the top-mode symbol |k|^{2s} amplifies transform round-off in the max norm
        return grid.l2_norm(a - b) / grid.l2_norm(b)

    errs = {
        "frac_laplacian": _rel(frac_laplacian(grid, np.cos(2 * x1), 1.6), 2**3.2 * np.cos(2 * x1)),
        "inv_laplacian": _rel(inv_laplacian_zero_mean(grid, np.cos(2 * x1) + np.sin(3 * x2)),
                              -np.cos(2 * x1) / 4 - np.sin(3 * x2) / 9),
    }
    pu, g = helmholtz(grid, np.stack([-np.sin(x1), np.zeros_like(x1)]))
    errs["helmholtz"] = max(float(np.max(np.abs(pu))), _rel(g, np.cos(x1)))
    f = np.random.default_rng(0).standard_normal(grid.shape)
    quad = grid.integrate(f * f)
    errs["parseval"] = abs(grid.volume * grid.spectral_sum(1.0, grid.fft(f)) - quad) / quad
    ok = all(v <= (1e-10 if k == "parseval" else 1e-12) for k, v in errs.items())
    return SuiteResult("spectral", ok, ", ".join(f"{k}={v:.1e}" for k, v in errs.items()))


def energy_suite(cfg: Config, res: RunResult) -> SuiteResult:
    worst, bad = -math.inf, 0
    increases = 0
    for d in res.diagnostics:
        tol = ENERGY_TOL * max(1.0, abs(d.energy_before))
        worst = max(worst, d.energy_defect / max(1.0, abs(d.energy_before)))
        bad += d.energy_defect > tol
        increases += d.energy_after > d.energy_before + tol
    ok = bad == 0 and increases == 0
    return SuiteResult("energy", ok, f"max scaled defect {worst:.2e}, {bad} defect violations, "
                                     f"{increases} energy increases")


def conservation_suite(cfg: Config, res: RunResult) -> SuiteResult:
    ok = res.phi_drift <= MEAN_TOL and res.rho_drift <= MEAN_TOL
    return SuiteResult("conservation", ok, f"mean(phi) drift {res.phi_drift:.1e}, "
                                           f"mean(rho) drift {res.rho_drift:.1e}")


def constraint_suite(cfg: Config, res: RunResult) -> SuiteResult:
    grid = cfg.grid
    worst = 0.0
    for d, st in zip(res.diagnostics, res.states[1:]):
        bound = 10 * cfg.picard.tol * (1 + h1_norm_u(grid, st.u))
        worst = max(worst, d.constraint_residual / bound)
    return SuiteResult("constraint", worst <= 1.0, f"max residual / bound = {worst:.2e}")


def reduction_error(grid: TorusGrid, u0: np.ndarray, phi0: np.ndarray, p: PhysParams, dt: float,
                    nsteps: int = 10, settings: PicardSettings = PicardSettings(tol=1e-12)) -> float:
    """Largest per-field ``L^2`` gap between the two steppers at matched densities."""
    p = p.matched()
    pu0, _ = helmholtz(grid, u0)
    q = MixtureState.initial(grid, pu0, phi0, p)
    h = ModelHState.initial(grid, pu0, phi0, p)
    worst = 0.0
    for _ in range(nsteps):
        q, _ = step(grid, q, dt, p, settings)
        h = step_modelh(grid, h, dt, p, settings)
        gaps = [grid.l2_norm(q.phi - h.phi), grid.l2_norm(q.u - h.u),
                grid.l2_norm(q.mu_p0 - (h.mu - np.mean(h.mu)))]
        worst = max(worst, *gaps)
    return worst


def reduction_suite(cfg: Config) -> SuiteResult:
    grid = cfg.grid
    u0 = 0.1 * velocity_field(grid, "taylor-green")
    phi0 = phase_field(grid, "spinodal", 0.0, 0.01, 7)
    err = reduction_error(grid, u0, phi0, cfg.params, cfg.dt)
    return SuiteResult("alpha0-reduction", err <= 1e-9, f"max L2 gap over 10 steps {err:.2e}")


def determinism_suite(cfg: Config, res: RunResult) -> SuiteResult:
    again = run_config(cfg).csv_text
    same = again == res.csv_text
    return SuiteResult("determinism", same, "byte-identical CSV" if same else "CSV output differs")


def phi_bound_suite(cfg: Config, res: RunResult, theta: float = 0.5) -> SuiteResult:
    lo, hi = phi_extrema(res)
    ok = -1 - theta < lo and hi < 1 + theta
    return SuiteResult("phi-bound", ok, f"phi in [{lo:.4f}, {hi:.4f}], theta={theta}")


_RUN_SUITES: dict[str, Callable[[Config, RunResult], SuiteResult]] = {
    "energy": energy_suite, "conservation": conservation_suite, "constraint": constraint_suite,
    "determinism": determinism_suite, "phi-bound": phi_bound_suite,
}
SUITE_NAMES = ("spectral", "energy", "conservation", "constraint", "alpha0-reduction",
               "determinism", "phi-bound")


def run_suites(cfg: Config, only: list[str] | None = None) -> list[SuiteResult]:
    names = only or list(SUITE_NAMES)
    unknown = set(names) - set(SUITE_NAMES)
    if unknown:
        raise ValueError(f"unknown suites {sorted(unknown)}")
    out = []
    res = None
    for name in names:
        if name == "spectral":
            out.append(spectral_suite())
        elif name == "alpha0-reduction":
            out.append(reduction_suite(cfg))
        else:
            if res is None:
                res = run_config(cfg, keep_states=True)
            out.append(_RUN_SUITES[name](cfg, res))
    return out


def table(results: list[SuiteResult]) -> str:
    w = max(len(r.name) for r in results)
    return "\n".join(f"{r.name:<{w}}  {'PASS' if r.passed else 'FAIL'}  {r.detail}" for r in results)


SPINODAL_CONFIG = """\
grid.n = 64
params.epsilon = -0.5
params.nu = 2
params.s = 1.6
params.delta = 1e-6
time.dt = 1e-3
time.t_end = 0.2
init.phi_preset = spinodal
init.phi_mean = 0.0
init.noise_amp = 0.01
init.seed = 12345
"""


def spinodal_config() -> Config:
    """200 steps of spinodal data at 64^2 used by the energy, conservation and determinism checks."""
    return parse_config(SPINODAL_CONFIG, env={})
