"""Physical parameters, constitutive closures and the energy functionals."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .spectral import TorusGrid, dealiased_cube, frac_symbol, integrate_padded, sym_grad

ETA_MIN = 1e-6


class DensityWarning(RuntimeWarning):
    """The affine density became non-positive somewhere on the grid."""


@dataclass(frozen=True)
class PhysParams:
    """Model parameters.  ``alpha`` and ``zeta`` are derived from ``epsilon``."""

    epsilon: float = -0.5
    nu: float = 1.0
    kappa: float = 1.0
    s: float = 1.6
    delta: float = 1e-6

    def __post_init__(self):
        if not (-1.0 < self.epsilon <= 0.0):
            raise ValueError(f"epsilon must lie in (-1, 0], got {self.epsilon}")
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if not (math.isfinite(self.s) and self.s >= 1.0):
            raise ValueError(f"fractional order s must be >= 1, got {self.s}")
        if not self.delta >= 0:
            raise ValueError(f"delta must be nonnegative, got {self.delta}")

    @classmethod
    def from_alpha(cls, alpha: float, **kw) -> "PhysParams":
        if not (0.0 <= alpha < 1.0):
            raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
        return cls(epsilon=-2.0 * alpha / (1.0 + alpha), **kw)

    @property
    def alpha(self) -> float:
        return -self.epsilon / (2.0 + self.epsilon)

    @property
    def zeta(self) -> float:
        return 1.0 + self.alpha

    def matched(self) -> "PhysParams":
        """Same closures at matched densities and without regularization."""
        return replace(self, epsilon=0.0, delta=0.0)

    @property
    def outside_analysis(self) -> bool:
        """True for ``s <= 3/2``, where the well-posedness theory does not apply."""
        return self.s <= 1.5

    # the singular-looking coefficients eps*delta/(2 alpha) and eps*delta/(4 alpha)
    @property
    def mass_source_coeff(self) -> float:
        return -self.delta / (1.0 + self.alpha)

    @property
    def momentum_damping_coeff(self) -> float:
        return -self.delta / (2.0 * (1.0 + self.alpha))


# potential F = Phi - kappa/2 phi^2 with Phi = phi^4/4 + 1/4

def phi_convex(phi):
    return 0.25 * phi**4 + 0.25


def phi_convex_prime(phi):
    return phi**3


def bregman_convex(a, b):
    """``Phi(a) - Phi'(b)(a - b) - Phi(b)`` in the factored form ``(a-b)^2 ((a+b)^2 + 2b^2) / 4``.

    Nonnegative by construction and free of cancellation when ``a`` is near ``b``.
    """
    d = a - b
    return 0.25 * d * d * ((a + b) ** 2 + 2.0 * b * b)


def potential(phi, kappa: float = 1.0):
    return phi_convex(phi) - 0.5 * kappa * phi**2


def potential_prime(phi, kappa: float = 1.0):
    return phi**3 - kappa * phi


def density(phi: np.ndarray, p: PhysParams, warn: bool = True) -> np.ndarray:
    rho = 0.5 * p.epsilon * phi + 0.5 * p.epsilon + 1.0
    if warn and np.min(rho) <= 0:
        warnings.warn(f"non-positive density {np.min(rho):.3g}", DensityWarning, stacklevel=2)
    return rho


def zeta_rho(phi: np.ndarray, p: PhysParams) -> np.ndarray:
    """``zeta * rho(phi)`` evaluated as ``1 - alpha*phi``."""
    return 1.0 - p.alpha * phi


def viscosity(phi: np.ndarray, p: PhysParams) -> np.ndarray:
    eta = 0.5 * (p.nu - 1.0) * phi + 0.5 * (p.nu + 1.0)
    return np.maximum(eta, ETA_MIN)


def viscosity_clamp_count(phi: np.ndarray, p: PhysParams) -> int:
    eta = 0.5 * (p.nu - 1.0) * phi + 0.5 * (p.nu + 1.0)
    return int(np.count_nonzero(eta < ETA_MIN))


def stress(phi: np.ndarray, D: np.ndarray, p: PhysParams) -> np.ndarray:
    """Newtonian stress ``2 eta D - (2/3) eta tr(D) I`` from the symmetric gradient ``D``.

    The 2/3 coefficient is used in every dimension.
    """
    eta = viscosity(phi, p)
    d = D.shape[0]
    trace = sum(D[i, i] for i in range(d))
    S = 2.0 * eta * D
    for i in range(d):
        S[i, i] = S[i, i] - (2.0 / 3.0) * eta * trace
    return S


def chemical_potential(grid: TorusGrid, phi: np.ndarray, p: PhysParams) -> np.ndarray:
    """``mu = F'(phi) + Lambda^{2s} phi`` with a dealiased cubic."""
    lin = grid.ifft(frac_symbol(grid, p.s) * grid.fft(phi))
    return dealiased_cube(grid, phi) - p.kappa * phi + lin


def mean_chemical_potential(phi: np.ndarray, p: PhysParams) -> float:
    return float(np.mean(potential_prime(phi, p.kappa)))


class EnergyReport(NamedTuple):
    kinetic: float
    potential: float
    fractional: float
    total: float

    @property
    def free(self) -> float:
        return self.potential + self.fractional


def fractional_energy(grid: TorusGrid, phi: np.ndarray, s: float) -> float:
    """``1/2 ||Lambda^s phi||^2``."""
    return 0.5 * grid.volume * grid.spectral_sum(grid.k2**s, grid.fft(phi))


def total_energy(grid: TorusGrid, state, p: PhysParams) -> EnergyReport:
    """Kinetic plus free energy of any state carrying ``u`` and ``phi``."""
    rho = density(state.phi, p, warn=False)
    kin = 0.5 * grid.integrate(rho * np.sum(state.u**2, axis=0))
    pot = integrate_padded(grid, lambda f: potential(f, p.kappa), state.phi)
    frac = fractional_energy(grid, state.phi, p.s)
    return EnergyReport(kin, pot, frac, kin + pot + frac)


def viscous_dissipation(grid: TorusGrid, phi: np.ndarray, u: np.ndarray, p: PhysParams) -> float:
    """``int S(phi, Du) : Du``, nonnegative by the pointwise trace inequality."""
    D = sym_grad(grid, u)
    S = stress(phi, D, p)
    return grid.integrate(np.sum(S * D, axis=(0, 1)))


def dissipation(grid: TorusGrid, state, p: PhysParams) -> tuple[float, float, float]:
    """``(D_visc, D_mu, D_p)`` for a state with ``u, phi, mu_p0, p0``."""
    d_visc = viscous_dissipation(grid, state.phi, state.u, p)
    muhat = grid.fft(state.mu_p0)
    d_mu = grid.volume * grid.spectral_sum(grid.kd2, muhat)
    d_p = p.delta * grid.inner(state.p0, state.p0)
    return d_visc, d_mu, d_p
