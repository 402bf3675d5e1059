import math
import warnings

import numpy as np
import pytest

from qinsch import constitutive as cst
from qinsch.constitutive import PhysParams
from qinsch.spectral import TorusGrid, sym_grad
from qinsch.stepper import MixtureState

TWO_PI = 2 * math.pi


@pytest.fixture(scope="module")
def grid():
    return TorusGrid.square(32, 2)


def state(grid, u=None, phi=None, p0=None, mu=None):
    z = np.zeros(grid.shape)
    return MixtureState(0.0, np.zeros((2,) + grid.shape) if u is None else u,
                        z if phi is None else phi, z if p0 is None else p0, z if mu is None else mu, 0.0)


class TestParams:
    def test_derived_ratios(self):
        p = PhysParams(epsilon=-0.5)
        assert p.alpha == pytest.approx(1 / 3, abs=1e-15)
        assert p.zeta == pytest.approx(4 / 3, abs=1e-15)
        assert p.zeta == pytest.approx(2 / (2 + p.epsilon), abs=1e-15)

    def test_matched(self):
        p = PhysParams(epsilon=0.0)
        assert p.alpha == 0 and p.zeta == 1

    def test_from_alpha_round_trip(self):
        for a in (0.0, 0.025, 0.2, 0.9):
            assert PhysParams.from_alpha(a).alpha == pytest.approx(a, abs=1e-15)

    @pytest.mark.parametrize("kw", [dict(epsilon=0.1), dict(epsilon=-1.0), dict(nu=0.0), dict(kappa=-1.0),
                                    dict(s=0.9), dict(s=math.nan), dict(delta=-1e-6)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            PhysParams(**kw)

    def test_nonsingular_coefficients(self):
        # eps*delta/(2 alpha) and eps*delta/(4 alpha) in closed form
        p = PhysParams(epsilon=-0.5, delta=1e-3)
        assert p.mass_source_coeff == pytest.approx(p.epsilon * p.delta / (2 * p.alpha), rel=1e-14)
        assert p.momentum_damping_coeff == pytest.approx(p.epsilon * p.delta / (4 * p.alpha), rel=1e-14)
        q = PhysParams(epsilon=0.0, delta=1e-3)
        assert q.mass_source_coeff == -1e-3 and q.momentum_damping_coeff == -5e-4

    def test_outside_analysis_flag(self):
        assert PhysParams(s=1.0).outside_analysis
        assert not PhysParams(s=1.6).outside_analysis


class TestClosures:
    def test_density_values(self):
        p = PhysParams(epsilon=-0.5)
        assert np.all(cst.density(np.ones(4), p) == 0.5)
        assert np.all(cst.density(-np.ones(4), p) == 1.0)
        assert np.all(cst.density(np.zeros(4), p) == 0.75)

    def test_zeta_rho_identity(self):
        p = PhysParams(epsilon=-0.5)
        phi = np.random.default_rng(0).uniform(-3, 3, 1000)
        lhs = p.zeta * cst.density(phi, p, warn=False)
        assert np.all(np.abs(lhs - cst.zeta_rho(phi, p)) <= 4 * np.spacing(np.maximum(abs(lhs), 1.0)))

    def test_density_warning(self):
        p = PhysParams(epsilon=-0.9)
        with pytest.warns(cst.DensityWarning):
            cst.density(np.array([5.0]), p)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            cst.density(np.array([0.0]), p)

    def test_viscosity(self):
        p = PhysParams(nu=2.0)
        assert cst.viscosity(np.array([1.0]), p)[0] == 2.0
        assert cst.viscosity(np.array([-1.0]), p)[0] == 1.0
        assert cst.viscosity(np.array([0.0]), p)[0] == 1.5

    def test_viscosity_clamp(self):
        p = PhysParams(nu=0.5)
        phi = np.array([0.0, 10.0])
        assert cst.viscosity(phi, p)[1] == cst.ETA_MIN
        assert cst.viscosity_clamp_count(phi, p) == 1

    def test_potential(self):
        assert cst.potential(np.array([1.0, -1.0])).tolist() == [0.0, 0.0]
        x = np.linspace(-3, 3, 601)
        assert np.all(cst.potential(x) >= 0)
        assert np.allclose(cst.potential(x), 0.25 * (x**2 - 1) ** 2, atol=1e-14)

    @pytest.mark.parametrize("h", [1e-3, 1e-4])
    def test_potential_derivative(self, h):
        x = np.random.default_rng(1).uniform(-2, 2, 100)
        fd = (cst.potential(x + h) - cst.potential(x - h)) / (2 * h)
        # central difference error is h^2 F'''/6 = h^2 x
        assert np.all(np.abs(fd - cst.potential_prime(x)) <= 2 * h**2 * (1 + np.abs(x)))

    def test_convexity(self):
        x = np.linspace(-2, 2, 401)
        h = 1e-3
        second = (cst.phi_convex(x + h) - 2 * cst.phi_convex(x) + cst.phi_convex(x - h)) / h**2
        assert np.all(second >= -1e-6)


class TestStress:
    def test_zero(self, grid):
        D = np.zeros((2, 2) + grid.shape)
        assert np.all(cst.stress(np.zeros(grid.shape), D, PhysParams(nu=2)) == 0)

    def test_shear(self, grid):
        x1, x2 = grid.mesh()
        D = sym_grad(grid, np.stack([np.sin(x2), 0 * x2]))
        S = cst.stress(np.zeros(grid.shape), D, PhysParams(nu=2))
        assert np.allclose(S[0, 1], 1.5 * np.cos(x2), atol=1e-12)
        assert np.allclose(S[0, 0], 0, atol=1e-12) and np.allclose(S[1, 1], 0, atol=1e-12)

    def test_compressive(self, grid):
        x1, _ = grid.mesh()
        D = sym_grad(grid, np.stack([np.sin(x1), 0 * x1]))
        S = cst.stress(np.zeros(grid.shape), D, PhysParams(nu=2))
        assert np.allclose(S[0, 0], 2 * np.cos(x1), atol=1e-12)
        assert np.allclose(S[1, 1], -np.cos(x1), atol=1e-12)


class TestChemicalPotential:
    def test_constants(self, grid):
        p = PhysParams()
        assert np.max(np.abs(cst.chemical_potential(grid, np.zeros(grid.shape), p))) == 0
        assert np.max(np.abs(cst.chemical_potential(grid, np.ones(grid.shape), p))) <= 1e-14

    def test_unit_mode_cancels(self, grid):
        x1, _ = grid.mesh()
        a = 0.7
        for s in (1.0, 1.6):
            mu = cst.chemical_potential(grid, a * np.cos(x1), PhysParams(s=s))
            # Lambda^{2s} lifts sample round-off in the top modes by up to |k|^{2s}
            assert np.max(np.abs(mu - a**3 * np.cos(x1) ** 3)) <= 1e-11

    def test_mean(self):
        phi = np.array([0.5, -0.2, 1.1])
        assert cst.mean_chemical_potential(phi, PhysParams()) == pytest.approx(np.mean(phi**3 - phi))


class TestEnergy:
    def test_pure_phase(self, grid):
        assert cst.total_energy(grid, state(grid, phi=np.ones(grid.shape)), PhysParams()).total == 0

    def test_mixed_state(self, grid):
        e = cst.total_energy(grid, state(grid), PhysParams())
        assert e.total == pytest.approx(TWO_PI**2 / 4, rel=1e-14)

    def test_shear_flow(self, grid):
        _, x2 = grid.mesh()
        e = cst.total_energy(grid, state(grid, u=np.stack([np.sin(x2), 0 * x2])), PhysParams(epsilon=-0.5))
        # rho = 0.75 at phi = 0; int sin^2 = (2 pi)^2 / 2
        assert e.kinetic == pytest.approx(0.5 * 0.75 * TWO_PI**2 / 2, rel=1e-13)
        assert e.total == pytest.approx(e.kinetic + TWO_PI**2 / 4, rel=1e-13)

    def test_fractional_part(self, grid):
        x1, _ = grid.mesh()
        e = cst.total_energy(grid, state(grid, phi=0.1 * np.cos(2 * x1)), PhysParams(s=1.6))
        assert e.fractional == pytest.approx(0.5 * 2**3.2 * 0.01 * TWO_PI**2 / 2, rel=1e-12)

    def test_potential_quadrature_exact(self, grid):
        # int (phi^2 - 1)^2 / 4 for phi = a cos x1 is exact on the padded grid
        x1, _ = grid.mesh()
        a = 0.9
        e = cst.total_energy(grid, state(grid, phi=a * np.cos(10 * x1)), PhysParams())
        exact = TWO_PI**2 * 0.25 * (3 * a**4 / 8 - a**2 + 1)
        assert e.potential == pytest.approx(exact, rel=1e-13)

    def test_translation_invariance(self, grid):
        rng = np.random.default_rng(2)
        from qinsch.spectral import truncate
        phi = truncate(grid, 0.3 * rng.standard_normal(grid.shape))
        u = np.stack([truncate(grid, c) for c in rng.standard_normal((2,) + grid.shape)])
        p = PhysParams()
        e0 = cst.total_energy(grid, state(grid, u=u, phi=phi), p).total
        shift = lambda f: np.roll(f, (3, 5), axis=(-2, -1))  # noqa: E731
        e1 = cst.total_energy(grid, state(grid, u=shift(u), phi=shift(phi)), p).total
        assert e1 == pytest.approx(e0, rel=1e-12)


class TestDissipation:
    def test_zero(self, grid):
        assert cst.dissipation(grid, state(grid), PhysParams()) == (0.0, 0.0, 0.0)

    def test_shear(self, grid):
        _, x2 = grid.mesh()
        d = cst.dissipation(grid, state(grid, u=np.stack([np.sin(x2), 0 * x2])), PhysParams(nu=2))
        assert d[0] == pytest.approx(1.5 * TWO_PI**2 / 2, rel=1e-13)

    def test_mu_and_pressure_parts(self, grid):
        x1, _ = grid.mesh()
        p = PhysParams(delta=0.01)
        d = cst.dissipation(grid, state(grid, mu=np.cos(2 * x1), p0=np.sin(x1)), p)
        assert d[1] == pytest.approx(4 * TWO_PI**2 / 2, rel=1e-13)
        assert d[2] == pytest.approx(0.01 * TWO_PI**2 / 2, rel=1e-13)

    def test_nonnegative_on_random_states(self, grid):
        rng = np.random.default_rng(3)
        p = PhysParams(nu=3.0)
        for _ in range(200):
            u = rng.standard_normal((2,) + grid.shape)
            phi = rng.uniform(-1, 1, grid.shape)
            assert cst.viscous_dissipation(grid, phi, u, p) >= -1e-12


class TestBregman:
    def test_matches_definition(self):
        rng = np.random.default_rng(9)
        a, b = rng.uniform(-2, 2, (2, 500))
        direct = cst.phi_convex(a) - cst.phi_convex_prime(b) * (a - b) - cst.phi_convex(b)
        assert np.allclose(cst.bregman_convex(a, b), direct, atol=1e-13)

    def test_nonnegative_and_accurate_near_diagonal(self):
        b = np.linspace(-1.5, 1.5, 301)
        a = b + 1e-9
        out = cst.bregman_convex(a, b)
        assert np.all(out >= 0)
        d = a - b
        assert np.allclose(out, 1.5 * b**2 * d**2 + b * d**3 + d**4 / 4, rtol=1e-12, atol=1e-40)
