import math

import numpy as np
import pytest

from qinsch.spectral import (MeanNotZero, TorusGrid, dealias, dealiased_cube, differentiate, frac_laplacian, grad,
                             helmholtz, inv_laplacian_zero_mean, resample, sobolev_norm, sym_grad,
                             truncate)

from oracles import dense_dft_2d, leray_dense, sobolev_norm_dense

TWO_PI = 2 * math.pi


@pytest.fixture(scope="module")
def g64():
    return TorusGrid.square(64, 2)


def l2rel(grid, a, b):
    return grid.l2_norm(a - b) / grid.l2_norm(b)


class TestGrid:
    def test_shapes_and_volume(self):
        g = TorusGrid((16, 32))
        assert g.shape == (16, 32) and g.size == 512
        assert g.spectral_shape == (16, 17)
        assert g.volume == pytest.approx(TWO_PI**2)

    @pytest.mark.parametrize("n", [(6, 8), (8, 12), (4, 4), (8,), (8, 8, 8, 8)])
    def test_rejects_bad_counts(self, n):
        with pytest.raises(ValueError):
            TorusGrid(n)

    def test_zero_wavenumber_only_at_origin(self):
        g = TorusGrid.square(16, 3)
        assert np.count_nonzero(g.kabs == 0) == 1
        assert g.kabs.flat[0] == 0

    def test_scaled_wavenumbers(self):
        g = TorusGrid((8, 8), (1.0, 2.0))
        assert g.wavenumbers[0][1, 0] == pytest.approx(TWO_PI)
        assert g.wavenumbers[1][0, 1] == pytest.approx(math.pi)

    def test_nyquist_derivative_symbol_zeroed(self):
        g = TorusGrid.square(8, 2)
        assert np.all(g.deriv_wavenumbers[0][4] == 0)
        assert np.all(g.deriv_wavenumbers[1][..., 4] == 0)


class TestTransforms:
    @pytest.mark.parametrize("n", [8, 16, 32, 64])
    def test_round_trip(self, n):
        g = TorusGrid.square(n, 2)
        f = np.random.default_rng(n).standard_normal(g.shape)
        assert np.max(np.abs(g.ifft(g.fft(f)) - f)) <= 1e-12 * np.max(np.abs(f))

    def test_matches_dense_dft(self):
        g = TorusGrid.square(16, 2)
        f = np.random.default_rng(1).standard_normal(g.shape)
        c, _, _ = dense_dft_2d(f)
        assert np.allclose(g.fft(f), c[:, :9], atol=1e-14)

    def test_parseval(self, g64):
        f = np.random.default_rng(2).standard_normal(g64.shape)
        spec = g64.volume * g64.spectral_sum(1.0, g64.fft(f))
        assert spec == pytest.approx(g64.integrate(f * f), rel=1e-10)

    def test_hermitian_symmetry(self):
        g = TorusGrid.square(16, 2)
        f = np.random.default_rng(3).standard_normal(g.shape)
        c, _, _ = dense_dft_2d(f)
        assert np.allclose(c[1:, 1:], np.conj(c[1:, 1:][::-1, ::-1]), atol=1e-14)


class TestFracLaplacian:
    def test_unit_mode_fixed(self, g64):
        x1, _ = g64.mesh()
        for s in (0.3, 1.0):
            assert l2rel(g64, frac_laplacian(g64, np.cos(x1), s), np.cos(x1)) <= 1e-12
        # sample round-off in the top modes is amplified like |k|^{2s}; larger orders on coarser grids
        g = TorusGrid.square(32, 2)
        y1, _ = g.mesh()
        assert l2rel(g, frac_laplacian(g, np.cos(y1), 1.6), np.cos(y1)) <= 1e-12
        g = TorusGrid.square(8, 2)
        y1, _ = g.mesh()
        for s in (2.0, 2.7):
            assert l2rel(g, frac_laplacian(g, np.cos(y1), s), np.cos(y1)) <= 1e-12

    def test_unit_mode_coefficient_exact(self, g64):
        x1, _ = g64.mesh()
        fhat = g64.fft(np.cos(x1))
        out = g64.fft(frac_laplacian(g64, np.cos(x1), 1.6))
        assert abs(out[1, 0] - fhat[1, 0]) <= 1e-15

    def test_constant_annihilated(self, g64):
        assert np.max(np.abs(frac_laplacian(g64, np.full(g64.shape, 3.7), 1.6))) <= 1e-12

    def test_mode_two(self, g64):
        x1, _ = g64.mesh()
        assert 2**3.2 == pytest.approx(9.18959, abs=1e-5)
        assert l2rel(g64, frac_laplacian(g64, np.cos(2 * x1), 1.6), 2**3.2 * np.cos(2 * x1)) <= 1e-12

    @pytest.mark.parametrize("s", [0.0, -1.0, math.inf, math.nan])
    def test_rejects_bad_order(self, g64, s):
        with pytest.raises(ValueError):
            frac_laplacian(g64, np.zeros(g64.shape), s)

    def test_composition(self, g64):
        f = truncate(g64, np.random.default_rng(4).standard_normal(g64.shape))
        twice = frac_laplacian(g64, frac_laplacian(g64, f, 0.8), 0.8)
        assert l2rel(g64, twice, frac_laplacian(g64, f, 1.6)) <= 1e-10


class TestInverseLaplacian:
    def test_single_mode(self, g64):
        x1, _ = g64.mesh()
        assert l2rel(g64, inv_laplacian_zero_mean(g64, np.cos(x1)), -np.cos(x1)) <= 1e-12

    def test_two_modes(self, g64):
        x1, x2 = g64.mesh()
        got = inv_laplacian_zero_mean(g64, np.cos(2 * x1) + np.sin(3 * x2))
        assert l2rel(g64, got, -np.cos(2 * x1) / 4 - np.sin(3 * x2) / 9) <= 1e-12

    def test_nonzero_mean_rejected(self, g64):
        with pytest.raises(MeanNotZero):
            inv_laplacian_zero_mean(g64, np.ones(g64.shape))

    def test_grad_div_recovers(self, g64):
        f = np.random.default_rng(5).standard_normal(g64.shape)
        f = truncate(g64, f - f.mean())
        back = differentiate(g64, differentiate(g64, inv_laplacian_zero_mean(g64, f), "grad"), "div")
        assert l2rel(g64, back, f) <= 1e-10


class TestHelmholtz:
    def test_pure_gradient(self, g64):
        x1, _ = g64.mesh()
        pu, gg = helmholtz(g64, np.stack([-np.sin(x1), np.zeros_like(x1)]))
        assert np.max(np.abs(pu)) <= 1e-12
        assert l2rel(g64, gg, np.cos(x1)) <= 1e-12

    def test_solenoidal(self, g64):
        _, x2 = g64.mesh()
        u = np.stack([-np.sin(x2), np.zeros_like(x2)])
        pu, gg = helmholtz(g64, u)
        assert np.max(np.abs(pu - u)) <= 1e-12 and np.max(np.abs(gg)) <= 1e-12

    def test_random_against_dense_projection(self):
        g = TorusGrid.square(16, 2)
        u = np.random.default_rng(6).standard_normal((2,) + g.shape)
        pu, gg = helmholtz(g, u)
        pu_ref, g_ref = leray_dense(u)
        assert np.max(np.abs(pu - pu_ref)) <= 1e-12
        assert np.max(np.abs(gg - g_ref)) <= 1e-12
        assert np.max(np.abs(pu + grad(g, gg) - u)) <= 1e-12
        assert np.max(np.abs(differentiate(g, pu, "div"))) <= 1e-12

    def test_mean_kept_in_projection(self, g64):
        u = np.ones((2,) + g64.shape)
        pu, gg = helmholtz(g64, u)
        assert np.allclose(pu, 1.0) and np.allclose(gg, 0.0)


class TestDifferentiate:
    def test_grad(self, g64):
        x1, _ = g64.mesh()
        gr = differentiate(g64, np.cos(x1), "grad")
        assert np.allclose(gr[0], -np.sin(x1), atol=1e-12) and np.allclose(gr[1], 0, atol=1e-12)

    def test_div_free(self, g64):
        _, x2 = g64.mesh()
        assert np.max(np.abs(differentiate(g64, np.stack([-np.sin(x2), 0 * x2]), "div"))) <= 1e-12

    def test_sym_grad(self, g64):
        _, x2 = g64.mesh()
        D = sym_grad(g64, np.stack([np.sin(x2), 0 * x2]))
        assert np.allclose(D[0, 1], np.cos(x2) / 2, atol=1e-12)
        assert np.allclose(D[1, 0], np.cos(x2) / 2, atol=1e-12)
        assert np.allclose(D[0, 0], 0, atol=1e-12) and np.allclose(D[1, 1], 0, atol=1e-12)

    def test_arity_mismatch(self, g64):
        with pytest.raises(ValueError):
            differentiate(g64, np.zeros(g64.shape), "div")
        with pytest.raises(ValueError):
            differentiate(g64, np.zeros((2,) + g64.shape), "grad")
        with pytest.raises(ValueError):
            differentiate(g64, np.zeros(g64.shape), "curl")


class TestSobolev:
    def test_constant(self):
        for d in (2, 3):
            g = TorusGrid.square(8, d)
            assert sobolev_norm(g, np.full(g.shape, -2.5), 1.3) == pytest.approx(2.5 * TWO_PI ** (d / 2))

    def test_cos_l2(self, g64):
        x1, _ = g64.mesh()
        assert sobolev_norm(g64, np.cos(x1), 0) == pytest.approx(TWO_PI / math.sqrt(2), rel=1e-13)

    def test_random_against_dense(self):
        g = TorusGrid.square(16, 2)
        f = np.random.default_rng(7).standard_normal(g.shape)
        assert sobolev_norm(g, f, 1.6) == pytest.approx(sobolev_norm_dense(f, 1.6), rel=1e-10)


class TestDealias:
    def test_low_mode_kept_high_zeroed(self):
        g = TorusGrid.square(32, 2)
        x1, _ = g.mesh()
        assert np.allclose(g.ifft(dealias(g, g.fft(np.cos(x1)))), np.cos(x1), atol=1e-14)
        assert np.max(np.abs(g.ifft(dealias(g, g.fft(np.cos(12 * x1)))))) <= 1e-14
        assert np.allclose(g.ifft(dealias(g, g.fft(np.cos(10 * x1)))), np.cos(10 * x1), atol=1e-13)

    def test_cube_identity(self):
        # cos^3 = (3 cos + cos 3.)/4; the 30-mode would alias to 2 on n=32 without padding
        g = TorusGrid.square(32, 2)
        x1, _ = g.mesh()
        assert np.max(np.abs(g.ifft(dealias(g, g.fft(np.cos(10 * x1) ** 3))) - 0.75 * np.cos(10 * x1))) > 0.1
        g = TorusGrid.square(32, 2)
        x1, _ = g.mesh()
        got = dealiased_cube(g, np.cos(10 * x1))
        assert np.max(np.abs(got - 0.75 * np.cos(10 * x1))) <= 1e-12


class TestResample:
    def test_band_limited_round_trip(self):
        c, f = TorusGrid.square(16, 2), TorusGrid.square(32, 2)
        u = truncate(c, np.random.default_rng(8).standard_normal(c.shape))
        up = resample(c, u, f)
        assert np.max(np.abs(resample(f, up, c) - u)) <= 1e-12
        x1, x2 = c.mesh()
        y1, y2 = f.mesh()
        v = np.cos(3 * x1) * np.sin(2 * x2)
        assert np.max(np.abs(resample(c, v, f) - np.cos(3 * y1) * np.sin(2 * y2))) <= 1e-12
