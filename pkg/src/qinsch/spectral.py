"""Fourier-spectral infrastructure on the periodic torus.

Fields are plain numpy arrays sampled on a uniform grid: a scalar field has
shape ``grid.shape``, a vector field ``(dim, *grid.shape)`` and a tensor field
``(dim, dim, *grid.shape)``.  Spectral coefficients use the real-FFT layout
(last axis halved) and are normalized as ``c_k = N^{-1} sum_x f(x) e^{-ik.x}``,
so that ``f = sum_k c_k e^{ik.x}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

TOL_MEAN = 1e-10


class MeanNotZero(ValueError):
    """Raised when a zero-mean operation receives a field with nonzero mean."""


@dataclass(frozen=True)
class TorusGrid:
    """Uniform periodic lattice on ``prod_i [0, length_i)``."""

    n: tuple[int, ...]
    length: tuple[float, ...] | None = None

    def __post_init__(self):
        n = tuple(int(m) for m in self.n)
        if len(n) not in (2, 3):
            raise ValueError(f"grid dimension must be 2 or 3, got {len(n)}")
        for m in n:
            if m < 8 or m & (m - 1):
                raise ValueError(f"axis point count must be a power of two >= 8, got {m}")
        length = self.length
        if length is None:
            length = (2 * math.pi,) * len(n)
        elif np.isscalar(length):
            length = (float(length),) * len(n)
        length = tuple(float(L) for L in length)
        if len(length) != len(n) or any(not (L > 0 and math.isfinite(L)) for L in length):
            raise ValueError(f"invalid axis lengths {length}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "length", length)

    @classmethod
    def square(cls, n: int, dim: int = 2, length: float = 2 * math.pi) -> "TorusGrid":
        return cls((n,) * dim, (length,) * dim)

    @property
    def dim(self) -> int:
        return len(self.n)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.n

    @property
    def size(self) -> int:
        return math.prod(self.n)

    @property
    def volume(self) -> float:
        return math.prod(self.length)

    @property
    def cell_volume(self) -> float:
        return self.volume / self.size

    @cached_property
    def spectral_shape(self) -> tuple[int, ...]:
        return self.n[:-1] + (self.n[-1] // 2 + 1,)

    @cached_property
    def coords(self) -> list[np.ndarray]:
        """Broadcastable coordinate arrays, one per axis."""
        out = []
        for ax, (m, L) in enumerate(zip(self.n, self.length)):
            shp = [1] * self.dim
            shp[ax] = m
            out.append((np.arange(m) * (L / m)).reshape(shp))
        return out

    def mesh(self) -> list[np.ndarray]:
        return [np.broadcast_to(x, self.shape).copy() for x in self.coords]

    @cached_property
    def integer_modes(self) -> list[np.ndarray]:
        """Signed integer frequencies per axis in the rfft layout (Nyquist is -n/2)."""
        out = []
        for ax, m in enumerate(self.n):
            shp = [1] * self.dim
            if ax == self.dim - 1:
                freq = np.arange(m // 2 + 1)
            else:
                freq = np.fft.fftfreq(m, 1.0 / m)
            shp[ax] = freq.size
            out.append(freq.astype(np.int64).reshape(shp))
        return out

    @cached_property
    def wavenumbers(self) -> list[np.ndarray]:
        """Physical wavenumbers ``2*pi*m/L`` per axis, broadcastable."""
        return [2 * math.pi / L * m for m, L in zip(self.integer_modes, self.length)]

    @cached_property
    def deriv_wavenumbers(self) -> list[np.ndarray]:
        # first derivatives annihilate the Nyquist plane so odd symbols keep fields real
        out = []
        for k, m, n in zip(self.wavenumbers, self.integer_modes, self.n):
            out.append(np.where(np.abs(m) == n // 2, 0.0, k))
        return out

    @cached_property
    def k2(self) -> np.ndarray:
        return sum(k**2 for k in self.wavenumbers) + np.zeros(self.spectral_shape)

    @cached_property
    def kabs(self) -> np.ndarray:
        return np.sqrt(self.k2)

    @cached_property
    def kd2(self) -> np.ndarray:
        return sum(k**2 for k in self.deriv_wavenumbers) + np.zeros(self.spectral_shape)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        mask = np.ones(self.spectral_shape, dtype=bool)
        for m, n in zip(self.integer_modes, self.n):
            mask &= np.abs(m) <= n // 3
        return mask

    @cached_property
    def half_weights(self) -> np.ndarray:
        """Multiplicity of each rfft coefficient in the full spectrum."""
        w = np.full(self.spectral_shape, 2.0)
        w[..., 0] = 1.0
        w[..., -1] = 1.0
        return w

    @cached_property
    def padded(self) -> "TorusGrid":
        """The grid with twice as many points per axis, for alias-free products."""
        return TorusGrid(tuple(2 * m for m in self.n), self.length)

    # transforms -----------------------------------------------------------

    def fft(self, f: np.ndarray) -> np.ndarray:
        axes = tuple(range(-self.dim, 0))
        return np.fft.rfftn(f, axes=axes) / self.size

    def ifft(self, fhat: np.ndarray) -> np.ndarray:
        axes = tuple(range(-self.dim, 0))
        return np.fft.irfftn(fhat * self.size, s=self.shape, axes=axes)

    # quadrature -----------------------------------------------------------

    def integrate(self, f: np.ndarray) -> float:
        """Trapezoid (uniform) quadrature over the torus."""
        return float(np.sum(f) * self.cell_volume)

    def mean(self, f: np.ndarray) -> float:
        return float(np.mean(f))

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        return float(np.sum(f * g) * self.cell_volume)

    def l2_norm(self, f: np.ndarray) -> float:
        return math.sqrt(self.inner(f, f))

    def spectral_sum(self, weights: np.ndarray | float, fhat: np.ndarray) -> float:
        """``sum_k weights(k) |fhat(k)|^2`` over the full (Hermitian) spectrum.

        Leading axes beyond the grid dimensions (vector components) are summed.
        """
        a = np.abs(fhat) ** 2 * self.half_weights * weights
        return float(np.sum(a))


# operators ---------------------------------------------------------------

def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ValueError("field contains non-finite values")


def frac_symbol(grid: TorusGrid, s: float) -> np.ndarray:
    """Fourier symbol ``|k|^{2s}`` with the zero mode mapped to 0."""
    if not (math.isfinite(s) and s > 0):
        raise ValueError(f"fractional order must be finite and positive, got {s}")
    return grid.kabs ** (2 * s)


def frac_laplacian(grid: TorusGrid, f: np.ndarray, s: float) -> np.ndarray:
    """Apply ``Lambda^{2s} = (-Delta)^s``; pass ``s/2`` for ``Lambda^s``."""
    sym = frac_symbol(grid, s)
    return grid.ifft(sym * grid.fft(f))


def inv_laplacian_zero_mean(grid: TorusGrid, f: np.ndarray, tol_mean: float = TOL_MEAN) -> np.ndarray:
    """Return the zero-mean ``g`` with ``Delta g = f``."""
    scale = max(1.0, math.sqrt(float(np.mean(f * f))))
    mean = float(np.mean(f))
    if abs(mean) > tol_mean * scale:
        raise MeanNotZero(f"mean {mean:.3e} exceeds tolerance {tol_mean:.1e}")
    fhat = grid.fft(f)
    k2 = grid.k2
    ghat = np.zeros_like(fhat)
    nz = k2 > 0
    ghat[nz] = -fhat[nz] / k2[nz]
    return grid.ifft(ghat)


def grad(grid: TorusGrid, f: np.ndarray) -> np.ndarray:
    fhat = grid.fft(f)
    return np.stack([grid.ifft(1j * k * fhat) for k in grid.deriv_wavenumbers])


def div(grid: TorusGrid, u: np.ndarray) -> np.ndarray:
    if u.shape != (grid.dim,) + grid.shape:
        raise ValueError(f"expected vector field of shape {(grid.dim,) + grid.shape}, got {u.shape}")
    uhat = grid.fft(u)
    return grid.ifft(sum(1j * k * uhat[i] for i, k in enumerate(grid.deriv_wavenumbers)))


def grad_vector(grid: TorusGrid, u: np.ndarray) -> np.ndarray:
    """Velocity gradient ``G[i, j] = d_j u_i``."""
    uhat = grid.fft(u)
    d = grid.dim
    return np.stack([np.stack([grid.ifft(1j * grid.deriv_wavenumbers[j] * uhat[i])
                               for j in range(d)]) for i in range(d)])


def sym_grad(grid: TorusGrid, u: np.ndarray) -> np.ndarray:
    """Symmetric gradient ``(grad u + grad u^T) / 2``."""
    G = grad_vector(grid, u)
    return 0.5 * (G + np.swapaxes(G, 0, 1))


def differentiate(grid: TorusGrid, x: np.ndarray, kind: str) -> np.ndarray:
    scalar = x.shape == grid.shape
    vector = x.shape == (grid.dim,) + grid.shape
    if kind == "grad" and scalar:
        return grad(grid, x)
    if kind == "div" and vector:
        return div(grid, x)
    if kind == "sym_grad" and vector:
        return sym_grad(grid, x)
    if kind not in ("grad", "div", "sym_grad"):
        raise ValueError(f"unknown derivative kind {kind!r}")
    raise ValueError(f"{kind} does not accept an input of shape {x.shape}")


def helmholtz(grid: TorusGrid, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split ``u = pu + grad g`` with ``div pu = 0`` and ``mean(g) = 0``."""
    _check_finite(u)
    uhat = grid.fft(u)
    ks = grid.deriv_wavenumbers
    divhat = sum(1j * k * uhat[i] for i, k in enumerate(ks))
    kd2 = grid.kd2
    ghat = np.zeros(grid.spectral_shape, dtype=complex)
    nz = kd2 > 0
    ghat[nz] = -divhat[nz] / kd2[nz]
    puhat = np.stack([uhat[i] - 1j * k * ghat for i, k in enumerate(ks)])
    return grid.ifft(puhat), grid.ifft(ghat)


def sobolev_norm(grid: TorusGrid, f: np.ndarray, s: float) -> float:
    """``H^s`` norm ``(|T| sum_k (1+|k|^2)^s |c_k|^2)^{1/2}``."""
    fhat = grid.fft(f)
    w = (1.0 + grid.k2) ** s
    return math.sqrt(grid.volume * grid.spectral_sum(w, fhat))


def dealias(grid: TorusGrid, fhat: np.ndarray) -> np.ndarray:
    """Zero every coefficient with some ``|k_axis| > n/3`` (2/3 rule)."""
    return np.where(grid.dealias_mask, fhat, 0.0)


def truncate(grid: TorusGrid, f: np.ndarray) -> np.ndarray:
    """Real-space version of :func:`dealias`."""
    return grid.ifft(dealias(grid, grid.fft(f)))


def transfer(src: TorusGrid, fhat: np.ndarray, dst: TorusGrid) -> np.ndarray:
    """Move normalized coefficients between grids by truncation or zero padding.

    Modes that do not exist on the target grid are dropped; Nyquist planes of
    the smaller grid are discarded so the result stays real and symmetric.
    """
    if src.dim != dst.dim or src.length != dst.length:
        raise ValueError("grids must share dimension and period")
    lead = fhat.shape[: fhat.ndim - src.dim]
    out = np.zeros(lead + dst.spectral_shape, dtype=complex)
    idx_src, idx_dst = [], []
    for ax in range(src.dim):
        # keep modes |m| < min(n_src, n_dst)/2 on every axis
        half = min(src.n[ax], dst.n[ax]) // 2
        if ax == src.dim - 1:
            idx_src.append(np.arange(half))
            idx_dst.append(np.arange(half))
        else:
            m = np.concatenate([np.arange(half), np.arange(-half + 1, 0)])
            idx_src.append(m % src.n[ax])
            idx_dst.append(m % dst.n[ax])
    out[(...,) + np.ix_(*idx_dst)] = fhat[(...,) + np.ix_(*idx_src)]
    return out


def resample(src: TorusGrid, f: np.ndarray, dst: TorusGrid) -> np.ndarray:
    """Real-space version of :func:`transfer`."""
    return dst.ifft(transfer(src, src.fft(f), dst))


def cube_hat(grid: TorusGrid, f: np.ndarray) -> np.ndarray:
    """Coefficients of ``f**3`` on ``grid``'s modes, computed without aliasing.

    The product is formed on the doubled grid, which is alias-free for cubes
    of fields inside the 2/3 band.
    """
    fine = grid.padded
    ff = fine.ifft(transfer(grid, grid.fft(f), fine))
    return transfer(fine, fine.fft(ff**3), grid)


def dealiased_cube(grid: TorusGrid, f: np.ndarray) -> np.ndarray:
    return grid.ifft(dealias(grid, cube_hat(grid, f)))


def integrate_padded(grid: TorusGrid, fn, *fields: np.ndarray) -> float:
    """``int fn(*fields)`` by quadrature on the doubled grid.

    Exact for polynomials up to degree four in fields inside the 2/3 band.
    """
    fine = grid.padded
    return fine.integrate(fn(*(resample(grid, f, fine) for f in fields)))
