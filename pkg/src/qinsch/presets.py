"""Initial-data presets.

Phase presets: ``spinodal``, ``smooth``, ``single-mode(k, amplitude)``,
``tanh-stripe``, ``constant(c)``.  Velocity presets: ``zero``,
``taylor-green`` or ``taylor-green(amplitude)``.
"""

from __future__ import annotations

import re

import numpy as np

from .spectral import TorusGrid, truncate

_CALL = re.compile(r"^\s*([a-z-]+)\s*(?:\((.*)\))?\s*$")


def _parse(preset_text: str) -> tuple[str, list[float]]:
    m = _CALL.match(preset_text)
    if not m:
        raise ValueError(f"malformed preset {preset_text!r}")
    args = [float(a) for a in m.group(2).split(",")] if m.group(2) else []
    return m.group(1), args


PHASE_PRESETS = ("spinodal", "smooth", "single-mode", "tanh-stripe", "constant")
VELOCITY_PRESETS = ("zero", "taylor-green")


def check_preset(preset_text: str, known: tuple[str, ...]) -> None:
    name, _ = _parse(preset_text)
    if name not in known:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(known)}")


def band_noise(grid: TorusGrid, seed: int, kmax: int | None = None) -> np.ndarray:
    """Seeded noise band-limited to ``|k_axis| <= kmax`` (default n/8), max-abs 1."""
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal(grid.shape)
    fhat = grid.fft(raw)
    mask = np.ones(grid.spectral_shape, dtype=bool)
    for m, n in zip(grid.integer_modes, grid.n):
        mask &= np.abs(m) <= (kmax if kmax is not None else n // 8)
    fhat = np.where(mask, fhat, 0.0)
    fhat.flat[0] = 0.0
    out = grid.ifft(fhat)
    return out / np.max(np.abs(out))


def phase_field(grid: TorusGrid, preset: str, mean: float = 0.0, noise_amp: float = 0.0,
                seed: int | None = None) -> np.ndarray:
    name, args = _parse(preset)
    x = grid.coords
    L = grid.length
    if name == "spinodal":
        phi = np.full(grid.shape, float(mean))
    elif name == "smooth":
        phi = 0.1 * np.cos(2 * np.pi * x[0] / L[0]) + 0.05 * np.cos(2 * np.pi * x[1] / L[1])
        phi = phi + mean
    elif name == "single-mode":
        k, amp = (args + [1.0, 0.1][len(args):])[:2]
        phi = amp * np.cos(2 * np.pi * k * x[0] / L[0]) + mean
    elif name == "tanh-stripe":
        width = args[0] if args else 0.3
        # distance to the stripe centre line x1 = L/2, periodic
        dist = np.abs(x[0] - L[0] / 2)
        phi = -np.tanh((dist - L[0] / 4) / width) + mean
        phi = truncate(grid, np.broadcast_to(phi, grid.shape).copy())
    elif name == "constant":
        phi = np.full(grid.shape, args[0] if args else float(mean))
    else:
        raise ValueError(f"unknown phase preset {name!r}")
    phi = np.broadcast_to(phi, grid.shape).astype(float).copy()
    if noise_amp > 0:
        if seed is None:
            raise ValueError("a seed is required when noise_amp > 0")
        phi += noise_amp * band_noise(grid, seed)
    return phi


def velocity_field(grid: TorusGrid, preset: str) -> np.ndarray:
    name, args = _parse(preset)
    u = np.zeros((grid.dim,) + grid.shape)
    if name == "zero":
        return u
    if name == "taylor-green":
        amp = args[0] if args else 1.0
        x, y = (2 * np.pi * grid.coords[i] / grid.length[i] for i in range(2))
        if grid.dim == 2:
            u[0] = amp * np.sin(x) * np.cos(y)
            u[1] = -amp * np.cos(x) * np.sin(y)
        else:
            z = 2 * np.pi * grid.coords[2] / grid.length[2]
            u[0] = amp * np.sin(x) * np.cos(y) * np.cos(z)
            u[1] = -amp * np.cos(x) * np.sin(y) * np.cos(z)
        return u
    raise ValueError(f"unknown velocity preset {name!r}")
