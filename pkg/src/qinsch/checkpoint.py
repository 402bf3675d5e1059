"""Binary checkpoints: one ASCII header line followed by little-endian float64 fields.

Header::

    QINSCH1 dim=2 n=64,64 length=6.283185307179586 t=0.1 alpha=0.3333333333333333 fields=phi,u1,u2,p0,mu_p0 mu_bar=-0.01

Floats are written with ``repr`` so every value round-trips exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import TorusGrid
from .stepper import MixtureState

MAGIC = "QINSCH1"
_DTYPE = np.dtype("<f8")


class CheckpointError(ValueError):
    pass


class HeaderMismatch(CheckpointError):
    pass


class TruncatedPayload(CheckpointError):
    pass


class GridMismatch(CheckpointError):
    pass


@dataclass
class Checkpoint:
    grid: TorusGrid
    alpha: float
    state: MixtureState


def field_names(dim: int) -> list[str]:
    return ["phi"] + [f"u{i + 1}" for i in range(dim)] + ["p0", "mu_p0"]


def _fmt_length(grid: TorusGrid) -> str:
    if len(set(grid.length)) == 1:
        return repr(grid.length[0])
    return ",".join(repr(L) for L in grid.length)


def write_checkpoint(grid: TorusGrid, state: MixtureState, alpha: float) -> bytes:
    header = (f"{MAGIC} dim={grid.dim} n={','.join(str(m) for m in grid.n)} "
              f"length={_fmt_length(grid)} t={float(state.t)!r} alpha={float(alpha)!r} "
              f"fields={','.join(field_names(grid.dim))} mu_bar={float(state.mu_bar)!r}\n")
    arrays = [state.phi, *state.u, state.p0, state.mu_p0]
    payload = b"".join(np.ascontiguousarray(a, dtype=_DTYPE).tobytes() for a in arrays)
    return header.encode("ascii") + payload


def _parse_header(line: str) -> dict[str, str]:
    parts = line.split(" ")
    if not parts or parts[0] != MAGIC:
        raise HeaderMismatch(f"bad magic {parts[0] if parts else ''!r}")
    out = {}
    for tok in parts[1:]:
        key, sep, val = tok.partition("=")
        if not sep:
            raise HeaderMismatch(f"malformed header token {tok!r}")
        out[key] = val
    missing = {"dim", "n", "length", "t", "alpha", "fields", "mu_bar"} - out.keys()
    if missing:
        raise HeaderMismatch(f"header lacks {sorted(missing)}")
    return out


def read_checkpoint(data: bytes, expect_grid: TorusGrid | None = None) -> Checkpoint:
    nl = data.find(b"\n")
    if nl < 0:
        raise HeaderMismatch("no header line")
    try:
        hdr = _parse_header(data[:nl].decode("ascii"))
        dim = int(hdr["dim"])
        n = tuple(int(x) for x in hdr["n"].split(","))
        lengths = tuple(float(x) for x in hdr["length"].split(","))
        t, alpha, mu_bar = float(hdr["t"]), float(hdr["alpha"]), float(hdr["mu_bar"])
    except (UnicodeDecodeError, ValueError) as exc:
        if isinstance(exc, HeaderMismatch):
            raise
        raise HeaderMismatch(f"unparsable header: {exc}") from None
    if len(n) != dim:
        raise HeaderMismatch(f"dim={dim} but n has {len(n)} entries")
    if len(lengths) == 1:
        lengths = lengths * dim
    try:
        grid = TorusGrid(n, lengths)
    except ValueError as exc:
        raise HeaderMismatch(str(exc)) from None
    names = hdr["fields"].split(",")
    if names != field_names(dim):
        raise HeaderMismatch(f"fields {names} do not match the {dim + 3} fields of a {dim}-D state")

    payload = data[nl + 1:]
    want = len(names) * grid.size * _DTYPE.itemsize
    if len(payload) < want:
        raise TruncatedPayload(f"payload has {len(payload)} bytes, expected {want}")
    if len(payload) > want:
        raise HeaderMismatch(f"payload has {len(payload)} bytes, header declares {want}")
    if expect_grid is not None and expect_grid != grid:
        raise GridMismatch(f"checkpoint grid n={grid.n} length={grid.length} does not match run grid "
                           f"n={expect_grid.n} length={expect_grid.length}")

    flat = np.frombuffer(payload, dtype=_DTYPE).astype(float)
    fields = flat.reshape((len(names),) + grid.shape)
    state = MixtureState(t, fields[1:1 + dim].copy(), fields[0].copy(), fields[1 + dim].copy(),
                         fields[2 + dim].copy(), mu_bar)
    return Checkpoint(grid, alpha, state)


def save(path: str, grid: TorusGrid, state: MixtureState, alpha: float) -> None:
    with open(path, "wb") as fh:
        fh.write(write_checkpoint(grid, state, alpha))


def load(path: str, expect_grid: TorusGrid | None = None) -> Checkpoint:
    with open(path, "rb") as fh:
        return read_checkpoint(fh.read(), expect_grid)
