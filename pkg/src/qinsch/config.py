"""Line-oriented run configuration: ``section.key = value`` with ``#`` comments."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

from .constitutive import PhysParams
from .presets import PHASE_PRESETS, VELOCITY_PRESETS, check_preset
from .spectral import TorusGrid
from .stepper import PicardSettings

OUTPUT_ENV = "QINSCH_OUTPUT_DIR"


class ConfigError(ValueError):
    def __init__(self, message: str, lines: tuple[int, ...] = ()):
        where = ", ".join(f"line {n}" for n in lines)
        super().__init__(f"{where}: {message}" if where else message)
        self.lines = lines


def _int(v: str) -> int:
    return int(v)


def _float(v: str) -> float:
    x = float(v)
    if not math.isfinite(x):
        raise ValueError("value must be finite")
    return x


def _opt_int(v: str) -> int | None:
    return None if v.lower() in ("", "none") else int(v)


def _str(v: str) -> str:
    return v


# key -> (parser, default)
_SCHEMA: dict[str, tuple] = {
    "grid.dim": (_int, 2),
    "grid.n": (_int, 64),
    "grid.length": (_float, 2 * math.pi),
    "params.epsilon": (_float, None),
    "params.alpha": (_float, None),
    "params.nu": (_float, 1.0),
    "params.kappa": (_float, 1.0),
    "params.s": (_float, 1.6),
    "params.delta": (_float, 1e-6),
    "time.dt": (_float, 1e-3),
    "time.t_end": (_float, 0.2),
    "picard.tol": (_float, 1e-10),
    "picard.max_iter": (_int, 200),
    "picard.dt_backoff": (_float, 0.5),
    "picard.max_backoffs": (_int, 10),
    "init.phi_preset": (_str, "smooth"),
    "init.u_preset": (_str, "zero"),
    "init.phi_mean": (_float, 0.0),
    "init.noise_amp": (_float, 0.0),
    "init.seed": (_opt_int, None),
    "output.dir": (_str, "out"),
    "output.every": (_int, 1),
    "output.checkpoint_every": (_int, 0),
}

DEFAULT_EPSILON = -0.5


@dataclass
class Config:
    grid: TorusGrid
    params: PhysParams
    dt: float
    t_end: float
    picard: PicardSettings
    phi_preset: str
    u_preset: str
    phi_mean: float
    noise_amp: float
    seed: int | None
    output_dir: str
    every: int
    checkpoint_every: int
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def alpha(self) -> float:
        return self.params.alpha

    @property
    def zeta(self) -> float:
        return self.params.zeta


def parse_config(text: str, env: dict | None = None) -> Config:
    env = os.environ if env is None else env
    values: dict[str, object] = {}
    lineno: dict[str, int] = {}
    for n, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected 'section.key = value', got {body!r}", (n,))
        key, val = (x.strip() for x in body.split("=", 1))
        if key not in _SCHEMA:
            raise ConfigError(f"unknown key {key!r}", (n,))
        if key in lineno:
            raise ConfigError(f"duplicate key {key!r} (first set on line {lineno[key]})", (n,))
        try:
            values[key] = _SCHEMA[key][0](val)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {val!r} ({exc})", (n,)) from None
        lineno[key] = n

    if "params.epsilon" in values and "params.alpha" in values:
        raise ConfigError("params.epsilon and params.alpha are mutually exclusive",
                          (lineno["params.epsilon"], lineno["params.alpha"]))

    def get(key):
        return values.get(key, _SCHEMA[key][1])

    def checked(keys, build):
        try:
            return build()
        except ValueError as exc:
            raise ConfigError(str(exc), tuple(sorted(lineno[k] for k in keys if k in lineno))) from None

    dim, n, length = get("grid.dim"), get("grid.n"), get("grid.length")
    if dim not in (2, 3):
        raise ConfigError("grid.dim must be 2 or 3", tuple(x for x in [lineno.get("grid.dim")] if x))
    grid = checked(["grid.n", "grid.length"], lambda: TorusGrid.square(n, dim, length))

    kw = dict(nu=get("params.nu"), kappa=get("params.kappa"), s=get("params.s"), delta=get("params.delta"))
    param_keys = [f"params.{k}" for k in ("epsilon", "alpha", "nu", "kappa", "s", "delta")]
    if "params.alpha" in values:
        params = checked(param_keys, lambda: PhysParams.from_alpha(values["params.alpha"], **kw))
    else:
        params = checked(param_keys, lambda: PhysParams(epsilon=get("params.epsilon") if "params.epsilon" in values
                                                        else DEFAULT_EPSILON, **kw))

    dt, t_end = get("time.dt"), get("time.t_end")
    if not dt > 0:
        raise ConfigError("time.dt must be positive", (lineno.get("time.dt", 0),))
    if not t_end >= 0:
        raise ConfigError("time.t_end must be nonnegative", (lineno.get("time.t_end", 0),))
    picard = checked([k for k in _SCHEMA if k.startswith("picard.")], lambda: PicardSettings(
        tol=get("picard.tol"), max_iter=get("picard.max_iter"),
        dt_backoff=get("picard.dt_backoff"), max_backoffs=get("picard.max_backoffs")))

    noise, seed = get("init.noise_amp"), get("init.seed")
    if noise < 0:
        raise ConfigError("init.noise_amp must be nonnegative", (lineno["init.noise_amp"],))
    if noise > 0 and seed is None:
        raise ConfigError("init.seed is required when init.noise_amp > 0", (lineno["init.noise_amp"],))
    for key, known in (("init.phi_preset", PHASE_PRESETS), ("init.u_preset", VELOCITY_PRESETS)):
        checked([key], lambda: check_preset(get(key), known))
    every, ck = get("output.every"), get("output.checkpoint_every")
    if every < 1:
        raise ConfigError("output.every must be >= 1", (lineno["output.every"],))
    if ck < 0:
        raise ConfigError("output.checkpoint_every must be >= 0", (lineno["output.checkpoint_every"],))

    return Config(grid=grid, params=params, dt=dt, t_end=t_end, picard=picard,
                  phi_preset=get("init.phi_preset"), u_preset=get("init.u_preset"),
                  phi_mean=get("init.phi_mean"), noise_amp=noise, seed=seed,
                  output_dir=env.get(OUTPUT_ENV) or get("output.dir"),
                  every=every, checkpoint_every=ck, raw=dict(values))


def load_config(path: str | None, env: dict | None = None) -> Config:
    if path is None:
        return parse_config("", env)
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), env)
