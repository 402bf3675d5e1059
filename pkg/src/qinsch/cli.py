"""Command-line driver.

Exit codes: 0 success, 1 usage or configuration error, 2 solver failure,
3 verification failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import checkpoint
from .config import ConfigError, load_config
from .driver import run_config
from .manufactured import manufactured_order
from .presets import phase_field, velocity_field
from .relent import alpha_sweep
from .stepper import PicardDiverged, StepSizeExhausted
from .verify import SUITE_NAMES, run_suites, table

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VERIFY = 0, 1, 2, 3
ORDER_BAND = (0.85, 1.15)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="qinsch", description="Quasi-incompressible NS/CH spectral simulator")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("-c", "--config", help="config file (defaults used when omitted)")
        return p

    r = with_config(sub.add_parser("run", help="integrate a configuration"))
    r.add_argument("--restart", help="checkpoint to start from")

    s = with_config(sub.add_parser("sweep-alpha", help="incompressible-limit rate experiment"))
    s.add_argument("--alphas", type=_floats, required=True, help="decreasing list, e.g. 0.2,0.1,0.05")
    s.add_argument("--refine", type=_floats, default=[2, 4],
                   help="grid and time-step refinement of the model-H reference (default 2,4)")

    v = with_config(sub.add_parser("verify", help="run the invariant suites"))
    v.add_argument("--suites", help=f"comma-separated subset of {','.join(SUITE_NAMES)}")

    m = sub.add_parser("manufactured", help="temporal order study with a manufactured solution")
    m.add_argument("--dts", type=_floats, required=True)
    m.add_argument("--n", type=int, default=32)
    m.add_argument("--t-end", type=float, default=1.0)
    return ap


def _cmd_run(args, cfg) -> int:
    os.makedirs(cfg.output_dir, exist_ok=True)
    initial = None
    if args.restart:
        initial = checkpoint.load(args.restart, expect_grid=cfg.grid).state
    ckdir = cfg.output_dir if cfg.checkpoint_every else None
    csv_path = os.path.join(cfg.output_dir, "diagnostics.csv")
    with open(csv_path, "w", newline="") as fh:
        res = run_config(cfg, fh, ckdir, initial=initial)
    final_path = os.path.join(cfg.output_dir, "final.qck")
    checkpoint.save(final_path, cfg.grid, res.final, cfg.params.alpha)
    print(f"t = {res.final.t:.6g}; {len(res.diagnostics)} steps; diagnostics -> {csv_path}; "
          f"final state -> {final_path}")
    return EXIT_OK


def _cmd_sweep(args, cfg) -> int:
    if len(args.refine) != 2 or any(f < 1 or f != int(f) for f in args.refine):
        raise ConfigError("--refine expects two positive integers")
    u0 = velocity_field(cfg.grid, cfg.u_preset)
    phi0 = phase_field(cfg.grid, cfg.phi_preset, cfg.phi_mean, cfg.noise_amp, cfg.seed)
    try:
        rep = alpha_sweep(cfg.grid, u0, phi0, cfg.params, args.alphas, cfg.dt, cfg.t_end, cfg.picard,
                          refinement=(int(args.refine[0]), int(args.refine[1])))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    os.makedirs(cfg.output_dir, exist_ok=True)
    path = os.path.join(cfg.output_dir, "rate_report.csv")
    with open(path, "w", newline="") as fh:
        fh.write(rep.to_csv())
    print(rep.summary())
    print(f"report -> {path}")
    return EXIT_SOLVER if rep.partial else EXIT_OK


def _cmd_verify(args, cfg) -> int:
    only = [x.strip() for x in args.suites.split(",")] if args.suites else None
    try:
        results = run_suites(cfg, only)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    print(table(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


def _cmd_manufactured(args) -> int:
    try:
        study = manufactured_order(args.dts, n=args.n, t_end=args.t_end)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    print(study.table())
    lo, hi = ORDER_BAND
    return EXIT_OK if lo <= study.order <= hi else EXIT_VERIFY


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "manufactured":
            return _cmd_manufactured(args)
        cfg = load_config(args.config)
        if args.command == "run":
            return _cmd_run(args, cfg)
        if args.command == "sweep-alpha":
            return _cmd_sweep(args, cfg)
        return _cmd_verify(args, cfg)
    except (ConfigError, checkpoint.CheckpointError, OSError) as exc:
        print(f"qinsch {args.command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PicardDiverged, StepSizeExhausted) as exc:
        print(f"qinsch {args.command}: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
