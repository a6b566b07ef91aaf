"""Command-line entry point: ``maxwell-pml <command> [options]``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..errors import NumericalDivergence
from . import experiments as ex
from .config import ConfigError, read_config
from .output import write_json

COMMANDS = ("verify", "run", "equivalence", "convergence", "absorption")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="maxwell-pml",
                                description="Structure-preserving Maxwell/PML experiments.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path, help="INI experiment file (defaults apply when omitted)")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (overrides run.seed)")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--steps", type=int, default=None, help="override run.steps")
    p.add_argument("--quiet", action="store_true", help="print nothing but errors")
    return p


def _print_report(rep: ex.Report) -> None:
    for row in rep.table:
        print("  ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in row.items()))
    for c in rep.checks:
        print(c.line())
    if "error" in rep.info:
        print(f"error: {rep.info['error']}")
    print(f"{rep.command}: {'ok' if rep.status == ex.EXIT_PASS else 'status ' + str(rep.status)}")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return ex.EXIT_CONFIG if exc.code else ex.EXIT_PASS
    try:
        cfg = read_config(args.config)
        if args.steps is not None:
            if args.steps < 0:
                raise ConfigError("--steps must be >= 0")
            cfg.run.steps = args.steps
        seed = cfg.run.seed if args.seed is None else args.seed
        if seed < 0:
            raise ConfigError("--seed must be non-negative")
        out: Path = args.out
        if args.command == "verify":
            rep = ex.cmd_verify(cfg, seed)
        elif args.command == "run":
            rep = ex.cmd_run(cfg, seed, out)
        elif args.command == "equivalence":
            rep = ex.cmd_equivalence(cfg, seed)
        elif args.command == "convergence":
            rep = ex.cmd_convergence(cfg)
        else:
            rep = ex.cmd_absorption(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return ex.EXIT_CONFIG
    except NumericalDivergence as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return ex.EXIT_DIVERGED
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / f"{args.command}_report.json", rep.to_dict())
    if not args.quiet:
        _print_report(rep)
    elif rep.status == ex.EXIT_DIVERGED:
        print(rep.info.get("error", "diverged"), file=sys.stderr)
    return rep.status


if __name__ == "__main__":
    sys.exit(main())
