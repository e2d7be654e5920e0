"""Command-line entry point: ``abcmc {run,expand,compat,validate}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .experiments import (EXPERIMENTS, ConfigError, ExperimentConfig, emit_compatibility_table,
                          expand_config, run_experiment)
from .numerics import DomainError

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _load(args) -> ExperimentConfig:
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("config", str(exc)) from None
        if args.seed is not None:
            raw["seed"] = args.seed
        return ExperimentConfig.from_dict(raw)
    if not args.experiment:
        raise ConfigError("experiment", "give --experiment or --config")
    if args.experiment == "custom":
        raise ConfigError("experiment", "custom experiments need --config FILE")
    return expand_config(args.experiment, args.scale, args.seed or 0)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="abcmc", description="ABC model choice experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (("run", "run an experiment and write records"),
                           ("expand", "print the fully expanded configuration"),
                           ("compat", "write the compatibility table"),
                           ("validate", "run a validation experiment")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--experiment", choices=EXPERIMENTS + ("custom",))
        s.add_argument("--config", help="JSON file with an explicit configuration")
        s.add_argument("--scale", type=float, default=1.0)
        s.add_argument("--seed", type=int, default=None)
        s.add_argument("--out", help="output directory (compat: CSV path or directory)")
        if name in ("run", "validate"):
            s.add_argument("--workers", type=int, default=None)
            s.add_argument("--no-resume", action="store_true")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = _load(args)
        if args.command == "expand":
            sys.stdout.write(cfg.to_json())
        elif args.command == "compat":
            path = None
            if args.out:
                path = Path(args.out)
                if path.is_dir() or not path.suffix:
                    path.mkdir(parents=True, exist_ok=True)
                    path = path / "compatibility.csv"
            text = emit_compatibility_table(cfg, path)
            if path is None:
                sys.stdout.write(text)
        else:
            if args.command == "validate" and cfg.validation is None:
                raise ConfigError("validation", f"experiment {cfg.experiment_id!r} has no validation block")
            if not args.out:
                raise ConfigError("out", "an output directory is required")
            paths = run_experiment(cfg, args.out, args.workers, resume=not args.no_resume)
            for p in paths.values():
                print(p)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DomainError, RuntimeError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
