"""Command line entry point: ``satdod run | sweep | validate``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

import yaml

from .baselines import SolverError
from .config import POLICIES, ConfigError, load_config, validate_config
from .harness import run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2


def _parse_value(text: str):
    # YAML scalars give ints, floats, bools and strings without extra rules
    return yaml.safe_load(text)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="satdod", description="Satellite energy scheduling experiments.")
    sub = ap.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", default=None, help="YAML config (default: packaged defaults)")
    common.add_argument("--theory-mode", action="store_true", help="check the alpha condition of the regret bound")
    common.add_argument("-v", "--verbose", action="store_true")

    runs = argparse.ArgumentParser(add_help=False)
    runs.add_argument("-o", "--out", default=None, help="output directory (overrides out_dir)")
    runs.add_argument("--seed", type=int, action="append", default=None,
                      help="seed override; repeat for several")
    runs.add_argument("--policy", action="append", choices=POLICIES, default=None,
                      help="restrict to this policy; repeat for several")
    runs.add_argument("--horizon", type=int, default=None)
    runs.add_argument("-j", "--jobs", type=int, default=None, help="worker processes")

    sub.add_parser("run", parents=[common, runs], help="run one config, ignoring its sweep")
    sw = sub.add_parser("sweep", parents=[common, runs], help="run the config's parameter sweep")
    sw.add_argument("--param", default=None, help="parameter to sweep, e.g. env.harvest_peak")
    sw.add_argument("--values", default=None, help="comma separated sweep values")
    sub.add_parser("validate", parents=[common], help="check a config and exit")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        over = {"theory_mode": cfg.theory_mode or args.theory_mode}
        if getattr(args, "seed", None):
            over["seeds"] = tuple(args.seed)
        if getattr(args, "policy", None):
            over["policies"] = tuple(dict.fromkeys(args.policy))
        if getattr(args, "horizon", None) is not None:
            over["horizon"] = args.horizon
        if getattr(args, "jobs", None) is not None:
            over["jobs"] = args.jobs
        cfg = dataclasses.replace(cfg, **over)

        if args.command == "validate":
            errors, warns = validate_config(cfg)
            for w in warns:
                print(f"warning: {w}", file=sys.stderr)
            for e in errors:
                print(f"error: {e}", file=sys.stderr)
            if errors:
                return EXIT_CONFIG
            print("ok")
            return EXIT_OK

        param = values = None
        if args.command == "run":
            param, values = None, [None]
            cfg = dataclasses.replace(cfg, sweep=dataclasses.replace(cfg.sweep, param=None, values=()))
        else:
            param = args.param or cfg.sweep.param
            if args.values is not None:
                values = [_parse_value(v) for v in args.values.split(",") if v.strip()]
            elif param == cfg.sweep.param:
                values = list(cfg.sweep.values)
            if param is None:
                raise ConfigError(["sweep.param: no sweep parameter given"])
            if not values:
                raise ConfigError(["sweep.values: need at least one value"])
        out = run_experiment(cfg, args.out, param, None if param is None else values)
        print(out / "summary.csv")
        return EXIT_OK
    except ConfigError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
