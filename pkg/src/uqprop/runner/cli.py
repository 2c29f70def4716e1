"""Command-line entry point: ``uqprop run|validate|list-scenarios``."""

from __future__ import annotations

import argparse
import logging
import sys

from uqprop.runner.config import ConfigError, bundled_scenarios, dump_config, load_config, read_config
from uqprop.runner.pipeline import OUT_ENV, run_scenario

EXIT_OK, EXIT_RUNTIME, EXIT_INVALID = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uqprop", description="Uncertainty propagation scenarios.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario file or bundled scenario")
    run.add_argument("config", help="YAML file or bundled scenario name")
    run.add_argument("--seed", type=int, help="override the scenario seed")
    run.add_argument("--threads", type=int, help="worker threads")
    run.add_argument("--out-dir", help=f"output root (default ${OUT_ENV} or ./uqprop-out)")
    run.add_argument("--strict", action="store_true", help="exit with 1 when a tolerance check fails")

    val = sub.add_parser("validate", help="check a scenario without running it")
    val.add_argument("config")
    val.add_argument("--print", dest="show", action="store_true", help="echo the normalized YAML")

    sub.add_parser("list-scenarios", help="list the bundled scenarios")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "list-scenarios":
            for name, path in bundled_scenarios().items():
                raw = read_config(path)
                tag = " [long]" if raw.get("long_running") else ""
                print(f"{name:24s}{tag} {raw.get('description', '').strip()}")
            return EXIT_OK
        if args.command == "validate":
            raw, sc = load_config(args.config)
            print(f"ok: {sc.name} ({sc.info.model.name}, method {sc.method['kind']})")
            if args.show:
                print(dump_config(raw), end="")
            return EXIT_OK
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads", "must be >= 1")
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed", "must fit in 64 unsigned bits")
        res = run_scenario(args.config, args.out_dir, args.seed, args.threads)
        if args.strict and not res.passed:
            return EXIT_RUNTIME
        return EXIT_OK
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - reported with its origin
        mod = getattr(exc, "__module__", None) or type(exc).__module__
        tb = exc.__traceback__
        while tb is not None and tb.tb_next is not None:
            tb = tb.tb_next
        where = tb.tb_frame.f_globals.get("__name__", mod) if tb is not None else mod
        print(f"error in {where}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
