"""Command-line entry point: ``nfdm {run,sweep,selftest,accuracy-probe}``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys

from ..config import PRESETS, LinkConfig, load_config, parse_value, preset
from ..units import ConfigurationError
from .runner import COLUMNS, THREADS_ENV, format_row, run_once, sweep, write_run

log = logging.getLogger("nfdm")


def _parse_assignment(text: str) -> tuple[str, object]:
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    return key.strip(), parse_value(value)


def _parse_axis(text: str) -> tuple[str, list]:
    key, sep, values = text.partition("=")
    if not sep or not key or not values:
        raise argparse.ArgumentTypeError(f"expected name=v1,v2,..., got {text!r}")
    return key.strip(), [parse_value(v) for v in values.split(",")]


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML or JSON config file")
    parser.add_argument("--preset", choices=sorted(PRESETS), help="start from a named preset")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--set", dest="overrides", type=_parse_assignment, action="append", default=[],
                        metavar="KEY=VALUE", help="override a config field (repeatable)")
    parser.add_argument("--threads", type=int, help=f"worker threads (default ${THREADS_ENV} or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nfdm", description="Dual-polarisation NFDM link simulator")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one configuration")
    _common(run)
    run.add_argument("--out", help="directory for results.csv and the config sidecar")

    sw = sub.add_parser("sweep", help="cartesian sweep over config axes")
    _common(sw)
    sw.add_argument("--axis", type=_parse_axis, action="append", default=[], metavar="NAME=V1,V2",
                    help="sweep axis (repeatable); adds to axes declared in the config file")
    sw.add_argument("--out", required=True, help="output directory")
    sw.add_argument("--no-resume", action="store_true", help="rerun points already in results.csv")

    st = sub.add_parser("selftest", help="run the invariant suite")
    st.add_argument("--inject", action="append", default=[], metavar="FAULT",
                    help="deliberately inject a fault (hilbert-sign, ase-x2)")

    ap = sub.add_parser("accuracy-probe", help="noiseless processing-accuracy ceiling")
    _common(ap)
    ap.add_argument("--bursts", type=int, default=8)
    ap.add_argument("--rx-upsample", type=int, default=4)
    return parser


def resolve_config(args) -> tuple[LinkConfig, dict]:
    base = preset(args.preset) if args.preset else LinkConfig()
    axes = {}
    if args.config:
        config, axes = load_config(args.config, base)
    else:
        config = base
    changes = dict(args.overrides)
    if args.seed is not None:
        changes["seed"] = args.seed
    if changes:
        config = config.with_(**changes)
    return config, axes


def _print_rows(rows, stream) -> None:
    writer = csv.writer(stream)
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow(format_row(row, exclude=()))
        stream.flush()


def cmd_run(args) -> int:
    config, _ = resolve_config(args)
    row = run_once(config, args.threads)
    if args.out:
        path = write_run(row, config, args.out)
        log.info("appended to %s", path)
    _print_rows([row], sys.stdout)
    return 1 if row["error"] else 0


def cmd_sweep(args) -> int:
    config, axes = resolve_config(args)
    axes = {**axes, **dict(args.axis)}
    failed = 0
    rows = sweep(config, axes, args.out, args.threads, resume=not args.no_resume)

    def counted():
        nonlocal failed
        for row in rows:
            failed += bool(row["error"])
            yield row

    _print_rows(counted(), sys.stdout)
    return 1 if failed else 0


def cmd_selftest(args) -> int:
    from .selftest import selftest

    report = selftest(faults=args.inject)
    print(report.format())
    return 0 if report.passed else 1


def cmd_accuracy_probe(args) -> int:
    from ..nft import accuracy_probe

    config, _ = resolve_config(args)
    report = accuracy_probe(config.geometry, config.power_dbm, config.mode, fibre=config.fibre,
                            n_bursts=args.bursts, seed=config.seed, rx_upsample=args.rx_upsample,
                            rho=config.rho, t_scale_s=config.t_scale_s)
    print(json.dumps(report.as_dict(), indent=2, sort_keys=True))
    return 0


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "selftest": cmd_selftest, "accuracy-probe": cmd_accuracy_probe}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except (ConfigurationError, FileNotFoundError) as exc:
        parser.exit(2, f"nfdm: error: {exc}\n")


if __name__ == "__main__":
    sys.exit(main())
