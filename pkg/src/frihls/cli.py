"""``frihls`` command line: one battery per invocation.

Exit status is 0 when every check held, 1 on a violated check (or an
invalid configuration) and 2 when a resource budget was exceeded; in the
last case the report written so far carries ``truncated: true``.
"""

import argparse
import json
import os
import sys
import time

from .experiments import (COMMANDS, DEFAULT_SEED, FORMATS, ConfigError, build_config, exit_status,
                          parse_config, run_battery)


def _tolerance(text):
    name, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected name=value, got {text!r}")
    try:
        return name.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"tolerance {name!r}: {value!r} is not a number") from None


def build_parser():
    parser = argparse.ArgumentParser(prog="frihls", description="Run a seeded check battery and write its report.")
    parser.add_argument("command", nargs="?", choices=COMMANDS,
                        help="battery to run (may instead be given as \"command\" in the config)")
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--seed", help=f"64-bit seed (default {DEFAULT_SEED:#x})")
    parser.add_argument("--out", help="output directory (FRIHLS_OUT overrides)")
    parser.add_argument("--format", choices=FORMATS)
    parser.add_argument("--threads", type=int, help="worker threads (default: all cores)")
    parser.add_argument("--tolerance", action="append", type=_tolerance, default=[], metavar="NAME=VALUE",
                        help="override a named tolerance; repeatable")
    return parser


def resolve_config(args, environ=os.environ):
    data = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
        parse_config(text)  # syntax and range errors are reported against the file itself
        data = json.loads(text)
    if args.command:
        if data.get("command") not in (None, args.command):
            raise ConfigError(f"command: {args.command!r} conflicts with {data['command']!r} in the config",
                              field="command")
        data["command"] = args.command
    if args.seed is not None:
        data["seed"] = args.seed
    if args.format:
        data["format"] = args.format
    if args.threads is not None:
        data["threads"] = args.threads
    if args.tolerance:
        tol = dict(data.get("tolerances") or {})
        tol.update(dict(args.tolerance))
        data["tolerances"] = tol
    out = environ.get("FRIHLS_OUT") or args.out
    if out:
        data["output_dir"] = out
    if "command" not in data:
        raise ConfigError("command: no battery given on the command line or in the config", field="command")
    return build_config(data)


def report_path(config, stamp=None):
    stamp = stamp or time.strftime("%Y%m%dT%H%M%SZ", time.gmtime())
    base = os.path.join(config.output_dir, f"{config.command}-{config.seed}-{stamp}")
    path, k = f"{base}.{config.format}", 1
    while os.path.exists(path):
        path, k = f"{base}-{k}.{config.format}", k + 1
    return path


def run_experiment(config):
    """Run the battery and write its report; returns ``(status, path, report)``."""
    report = run_battery(config)
    os.makedirs(config.output_dir, exist_ok=True)
    path = report_path(config)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(report.render(config.format))
    return exit_status(report), path, report


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
    except (ConfigError, OSError) as exc:
        print(f"frihls: {exc}", file=sys.stderr)
        return 1
    status, path, report = run_experiment(config)
    failed = [c for c in report.checks if not c.passed]
    for c in failed:
        print(f"FAIL {c.name} [{c.case}] value={c.value!r} reference={c.reference!r} {c.detail}", file=sys.stderr)
    print(f"{config.command}: {len(report.checks) - len(failed)}/{len(report.checks)} checks passed"
          f"{' (truncated)' if report.truncated else ''}; report {path}")
    return status


if __name__ == "__main__":
    sys.exit(main())
