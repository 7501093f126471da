"""Command line: ``python -m liouville_lab {run,report,validate}``.

Exit codes: 0 success (including soft failures recorded in the report),
1 configuration error, 2 I/O error, 3 failed checks under ``--strict``.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, ExperimentConfig, SUITES
from .io import FormatVersionError, IntegrityError, load_ensemble
from .report import rerender
from .suites import run

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_STRICT = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="liouville_lab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a suite")
    r.add_argument("config")
    r.add_argument("--suite", choices=SUITES)
    r.add_argument("--seed", type=int, help="override disorder.master_seed")
    r.add_argument("--strict", action="store_true", help="exit 3 when a check fails")
    r.add_argument("--out", help="directory for report.json and raw data")
    r.add_argument("--workers", type=int, default=1, help="threads used to sample realizations")
    rep = sub.add_parser("report", help="re-render a report from a run's raw directory")
    rep.add_argument("raw_dir")
    v = sub.add_parser("validate", help="check a configuration file")
    v.add_argument("config")
    return p


def _print_config_error(exc: ConfigError):
    for path, msg in exc.errors:
        print(f"config error at {path or '<root>'}: {msg}", file=sys.stderr)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "validate":
            ExperimentConfig.load(args.config)
            print(f"{args.config}: valid")
            return EXIT_OK
        if args.command == "run":
            cfg = ExperimentConfig.load(args.config)
            overrides = {}
            if args.suite:
                overrides["suite"] = args.suite
            if args.seed is not None:
                overrides["disorder"] = {"master_seed": args.seed}
            if overrides:
                cfg = cfg.override(overrides)
            report = run(cfg, out_dir=args.out, workers=max(1, args.workers))
            print(report.render_text())
            return EXIT_STRICT if args.strict and not report.passed else EXIT_OK
        if args.command == "report":
            raw = Path(args.raw_dir)
            if not (raw / "checks.csv").exists():
                raise FileNotFoundError(f"{raw / 'checks.csv'} not found")
            for f in sorted(raw.glob("*.lle")):
                load_ensemble(f)
            report = rerender(raw)
            print(report.render_text())
            return EXIT_OK
    except ConfigError as exc:
        _print_config_error(exc)
        return EXIT_CONFIG
    except (IntegrityError, FormatVersionError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_CONFIG
