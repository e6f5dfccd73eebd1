"""Command-line interface.

Subcommands:

* ``run <spec-file>``      - run the experiment, write results + series files
* ``validate <spec-file>`` - check an experiment file without writing anything
* ``policies``             - list the selection policies this build knows
* ``defaults``             - print a fully-commented default experiment file
* ``report <results-dir>`` - render PNG figures next to an existing results.csv

Exit status is 0 on success and 2 on any diagnosed failure (unreadable file,
parse error, invalid configuration, enumeration budget, I/O error).
"""
from __future__ import annotations

import argparse
import sys

from . import __version__
from .channel import ConfigError
from .experiment import (ExperimentError, default_spec_text, parse_experiment,
                         run_experiment, write_results)
from .policies import (EnumerationBudgetError, MATRIX_POLICIES, POLICY_NAMES,
                       SCALAR_POLICIES)

_FAILURE = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relaysec",
        description="Buffer-aided relay selection experiments with secrecy metrics.",
    )
    parser.add_argument("--version", action="version",
                        version=f"relaysec {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment file")
    run_p.add_argument("spec_file", help="path to the experiment file")
    run_p.add_argument("--out", default=None,
                       help="output directory (overrides the file's output_dir)")
    run_p.add_argument("--figures", action="store_true",
                       help="also render PNG figures into the output directory")

    val_p = sub.add_parser("validate", help="check an experiment file")
    val_p.add_argument("spec_file", help="path to the experiment file")

    sub.add_parser("policies", help="list available selection policies")
    sub.add_parser("defaults", help="print a commented default experiment file")

    rep_p = sub.add_parser("report", help="render figures from a results directory")
    rep_p.add_argument("results_dir", help="directory containing results.csv")
    return parser


def _load_spec(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ExperimentError(f"cannot read {path}: {err}") from err
    return parse_experiment(text)


def _cmd_run(args) -> int:
    spec = _load_spec(args.spec_file)
    out_dir = args.out if args.out is not None else spec.output_dir

    def progress(done, total, label):
        print(f"[{done}/{total}] {label}", file=sys.stderr)

    rows, traces = run_experiment(spec, progress=progress)
    written = write_results(rows, spec, out_dir, traces=traces)
    if args.figures:
        from .report import render_figures
        written.extend(render_figures(out_dir))
    for path in written:
        print(path)
    return 0


def _cmd_validate(args) -> int:
    spec = _load_spec(args.spec_file)
    points = len(spec.policies) * len(spec.sweep_values)
    print(f"OK: {len(spec.policies)} policies x {len(spec.sweep_values)} "
          f"sweep values ({points} runs over {spec.sweep_var})")
    return 0


def _cmd_policies() -> int:
    for name in POLICY_NAMES:
        if name in MATRIX_POLICIES:
            mode = "matrix mode"
        elif name in SCALAR_POLICIES:
            mode = "single-antenna mode"
        else:
            mode = "either mode"
        print(f"{name:15s} {mode}")
    return 0


def _cmd_report(args) -> int:
    from .report import render_figures
    for path in render_figures(args.results_dir):
        print(path)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "validate":
            return _cmd_validate(args)
        if args.command == "policies":
            return _cmd_policies()
        if args.command == "defaults":
            sys.stdout.write(default_spec_text())
            return 0
        if args.command == "report":
            return _cmd_report(args)
    except (ExperimentError, ConfigError, EnumerationBudgetError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return _FAILURE
    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
