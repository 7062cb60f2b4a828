"""Command-line interface.

Subcommands
-----------
modes         eigenvalue tables chi_0..chi_{n-1} versus c, plus eigenmode samples
calibrate     gamma*L that reproduces a target pair-production probability
scan          delay scan of a scenario, written as CSV
fit           Gaussian dip fit of a scan CSV
oracle-check  Gaussian-engine vs Fock-oracle equivalence sweep

Exit codes: 0 success, 2 configuration/parse failure, 3 numerical failure,
4 I/O failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


class _CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _parse_c_range(text):
    parts = text.split(":")
    if len(parts) != 3:
        raise _CliError(f"--c-range wants start:stop:step, got {text!r}", EXIT_CONFIG)
    start, stop, step = (float(p) for p in parts)
    if step <= 0 or stop < start:
        raise _CliError("empty c range", EXIT_CONFIG)
    return np.arange(start, stop + step / 2, step)


def _write_or_print(text, path):
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise _CliError(f"cannot write {path!r}: {exc}", EXIT_IO) from exc


def _load_scenario(args):
    from .experiment import ExperimentError, load_scenario, preset_scenario

    overrides = args.set or []
    try:
        if args.preset:
            return preset_scenario(args.preset, overrides=overrides)
        if not args.config:
            raise _CliError("need --preset or --config", EXIT_CONFIG)
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as exc:
            raise _CliError(f"cannot read {args.config!r}: {exc}", EXIT_IO) from exc
        return load_scenario(text, overrides=overrides)
    except ExperimentError as exc:
        raise _CliError(str(exc), EXIT_CONFIG) from exc


def cmd_modes(args):
    from .modes import ModeAnalysisError, eigenvalue_curve, rect_rect_basis

    c_values = _parse_c_range(args.c_range)
    try:
        rows = eigenvalue_curve(c_values, n_modes=args.n_modes)
    except ModeAnalysisError as exc:
        raise _CliError(str(exc), EXIT_NUMERICAL) from exc
    head = "c, " + ", ".join(f"chi_{j}" for j in range(args.n_modes))
    lines = [head]
    for row in rows:
        lines.append(", ".join(format(v, ".8f") for v in row))
    out = "\n".join(lines) + "\n"
    if args.eigenmodes is not None:
        basis = rect_rect_basis(args.eigenmodes)
        out += f"\n# eigenmodes at c = {args.eigenmodes} (omega/B, phi_0, phi_1, phi_2)\n"
        b = 4.0 * args.eigenmodes
        sel = np.abs(basis.grid.points) <= 0.75 * b
        pts = basis.grid.points[sel]
        for i in range(0, len(pts), max(1, len(pts) // 64)):
            vals = [pts[i] / b] + [basis.eigenmodes[sel, j][i].real for j in range(3)]
            out += ", ".join(format(v, ".6f") for v in vals) + "\n"
    _write_or_print(out, args.output)
    return 0


def cmd_calibrate(args):
    from .source import SourceModelError, pair_production_probability

    scenario = _load_scenario(args)
    try:
        params = scenario.source_params
        prob = pair_production_probability(scenario.source, scenario.filters["signal"])
    except SourceModelError as exc:
        raise _CliError(str(exc), EXIT_NUMERICAL) from exc
    sys.stdout.write(f"gammaL_per_W = {params.gamma_length:.9e}\n"
                     f"pair_probability = {prob:.9f}\n")
    return 0


def cmd_scan(args):
    from .experiment import ExperimentError, run_delay_scan

    scenario = _load_scenario(args)
    try:
        scan = run_delay_scan(scenario)
    except ExperimentError as exc:
        raise _CliError(str(exc), EXIT_NUMERICAL) from exc
    _write_or_print(scan.to_csv(), args.output)
    return 0


def cmd_fit(args):
    from .experiment import DelayScan, ExperimentError, FitError, fit_visibility

    try:
        with open(args.input) as fh:
            text = fh.read()
    except OSError as exc:
        raise _CliError(f"cannot read {args.input!r}: {exc}", EXIT_IO) from exc
    try:
        scan = DelayScan.from_csv(text)
    except ExperimentError as exc:
        raise _CliError(str(exc), EXIT_CONFIG) from exc
    try:
        fit = fit_visibility(scan, observable=args.observable)
    except FitError as exc:
        raise _CliError(str(exc), EXIT_NUMERICAL) from exc
    _write_or_print(fit.summary(), args.output)
    return 0


def cmd_oracle_check(args):
    from .fock import FockOracleError, random_equivalence_comparison

    try:
        worst, checked = random_equivalence_comparison(n_states=args.states,
                                                       seed=args.seed)
    except FockOracleError as exc:
        raise _CliError(str(exc), EXIT_NUMERICAL) from exc
    sys.stdout.write(f"states = {args.states}\ncomparisons = {checked}\n"
                     f"max_deviation = {worst:.3e}\n")
    if worst > args.tolerance:
        raise _CliError(f"max deviation {worst:.3e} exceeds {args.tolerance:.1e}",
                        EXIT_NUMERICAL)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="homsim",
        description="Heralded Hong-Ou-Mandel simulator for fiber pair sources "
                    "behind gate+filter mode selection")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("modes", help="Schmidt eigenvalue tables versus c = B*T/4")
    p.add_argument("--c-range", default="0.1:5:0.1", help="start:stop:step")
    p.add_argument("--n-modes", type=int, default=3)
    p.add_argument("--eigenmodes", type=float, default=None, metavar="C",
                   help="also emit phi_0..phi_2 samples at this c")
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_modes)

    for name, func, help_text in (
            ("calibrate", cmd_calibrate, "calibrated gammaL for a scenario"),
            ("scan", cmd_scan, "delay scan to CSV")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--preset", choices=("multimode", "single_mode"), default=None)
        p.add_argument("--config", default=None, help="scenario INI file")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="override a config entry (repeatable, last wins)")
        p.add_argument("--output", default=None)
        p.set_defaults(func=func)

    p = sub.add_parser("fit", help="Gaussian dip fit of a scan CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--observable", choices=("fourfold", "twofold_accsub", "twofold"),
                   default="fourfold")
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("oracle-check",
                       help="Gaussian engine vs Fock oracle equivalence sweep")
    p.add_argument("--states", type=int, default=50)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _CliError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return exc.code
    except Exception as exc:  # anything unexpected counts as numerical failure
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
