"""Command-line interface: ``ringpair rates|sweep|verify|limits|info``.

Exit codes: 0 success, 1 validation error, 2 invariant failure, 3 numerical error.
"""

from __future__ import annotations

import argparse
import os
import sys
import warnings

import numpy as np

from . import __version__, _kernels
from .commutators import commutators_closed_form
from .errors import NumericalError, PoleError, ValidationError
from .highq import regime_parameters
from .observables import RateRecord, rate_record
from .transfer import Location

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_INVARIANT = 2
EXIT_NUMERICAL = 3


def _fmt(x):
    return "%.17g" % x


def _format_for(path, explicit):
    if explicit:
        return explicit
    return "json" if str(path).lower().endswith(".json") else "csv"


def _write(path, payload: bytes):
    if path == "-":
        sys.stdout.buffer.write(payload)
        sys.stdout.flush()
        return
    with open(path, "wb") as fh:
        fh.write(payload)


def _load(path):
    from .sweep import load_config
    return load_config(path)


def cmd_rates(args):
    bundle = _load(args.config)
    config = bundle.system()
    omega = bundle.omega if args.omega is None else args.omega
    print(f"# config-hash: {bundle.config_hash}")
    print(f"omega = {_fmt(omega)}")
    for loc in (Location.OUTPUT_BUS, Location.INTRACAVITY):
        rec = rate_record(config, omega, loc)
        for name in RateRecord.FIELDS:
            print(f"{loc.value}.{name} = {_fmt(float(getattr(rec, name)))}")
    return EXIT_OK


def cmd_sweep(args):
    from .sweep import emit, run_sweep
    bundle = _load(args.config)
    dataset = run_sweep(bundle)
    fmt = _format_for(args.out, args.format)
    _write(args.out, emit(dataset, fmt))
    flagged = sum(f != "ok" for f in dataset.flags)
    print(f"{len(dataset.flags)} rows ({flagged} flagged) -> {args.out} [{fmt}]", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args):
    from .verify import format_report, run
    results = run("full" if args.full else "fast", seed=args.seed)
    print(format_report(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_INVARIANT


def cmd_limits(args):
    from .sweep import emit, limits_dataset, run_limits
    bundle = _load(args.config)
    report = run_limits(bundle)
    fmt = _format_for(args.out, args.format)
    _write(args.out, emit(limits_dataset(bundle, report), fmt))
    out = sys.stderr if args.out == "-" else sys.stdout
    for q in report.QUANTITIES:
        order = report.orders[q]
        order_s = "n/a" if order is None else f"{order:.3f}"
        print(f"{q:16s} order {order_s:>7s}  monotone {report.monotone[q]!s:5s}  "
              f"errors {' '.join(f'{e:.3e}' for e in report.errors[q])}", file=out)
    return EXIT_OK


def cmd_info(args):
    bundle = _load(args.config)
    print(f"ringpair {__version__} (backend: {_kernels.backend()})")
    print(f"config-hash = {bundle.config_hash}")
    for key, value in bundle.canonical().items():
        print(f"config.{key} = {value}")
    swept = set()
    if bundle.sweep is not None:
        spec = bundle.sweep
        print(f"sweep.quantity = {spec.quantity}")
        print(f"sweep.location = {spec.resolved_location().value}")
        print(f"sweep.rows = {spec.n_rows}")
        for i, ax in enumerate(spec.axes, 1):
            print(f"sweep.axis{i} = {ax.name} [{ax.spacing}] {len(ax.values)} values "
                  f"{_fmt(ax.values[0])} .. {_fmt(ax.values[-1])}")
            swept.add(ax.base)
    try:
        config = bundle.system()
    except ValidationError as exc:
        print(f"derived: unavailable with swept parameters unbound ({exc})")
        return EXIT_OK
    if swept:
        print(f"derived values use the fixed bindings; swept: {', '.join(sorted(swept))}")
    for label, mode in (("signal", config.signal), ("idler", config.idler)):
        for name in ("T", "rho", "tau", "alpha", "gamma", "gamma_int"):
            print(f"derived.{label}.{name} = {_fmt(getattr(mode, name))}")
    pump = config.pump
    print(f"derived.pump.process = {pump.process.value}")
    print(f"derived.pump.coupling = {_fmt(abs(pump.coupling))}")
    print(f"derived.pump.phase = {_fmt(pump.phase)}")
    print(f"derived.r_a = {_fmt(abs(config.r_a))}")
    print(f"derived.r_b = {_fmt(abs(config.r_b))}")
    print(f"derived.r_ab = {_fmt(config.r_ab)}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        comms = commutators_closed_form(config)
    print(f"derived.C_aa = {_fmt(float(comms.C_aa))}")
    print(f"derived.C_bb = {_fmt(float(comms.C_bb))}")
    d = complex(comms.D_ab)
    print(f"derived.D_ab = {_fmt(d.real)} {'+' if d.imag >= 0 else '-'} {_fmt(abs(d.imag))}i")
    print(f"derived.omega = {_fmt(bundle.omega)}")
    for name, value in regime_parameters(config, bundle.omega).items():
        print(f"derived.regime.{name} = {_fmt(value)}")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    """Usage errors are validation errors (exit 1), not argparse's default 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="ringpair", description="Microring photon-pair source calculator.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rates", help="pair rate, singles, CAR, heralding and populations at one detuning")
    p.add_argument("--config", required=True)
    p.add_argument("--omega", type=float, default=None, help="detuning (default: detuning.* from the config)")
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("sweep", help="evaluate the configured 1-D/2-D sweep and write a dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output file ('-' for stdout)")
    p.add_argument("--format", choices=("csv", "json"), default=None, help="default: from the file extension")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run the invariant suite")
    p.add_argument("--full", action="store_true", help="1000 configurations plus high-Q convergence studies")
    p.add_argument("--seed", type=int, default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("limits", help="high-Q convergence report along a T-halving grid")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output file ('-' for stdout)")
    p.add_argument("--format", choices=("csv", "json"), default=None, help="default: from the file extension")
    p.set_defaults(func=cmd_limits)

    p = sub.add_parser("info", help="echo the parsed configuration and derived parameters")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_info)
    return parser


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {message}", file=sys.stderr)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "seed", None) is None and args.command == "verify":
        from .verify import SEED
        args.seed = SEED
    previous = warnings.showwarning
    warnings.showwarning = _show_warning
    try:
        return args.func(args)
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (PoleError, NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    finally:
        warnings.showwarning = previous


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
