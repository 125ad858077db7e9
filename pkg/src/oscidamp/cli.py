"""Command-line entry point: ``oscidamp {design,simulate,compare,verify,reproduce}``.

Exit codes: 0 success, 1 validation failure, 2 numerical failure,
3 I/O error, 64 usage error.
"""

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .config import load_config
from .control import validate_assumptions
from .exceptions import ConfigError, NumericalError
from .experiments import EXPERIMENTS, design, onset_time, reproduce, run_comparison, simulate
from .metrics import signal_ids, signal_metrics
from .model import assemble_state_space, check_regularity
from .report import REFERENCE_TWO_AREA, emit_csv, render_table
from .verify import run_checks

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO, EXIT_USAGE = 0, 1, 2, 3, 64
CONTROLLERS = ("fd", "sf", "sdf", "sdf_measured")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _controller_list(text):
    modes = tuple(m.strip() for m in text.split(",") if m.strip())
    if len(modes) != 2 or any(m not in CONTROLLERS for m in modes):
        raise argparse.ArgumentTypeError(f"expected two of {','.join(CONTROLLERS)}, e.g. fd,sdf")
    return modes


def build_parser():
    parser = _Parser(prog="oscidamp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("design", help="design gains and report the SDF assumptions")
    p.add_argument("--config", required=True)
    p.add_argument("--controller", choices=CONTROLLERS)
    p.add_argument("--kd", type=float)

    p = sub.add_parser("simulate", help="simulate the configured scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--controller", choices=CONTROLLERS)
    p.add_argument("--kd", type=float)
    p.add_argument("--decimation", type=int)

    p = sub.add_parser("compare", help="compare two controllers on the configured scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--controllers", type=_controller_list, default=("fd", "sdf"))
    p.add_argument("--out", required=True)
    p.add_argument("--kd", type=float)

    p = sub.add_parser("verify", help="run the invariant self-checks")
    p.add_argument("--config", required=True)

    p = sub.add_parser("reproduce", help="run a canned experiment end to end")
    p.add_argument("--experiment", required=True, choices=sorted(EXPERIMENTS))
    p.add_argument("--out", required=True)
    return parser


def _format_gains(gains):
    lines = [f"mode: {gains.mode}"]
    if gains.kd is not None:
        lines.append(f"kd: {gains.kd:g}")
    for name in ("ks", "ns", "kn", "nn"):
        mat = getattr(gains, name)
        if mat is None:
            continue
        lines.append(f"{name}:")
        lines += ["  [" + ", ".join(f"{v: .10g}" for v in row) + "]" for row in mat]
    return "\n".join(lines)


def _design(args, out):
    cfg = load_config(args.config)
    mode = args.controller or cfg.controller.mode
    ss = assemble_state_space(cfg.system)
    reg = check_regularity(ss, cfg.system.network)
    if mode in ("sdf", "sdf_measured") and reg.a_singular:
        hint = f"; eps >= {reg.eps_hint:g} suffices" if reg.eps_hint is not None else ""
        print(f"error: assumption (i) violated: state matrix A is singular "
              f"(torque matrix singular){hint}", file=sys.stderr)
        return EXIT_NUMERICAL
    est = design(cfg, mode, args.kd)
    print(_format_gains(est.gains_), file=out)
    print(validate_assumptions(ss, est.gains_.ks).describe(), file=out)
    return EXIT_OK


def _simulate(args, out):
    cfg = load_config(args.config)
    traj, est = simulate(cfg, args.controller, args.kd)
    dest = Path(args.out)
    mode = args.controller or cfg.controller.mode
    dec = args.decimation or cfg.output.decimation
    emit_csv(traj, dest / f"{mode}.csv", dec, cfg.fingerprint())
    onset = onset_time(cfg.scenario.disturbance)
    metrics = {sid: vars(signal_metrics(traj, sid, onset)) for sid in signal_ids(traj.n_areas)}
    (dest / f"{mode}_metrics.json").write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n")
    for sid, m in metrics.items():
        flag = "" if m["settled"] else " (not settled)"
        print(f"{sid:8s} peak {m['peak_deviation']:.6g}  transient {m['transient_time']:.2f} s{flag}", file=out)
    return EXIT_OK


def _compare(args, out):
    cfg = load_config(args.config)
    table, trajs, est = run_comparison(cfg, args.controllers, args.kd)
    dest = Path(args.out)
    dest.mkdir(parents=True, exist_ok=True)
    ref = REFERENCE_TWO_AREA if cfg.system.n_areas == 2 else None
    text, csv_text = render_table(table, ref)
    (dest / "table.txt").write_text(text)
    (dest / "table.csv").write_text(csv_text)
    for mode, traj in trajs.items():
        emit_csv(traj, dest / f"{mode}.csv", cfg.output.decimation, cfg.fingerprint())
    print(text, end="", file=out)
    return EXIT_OK


def _verify(args, out):
    cfg = load_config(args.config)
    results = run_checks(cfg)
    for r in results:
        print(f"[{'PASS' if r.passed else 'FAIL'}] {r.name}: {r.detail}", file=out)
    return EXIT_OK if all(r.passed for r in results) else EXIT_VALIDATION


def _reproduce(args, out):
    table = reproduce(args.experiment, args.out)
    text, _ = render_table(table, REFERENCE_TWO_AREA if args.experiment == "a" else None)
    print(text, end="", file=out)
    return EXIT_OK


COMMANDS = {"design": _design, "simulate": _simulate, "compare": _compare,
            "verify": _verify, "reproduce": _reproduce}


def main(argv=None):
    out = sys.stdout
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args, out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
