"""Command-line front end.

Subcommands::

    stokes-darcy convergence [--h-list 1/4,1/8,...] [--jobs N]
    stokes-darcy run [--n 8] [--tau 0.01]
    stokes-darcy ritz [--h-list ...] [--t 0]

Exit codes: 0 success, 1 configuration error, 2 solver failure, 3 I/O error.
Errors print one line ``stokes-darcy: error[<kind>]: <reason>`` to stderr.
"""
import argparse
import logging
import os
import sys

from . import io
from .config import ConfigError, parse_config
from .solver import SolverError
from .verification import (
    final_errors,
    run_convergence_study,
    run_ritz_study,
    solve_level,
)

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("stokes_darcy")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _common(p):
    p.add_argument("-c", "--config", help="key = value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override any config key")
    p.add_argument("--output-dir", help="output directory (default: $STOKES_DARCY_OUTPUT_DIR or .)")
    p.add_argument("--case", help="manufactured case (example51, zero)")
    p.add_argument("--gamma", help="interface penalty")
    p.add_argument("--T", dest="T", help="final time")
    p.add_argument("--no-wall-time", action="store_true", help="leave wall_s empty (byte-stable CSV)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = _Parser(prog="stokes-darcy", description="Decoupled Stokes-Darcy solver and convergence harness")
    sub = parser.add_subparsers(dest="mode", required=True, parser_class=_Parser)
    conv = sub.add_parser("convergence", help="transient convergence study over a halving h sequence")
    _common(conv)
    conv.add_argument("--h-list", help="comma separated, e.g. 1/4,1/8,1/16")
    conv.add_argument("--tau", help="fixed time step (default: h^2)")
    conv.add_argument("--jobs", help="parallel levels (0: all cores)")
    run = sub.add_parser("run", help="single transient solve with VTK output")
    _common(run)
    run.add_argument("--n", help="cells per unit length (h = 1/n)")
    run.add_argument("--tau", help="time step (default: h^2)")
    ritz = sub.add_parser("ritz", help="steady coupled projection errors over a halving h sequence")
    _common(ritz)
    ritz.add_argument("--h-list", help="comma separated, e.g. 1/4,1/8,1/16")
    ritz.add_argument("--t", help="projection time")
    return parser


def _overrides(args):
    out = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    flag_keys = {
        "output_dir": "output.dir",
        "case": "case",
        "gamma": "params.gamma",
        "T": "time.T",
        "h_list": "study.h_list",
        "tau": "time.tau",
        "jobs": "jobs",
        "n": "run.n",
        "t": "ritz.t",
    }
    for attr, key in flag_keys.items():
        val = getattr(args, attr, None)
        if val is not None:
            out[key] = val
    if args.no_wall_time:
        out["output.wall_time"] = "false"
    out["mode"] = args.mode
    return out


def _prepare_output(cfg):
    os.makedirs(cfg.output_dir, exist_ok=True)


def cmd_convergence(cfg):
    _prepare_output(cfg)
    levels = cfg.levels
    csv_path = cfg.output_path(cfg.csv_name)
    with io.ConvergenceCsv(csv_path, cfg.wall_time) as out:
        report = run_convergence_study(
            levels,
            params=cfg.params,
            T=cfg.T,
            jobs=cfg.jobs,
            domain=cfg.domain,
            on_row=out.add,
            tau=cfg.tau,
            case=cfg.case,
            rtol=cfg.rtol,
            degree=cfg.error_degree,
        )
        if not report.ok:
            out.fail(1.0 / levels[len(report.rows)], report.failure)
    _print_report(report)
    payload = {
        "mode": "convergence",
        "rows": [io.row_dict(r) for r in report.rows],
        "rates": {k: [float(x) for x in report.rates(k)] for k in ("err_uf", "err_up", "err_phi")},
        "failure": report.failure,
    }
    if not cfg.wall_time:
        for r in payload["rows"]:
            r["wall_s"] = None
    io.write_summary(cfg.output_path(cfg.summary_name), payload)
    if not report.ok:
        raise SolverError(report.failure)
    return EXIT_OK


def cmd_run(cfg):
    _prepare_output(cfg)
    mesh, spaces, case, state, tau = solve_level(
        cfg.n, cfg.params, cfg.T, cfg.tau, cfg.domain, cfg.case, cfg.rtol
    )
    row = final_errors(mesh, spaces, case, state, cfg.n, tau, degree=cfg.error_degree)
    io.write_vtk(cfg.output_path(cfg.vtk_name), mesh, spaces, state)
    summary = {"mode": "run", "case": cfg.case, "t": state.t, "steps": round(cfg.T / tau), "errors": io.row_dict(row)}
    summary["errors"]["wall_s"] = None
    io.write_summary(cfg.output_path(cfg.summary_name), summary)
    print(f"n={cfg.n} tau={tau:.6g} t={state.t:.6g}: err_uf={row.err_uf:.6e} err_up={row.err_up:.6e} err_phi={row.err_phi:.6e}")
    return EXIT_OK


def cmd_ritz(cfg):
    _prepare_output(cfg)
    report = run_ritz_study(cfg.levels, cfg.params, cfg.ritz_t, domain=cfg.domain, case=cfg.case, rtol=cfg.rtol, degree=cfg.error_degree)
    io.write_convergence_csv(cfg.output_path(cfg.csv_name), report, wall_time=cfg.wall_time)
    _print_report(report)
    io.write_summary(
        cfg.output_path(cfg.summary_name),
        {"mode": "ritz", "t": cfg.ritz_t, "rows": [io.row_dict(r) for r in report.rows]},
    )
    return EXIT_OK


def _print_report(report):
    print(f"{'h':>10} {'err_uf':>12} {'err_up':>12} {'err_phi':>12} {'jump':>12}")
    for r in report.rows:
        print(f"{r.h:10.6g} {r.err_uf:12.4e} {r.err_up:12.4e} {r.err_phi:12.4e} {r.jump:12.4e}")
    if len(report.rows) > 1:
        rates = [report.rates(k)[-1] for k in ("err_uf", "err_up", "err_phi")]
        print("finest-pair rates: uf %.3f  up %.3f  phi %.3f" % tuple(rates))


COMMANDS = {"convergence": cmd_convergence, "run": cmd_run, "ritz": cmd_ritz}


def _fail(kind, exc, code):
    msg = " ".join(str(exc).split()) or type(exc).__name__
    print(f"stokes-darcy: error[{kind}]: {msg}", file=sys.stderr)
    return code


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        cfg = parse_config(args.config, _overrides(args))
        return COMMANDS[cfg.mode](cfg)
    except ConfigError as exc:
        return _fail("config", exc, EXIT_CONFIG)
    except SolverError as exc:
        return _fail("solver", exc, EXIT_SOLVER)
    except OSError as exc:
        return _fail("io", exc, EXIT_IO)
    except ValueError as exc:
        return _fail("config", exc, EXIT_CONFIG)


if __name__ == "__main__":
    sys.exit(main())
