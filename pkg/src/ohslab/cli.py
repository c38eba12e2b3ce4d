"""Experiment runner: simulate single runs, sweep cutoffs, check run artifacts.

Subcommands
-----------
``simulate <config.json>``
    Integrate one run; writes moments.csv, final_state.json and manifest.json
    into the output directory.
``sweep <config.json>``
    Cutoff-scaling experiment from the config's "sweep" section; writes
    sweep.csv, sweep.json and one artifact subdirectory per cutoff.
``check <run-dir-or-config.json>``
    Replay a run (from its manifest or a fresh config) and run the
    verification suite; writes check_report.json.

Exit codes: 0 ok, 1 check failure, 2 invalid input, 3 numerical failure.
The manifest records the fully resolved config, so any run can be reproduced
bit for bit from its artifacts alone.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import checks as checks_mod
from . import gelation, runio, solver
from .config import SimConfig, load_config
from .errors import InvalidInputError, NumericalFailureError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILURE = 1
EXIT_INVALID_INPUT = 2
EXIT_NUMERICAL_FAILURE = 3


def _out_dir(args, default):
    out = Path(args.out) if args.out else Path(default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_run_artifacts(out, result):
    runio.write_moments_csv(out / "moments.csv", result.series)
    runio.write_final_state_json(out / "final_state.json", result.final_state)
    runio.write_manifest(
        out / "manifest.json",
        result.config,
        status="failed" if result.failed else "ok",
        error=result.error,
        extra={
            "outputs": ["moments.csv", "final_state.json"],
            "grid_edges": [float(e) for e in result.final_state.grid.edges],
        },
    )


def cmd_simulate(args):
    cfg = load_config(args.config)
    out = _out_dir(args, Path(args.config).with_suffix(""))
    result = solver.run(cfg)
    _write_run_artifacts(out, result)
    if result.failed:
        logger.error("run failed: %s (partial outputs in %s)", result.error, out)
        return EXIT_NUMERICAL_FAILURE
    logger.info("run complete: %d records -> %s", len(result.series.records), out)
    return EXIT_OK


def cmd_sweep(args):
    cfg = load_config(args.config)
    if cfg.sweep is None or not cfg.sweep.cutoffs:
        raise InvalidInputError("sweep command needs a 'sweep' section with cutoffs")
    out = _out_dir(args, Path(args.config).with_suffix(""))
    report, artifacts = gelation.cutoff_sweep(
        cfg,
        cfg.sweep.cutoffs,
        epsilon=cfg.sweep.epsilon,
        resolution=cfg.sweep.resolution,
        workers=args.workers,
    )
    with open(out / "sweep.csv", "w", encoding="utf-8") as fh:
        fh.write("R,N,t_loss,gel_fraction_final\n")
        for row in report.rows:
            t_loss = "" if row.t_loss is None else "%.17g" % row.t_loss
            gel = "" if row.gel_fraction_final is None else "%.17g" % row.gel_fraction_final
            fh.write("%.17g,%d,%s,%s\n" % (row.R, row.N, t_loss, gel))
    runio.write_json(out / "sweep.json", report.to_dict())
    resolved = cfg.resolved()
    for row, (series, final_state) in zip(report.rows, artifacts):
        row_dir = out / ("R%g" % row.R)
        row_dir.mkdir(exist_ok=True)
        row_cfg = replace(resolved, grid=replace(resolved.grid, R=row.R, N=row.N), sweep=None)
        extra = None
        if series is not None:
            runio.write_moments_csv(row_dir / "moments.csv", series)
            runio.write_final_state_json(row_dir / "final_state.json", final_state)
            extra = {"grid_edges": [float(e) for e in final_state.grid.edges]}
        runio.write_manifest(
            row_dir / "manifest.json", row_cfg,
            status="failed" if row.failed else "ok", error=row.error,
            extra=extra,
        )
    n_ok = sum(not row.failed for row in report.rows)
    logger.info("sweep complete: %d/%d rows ok -> %s", n_ok, len(report.rows), out)
    return EXIT_OK if n_ok else EXIT_NUMERICAL_FAILURE


def cmd_check(args):
    target = Path(args.target)
    stored = None
    if target.is_dir():
        manifest = runio.read_manifest(target / "manifest.json")
        if "config" not in manifest:
            raise InvalidInputError("manifest in %s has no config" % target)
        cfg = SimConfig.from_dict(manifest["config"])
        csv_path = target / "moments.csv"
        if csv_path.exists():
            stored = runio.read_moments_csv(csv_path)
        out = Path(args.out) if args.out else target
        out.mkdir(parents=True, exist_ok=True)
    else:
        cfg = load_config(target)
        out = _out_dir(args, target.with_suffix(""))
    result = solver.run(cfg, capture_states=True)
    if result.failed:
        logger.error("replay failed: %s", result.error)
        runio.write_json(out / "check_report.json", {
            "passed": False, "replay_failed": True, "error": result.error,
        })
        return EXIT_NUMERICAL_FAILURE
    report = checks_mod.run_checks(result, stored=stored, settings=cfg.check)
    runio.write_json(out / "check_report.json", report.to_dict())
    for check in report.checks:
        logger.info("check %-24s %s", check.name, check.status.upper())
    if not report.passed:
        failing = [c.name for c in report.checks if c.status == "fail"]
        logger.error("checks failed: %s", ", ".join(failing))
        return EXIT_CHECK_FAILURE
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ohslab",
        description="Truncated-domain coagulation solver and diagnostics runner.",
    )
    parser.add_argument("--quiet", action="store_true", help="suppress progress logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="integrate one run from a JSON config")
    p_sim.add_argument("config")
    p_sim.add_argument("--out", help="output directory (default: config stem)")
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="run the cutoff-scaling experiment")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--out", help="output directory (default: config stem)")
    p_sweep.add_argument("--workers", type=int, default=None,
                         help="concurrent row processes (default: cpu count)")
    p_sweep.set_defaults(func=cmd_sweep)

    p_check = sub.add_parser("check", help="verify a run directory or config")
    p_check.add_argument("target", help="run directory with manifest.json, or a config")
    p_check.add_argument("--out", help="report directory (default: the run directory)")
    p_check.set_defaults(func=cmd_check)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except InvalidInputError as exc:
        logger.error("invalid input: %s", exc)
        return EXIT_INVALID_INPUT
    except NumericalFailureError as exc:
        logger.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL_FAILURE


if __name__ == "__main__":
    sys.exit(main())
