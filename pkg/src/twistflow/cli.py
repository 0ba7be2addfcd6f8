"""Command line entry point: run scenarios, list presets, validate configs.

Subcommands
-----------
run PATH|--preset NAME   execute a scenario, write report + CSV + figures
presets                  list the built-in scenario names
check PATH               validate a configuration file and echo the resolved form

Exit code is 0 iff every requested suite passed.  Verbosity is controlled by
the TWISTFLOW_LOG environment variable (DEBUG/INFO/WARNING/...).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from . import config as cf
from . import presets as pr
from .errors import ConfigError, TwistflowError
from .figures import render_suite_figures
from .report import emit_report, report_dict, write_suite_csv, write_trajectory_csv
from .suites import run_scenario

log = logging.getLogger("twistflow")


def _setup_logging() -> None:
    level = os.environ.get("TWISTFLOW_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="twistflow",
                                description="Reduced-flow scenario runner")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario from a config file or preset")
    run.add_argument("config", nargs="?", type=Path, default=None,
                     help="path to a JSON scenario config")
    run.add_argument("--preset", type=str, default=None,
                     help="name of a built-in scenario")
    run.add_argument("--out-dir", type=Path, default=Path("twistflow-out"))
    run.add_argument("--format", choices=["json", "csv", "human"], default="human",
                     help="what to print to stdout")
    run.add_argument("--seed", type=int, default=None,
                     help="override the config seed for randomized suites")
    run.add_argument("--tolerance-scale", type=float, default=None,
                     help="scale every suite tolerance by this factor")
    run.add_argument("--figures", dest="figures", action="store_true", default=True)
    run.add_argument("--no-figures", dest="figures", action="store_false",
                     help="skip PNG rendering")

    sub.add_parser("presets", help="list built-in scenarios")

    check = sub.add_parser("check", help="validate a config file")
    check.add_argument("config", type=Path)
    return p


def _load_config(args) -> cf.ScenarioConfig:
    if (args.config is None) == (args.preset is None):
        raise ConfigError("provide exactly one of: a config path, or --preset NAME")
    if args.preset is not None:
        cfg = pr.preset(args.preset)
    else:
        cfg = cf.load_file(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.tolerance_scale is not None:
        cfg = dataclasses.replace(cfg, tolerance_scale=args.tolerance_scale)
    return cfg


def _cmd_run(args) -> int:
    cfg = _load_config(args)
    report, shared = run_scenario(cfg)

    out_dir = args.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    for suite in report.suites:
        if suite.series is not None:
            path = out_dir / f"{suite.name}.csv"
            write_suite_csv(suite, path)
            report.artifacts[f"{suite.name}_csv"] = path.name
    if "main_traj" in shared:
        path = out_dir / "trajectory.csv"
        write_trajectory_csv(shared["main_traj"], path)
        report.artifacts["trajectory_csv"] = path.name
    if args.figures:
        for name, rel in render_suite_figures(report, out_dir).items():
            report.artifacts[f"{name}_png"] = rel
    report.artifacts["timing_json"] = "timing.json"

    (out_dir / "report.json").write_bytes(emit_report(report, "json"))
    with open(out_dir / "timing.json", "w", encoding="utf-8") as fh:
        json.dump({"timing": report.timing}, fh, indent=2, sort_keys=True)

    sys.stdout.buffer.write(emit_report(report, args.format))
    sys.stdout.flush()
    log.info("report written to %s", out_dir / "report.json")
    return 0 if report.passed else 1


def _cmd_presets() -> int:
    for name in pr.preset_names():
        cfg = pr.preset(name)
        print(f"{name:<22} n={cfg.grid.n_nodes:<4} lam={cfg.initial.holonomy:<5g} "
              f"t_end={cfg.flow.t_end:<6g} suites={','.join(cfg.suites)}")
    return 0


def _cmd_check(args) -> int:
    cfg = cf.load_file(args.config)
    print(cf.dumps(cfg), end="")
    print(f"ok: {args.config} is a valid scenario config", file=sys.stderr)
    return 0


def main(argv=None) -> int:
    _setup_logging()
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "presets":
            return _cmd_presets()
        if args.command == "check":
            return _cmd_check(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except TwistflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
