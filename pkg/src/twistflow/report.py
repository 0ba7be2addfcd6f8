"""Run reports: structured suite outcomes and their serializations.

The canonical JSON serialization is deterministic (stable key order, no
wall-clock content); timing lives in a separate sidecar document so that
identical configurations produce byte-identical report files.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

REPORT_SCHEMA_VERSION = 1

FORMATS = ("json", "csv", "human")


@dataclass
class SuiteResult:
    """Outcome of one verification suite."""

    name: str
    passed: bool
    residuals: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    series_columns: list = field(default_factory=list)
    series: np.ndarray | None = None
    worst: dict | None = None
    notes: str = ""


@dataclass
class RunReport:
    """Everything a scenario run produced, minus the bulky trajectories."""

    config: dict
    suites: list
    artifacts: dict = field(default_factory=dict)
    steps: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    schema_version: int = REPORT_SCHEMA_VERSION

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.suites)


def _jsonable(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def report_dict(report: RunReport, include_timing: bool = False) -> dict:
    out = {
        "schema_version": report.schema_version,
        "config": _jsonable(report.config),
        "summary": {
            "passed": report.passed,
            "n_suites": len(report.suites),
            "n_failed": sum(0 if s.passed else 1 for s in report.suites),
        },
        "suites": [
            {
                "name": s.name,
                "passed": s.passed,
                "residuals": _jsonable(s.residuals),
                "checks": _jsonable(s.checks),
                "worst": _jsonable(s.worst),
                "notes": s.notes,
            }
            for s in report.suites
        ],
        "artifacts": _jsonable(report.artifacts),
        "steps": _jsonable(report.steps),
    }
    if include_timing:
        out["timing"] = _jsonable(report.timing)
    return out


def _emit_json(report: RunReport) -> bytes:
    text = json.dumps(report_dict(report), indent=2, sort_keys=True) + "\n"
    return text.encode("utf-8")


def _emit_csv(report: RunReport) -> bytes:
    buf = io.StringIO()
    with_series = [s for s in report.suites if s.series is not None]
    if len(with_series) == 1:
        # single-suite reports use the suite's own wide layout,
        # e.g. monotonicity: t, F, rhs_integral, residual
        s = with_series[0]
        buf.write(",".join(s.series_columns) + "\n")
        for row in s.series:
            buf.write(",".join(_fmt(x) for x in row) + "\n")
    else:
        buf.write("suite,t,diagnostic,value\n")
        for s in with_series:
            cols = s.series_columns
            for row in s.series:
                for name, value in zip(cols[1:], row[1:]):
                    buf.write(f"{s.name},{_fmt(row[0])},{name},{_fmt(value)}\n")
    return buf.getvalue().encode("utf-8")


def _fmt(x) -> str:
    return repr(float(x))


def _emit_human(report: RunReport) -> bytes:
    lines = []
    name_w = max([len(s.name) for s in report.suites], default=10)
    name_w = max(name_w, 10)
    header = f"{'suite':<{name_w}}  {'status':<6}  detail"
    lines.append(header)
    lines.append("-" * len(header))
    for s in report.suites:
        status = "pass" if s.passed else "FAIL"
        keys = sorted(s.residuals)
        detail = "  ".join(f"{k}={s.residuals[k]:.3e}" for k in keys[:3])
        lines.append(f"{s.name:<{name_w}}  {status:<6}  {detail}")
        if not s.passed and s.worst:
            w = s.worst
            loc = ", ".join(f"{k}={_short(v)}" for k, v in sorted(w.items()))
            lines.append(f"{'':<{name_w}}  {'':<6}  worst violation: {loc}")
        if s.notes:
            lines.append(f"{'':<{name_w}}  {'':<6}  note: {s.notes}")
    verdict = "ALL SUITES PASSED" if report.passed else "SUITE FAILURES PRESENT"
    lines.append("-" * len(header))
    lines.append(verdict)
    return ("\n".join(lines) + "\n").encode("utf-8")


def _short(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def emit_report(report: RunReport, format: str = "json") -> bytes:
    """Serialize a report; json is canonical and byte-stable per config."""
    if format == "json":
        return _emit_json(report)
    if format == "csv":
        return _emit_csv(report)
    if format == "human":
        return _emit_human(report)
    raise DomainError(f"unknown report format {format!r}; choose from {FORMATS}")


def write_suite_csv(suite: SuiteResult, path) -> None:
    if suite.series is None:
        return
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(suite.series_columns) + "\n")
        for row in suite.series:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def write_trajectory_csv(traj, path) -> None:
    """Wide layout: t, k_per[j], u[j], f[j] blocks for the declared n_nodes."""
    n = traj.spec.n_nodes
    cols = (["t"] + [f"k_per[{j}]" for j in range(n)]
            + [f"u[{j}]" for j in range(n)] + [f"f[{j}]" for j in range(n)])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for i in range(len(traj)):
            row = np.concatenate(([traj.times[i]], traj.kps[i], traj.us[i], traj.fs[i]))
            fh.write(",".join(_fmt(x) for x in row) + "\n")
