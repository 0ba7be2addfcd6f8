"""Render suite time series to PNG files next to the delimited output."""

from __future__ import annotations

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

log = logging.getLogger("twistflow")

_LOG_SCALE_COLUMNS = {"residual", "E", "S", "H", "I"}


def render_suite_figures(report, out_dir: Path) -> dict:
    """One PNG per suite with a series; returns {suite name: relative path}."""
    fig_dir = Path(out_dir) / "figures"
    fig_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    for suite in report.suites:
        if suite.series is None or len(suite.series) == 0:
            continue
        cols = suite.series_columns
        t = suite.series[:, 0]
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        logy = all(c in _LOG_SCALE_COLUMNS for c in cols[1:])
        for j, name in enumerate(cols[1:], start=1):
            vals = suite.series[:, j]
            if logy:
                finite = vals > 0
                ax.semilogy(t[finite], vals[finite], label=name)
            else:
                ax.plot(t, vals, label=name)
        ax.set_xlabel("t")
        ax.set_title(f"{suite.name} ({'pass' if suite.passed else 'FAIL'})")
        ax.legend(loc="best", fontsize=8)
        ax.grid(True, alpha=0.3)
        path = fig_dir / f"{suite.name}.png"
        fig.tight_layout()
        fig.savefig(path, dpi=110)
        plt.close(fig)
        written[suite.name] = str(path.relative_to(out_dir))
        log.debug("wrote figure %s", path)
    return written
