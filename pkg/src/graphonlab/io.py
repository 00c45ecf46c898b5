"""Artifact writing: atomic files, provenance-stamped CSV, manifests and plots."""
from __future__ import annotations

import csv
import io
import json
import os
import sys
import tempfile

import numpy as np

from . import __version__
from ._kernels import BACKEND
from .measures import from_dict

CSV_COLUMNS = ("quantity", "n", "mean", "stderr", "nref_delta", "seed")
FIT_COLUMNS = ("quantity", "slope", "stderr", "ci_low", "ci_high", "seed")


def fmt(x) -> str:
    """Round-trip text for a number: integers as is, floats with 17 significant digits."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return "%.17g" % float(x)


def atomic_write(path, data, mode: str = "w") -> str:
    """Write through a temporary file in the target directory, then rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, mode, **({} if "b" in mode else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def provenance_lines(subcommand: str, config_hash: str, seed) -> list:
    return [
        f"# graphonlab {__version__} {subcommand}",
        f"# config_hash={config_hash}",
        f"# seed={seed}",
        f"# backend={BACKEND}",
    ]


def csv_text(columns, rows, comments=()) -> str:
    buf = io.StringIO()
    for line in comments:
        buf.write(line + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    return buf.getvalue()


def read_csv_rows(path) -> list:
    """Data rows (as dicts) of a CSV written by :func:`csv_text`; comment lines skipped."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def report_csv(report, subcommand: str) -> str:
    return csv_text(CSV_COLUMNS, report.table(),
                    provenance_lines(subcommand, report.config_hash, report.seed))


def fits_csv(report, subcommand: str) -> str:
    rows = [(q, f.slope, f.stderr, f.ci[0], f.ci[1], report.seed) for q, f in report.fits.items()]
    return csv_text(FIT_COLUMNS, rows, provenance_lines(subcommand, report.config_hash, report.seed))


def write_json(path, doc) -> str:
    return atomic_write(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def read_measure(path):
    return from_dict(read_json(path))


def plot_report_svg(report, path, title: str = "") -> str | None:
    """Log-log plot of the estimates with the M_n guide curve.

    Returns the path, or None when matplotlib is not installed. Output is
    deterministic (fixed hash salt, no date metadata).
    """
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("warning: matplotlib not installed; skipping plot", file=sys.stderr)
        return None
    matplotlib.rcParams["svg.hashsalt"] = "graphonlab"
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    for q in report.quantities():
        rows = report.select(q)
        ns = np.array([r.n for r in rows], dtype=float)
        means = np.array([r.mean for r in rows])
        se = np.array([r.stderr for r in rows])
        if np.all(means > 0):
            ax.errorbar(ns, means, yerr=se, marker="o", capsize=3, label=q)
    if report.rate:
        ns = np.array(sorted(report.rate), dtype=float)
        guide = np.array([report.rate[int(n)] for n in ns])
        first = report.rows[0]
        if first.mean > 0:
            ax.plot(ns, guide * first.mean / report.rate.get(first.n, guide[0]), "k--", label="M_n (scaled)")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("estimate")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return atomic_write(path, buf.getvalue())
