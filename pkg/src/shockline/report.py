"""Experiment reports: verdicts, tables, plots and their files."""

import csv
import json
import math
import os
import re
from dataclasses import dataclass, field

import numpy as np


@dataclass
class ExperimentReport:
    """Outcome of one experiment.

    ``tables`` maps a name to a list of row dicts, ``plots`` maps a name to a
    plot description (title, axis labels, series).  ``verdicts`` maps check
    names to booleans; the report passes iff all of them do.
    """

    experiment: str
    config: dict
    verdicts: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    plots: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    runtime: float = 0.0
    paths: dict = field(default_factory=dict)

    @property
    def verdict(self):
        return bool(self.verdicts) and all(self.verdicts.values())

    def check(self, name, ok):
        self.verdicts[name] = bool(ok)
        return bool(ok)

    def add_table(self, name, rows):
        self.tables[name] = [{k: _plain(v) for k, v in r.items()} for r in rows]


def _plain(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    return v


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    v = _plain(v)
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _cell(v):
    # repr keeps every bit of a float, so reading back is exact
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_table(rows, path):
    cols = []
    for r in rows:
        cols += [c for c in r if c not in cols]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_cell(r[c]) if c in r else "" for c in cols])


_INT = re.compile(r"^-?\d+$")


def _parse(s):
    if _INT.match(s):
        return int(s)
    try:
        return float(s)
    except ValueError:
        return s


def read_table(path):
    """Rows as dicts; empty cells (columns a row lacks) are dropped."""
    with open(path, newline="") as fh:
        return [{k: _parse(v) for k, v in r.items() if v != ""} for r in csv.DictReader(fh)]


def _draw(spec, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "shockline"
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for s in spec.get("series", []):
        kind = s.get("kind", "line")
        if kind == "step":
            ax.step(s["x"], s["y"], where="post", label=s.get("label"))
        elif kind == "points":
            ax.plot(s["x"], s["y"], "o", ms=3, label=s.get("label"))
        else:
            ax.plot(s["x"], s["y"], label=s.get("label"))
    for h in spec.get("hlines", []):
        ax.axhline(h, color="grey", lw=0.8, ls="--")
    if spec.get("logy"):
        ax.set_yscale("log")
    ax.set_title(spec.get("title", ""))
    ax.set_xlabel(spec.get("xlabel", ""))
    ax.set_ylabel(spec.get("ylabel", ""))
    if any(s.get("label") for s in spec.get("series", [])):
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def emit_report(report, out_dir):
    """Write ``report.json``, one CSV per table and one SVG per plot."""
    os.makedirs(out_dir, exist_ok=True)
    tables, plots = {}, {}
    for name, rows in report.tables.items():
        p = os.path.join(out_dir, f"{name}.csv")
        write_table(rows, p)
        tables[name] = p
    for name, spec in report.plots.items():
        p = os.path.join(out_dir, f"{name}.svg")
        _draw(spec, p)
        plots[name] = p
    report.paths = dict(tables=tables, plots=plots)
    doc = dict(experiment=report.experiment, verdict=report.verdict,
               verdicts=report.verdicts, stats=report.stats, notes=report.notes,
               runtime_seconds=report.runtime, config=report.config,
               tables=tables, plots=plots)
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report.paths
