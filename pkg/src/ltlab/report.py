"""CSV tables and byte-stable SVG plots for scans and ledgers."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

SVG_SALT = "ltlab"
SCAN_NOTE = ("Bracket-and-shape check: the unnamed constants of the lower-bound chain are "
             "configured, so only ordering and trend are meaningful, not the values of the "
             "optimal constant.")


def write_csv(path, rows) -> Path:
    rows = list(rows)
    path = Path(path)
    with open(path, "w", newline="") as fh:
        if not rows:
            return path
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    return path


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return matplotlib, plt


def _save(fig, path):
    matplotlib, plt = _pyplot()
    with matplotlib.rc_context({"svg.hashsalt": SVG_SALT, "svg.fonttype": "none"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return Path(path)


def plot_scan(rows, path, title: str = "lambda scan") -> Path:
    """Trial upper bound, assembled lower bound and the predicted curve."""
    lam = np.array([float(r["lambda"]) for r in rows])
    fig, ax = _pyplot()[1].subplots(figsize=(6, 4))
    ax.semilogx(lam, [float(r["trial_upper"]) for r in rows], "o-", label="trial upper")
    ax.semilogx(lam, [float(r["assembled_lower"]) for r in rows], "s-", label="assembled lower")
    ax.semilogx(lam, [float(r["gn_gap_prediction"]) for r in rows], "--",
                label="C_GN - C lambda^-k")
    ax.axhline(float(rows[0]["gn_reference"]), color="gray", lw=0.8, label="C_GN")
    ax.set_xlabel("lambda")
    ax.set_ylabel("constant")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.text(0.01, 0.01, "bracket-and-shape check", fontsize=7)
    fig.tight_layout()
    return _save(fig, path)


def plot_ledger(ledger: dict, path) -> Path:
    """Per-level gains, errors and interaction credits of one ledger."""
    levels = ledger["per_level"]
    n = [lv["n"] for lv in levels]
    keys = ("class0_uncertainty_gain", "class1_uncertainty_gain", "class0_error",
            "class1_error", "interaction_credit")
    fig, ax = _pyplot()[1].subplots(figsize=(6, 4))
    width = 0.15
    for i, k in enumerate(keys):
        ax.bar(np.array(n) + (i - 2) * width, [lv[k] for lv in levels], width, label=k)
    ax.set_xlabel("level n")
    ax.set_title(f"lambda={ledger['lam']:g}, delta={ledger['delta_used']:.4g}")
    ax.legend(fontsize=7)
    fig.tight_layout()
    return _save(fig, path)


def plot_series(x, ys: dict, path, xlabel: str, ylabel: str, logx: bool = False) -> Path:
    fig, ax = _pyplot()[1].subplots(figsize=(6, 4))
    for label, y in ys.items():
        (ax.semilogx if logx else ax.plot)(x, y, "o-", label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def build_report(run_dir) -> list[Path]:
    """Render every scan CSV and ledger JSON found in ``run_dir``."""
    run_dir = Path(run_dir)
    out = []
    lines = ["# ltlab report", ""]
    for p in sorted(run_dir.glob("*scan*.csv")):
        rows = read_csv(p)
        if not rows:
            continue
        out.append(plot_scan(rows, p.with_suffix(".svg")))
        ok = all(float(r["trial_upper"]) >= float(r["assembled_lower"]) for r in rows)
        lines += [f"## {p.name}", "", SCAN_NOTE, "",
                  f"- rows: {len(rows)}", f"- upper >= lower on every row: {ok}", ""]
    for p in sorted(run_dir.glob("*ledger*.json")):
        data = json.loads(p.read_text())
        if "per_level" not in data or not data["per_level"] or "lam" not in data:
            continue
        out.append(plot_ledger(data, p.with_suffix(".svg")))
        lines += [f"## {p.name}", "", f"- constants: {data['constants']}",
                  f"- delta_used: {data['delta_used']!r}",
                  f"- assembled_lower: {data['assembled_lower']!r}",
                  f"- conditions_hold: {data['conditions_hold']}", ""]
    md = run_dir / "report.md"
    md.write_text("\n".join(lines))
    out.append(md)
    return out
