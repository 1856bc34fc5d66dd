"""File formats: p-values, groupings, edge lists, weights, run records, plots.

All files use 1-based indices.  Tabular inputs are CSV with an optional
header row; see the README for each schema.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import InvalidInputError, ParseError
from .procedures import MethodConfig, RejectionResult, WeightVector, bh, sabha, storey_bh
from .structures import Graph, Grouping

PVALUE_HEADER = ("index", "pvalue")
STAT_HEADER = ("index", "statistic")
WEIGHT_HEADER = ("index", "q")
GROUP_HEADER = ("index", "group")
EDGE_HEADERS = {("i", "j"), ("source", "target")}


def _rows(path):
    """Yield ``(line_number, fields)`` for non-blank lines."""
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise ParseError(f"cannot open file: {exc.strerror}", path) from exc
    with fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            fields = [f.strip() for f in row]
            if not fields or all(f == "" for f in fields):
                continue
            yield lineno, fields


def _is_number(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def _number(s, path, lineno, what):
    try:
        v = float(s)
    except ValueError:
        raise ParseError(f"{what} {s!r} is not a number", path, lineno) from None
    if not math.isfinite(v):
        raise ParseError(f"{what} {s!r} is not finite", path, lineno)
    return v


def _integer(s, path, lineno, what):
    try:
        return int(s)
    except ValueError:
        raise ParseError(f"{what} {s!r} is not an integer", path, lineno) from None


def _read_indexed(path, header, what):
    """Values from ``index,<what>`` (with header) or a single headerless column."""
    rows = list(_rows(path))
    if not rows:
        raise ParseError("file is empty", path)
    first_line, first = rows[0]
    if not _is_number(first[0]):
        if tuple(f.lower() for f in first) != header:
            raise ParseError(f"expected header {','.join(header)}, got {','.join(first)}", path, first_line)
        out = []
        for lineno, fields in rows[1:]:
            if len(fields) != 2:
                raise ParseError(f"expected 2 fields, got {len(fields)}", path, lineno)
            idx = _integer(fields[0], path, lineno, "index")
            if idx != len(out) + 1:
                raise ParseError(f"index {idx} out of sequence (expected {len(out) + 1})", path, lineno)
            out.append((lineno, _number(fields[1], path, lineno, what)))
    else:
        out = []
        for lineno, fields in rows:
            if len(fields) != 1:
                raise ParseError(f"expected a single column, got {len(fields)} fields", path, lineno)
            out.append((lineno, _number(fields[0], path, lineno, what)))
    if not out:
        raise ParseError("no data rows", path)
    return out


def read_pvalues(path):
    """P-values from ``index,pvalue`` CSV or a single headerless column."""
    rows = _read_indexed(path, PVALUE_HEADER, "p-value")
    for lineno, v in rows:
        if not 0.0 <= v <= 1.0:
            raise ParseError(f"p-value {v!r} outside [0, 1]", path, lineno)
    return np.array([v for _, v in rows])


def read_statistics(path):
    """Test statistics from ``index,statistic`` CSV or a single headerless column."""
    return np.array([v for _, v in _read_indexed(path, STAT_HEADER, "statistic")])


def read_weights(path):
    rows = _read_indexed(path, WEIGHT_HEADER, "weight")
    for lineno, v in rows:
        if not 0.0 < v <= 1.0:
            raise ParseError(f"weight {v!r} outside (0, 1]", path, lineno)
    return np.array([v for _, v in rows])


def read_grouping(path, n=None):
    """Grouping from ``index,group`` rows; every index ``1..n`` must appear once."""
    labels = {}
    for lineno, fields in _rows(path):
        if not _is_number(fields[0]):
            if tuple(f.lower() for f in fields) != GROUP_HEADER:
                raise ParseError(f"expected header index,group, got {','.join(fields)}", path, lineno)
            continue
        if len(fields) != 2:
            raise ParseError(f"expected 2 fields, got {len(fields)}", path, lineno)
        idx = _integer(fields[0], path, lineno, "index")
        if idx < 1:
            raise ParseError(f"index {idx} must be >= 1", path, lineno)
        if idx in labels:
            raise ParseError(f"index {idx} labelled twice", path, lineno)
        labels[idx] = _integer(fields[1], path, lineno, "group")
    if not labels:
        raise ParseError("no data rows", path)
    n = max(labels) if n is None else n
    missing = [i for i in range(1, n + 1) if i not in labels]
    if missing:
        raise InvalidInputError(f"{path}: index {missing[0]} has no group label ({len(missing)} unlabelled)")
    extra = [i for i in labels if i > n]
    if extra:
        raise InvalidInputError(f"{path}: index {extra[0]} exceeds n={n}")
    return Grouping(np.array([labels[i] for i in range(1, n + 1)], dtype=np.int64))


def read_edges(path, n=None):
    """Undirected graph from ``i,j`` rows (1-based); must be connected."""
    edges = []
    for lineno, fields in _rows(path):
        if not _is_number(fields[0]):
            if tuple(f.lower() for f in fields) not in EDGE_HEADERS:
                raise ParseError(f"unrecognised header {','.join(fields)}", path, lineno)
            continue
        if len(fields) != 2:
            raise ParseError(f"expected 2 fields, got {len(fields)}", path, lineno)
        i = _integer(fields[0], path, lineno, "node")
        j = _integer(fields[1], path, lineno, "node")
        if i < 1 or j < 1:
            raise ParseError("node indices must be >= 1", path, lineno)
        edges.append((i - 1, j - 1))
    if n is None:
        if not edges:
            raise ParseError("no edges and no node count given", path)
        n = max(max(e) for e in edges) + 1
    try:
        return Graph(n, np.array(edges, dtype=np.int64).reshape(-1, 2))
    except InvalidInputError as exc:
        raise InvalidInputError(f"{path}: {exc}") from None


def _write_indexed(path, header, values):
    lines = [",".join(header)]
    lines += [f"{i},{v!r}" for i, v in enumerate(np.asarray(values, dtype=float).tolist(), start=1)]
    Path(path).write_text("\n".join(lines) + "\n")


def write_weights(path, q):
    _write_indexed(path, WEIGHT_HEADER, q.q if isinstance(q, WeightVector) else q)


def write_pvalues(path, p):
    _write_indexed(path, PVALUE_HEADER, p)


def rejections_csv(result, p):
    """``index,pvalue,threshold`` for each rejected hypothesis (1-based)."""
    lines = ["index,pvalue,threshold"]
    for i in np.asarray(result.rejected).tolist():
        lines.append(f"{i + 1},{float(p[i])!r},{float(result.thresholds[i])!r}")
    return "\n".join(lines) + "\n"


def file_digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunRecord:
    """Everything needed to replay an ``adjust`` run.

    ``config`` holds method, alpha, tau, epsilon, m, structure, seed and input
    digests; ``elapsed_s`` is informational and excluded from replay.
    """

    config: dict
    k_hat: int
    rejected: list
    weights: Optional[list]
    method_name: str
    diagnostics: dict = field(default_factory=dict)
    elapsed_s: float = 0.0

    @classmethod
    def build(cls, config, result, weights=None, elapsed_s=0.0):
        q = None
        diag = {}
        if weights is not None:
            q = weights.q.tolist()
            diag = {k: _jsonable(v) for k, v in weights.diagnostics.items()}
        return cls(dict(config), int(result.k_hat), [int(i) + 1 for i in result.rejected],
                   q, result.method_name, diag, float(elapsed_s))

    def to_json(self):
        return json.dumps({
            "config": self.config,
            "method_name": self.method_name,
            "k_hat": self.k_hat,
            "rejected": self.rejected,
            "weights": self.weights,
            "diagnostics": self.diagnostics,
            "elapsed_s": self.elapsed_s,
        }, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(d["config"], d["k_hat"], d["rejected"], d["weights"], d["method_name"],
                   d.get("diagnostics", {}), d.get("elapsed_s", 0.0))


def replay(record, p):
    """Re-run the rejection step of ``record`` on ``p`` using the stored weights."""
    cfg = record.config
    p = np.asarray(p, dtype=float)
    method = cfg["method"]
    if method == "bh":
        return bh(p, cfg["alpha"])
    mc = MethodConfig(cfg["alpha"], cfg["tau"])
    if method == "storey":
        return storey_bh(p, mc)
    if record.weights is None:
        raise InvalidInputError("record has no weights to replay")
    return sabha(p, mc, np.asarray(record.weights), record.method_name)


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    return v


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


def _fmt(x):
    return f"{x:.2f}"


def line_plot_svg(series, title, xlabel, ylabel, ylim=(0.0, 1.0), hline=None, width=480, height=320):
    """Self-contained SVG line chart.

    ``series`` maps a label to ``(xs, ys)``.  Output depends only on the
    arguments (fixed formatting, insertion-ordered series).
    """
    left, right, top, bottom = 56, 120, 32, 44
    pw, ph = width - left - right, height - top - bottom
    xs_all = [x for xs, _ in series.values() for x in xs]
    if not xs_all:
        raise InvalidInputError("nothing to plot")
    x0, x1 = min(xs_all), max(xs_all)
    if x1 == x0:
        x1 = x0 + 1.0
    y0, y1 = ylim

    def sx(x):
        return left + (x - x0) / (x1 - x0) * pw

    def sy(y):
        y = min(max(y, y0), y1)
        return top + (1.0 - (y - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{_fmt(left + pw / 2)}" y="18" text-anchor="middle" font-size="13">{_esc(title)}</text>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
    ]
    for k in range(6):
        yv = y0 + (y1 - y0) * k / 5
        out.append(f'<line x1="{left - 4}" y1="{_fmt(sy(yv))}" x2="{left}" y2="{_fmt(sy(yv))}" stroke="#444"/>')
        out.append(f'<text x="{left - 6}" y="{_fmt(sy(yv) + 4)}" text-anchor="end">{yv:.2f}</text>')
    for xv in sorted(set(xs_all)):
        out.append(f'<line x1="{_fmt(sx(xv))}" y1="{top + ph}" x2="{_fmt(sx(xv))}" y2="{top + ph + 4}" stroke="#444"/>')
        out.append(f'<text x="{_fmt(sx(xv))}" y="{top + ph + 16}" text-anchor="middle">{xv:g}</text>')
    out.append(f'<text x="{_fmt(left + pw / 2)}" y="{height - 8}" text-anchor="middle">{_esc(xlabel)}</text>')
    out.append(f'<text x="14" y="{_fmt(top + ph / 2)}" text-anchor="middle" '
               f'transform="rotate(-90 14 {_fmt(top + ph / 2)})">{_esc(ylabel)}</text>')
    if hline is not None:
        out.append(f'<line x1="{left}" y1="{_fmt(sy(hline))}" x2="{left + pw}" y2="{_fmt(sy(hline))}" '
                   f'stroke="#888" stroke-dasharray="4 3"/>')
    for k, (label, (xs, ys)) in enumerate(series.items()):
        colour = _PALETTE[k % len(_PALETTE)]
        pts = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in zip(xs, ys) if math.isfinite(y))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{colour}" stroke-width="1.5"/>')
        ly = top + 12 + 16 * k
        out.append(f'<line x1="{left + pw + 10}" y1="{ly}" x2="{left + pw + 28}" y2="{ly}" '
                   f'stroke="{colour}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 32}" y="{ly + 4}">{_esc(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s):
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def summary_svgs(table, alpha=None):
    """``(power_svg, fdp_svg)`` for a simulation summary table."""
    power, fdp = {}, {}
    for name in table.methods():
        mus = table.mu_sigs()
        cells = [table.cell(name, mu) for mu in mus]
        power[name] = (mus, [c.mean_power for c in cells])
        fdp[name] = (mus, [c.mean_fdp for c in cells])
    fmax = max([y for _, ys in fdp.values() for y in ys if math.isfinite(y)] + [alpha or 0.0, 0.05])
    return (
        line_plot_svg(power, "Mean power", "signal strength", "power"),
        line_plot_svg(fdp, "Mean FDP", "signal strength", "FDP",
                      ylim=(0.0, math.ceil(fmax * 20) / 20), hline=alpha),
    )
