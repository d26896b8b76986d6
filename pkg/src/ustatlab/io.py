"""Artifact writers: CSV tables, report.json and dependency-free SVG line plots."""
from __future__ import annotations

import datetime as _dt
import json
import math
import os
import platform
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError
from .measures import is_infinite


def _fmt(v):
    return format(float(v), ".17g")


def write_csv(path, header, rows):
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def to_jsonable(obj):
    if is_infinite(obj):
        return "inf"
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if math.isnan(f):
            return None
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    return obj


def write_svg(path, series, title="", logy=False, width=640, height=400):
    """Line chart of {label: (x, y)}; non-positive values are dropped on a log axis."""
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"]
    pad = 50
    prepared = {}
    for label, (x, y) in series.items():
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        keep = np.isfinite(x) & np.isfinite(y) & ((y > 0) if logy else True)
        yy = np.log10(y[keep]) if logy else y[keep]
        if keep.sum() >= 2:
            prepared[label] = (x[keep], yy)
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>']
    if prepared:
        xs = np.concatenate([v[0] for v in prepared.values()])
        ys = np.concatenate([v[1] for v in prepared.values()])
        x0, x1 = xs.min(), xs.max() if xs.max() > xs.min() else xs.min() + 1
        y0, y1 = ys.min(), ys.max() if ys.max() > ys.min() else ys.min() + 1

        def sx(v):
            return pad + (v - x0) / (x1 - x0) * (width - 2 * pad)

        def sy(v):
            return height - pad - (v - y0) / (y1 - y0) * (height - 2 * pad)

        lines.append(f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" '
                     'fill="none" stroke="black"/>')
        ylab = "log10 " if logy else ""
        lines.append(f'<text x="{pad}" y="{height - 15}" font-size="11">x: [{x0:.3g}, {x1:.3g}]  '
                     f'{ylab}y: [{y0:.3g}, {y1:.3g}]</text>')
        for i, (label, (x, y)) in enumerate(prepared.items()):
            c = colors[i % len(colors)]
            pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y))
            lines.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{pts}"/>')
            lines.append(f'<text x="{width - pad - 150}" y="{pad + 15 + 15 * i}" font-size="11" '
                         f'fill="{c}">{label}</text>')
    lines.append("</svg>")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


class RunWriter:
    """Owns an output directory and the list of artifacts written into it."""

    def __init__(self, out_dir, force=False, fmt="csv"):
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        if (self.out / "report.json").exists() and not force:
            raise ConfigError(f"{self.out / 'report.json'} exists; pass --force to overwrite")
        if fmt not in ("csv", "json"):
            raise ConfigError(f"unknown format {fmt!r}")
        self.fmt = fmt
        self.artifacts = []
        self.started = _dt.datetime.now(_dt.timezone.utc)

    def table(self, stem, header, rows):
        if self.fmt == "csv":
            name = f"{stem}.csv"
            write_csv(self.out / name, header, rows)
        else:
            name = f"{stem}.json"
            rows = np.atleast_2d(np.asarray(rows, dtype=float))
            doc = {"columns": list(header), "rows": to_jsonable(rows)}
            (self.out / name).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
        self.artifacts.append(name)
        return name

    def svg(self, stem, series, title="", logy=False):
        name = f"{stem}.svg"
        write_svg(self.out / name, series, title, logy)
        self.artifacts.append(name)
        return name

    def report(self, payload):
        finished = _dt.datetime.now(_dt.timezone.utc)
        doc = {
            "meta": {
                "started": self.started.isoformat(),
                "finished": finished.isoformat(),
                "wall_seconds": (finished - self.started).total_seconds(),
                "host_python": platform.python_version(),
                "pid": os.getpid(),
            },
            "software": {"package": "ustatlab", "version": __version__,
                         "numpy": np.__version__},
            **payload,
            "artifacts": sorted(set(self.artifacts + ["report.json"])),
        }
        text = json.dumps(to_jsonable(doc), indent=2, sort_keys=True) + "\n"
        (self.out / "report.json").write_text(text, encoding="utf-8")
        return doc
