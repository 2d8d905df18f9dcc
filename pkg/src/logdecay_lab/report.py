"""Artifact persistence: JSON/CSV/SVG written atomically with deterministic bytes.

Floats are written with ``%.17g`` (CSV and JSON alike); non-finite floats
become JSON ``null`` and CSV ``nan``/``inf``.  Nothing time-dependent is
written to an artifact, so identical inputs give identical bytes.
"""
from __future__ import annotations

import csv
import hashlib
import io
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ArtifactNotFoundError

__all__ = [
    "RunReport",
    "PLOT_KINDS",
    "atomic_write",
    "dumps_json",
    "write_json",
    "write_csv",
    "read_csv",
    "content_hash",
    "render_svg",
    "emit_plotdata",
    "write_triplets",
]

REPORT_NAME = "report.json"

# plot kind -> (artifact key, x column, y column, style, x label, y label)
PLOT_KINDS = {
    "spectrum-scatter": ("spectrum_csv", "re", "im", "scatter", "Re lambda", "Im lambda"),
    "resolvent-curve": ("resolvent_csv", "tau", "norm", "line", "tau", "resolvent norm"),
    "decay-curve": ("evolve_csv", "t", "h_norm", "line", "t", "h_norm"),
    "gap-field": ("gap_csv", "s", "relative_gap", "scatter", "s", "gap / scale"),
}


def atomic_write(path, data):
    """Write ``data`` (str or bytes) to a temporary file and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _fmt(x):
    return "%.17g" % x


def _json(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or obj is True or obj is False:
        return {None: "null", True: "true", False: "false"}[obj]
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt(float(obj)) if math.isfinite(obj) else "null"
    if isinstance(obj, (complex, np.complexfloating)):
        return _json({"re": obj.real, "im": obj.imag}, indent, level)
    if isinstance(obj, (str, Path)):
        s = str(obj)
        out = ['"']
        for ch in s:
            if ch in '"\\':
                out.append("\\" + ch)
            elif ord(ch) < 0x20:
                out.append("\\u%04x" % ord(ch))
            else:
                out.append(ch)
        return "".join(out) + '"'
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_json(str(k), indent, level + 1)}: {_json(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        return "[\n" + ",\n".join(pad + _json(v, indent, level + 1) for v in seq) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_json(obj, indent=2):
    """JSON text with 17-significant-digit floats and a trailing newline."""
    return _json(obj, indent, 0) + "\n"


def write_json(path, obj):
    return atomic_write(path, dumps_json(obj))


def write_csv(path, columns, rows):
    """Write rows (sequences matching ``columns``); floats as ``%.17g``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return atomic_write(path, buf.getvalue())


def read_csv(path):
    path = Path(path)
    if not path.is_file():
        raise ArtifactNotFoundError(f"artifact not found: {path}")
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def content_hash(config_echo, files=()):
    """Git blob hash (sha1 of ``blob <len>\\0<data>``) of the canonical inputs."""
    data = dumps_json(config_echo).encode()
    for f in files:
        data += b"\0" + Path(f).read_bytes()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _ticks(lo, hi, n=5):
    if hi <= lo:
        lo, hi = lo - 0.5, hi + 0.5
    return lo, hi, [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def render_svg(x, y, style="line", xlabel="x", ylabel="y", title=""):
    """Minimal SVG plot; coordinates rounded to 0.01 px so bytes are reproducible.

    ``style="line"`` connects points only when there are at least two.
    """
    W, H, L, R, T, B = 640, 400, 80, 20, 30, 50
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = np.isfinite(x) & np.isfinite(y)
    x, y = x[keep], y[keep]
    x0, x1, xt = _ticks(float(x.min()) if x.size else 0.0, float(x.max()) if x.size else 1.0)
    y0, y1, yt = _ticks(float(y.min()) if y.size else 0.0, float(y.max()) if y.size else 1.0)

    def px(v):
        return L + (v - x0) / (x1 - x0) * (W - L - R)

    def py(v):
        return H - B - (v - y0) / (y1 - y0) * (H - T - B)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2:.2f}" y="18" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{L}" y1="{H - B}" x2="{W - R}" y2="{H - B}" stroke="black"/>',
        f'<line x1="{L}" y1="{T}" x2="{L}" y2="{H - B}" stroke="black"/>',
    ]
    for v in xt:
        out.append(f'<line x1="{px(v):.2f}" y1="{H - B}" x2="{px(v):.2f}" y2="{H - B + 5}" stroke="black"/>')
        out.append(f'<text x="{px(v):.2f}" y="{H - B + 18}" text-anchor="middle" font-size="11">{v:.4g}</text>')
    for v in yt:
        out.append(f'<line x1="{L - 5}" y1="{py(v):.2f}" x2="{L}" y2="{py(v):.2f}" stroke="black"/>')
        out.append(f'<text x="{L - 8}" y="{py(v) + 4:.2f}" text-anchor="end" font-size="11">{v:.4g}</text>')
    out.append(f'<text x="{(L + W - R) / 2:.2f}" y="{H - 10}" text-anchor="middle" font-size="12">{xlabel}</text>')
    out.append(
        f'<text x="16" y="{(T + H - B) / 2:.2f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {(T + H - B) / 2:.2f})">{ylabel}</text>'
    )
    if style == "line" and x.size >= 2:
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
        out.append(f'<polyline points="{pts}" fill="none" stroke="steelblue" stroke-width="1.5"/>')
    else:
        for a, b in zip(x, y):
            out.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="2.5" fill="steelblue"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


@dataclass
class RunReport:
    """Outcome of one CLI run.

    ``wall_time`` is kept in memory only; :meth:`to_dict` (what goes to
    ``report.json``) leaves it out so that artifacts stay byte-identical.
    Artifact paths are relative to ``out_dir``.
    """

    task: str
    config: dict
    input_hash: str
    summary: dict
    checks: dict
    out_dir: Path
    artifacts: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def passed(self):
        return all(self.checks.values())

    def to_dict(self):
        return {
            "task": self.task,
            "input_hash": self.input_hash,
            "passed": self.passed,
            "checks": self.checks,
            "summary": self.summary,
            "artifacts": self.artifacts,
            "notes": self.notes,
            "config": self.config,
        }

    def artifact_path(self, key):
        if key not in self.artifacts:
            raise ArtifactNotFoundError(f"run has no '{key}' artifact")
        p = Path(self.out_dir) / self.artifacts[key]
        if not p.is_file():
            raise ArtifactNotFoundError(f"artifact not found: {p}")
        return p

    def save(self):
        self.artifacts["report"] = REPORT_NAME
        return write_json(Path(self.out_dir) / REPORT_NAME, self.to_dict())


def emit_plotdata(report, kind, path=None):
    """Render the CSV artifact behind ``kind`` to an SVG next to it.

    Raises
    ------
    ArtifactNotFoundError
        When the run produced no artifact for ``kind``.
    """
    if kind not in PLOT_KINDS:
        raise ValueError(f"unknown plot kind {kind!r}; choose from {', '.join(PLOT_KINDS)}")
    key, xc, yc, style, xl, yl = PLOT_KINDS[kind]
    src = report.artifact_path(key)
    rows = read_csv(src)
    x = [float(r[xc]) for r in rows]
    y = [float(r[yc]) for r in rows]
    svg = render_svg(x, y, style, xl, yl, title=kind)
    path = Path(path) if path is not None else src.with_name(f"{kind}.svg")
    atomic_write(path, svg)
    report.artifacts[kind.replace("-", "_") + "_svg"] = os.path.relpath(path, report.out_dir)
    return path


def write_triplets(path, matrix):
    """Sparse matrix as text: a ``rows cols nnz`` header, then ``i j value`` lines (0-based)."""
    import scipy.sparse as sps

    m = sps.coo_matrix(matrix)
    order = np.lexsort((m.col, m.row))
    lines = [f"{m.shape[0]} {m.shape[1]} {m.nnz}"]
    lines += [f"{int(m.row[k])} {int(m.col[k])} {_fmt(float(m.data[k]))}" for k in order]
    return atomic_write(path, "\n".join(lines) + "\n")
