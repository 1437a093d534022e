"""Panel and report file formats.

Panel files are plain CSV with header ``omega,t,y``: one row per
observation, individuals numbered 1..N, times 0..T, rows sorted by
(omega, t), every cell of the grid present exactly once.  The optional
truth sidecar (``omega,sigma2,alpha1..alphap``) carries the hidden
per-individual draws of a simulated panel.  Floats are written with 17
significant digits so doubles round-trip exactly.

Reports are JSON with a schema_version field; all writes are atomic
(temp file in the same directory, then rename).
"""

import csv
import json
import os

import numpy as np

from .exceptions import DataFormatError, RcarError
from .simulate import Panel

__all__ = [
    "PANEL_SCHEMA_VERSION",
    "REPORT_SCHEMA_VERSION",
    "write_panel",
    "read_panel",
    "write_report",
    "read_report",
    "format_float",
    "to_plain",
]

PANEL_SCHEMA_VERSION = 1
REPORT_SCHEMA_VERSION = 1

PANEL_HEADER = ["omega", "t", "y"]


def format_float(x):
    """17 significant digits: enough to reproduce any double exactly."""
    return format(float(x), ".17g")


def to_plain(obj):
    """Convert nested numpy-bearing structures to JSON-friendly builtins."""
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def _atomic_write_text(path, text):
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_panel(panel, path, truth_path=None):
    """Write a panel (and optionally its truth sidecar) as CSV."""
    lines = [",".join(PANEL_HEADER)]
    y = panel.y
    n, width = y.shape
    for w in range(n):
        row = y[w]
        for t in range(width):
            lines.append(f"{w + 1},{t},{format_float(row[t])}")
    _atomic_write_text(path, "\n".join(lines) + "\n")
    if truth_path is not None:
        write_truth(panel, truth_path)


def write_truth(panel, path):
    if panel.truth_coeffs is None or panel.truth_sigma2 is None:
        raise DataFormatError(
            "panel carries no truth record; simulate with keep_truth enabled"
        )
    p = panel.order
    header = ["omega", "sigma2"] + [f"alpha{k}" for k in range(1, p + 1)]
    lines = [",".join(header)]
    for w in range(panel.n_individuals):
        cells = [str(w + 1), format_float(panel.truth_sigma2[w])]
        cells.extend(format_float(a) for a in panel.truth_coeffs[w])
        lines.append(",".join(cells))
    _atomic_write_text(path, "\n".join(lines) + "\n")


def _fail(path, lineno, msg):
    raise DataFormatError(f"{path}:{lineno}: {msg}")


def read_panel(path, order=1, truth_path=None):
    """Parse a panel CSV (and optional sidecar) back into a Panel.

    Validates the dense grid: individuals must be 1..N and times 0..T with
    every pair present exactly once.  Parse failures name the offending
    line.
    """
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            _fail(path, 1, "empty file")
        if [h.strip() for h in header] != PANEL_HEADER:
            _fail(path, 1, f"expected header {','.join(PANEL_HEADER)!r}, "
                           f"got {','.join(header)!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3:
                _fail(path, lineno, f"expected 3 fields, got {len(row)}")
            try:
                w = int(row[0])
                t = int(row[1])
                val = float(row[2])
            except ValueError as exc:
                _fail(path, lineno, str(exc))
            if w < 1:
                _fail(path, lineno, f"individual index must be >= 1, got {w}")
            if t < 0:
                _fail(path, lineno, f"time index must be >= 0, got {t}")
            if not np.isfinite(val):
                _fail(path, lineno, f"non-finite observation {row[2]!r}")
            rows.append((w, t, val, lineno))
    if not rows:
        _fail(path, 2, "no data rows")
    n = max(r[0] for r in rows)
    width = max(r[1] for r in rows) + 1
    y = np.empty((n, width))
    seen = np.zeros((n, width), dtype=bool)
    for w, t, val, lineno in rows:
        if seen[w - 1, t]:
            _fail(path, lineno, f"duplicate cell (omega={w}, t={t})")
        seen[w - 1, t] = True
        y[w - 1, t] = val
    if not seen.all():
        w, t = np.argwhere(~seen)[0]
        raise DataFormatError(
            f"{path}: grid not dense; missing cell (omega={w + 1}, t={t})"
        )
    truth_coeffs = truth_sigma2 = None
    if truth_path is not None:
        truth_coeffs, truth_sigma2, p_truth = read_truth(truth_path, n)
        if order is not None and p_truth != int(order):
            raise DataFormatError(
                f"{truth_path}: sidecar order {p_truth} does not match "
                f"requested order {order}"
            )
        order = p_truth
    return Panel(y=y, order=int(order), init=None, seed=None,
                 truth_coeffs=truth_coeffs, truth_sigma2=truth_sigma2,
                 meta={"source": str(path)})


def read_truth(path, n_expected=None):
    """Parse a truth sidecar; returns (coeffs (N,p), sigma2 (N,), p)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            _fail(path, 1, "empty file")
        if header[:2] != ["omega", "sigma2"]:
            _fail(path, 1, "expected header starting 'omega,sigma2'")
        p = len(header) - 2
        if p < 1 or header[2:] != [f"alpha{k}" for k in range(1, p + 1)]:
            _fail(path, 1, "coefficient columns must be alpha1..alphap")
        coeffs, sigma2, omegas = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != p + 2:
                _fail(path, lineno, f"expected {p + 2} fields, got {len(row)}")
            try:
                omegas.append(int(row[0]))
                sigma2.append(float(row[1]))
                coeffs.append([float(x) for x in row[2:]])
            except ValueError as exc:
                _fail(path, lineno, str(exc))
    if omegas != list(range(1, len(omegas) + 1)):
        raise DataFormatError(f"{path}: individuals must be 1..N in order")
    if n_expected is not None and len(omegas) != n_expected:
        raise DataFormatError(
            f"{path}: {len(omegas)} truth rows for a panel of {n_expected} "
            "individuals"
        )
    return np.asarray(coeffs, dtype=float), np.asarray(sigma2, dtype=float), p


def _jsonable(obj):
    """Strict-JSON form: non-finite floats become 'inf'/'-inf'/'nan' strings."""
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


def write_report(payload, path):
    """Serialize a report dict as versioned, sorted, indented JSON."""
    if not isinstance(payload, dict):
        raise RcarError("report payload must be a mapping")
    doc = dict(payload)
    doc.setdefault("schema_version", REPORT_SCHEMA_VERSION)
    text = json.dumps(_jsonable(doc), indent=2, sort_keys=True, allow_nan=False)
    _atomic_write_text(path, text + "\n")


def read_report(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
