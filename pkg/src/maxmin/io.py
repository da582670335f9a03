"""Instance file formats and the JSON report schema.

Text instances are diff-able: a header line ``MAXMIN v1 <kind> <n> <d>``
followed by one row of decimal values per line (games store the columns
a_i as rows; quadratics append the offset as a trailing column).  The
binary format holds the same payload as little-endian float64 after a
16-byte header: magic ``MXMN``, u32 n, u32 d, u32 kind code.

Reports are JSON documents with a declared ``schema`` key; numeric
arrays are kept flat.  Wall-time fields are the only nondeterministic
content for a fixed seed and config.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import InvalidParams
from .problems import MatrixGameInstance, MebInstance, QuadraticMaxProblem

REPORT_SCHEMA = "maxmin-report/1"
_MAGIC = b"MXMN"
_KIND_CODES = {"game_l2l1": 0, "game_l1l1": 1, "meb": 2, "quadratics": 3}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}

# wall-clock entries, excluded from byte-identity comparisons
TIMING_KEYS = ("wall_time", "t_eval", "t_md")


def _payload(kind: str, rows: np.ndarray) -> np.ndarray:
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2:
        raise InvalidParams("instance payload must be a 2-D array")
    return rows


def save_instance_text(path, kind: str, rows: np.ndarray) -> None:
    if kind not in _KIND_CODES:
        raise InvalidParams(f"unknown instance kind {kind!r}")
    rows = _payload(kind, rows)
    n, d = rows.shape
    lines = [f"MAXMIN v1 {kind} {n} {d}"]
    for row in rows:
        lines.append(" ".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def save_instance_binary(path, kind: str, rows: np.ndarray) -> None:
    if kind not in _KIND_CODES:
        raise InvalidParams(f"unknown instance kind {kind!r}")
    rows = _payload(kind, rows)
    n, d = rows.shape
    header = struct.pack("<4sIII", _MAGIC, n, d, _KIND_CODES[kind])
    Path(path).write_bytes(header + rows.astype("<f8").tobytes())


def load_instance(path) -> tuple[str, np.ndarray]:
    """Load either format, sniffing the binary magic."""
    path = Path(path)
    blob = path.read_bytes()
    if blob[:4] == _MAGIC:
        n, d, code = struct.unpack("<III", blob[4:16])
        if code not in _KIND_NAMES:
            raise InvalidParams(f"unknown binary kind code {code}")
        rows = np.frombuffer(blob[16:], dtype="<f8")
        if rows.size != n * d:
            raise InvalidParams(f"expected {n * d} values, found {rows.size}")
        return _KIND_NAMES[code], rows.reshape(n, d).astype(float)
    text = blob.decode("utf-8").strip().splitlines()
    head = text[0].split()
    if len(head) != 5 or head[0] != "MAXMIN" or head[1] != "v1":
        raise InvalidParams(f"bad instance header: {text[0]!r}")
    kind, n, d = head[2], int(head[3]), int(head[4])
    if kind not in _KIND_CODES:
        raise InvalidParams(f"unknown instance kind {kind!r}")
    rows = np.array([[float(v) for v in line.split()] for line in text[1 : n + 1]])
    if rows.shape != (n, d):
        raise InvalidParams(f"expected ({n}, {d}) payload, found {rows.shape}")
    return kind, rows


def instance_from_payload(kind: str, rows: np.ndarray):
    """Materialize the typed instance (validating its norm bounds)."""
    if kind == "game_l2l1":
        return MatrixGameInstance(rows.T, "l2l1")
    if kind == "game_l1l1":
        return MatrixGameInstance(rows.T, "l1l1")
    if kind == "meb":
        return MebInstance(rows)
    if kind == "quadratics":
        return QuadraticMaxProblem(rows[:, :-1], rows[:, -1])
    raise InvalidParams(f"unknown instance kind {kind!r}")


def write_report(path, report: dict) -> None:
    doc = dict(report)
    doc["schema"] = REPORT_SCHEMA
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")


def read_report(path) -> dict:
    doc = json.loads(Path(path).read_text())
    if doc.get("schema") != REPORT_SCHEMA:
        raise InvalidParams(f"unexpected report schema {doc.get('schema')!r}")
    return doc


def strip_timing(doc: dict) -> dict:
    """Drop wall-time fields (recursively) for determinism comparisons."""
    out = {}
    for key, val in doc.items():
        if key in TIMING_KEYS:
            continue
        out[key] = strip_timing(val) if isinstance(val, dict) else val
    return out
