"""
Deterministic artifact writers.

CSV follows RFC 4180 (UTF-8, header row, CRLF line endings). Every row
carries the run's config hash and the tool version; floats are written with
``repr`` so they round-trip exactly. Nothing time-dependent is ever written.
"""

import csv
import hashlib
import json
import math
from pathlib import Path

from . import __version__

TOOL_VERSION = __version__


def config_hash(obj) -> str:
    """SHA-256 of the canonical JSON encoding of ``obj``."""
    blob = json.dumps(_plain(obj), sort_keys=True, separators=(",", ":"), allow_nan=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def format_cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return ""
    if hasattr(v, "item") and not isinstance(v, (str, bytes)):
        v = v.item()
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _ensure_parent(path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {path.parent}: {exc}") from exc
    return path


def write_csv(path, header, rows, config_hash: str = "") -> Path:
    path = _ensure_parent(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(list(header) + ["config_hash", "tool_version"])
        for row in rows:
            w.writerow([format_cell(v) for v in row] + [config_hash, TOOL_VERSION])
    return path


def write_dict_rows(path, rows, config_hash: str = "", columns=None) -> Path:
    """CSV from a list of dicts; columns default to the keys of the first row."""
    rows = list(rows)
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    return write_csv(path, columns, ([r.get(c) for c in columns] for r in rows), config_hash)


def write_json(path, payload: dict, config_hash: str = "") -> Path:
    path = _ensure_parent(path)
    doc = dict(_plain(payload), config_hash=config_hash, tool_version=TOOL_VERSION)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2, allow_nan=True)
        fh.write("\n")
    return path


def read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))
