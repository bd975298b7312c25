"""Deterministic report serialization (canonical JSON or flat CSV)."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path
from typing import Any, Dict, List, Tuple

import numpy as np

from .. import __version__
from ..errors import DataError

FORMATS = ("json", "csv")


def _plain(value: Any) -> Any:
    """Convert numpy scalars/arrays and tuples into JSON-native values."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, Path):
        return value.as_posix()
    return value


def canonical_json(obj: Any) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2, ensure_ascii=True, allow_nan=False) + "\n"


def config_hash(config: Dict[str, Any]) -> str:
    blob = json.dumps(_plain(config), sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def make_report(kind: str, seed: int, config: Dict[str, Any], body: Dict[str, Any]) -> Dict[str, Any]:
    """Wrap a result with the fields every report carries."""
    return _plain({
        "kind": kind,
        "seed": seed,
        "toolkit_version": __version__,
        "config": config,
        "config_hash": config_hash(config),
        **body,
    })


def _flatten(obj: Any, prefix: str = "") -> List[Tuple[str, Any]]:
    if isinstance(obj, dict):
        out = []
        for k in sorted(obj):
            out.extend(_flatten(obj[k], f"{prefix}.{k}" if prefix else str(k)))
        return out
    if isinstance(obj, list) and any(isinstance(v, (dict, list)) for v in obj):
        out = []
        for i, v in enumerate(obj):
            out.extend(_flatten(v, f"{prefix}[{i}]"))
        return out
    if isinstance(obj, list):
        return [(prefix, ";".join("" if v is None else repr(v) if isinstance(v, float) else str(v) for v in obj))]
    return [(prefix, obj)]


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def report_to_csv(report: Dict[str, Any]) -> str:
    """Sweep reports become one row per alpha; anything else becomes key,value rows.

    Report-level fields (seed, version, config hash) are repeated on every
    sweep row so each row is self-describing.
    """
    report = _plain(report)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if isinstance(report.get("rows"), list) and report["rows"]:
        meta = [("seed", report.get("seed")), ("toolkit_version", report.get("toolkit_version")),
                ("config_hash", report.get("config_hash"))]
        flat_rows = [dict(_flatten(row)) for row in report["rows"]]
        columns = sorted({k for row in flat_rows for k in row})
        lead = [c for c in ("alpha", "eer_percent", "auroc", "accuracy", "sensitivity", "specificity") if c in columns]
        columns = lead + [c for c in columns if c not in lead]
        writer.writerow(columns + [k for k, _ in meta])
        for row in flat_rows:
            writer.writerow([_cell(row.get(c)) for c in columns] + [_cell(v) for _, v in meta])
    else:
        writer.writerow(["key", "value"])
        for key, value in _flatten(report):
            writer.writerow([key, _cell(value)])
    return buf.getvalue()


def render_report(report: Dict[str, Any], fmt: str = "json") -> str:
    if fmt not in FORMATS:
        raise ValueError(f"unknown report format {fmt!r}; choose from {FORMATS}")
    return canonical_json(report) if fmt == "json" else report_to_csv(report)


def emit_report(report: Dict[str, Any], fmt: str, path) -> None:
    text = render_report(report, fmt)
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8", newline="\n")
    except OSError as exc:
        raise DataError(f"cannot write report to {path}: {exc.strerror or exc}") from exc


def load_report(path) -> Dict[str, Any]:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read report {path}: {exc}") from exc
