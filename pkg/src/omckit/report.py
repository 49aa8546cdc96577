"""Deterministic JSON reports with units, input digests and provenance."""
from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

from . import __version__

SIGNIFICANT_DIGITS = 12


def qty(value, unit: str, uncertainty=None) -> dict:
    """A numeric report field: value plus unit, optionally with a 1-sigma uncertainty."""
    out = {"value": value, "unit": unit}
    if uncertainty is not None:
        out["uncertainty"] = uncertainty
    return out


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _normalize(obj):
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, int):
        return obj
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return None
        return float(f"{obj:.{SIGNIFICANT_DIGITS}g}")
    if hasattr(obj, "item") and not isinstance(obj, (list, tuple, dict)):  # numpy scalar
        return _normalize(obj.item())
    if isinstance(obj, dict):
        return {str(k): _normalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_normalize(v) for v in obj]
    raise TypeError(f"cannot serialize {type(obj).__name__} in a report")


def dumps(report: dict) -> str:
    """Sorted keys, 12 significant digits, non-finite numbers as null."""
    return json.dumps(_normalize(report), sort_keys=True, indent=2, allow_nan=False, ensure_ascii=False) + "\n"


def build_report(command: str, args: dict, inputs: list, results: dict,
                 provenance: list[str] | None = None, warnings: list[str] | None = None) -> dict:
    return {
        "tool": {"name": "omckit", "version": __version__},
        "command": {"name": command, "args": {k: str(v) for k, v in args.items() if v is not None}},
        "inputs": {Path(p).name: {"sha256": file_digest(p)} for p in inputs},
        "results": results,
        "provenance": list(provenance or []),
        "warnings": list(warnings or []),
    }


def unitless_numbers(obj, path="") -> list[str]:
    """Paths of numeric fields that are not the value/uncertainty of a unit-bearing dict."""
    bad = []
    if isinstance(obj, dict):
        has_unit = "unit" in obj
        for k, v in obj.items():
            p = f"{path}.{k}"
            if has_unit and k in ("value", "uncertainty") and isinstance(v, list):
                continue
            if isinstance(v, (int, float)) and not isinstance(v, bool):
                if not (has_unit and k in ("value", "uncertainty")):
                    bad.append(p)
            else:
                bad.extend(unitless_numbers(v, p))
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            if isinstance(v, (int, float)) and not isinstance(v, bool):
                bad.append(f"{path}[{i}]")
            else:
                bad.extend(unitless_numbers(v, f"{path}[{i}]"))
    return bad
