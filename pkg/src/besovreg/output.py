"""CSV tables and JSON manifests for study and check results."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .studies import RateStudyResult, RateStudySpec

__all__ = ["RATE_COLUMNS", "emit_outputs", "load_manifest", "spec_from_manifest", "to_jsonable"]

RATE_COLUMNS = (
    "noise_level",
    "alpha",
    "err_besov",
    "err_lp",
    "data_residual",
    "optimality_residual",
    "iterations",
    "sparsity_level",
    "replicates",
    "converged",
)


def to_jsonable(obj):
    """Plain JSON types; non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _columns(result):
    if isinstance(result, RateStudyResult):
        return list(RATE_COLUMNS)
    cols = []
    for row in result.rows:
        cols += [k for k in row if k not in cols]
    return cols


def _manifest(result) -> dict:
    if isinstance(result, RateStudyResult):
        return {
            "kind": result.spec.kind,
            "spec": result.spec.to_dict(),
            "constants": result.constants,
            "verdict": result.verdict(),
        }
    return {"kind": result.kind, "spec": result.params, "constants": {}, "verdict": result.verdict()}


def emit_outputs(result, out_dir, stem: str | None = None):
    """Write ``<stem>.csv`` and ``<stem>.json`` into ``out_dir``; returns both paths.

    Runtimes are left out so identical inputs give byte-identical files.
    """
    out = Path(out_dir)
    name = stem or (result.spec.kind if isinstance(result, RateStudyResult) else result.kind)
    csv_path = out / f"{name}.csv"
    json_path = out / f"{name}.json"
    try:
        out.mkdir(parents=True, exist_ok=True)
        cols = _columns(result)
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\r\n")
            w.writerow(cols)
            for row in result.rows:
                w.writerow([_cell(row.get(c, "")) for c in cols])
        text = json.dumps(to_jsonable(_manifest(result)), indent=2, sort_keys=True, allow_nan=False)
        with open(json_path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write outputs under {out}: {exc.strerror}", str(exc.filename or out)) from exc
    return csv_path, json_path


def load_manifest(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def spec_from_manifest(path) -> RateStudySpec:
    """Rebuild the study spec recorded in a manifest."""
    return RateStudySpec.from_dict(load_manifest(path)["spec"])
