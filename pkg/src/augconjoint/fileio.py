"""CSV dataset ingestion and deterministic report emission.

Dataset files are long format, one row per (task, alternative)::

    task_id,alt,x_1,...,x_d,y,z

``alt`` runs 1..k within each task. Labels sit on the ``alt = 1`` row and
are left empty on the others; auxiliary files leave ``y`` empty throughout
(or omit the column).
"""

from __future__ import annotations

import csv
import enum
import json
import math
import os
from dataclasses import asdict, is_dataclass

import numpy as np

from .choice import Dataset, DatasetKind
from .errors import DataValidationError


def _fmt(v) -> str:
    # shortest repr that round-trips a double (never more than 17 significant digits)
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def _open_error(path, exc):
    raise OSError(f"cannot access {path}: {exc.strerror or exc}") from exc


# -- datasets ----------------------------------------------------------------------------------


def write_dataset_csv(dataset: Dataset, path) -> None:
    d = dataset.d
    header = ["task_id", "alt"] + [f"x_{i + 1}" for i in range(d)] + ["y", "z"]
    lines = [",".join(header)]
    primary = dataset.kind is DatasetKind.PRIMARY
    for t in range(len(dataset)):
        for a in range(dataset.k):
            row = [str(t + 1), str(a + 1)] + [_fmt(v) for v in dataset.features[t, a]]
            if a == 0:
                row += [str(int(dataset.human_labels[t])) if primary else "", str(int(dataset.ai_labels[t]))]
            else:
                row += ["", ""]
            lines.append(",".join(row))
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        _open_error(path, exc)


def _parse_header(header, kind):
    if not header or header[:2] != ["task_id", "alt"]:
        raise DataValidationError("header must start with task_id,alt")
    cols = header[2:]
    d = 0
    while d < len(cols) and cols[d] == f"x_{d + 1}":
        d += 1
    if d == 0:
        raise DataValidationError("header has no feature columns x_1..x_d")
    rest = cols[d:]
    if kind is DatasetKind.PRIMARY and rest != ["y", "z"]:
        raise DataValidationError(f"primary header must end with y,z after x_1..x_{d}, got {rest}")
    if kind is DatasetKind.AUXILIARY and rest not in (["z"], ["y", "z"]):
        raise DataValidationError(f"auxiliary header must end with z (or y,z) after x_1..x_{d}, got {rest}")
    return d, "y" in rest


def _label(text, line, name):
    try:
        return int(text)
    except ValueError:
        raise DataValidationError(f"line {line}: {name} label {text!r} is not an integer") from None


def ingest_csv(path, kind) -> Dataset:
    """Read and validate a long-format dataset file."""
    kind = DatasetKind(kind)
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        _open_error(path, exc)
    except UnicodeDecodeError as exc:
        raise DataValidationError(f"{path} is not UTF-8 text") from exc
    if not rows:
        raise DataValidationError(f"{path} is empty")
    d, has_y = _parse_header([c.strip() for c in rows[0]], kind)
    width = len(rows[0])

    tasks: dict[str, list] = {}
    for line, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != width:
            raise DataValidationError(f"line {line}: expected {width} fields, got {len(row)}")
        tid, alt = row[0].strip(), row[1].strip()
        try:
            alt = int(alt)
            x = [float(c) for c in row[2:2 + d]]
        except ValueError:
            raise DataValidationError(f"line {line}: non-numeric alt or feature value") from None
        if not all(math.isfinite(v) for v in x):
            raise DataValidationError(f"line {line}: features must be finite")
        labels = [c.strip() for c in row[2 + d:]]
        y_txt = labels[0] if has_y else ""
        z_txt = labels[-1]
        if kind is DatasetKind.AUXILIARY and y_txt:
            raise DataValidationError(f"line {line}: auxiliary data must not carry human labels (y column)")
        tasks.setdefault(tid, []).append((line, alt, x, y_txt, z_txt))

    if not tasks:
        raise DataValidationError(f"{path} has no tasks")
    k = None
    feats, ys, zs = [], [], []
    for tid, alts in tasks.items():
        alts.sort(key=lambda a: a[1])
        idx = [a[1] for a in alts]
        if idx != list(range(1, len(alts) + 1)):
            raise DataValidationError(f"task {tid}: alternatives must be numbered 1..k without gaps, got {idx}")
        if k is None:
            k = len(alts)
        elif len(alts) != k:
            raise DataValidationError(f"task {tid}: has {len(alts)} alternatives, expected {k}")
        first = alts[0]
        for other in alts[1:]:
            if other[3] or other[4]:
                raise DataValidationError(f"line {other[0]}: labels belong on the alt=1 row only")
        if not first[4]:
            raise DataValidationError(f"line {first[0]}: missing z label")
        zs.append(_label(first[4], first[0], "z"))
        if kind is DatasetKind.PRIMARY:
            if not first[3]:
                raise DataValidationError(f"line {first[0]}: missing y label")
            ys.append(_label(first[3], first[0], "y"))
        feats.append([a[2] for a in alts])
    return Dataset(np.array(feats, dtype=float), kind, np.array(zs),
                   np.array(ys) if kind is DatasetKind.PRIMARY else None)


# -- reports -----------------------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        if obj.ndim == 2:
            return {"rows": obj.shape[0], "cols": obj.shape[1], "data": [[_jsonable(v) for v in r] for r in obj]}
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, enum.Enum):
        return obj.value
    if is_dataclass(obj) and not isinstance(obj, type):
        return _jsonable(obj.to_dict() if hasattr(obj, "to_dict") else asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def render_json(payload, kind, seed) -> str:
    doc = {"kind": kind, "seed": seed, "payload": _jsonable(payload)}
    # json writes floats with repr, which round-trips exactly
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def render_csv(records, columns=None) -> str:
    """Long-format table; ``records`` is a list of flat dicts."""
    records = list(records)
    if columns is None:
        columns = list(dict.fromkeys(c for r in records for c in r))
    out = [",".join(columns)]
    for r in records:
        cells = []
        for c in columns:
            v = r.get(c)
            if v is None:
                cells.append("")
            elif isinstance(v, (bool, np.bool_)):
                cells.append("true" if v else "false")
            elif isinstance(v, (int, np.integer)):
                cells.append(str(int(v)))
            elif isinstance(v, (float, np.floating)):
                cells.append(_fmt(v))
            else:
                s = str(v)
                cells.append('"' + s.replace('"', '""') + '"' if any(ch in s for ch in ',"\n') else s)
        out.append(",".join(cells))
    return "\n".join(out) + "\n"


SWEEP_COLUMNS = ("eta", "instance", "min_eig", "abs_prob_diff")


def _flatten_matrix(name, mat):
    mat = np.atleast_2d(mat)
    return [{"matrix": name, "row": i, "col": j, "value": float(mat[i, j])}
            for i in range(mat.shape[0]) for j in range(mat.shape[1])]


def report_records(report):
    """Long-format rows for CSV emission of any supported report."""
    from .experiments import BenchmarkResult, SavingsStudy, SweepResult
    from .inference import AsymptoticReport
    from .metrics import MetricsReport

    if isinstance(report, SweepResult):
        return report.records(), list(SWEEP_COLUMNS)
    if isinstance(report, AsymptoticReport):
        rows = []
        for name, val in report.to_dict().items():
            if isinstance(val, np.ndarray) and val.ndim == 2:
                rows += _flatten_matrix(name, val)
        rows += [{"matrix": "dominance_eigs", "row": i, "col": 0, "value": float(v)}
                 for i, v in enumerate(report.dominance_eigs)]
        return rows, ["matrix", "row", "col", "value"]
    if isinstance(report, MetricsReport):
        rows = [{"feature": i + 1, "ape": float(v)} for i, v in enumerate(report.per_feature_ape)]
        return rows, ["feature", "ape"]
    if isinstance(report, BenchmarkResult):
        rows = [{k: v for k, v in r.items() if k != "beta"} for r in report.records]
        return rows, ["replication", "estimator", "status", "mape", "mse", "l2"]
    if isinstance(report, SavingsStudy):
        return report.records(), ["m", "aae_error", "n2", "percent", "extrapolated"]
    if isinstance(report, list):
        return report, None
    raise TypeError(f"no CSV layout for {type(report).__name__}")


def emit_report(report, fmt="json", path=None, kind=None, seed=None) -> str:
    """Serialize ``report`` deterministically; write it to ``path`` if given.

    Returns the serialized text. JSON documents are
    ``{"kind": ..., "seed": ..., "payload": ...}`` with matrices as
    ``{"rows", "cols", "data"}``; CSV output is long format.
    """
    if kind is None:
        kind = type(report).__name__
    if fmt == "json":
        text = render_json(report, kind, seed)
    elif fmt == "csv":
        text = render_csv(*report_records(report))
    else:
        raise DataValidationError(f"unknown format {fmt!r}")
    if path is not None:
        try:
            parent = os.path.dirname(os.path.abspath(path))
            os.makedirs(parent, exist_ok=True)
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            _open_error(path, exc)
    return text
