"""Result tables and their CSV / JSON serialisation."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CSV_COLUMNS = ("task", "body", "norm", "key", "value", "stderr", "verdict")
KAPPA_SENTINEL = 1e300


@dataclass(frozen=True)
class Row:
    task: str
    body: str
    norm: str
    key: str
    value: float | str
    stderr: float | None = None
    verdict: str = ""


@dataclass
class TaskResult:
    task: str
    index: int
    rows: list = field(default_factory=list)
    payload: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None or any(r.verdict in ("violated", "failed", "fail") for r in self.rows)

    @property
    def stem(self) -> str:
        return f"{self.task}-{self.index}"


def _num(v, digits: int) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, f".{digits}g")
    return str(v)


def to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([r.task, r.body, r.norm, r.key, _num(r.value, 9), _num(r.stderr, 9), r.verdict])
    return buf.getvalue()


def plain(obj):
    """Convert numpy containers and dataclass payloads into JSON-ready Python objects."""
    if hasattr(obj, "to_json"):
        return plain(obj.to_json())
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON text with every float written to 17 significant digits.

    Non-finite floats become the strings "inf", "-inf" and "nan".
    """
    obj = plain(obj) if _level == 0 else obj
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return json.dumps(obj)
    if isinstance(obj, float):
        if math.isfinite(obj):
            return format(obj, ".17g")
        return json.dumps(_num(obj, 17))
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def emit_report(result: TaskResult, out_dir, formats=("csv", "json")) -> list[Path]:
    """Write <task>-<index>.csv / .json; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    if "csv" in formats:
        p = out / f"{result.stem}.csv"
        p.write_text(to_csv(result.rows))
        paths.append(p)
    if "json" in formats:
        p = out / f"{result.stem}.json"
        body = {"task": result.task, "index": result.index, "error": result.error,
                "failed": result.failed, "results": result.payload}
        p.write_text(dumps(body) + "\n")
        paths.append(p)
    return paths


def summary_rows(results) -> list[Row]:
    rows = []
    for res in results:
        if res.error is not None:
            rows.append(Row(res.task, "", "", f"{res.stem}:error", res.error, None, "failed"))
            continue
        for r in res.rows:
            if r.verdict:
                rows.append(Row(res.task, r.body, r.norm, f"{res.stem}:{r.key}", r.value, r.stderr,
                                "fail" if r.verdict in ("violated", "failed", "fail") else "pass"))
    return rows


def emit_summary(results, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = summary_rows(results)
    p1 = out / "summary.csv"
    p1.write_text(to_csv(rows))
    p2 = out / "summary.json"
    p2.write_text(dumps({
        "tasks": [{"file": r.stem, "task": r.task, "failed": r.failed, "error": r.error} for r in results],
        "passed": not any(r.failed for r in results),
    }) + "\n")
    return [p1, p2]
