"""Versioned experiment reports: machine JSON and a plain-text summary.

Machine reports are JSON with sorted keys and a fixed layout::

    {
      "schema_version": "1.0",
      "config":   <config echo>,
      "versions": {"minmetric": ..., "numpy": ..., "kernels": ...},
      "tasks":    [{"index", "task", "params", "status", "result" | "error"}],
      "summary":  {"exit_code", "status_counts"},
      "wall_clock": {"total_s", "tasks_s"}
    }

Everything except ``wall_clock`` is a function of the config (seed
included), so ``deterministic_bytes`` is byte-reproducible.
"""

from dataclasses import dataclass, field
import json
import math

import numpy as np

SCHEMA_VERSION = "1.0"
SCHEMA_MAJOR = 1

OK_STATUSES = ("holds_on_budget", "holds_exhaustively", "constructed")
REFUTED = "refuted"
INCONCLUSIVE = "inconclusive"
FAILED = "failed"

TRACE_ROWS = 12

EXIT_OK = 0
EXIT_REFUTED = 1
EXIT_INCONCLUSIVE = 2
EXIT_CONFIG = 3


class ReportSchemaError(ValueError):
    pass


def plain(obj):
    """JSON-ready copy: numpy to builtins, non-finite floats to strings, keys to str."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


@dataclass
class Report:
    config: dict
    versions: dict
    tasks: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    wall_clock: dict = field(default_factory=dict)
    schema_version: str = SCHEMA_VERSION

    @property
    def exit_code(self):
        return self.summary.get("exit_code", exit_code_for(self.tasks))

    def to_dict(self, include_wall_clock=True):
        out = {
            "schema_version": self.schema_version,
            "config": self.config,
            "versions": self.versions,
            "tasks": self.tasks,
            "summary": self.summary,
        }
        if include_wall_clock:
            out["wall_clock"] = self.wall_clock
        return plain(out)

    @classmethod
    def from_dict(cls, obj):
        version = str(obj.get("schema_version", ""))
        try:
            major = int(version.split(".")[0])
        except ValueError as exc:
            raise ReportSchemaError(f"unreadable schema_version {version!r}") from exc
        if major != SCHEMA_MAJOR:
            raise ReportSchemaError(f"unsupported report schema major version {major} (reader knows {SCHEMA_MAJOR})")
        return cls(
            config=obj["config"],
            versions=obj["versions"],
            tasks=obj["tasks"],
            summary=obj.get("summary", {}),
            wall_clock=obj.get("wall_clock", {}),
            schema_version=version,
        )


def exit_code_for(tasks):
    statuses = [t["status"] for t in tasks]
    if REFUTED in statuses:
        return EXIT_REFUTED
    if any(s not in OK_STATUSES for s in statuses):
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def summarise(tasks):
    counts = {}
    for t in tasks:
        counts[t["status"]] = counts.get(t["status"], 0) + 1
    return {"exit_code": exit_code_for(tasks), "status_counts": counts}


def emit_machine(report, include_wall_clock=True):
    text = json.dumps(report.to_dict(include_wall_clock), sort_keys=True, indent=2, allow_nan=False)
    return (text + "\n").encode("utf-8")


def deterministic_bytes(report):
    """Machine report without the wall-clock block."""
    return emit_machine(report, include_wall_clock=False)


def parse_report(data):
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return Report.from_dict(json.loads(data))


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _render_result(lines, result):
    consts = result.get("constants")
    if consts:
        lines.append("    constants: " + ", ".join(f"{k}={_fmt(v)}" for k, v in sorted(consts.items())))
    for key in ("K", "C", "L", "c", "ratio", "provenance", "max_error", "digit_bound_violations"):
        if key in result and not isinstance(result[key], (dict, list)):
            lines.append(f"    {key}: {_fmt(result[key])}")
    w = result.get("witness")
    if w:
        lines.append(f"    witness: {w['violated_inequality']}")
        rows = w.get("power_trace") or []
        if rows:
            lines.append("      exponent  distance")
            shown = rows if len(rows) <= TRACE_ROWS else rows[: TRACE_ROWS - 2] + [None] + rows[-1:]
            for row in shown:
                if row is None:
                    lines.append(f"      {'...':>8}  ({len(rows) - TRACE_ROWS + 1} rows omitted)")
                    continue
                e, dist = row
                lines.append(f"      {e:>8}  {_fmt(dist)}")
        for name, v in sorted(w.get("quantities", {}).items()):
            lines.append(f"      {name} = {_fmt(v)}")
    log = result.get("chain", {}).get("contraction_log") if isinstance(result.get("chain"), dict) else None
    if log:
        lines.append("      level  d(h_i,1)")
        for i, dist in log:
            lines.append(f"      {i:>5}  {_fmt(dist)}")


def emit_text(report):
    lines = [f"minmetric report (schema {report.schema_version})"]
    group = report.config.get("group", {})
    keys = sorted(k for k in group if k not in ("kind", "table"))
    lines.append("group: " + ", ".join(f"{k}={group[k]}" for k in ["kind"] * ("kind" in group) + keys))
    lines.append(f"seed: {report.config.get('seed')}  budget: {report.config.get('budget')}")
    if not report.tasks:
        lines.append("no tasks")
    for t in report.tasks:
        lines.append(f"[{t['index']}] {t['task']}: {t['status']}")
        if "error" in t:
            lines.append(f"    error: {t['error']['type']}: {t['error']['message']}")
        if "result" in t:
            _render_result(lines, t["result"])
    lines.append(f"exit code: {report.exit_code}")
    return "\n".join(lines) + "\n"
