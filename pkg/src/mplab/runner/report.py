"""Reports and their JSON / CSV serialization."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from mplab.errors import DomainError, ReportIOError
from mplab.runner.monte_carlo import GENERATOR, TrialRecord

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Criterion:
    """One pass/fail line. ``passed`` is None for informational lines."""

    name: str
    paper_tag: str
    threshold: float
    value: float
    passed: bool | None

    def as_dict(self):
        return {
            "name": self.name,
            "paper_tag": self.paper_tag,
            "threshold": self.threshold,
            "value": self.value,
            "pass": self.passed,
        }


def at_most(name, tag, value, threshold, informational=False):
    ok = None if informational else bool(value <= threshold)
    return Criterion(name, tag, float(threshold), float(value), ok)


def at_least(name, tag, value, threshold, informational=False):
    ok = None if informational else bool(value >= threshold)
    return Criterion(name, tag, float(threshold), float(value), ok)


def below(name, tag, value, threshold, informational=False):
    ok = None if informational else bool(value < threshold)
    return Criterion(name, tag, float(threshold), float(value), ok)


def above(name, tag, value, threshold, informational=False):
    ok = None if informational else bool(value > threshold)
    return Criterion(name, tag, float(threshold), float(value), ok)


@dataclass
class Report:
    config: dict
    records: list[TrialRecord]
    aggregates: dict
    criteria: list[Criterion]
    informational: bool = False
    notes: list[str] = field(default_factory=list)
    timing: dict | None = None

    @property
    def passed(self) -> bool:
        return all(c.passed is not False for c in self.criteria)

    def failures(self) -> list[Criterion]:
        return [c for c in self.criteria if c.passed is False]

    def as_dict(self, include_timing=False) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "generator": GENERATOR,
            "config": self.config,
            "records": [
                {"trial_index": r.trial_index, "seed_stream": r.seed_stream, "payload": r.payload}
                for r in self.records
            ],
            "aggregates": self.aggregates,
            "criteria": [c.as_dict() for c in self.criteria],
            "informational": self.informational,
            "notes": list(self.notes),
        }
        if include_timing and self.timing is not None:
            out["timing"] = self.timing
        return out


def format_float(x: float) -> str:
    """17 significant digits, always readable back as a float."""
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    s = format(x, ".17g")
    if not any(c in s for c in ".e"):
        s += ".0"
    return s


def _json_string(s: str) -> str:
    out = ['"']
    for ch in s:
        if ch == '"':
            out.append('\\"')
        elif ch == "\\":
            out.append("\\\\")
        elif ord(ch) < 0x20:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)


def _write_json(obj, out, indent=0):
    pad = "  " * (indent + 1)
    if obj is None:
        out.write("null")
    elif isinstance(obj, bool):
        out.write("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.write(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.write(format_float(float(obj)))
    elif isinstance(obj, str):
        out.write(_json_string(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.write("{}")
            return
        out.write("{\n")
        for i, (key, value) in enumerate(obj.items()):
            out.write(pad + _json_string(str(key)) + ": ")
            _write_json(value, out, indent + 1)
            out.write(",\n" if i < len(obj) - 1 else "\n")
        out.write("  " * indent + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        items = list(obj)
        if not items:
            out.write("[]")
            return
        if all(isinstance(v, (int, float, np.number)) and not isinstance(v, bool) for v in items):
            out.write("[" + ", ".join(
                format_float(float(v)) if isinstance(v, (float, np.floating)) else str(int(v))
                for v in items
            ) + "]")
            return
        out.write("[\n")
        for i, value in enumerate(items):
            out.write(pad)
            _write_json(value, out, indent + 1)
            out.write(",\n" if i < len(items) - 1 else "\n")
        out.write("  " * indent + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def to_json(report: Report, include_timing=False) -> str:
    buf = io.StringIO()
    _write_json(report.as_dict(include_timing), buf)
    buf.write("\n")
    return buf.getvalue()


def to_csv(records: list[TrialRecord]) -> str:
    """Header plus one row per trial; payload keys must agree across records."""
    fields = list(records[0].payload)
    lines = [",".join(["trial_index", "seed_stream", *fields])]
    for r in records:
        if list(r.payload) != fields:
            raise DomainError(f"trial {r.trial_index} has payload fields {list(r.payload)}")
        lines.append(",".join([str(r.trial_index), r.seed_stream, *(format_float(r.payload[f]) for f in fields)]))
    return "\n".join(lines) + "\n"


def emit_report(report: Report, fmt: str = "json", path=None, include_timing=False) -> str:
    """Serialize ``report`` and write it to ``path`` when given; returns the text."""
    if not report.records:
        raise DomainError("report has no records")
    if fmt == "json":
        text = to_json(report, include_timing)
    elif fmt == "csv":
        text = to_csv(report.records)
    else:
        raise DomainError(f"unknown format {fmt!r}")
    if path is not None:
        try:
            with open(Path(path), "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        except OSError as exc:
            raise ReportIOError(f"cannot write report to {path}: {exc}", path=str(path)) from exc
    return text
