"""CSV/JSON serialisation for error and fault reports.

JSON layout (``schema_version`` 1)::

    {"schema_version": 1, "kind": "error" | "fault", "report": {...}}

``report`` holds every metric at full double precision plus the echo of the
spec that produced it.  CSV has one row per metric with the columns
``schema_version, kind, metric, value, units`` followed by the flattened spec
echo (``format, config, sampling_kind, sampling_count, sampling_seed,
sampling_distribution, fields, model, policy, pairs_evaluated|samples,
pairs_excluded|excluded``).  Columns that do not apply to a report kind are
left empty.
"""

from __future__ import annotations

import csv
import io
import json

from .metrics import ErrorReport
from .reliability import FaultReport

SCHEMA_VERSION = 1

CSV_COLUMNS = [
    "schema_version",
    "kind",
    "metric",
    "value",
    "units",
    "format",
    "config",
    "sampling_kind",
    "sampling_count",
    "sampling_seed",
    "sampling_distribution",
    "fields",
    "model",
    "policy",
    "evaluated",
    "excluded",
]

FAULT_UNITS = {
    "eta": "log2 magnitude",
    "regime_term": "log2 magnitude",
    "exponent_term": "log2 magnitude",
    "fraction_term": "log2 magnitude",
    "decomposition_gap": "log2 magnitude",
    "gamma": "ratio",
}


def _kind(report) -> str:
    if isinstance(report, ErrorReport):
        return "error"
    if isinstance(report, FaultReport):
        return "fault"
    raise TypeError(f"not a report: {type(report).__name__}")


def to_json(report) -> str:
    doc = {"schema_version": SCHEMA_VERSION, "kind": _kind(report), "report": report.to_dict()}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def from_json(text: str):
    doc = json.loads(text)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {doc.get('schema_version')!r}")
    if doc["kind"] == "error":
        return ErrorReport.from_dict(doc["report"])
    if doc["kind"] == "fault":
        return FaultReport.from_dict(doc["report"])
    raise ValueError(f"unknown report kind {doc['kind']!r}")


def _fmt_value(v) -> str:
    return "" if v is None else repr(float(v))


def csv_rows(reports) -> list[dict]:
    rows = []
    for r in reports:
        kind = _kind(r)
        spec = r.spec.to_dict()
        s = spec["sampling"]
        base = {
            "schema_version": SCHEMA_VERSION,
            "kind": kind,
            "format": spec["format"],
            "config": spec.get("config", ""),
            "sampling_kind": s["kind"],
            "sampling_count": s["count"],
            "sampling_seed": s["seed"],
            "sampling_distribution": s["distribution"],
            "fields": "+".join(spec["fields"]) if spec.get("fields") else "",
            "model": spec.get("model", ""),
            "policy": spec.get("policy", ""),
        }
        if kind == "error":
            base.update(evaluated=r.pairs_evaluated, excluded=r.pairs_excluded)
            units = ErrorReport.UNITS
        else:
            base.update(evaluated=r.samples, excluded=r.excluded)
            units = FAULT_UNITS
        for name, value in r.metrics().items():
            rows.append({**base, "metric": name, "value": _fmt_value(value), "units": units[name]})
    return rows


def to_csv(reports) -> str:
    if not isinstance(reports, (list, tuple)):
        reports = [reports]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(csv_rows(reports))
    return buf.getvalue()


def to_text(report) -> str:
    lines = [f"# {_kind(report)} report for {report.spec.to_dict()}"]
    for name, value in report.metrics().items():
        lines.append(f"{name:>18} = {_fmt_value(value) or '-'}")
    if isinstance(report, ErrorReport):
        lines.append(f"{'pairs_evaluated':>18} = {report.pairs_evaluated}")
        lines.append(f"{'pairs_excluded':>18} = {report.pairs_excluded}")
    else:
        lines.append(f"{'samples':>18} = {report.samples}")
        lines.append(f"{'excluded':>18} = {report.excluded}")
    return "\n".join(lines) + "\n"
