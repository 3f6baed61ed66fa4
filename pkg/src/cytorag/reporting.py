"""Report serialization: canonical JSON, accuracy tables, ROC point files.

Numbers are rendered with Python's shortest round-trip ``repr`` so every
emitted value re-parses to exactly the float the report holds. The
report's content hash is a SHA-256 over the canonical JSON payload
(sorted keys, compact separators) with the hash field excluded, so two
runs agree on the hash iff they agree on every value.

Accuracy table layout (one file per task)::

    model,top1,top3,top5
    uni,0.69,0.81,0.92

ROC point files carry one ``fpr,tpr,threshold`` row per point; the
combined per-report file prefixes ``model,k`` columns.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from pathlib import Path
from typing import Mapping

from .evaluation import EvalReport, RocCurve

REPORT_SCHEMA_VERSION = 1


def fmt(value: float | int) -> str:
    """Shortest decimal string that round-trips to the same float."""
    return repr(float(value))


def report_to_dict(report: EvalReport) -> dict:
    """Canonical JSON-ready payload for a report."""
    payload = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "config": report.config.to_dict(),
        "store_version": report.store_version,
        "n_cases": report.n_cases,
        "models": list(report.models),
        "accuracy": {
            task: {
                model: {str(k): by_k[k] for k in sorted(by_k)}
                for model, by_k in by_model.items()
            }
            for task, by_model in report.accuracy.items()
        },
        "evaluated_cases": {
            task: dict(by_model) for task, by_model in report.evaluated.items()
        },
        "roc": {
            model: {
                str(k): {
                    "auc": result.auc,
                    "n_cases": result.n_cases,
                    "fpr": list(result.curve.fpr),
                    "tpr": list(result.curve.tpr),
                    "thresholds": list(result.curve.thresholds),
                }
                for k, result in by_k.items()
            }
            for model, by_k in report.roc.items()
        },
    }
    if report.content_hash:
        payload["content_hash"] = report.content_hash
    return payload


def compute_content_hash(report: EvalReport) -> str:
    payload = report_to_dict(report)
    payload.pop("content_hash", None)
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def attach_content_hash(report: EvalReport) -> EvalReport:
    return dataclasses.replace(report, content_hash=compute_content_hash(report))


def report_json(report: EvalReport) -> str:
    return json.dumps(report_to_dict(report), sort_keys=True, indent=2) + "\n"


def render_accuracy_csv(
    rows: Mapping[str, Mapping[int, float]], ks: tuple[int, ...] = (1, 3, 5)
) -> str:
    """Accuracy table CSV: one row per model, one ``top<k>`` column per cutoff."""
    lines = ["model," + ",".join(f"top{k}" for k in ks)]
    for model in rows:
        lines.append(model + "," + ",".join(fmt(rows[model][k]) for k in ks))
    return "\n".join(lines) + "\n"


def render_accuracy_json(
    rows: Mapping[str, Mapping[int, float]], ks: tuple[int, ...] = (1, 3, 5)
) -> str:
    """Accuracy table JSON mirroring the CSV layout."""
    payload = {
        "ks": list(ks),
        "rows": [
            {"model": model, **{f"top{k}": rows[model][k] for k in ks}}
            for model in rows
        ],
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def roc_csv(curve: RocCurve) -> str:
    lines = ["fpr,tpr,threshold"]
    for f, t, thr in zip(curve.fpr, curve.tpr, curve.thresholds):
        lines.append(f"{fmt(f)},{fmt(t)},{fmt(thr)}")
    return "\n".join(lines) + "\n"


def combined_roc_csv(report: EvalReport) -> str:
    lines = ["model,k,fpr,tpr,threshold"]
    for model in report.models:
        for k in sorted(report.roc.get(model, {})):
            curve = report.roc[model][k].curve
            for f, t, thr in zip(curve.fpr, curve.tpr, curve.thresholds):
                lines.append(f"{model},{k},{fmt(f)},{fmt(t)},{fmt(thr)}")
    return "\n".join(lines) + "\n"


def write_report_files(report: EvalReport, out_dir: str | Path) -> list[Path]:
    """Write report.json, per-task accuracy tables, and ROC point files."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    path = out_dir / "report.json"
    path.write_text(report_json(report), encoding="utf-8")
    written.append(path)

    ks = report.config.ks
    for task, by_model in report.accuracy.items():
        rows = {model: by_model[model] for model in report.models}
        path = out_dir / f"accuracy_{task}.csv"
        path.write_text(render_accuracy_csv(rows, ks), encoding="utf-8")
        written.append(path)
        path = out_dir / f"accuracy_{task}.json"
        path.write_text(render_accuracy_json(rows, ks), encoding="utf-8")
        written.append(path)

    roc_dir = out_dir / "roc"
    roc_dir.mkdir(exist_ok=True)
    for model, by_k in report.roc.items():
        for k, result in by_k.items():
            path = roc_dir / f"{model}_k{k}.csv"
            path.write_text(roc_csv(result.curve), encoding="utf-8")
            written.append(path)
    return written
