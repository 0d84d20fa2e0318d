"""Report files: ``report.json``, ``report.md`` and per-unit prediction CSVs.

``report.json`` holds no timestamps or host details, so the same inputs and
seed give the same bytes. ``report.md`` has one table per (scheme, task) with
a row per family x feature mode and ``mean ± SD`` cells.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

from .errors import RecordingIOError
from .evaluation import CLASSIFICATION_METRICS, REGRESSION_METRICS

MODE_LABELS = {"EEG136": "EEG", "PSD5": "PSD", "PSD_EOG6": "PSD+EOG"}
METRIC_LABELS = {
    "rmse": "RMSE", "r2": "R2", "accuracy": "Accuracy", "precision_macro": "Precision",
    "recall_macro": "Recall", "f1_macro": "F1",
}


def dumps(obj) -> str:
    """Canonical JSON text: two-space indent, shortest float repr, LF."""
    return json.dumps(obj, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def _write(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise RecordingIOError(f"cannot write {path}: {exc.strerror}") from exc


def report_document(reports, config: dict | None = None, notes=()) -> dict:
    return {
        "config": config or {},
        "results": [r.to_dict() if hasattr(r, "to_dict") else r for r in reports],
        "notes": list(notes),
    }


def write_report_json(doc: dict, path) -> None:
    _write(Path(path), dumps(doc))


def format_cell(agg) -> str:
    if agg is None or agg.get("mean") is None:
        return "undefined"
    return f"{agg['mean']:.2f} ± {agg['sd']:.2f}"


def _scheme_title(s: dict) -> str:
    if s["kind"] == "SubjectHoldout":
        held = round(100 * s["holdout_fraction"])
        return f"SubjectHoldout {100 - held}-{held} ({s['repetitions']} repetitions)"
    return s["kind"]


def render_markdown(doc: dict) -> str:
    """Markdown tables, one per (scheme, task), in first-appearance order."""
    groups = {}
    for res in doc["results"]:
        key = (json.dumps(res["scheme"], sort_keys=True), res["task"])
        groups.setdefault(key, []).append(res)
    lines = ["# Evaluation report", ""]
    for (_, task), results in groups.items():
        metrics = REGRESSION_METRICS if task == "Regression" else CLASSIFICATION_METRICS
        lines.append(f"## {_scheme_title(results[0]['scheme'])}: {task}")
        lines.append("")
        header = ["Algorithm", "Features"] + [METRIC_LABELS[m] for m in metrics]
        lines.append("| " + " | ".join(header) + " |")
        lines.append("|" + "---|" * len(header))
        for res in results:
            cells = [res["family"], MODE_LABELS.get(res["mode"], res["mode"])]
            cells += [format_cell(res["aggregate"].get(m)) for m in metrics]
            lines.append("| " + " | ".join(cells) + " |")
        per_subject = [r for r in results if r.get("per_subject_aggregate")]
        if per_subject:
            lines.append("")
            lines.append("Per test subject:")
            lines.append("")
            lines.append("| " + " | ".join(header) + " |")
            lines.append("|" + "---|" * len(header))
            for res in per_subject:
                cells = [res["family"], MODE_LABELS.get(res["mode"], res["mode"])]
                cells += [format_cell(res["per_subject_aggregate"].get(m)) for m in metrics]
                lines.append("| " + " | ".join(cells) + " |")
        warnings = sorted({w for r in results for w in r.get("warnings", [])})
        if warnings:
            lines.append("")
            lines += [f"- warning: {w}" for w in warnings]
        lines.append("")
    for note in doc.get("notes", []):
        lines.append(f"- {note}")
    return "\n".join(lines).rstrip("\n") + "\n"


def write_report_markdown(doc: dict, path) -> None:
    _write(Path(path), render_markdown(doc))


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "-", text).strip("-")


def prediction_filename(report, unit) -> str:
    s = report.scheme
    tag = s.kind if s.kind != "SubjectHoldout" else f"SubjectHoldout{round(100 * s.holdout_fraction)}"
    return "predictions_" + _slug(f"{tag}_{report.family}_{report.mode}_{report.task}_{unit.unit}") + ".csv"


def write_predictions(report, out_dir) -> list:
    """One CSV per unit: subject_id, epoch_index, y_true, y_pred."""
    paths = []
    for unit in report.units:
        p = unit.predictions
        rows = ["subject_id,epoch_index,y_true,y_pred"]
        for sid, ep, yt, yp in zip(p["subject_id"], p["epoch_index"], p["y_true"], p["y_pred"]):
            rows.append(f"{sid},{int(ep)},{yt!r},{yp!r}")
        path = Path(out_dir) / prediction_filename(report, unit)
        _write(path, "\n".join(rows) + "\n")
        paths.append(path)
    return paths
