"""CSV and JSON report emission with byte-stable output."""

from __future__ import annotations

import csv
import json
import os

from .evaluation import EvalReport

__all__ = [
    "write_json",
    "write_eval_csv",
    "write_ablation_csv",
    "write_sweep_csvs",
]

EVAL_COLUMNS = (
    "label",
    "precision",
    "recall",
    "f1",
    "ign_f1",
    "head_f1",
    "mid_f1",
    "tail_f1",
    "predicted_triples",
    "excluded_predictions",
    "gold_triples",
)

ABLATION_COLUMNS = ("variant", "ign_f1", "f1", "head_f1", "mid_f1", "tail_f1")
SWEEP_COLUMNS = ("ratio", "precision", "recall", "f1", "ign_f1")


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path, columns, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])


def write_eval_csv(labeled_reports: list[tuple[str, EvalReport]], path) -> None:
    rows = []
    for label, report in labeled_reports:
        row = {"label": label}
        row.update(report.summary())
        rows.append(row)
    _write_csv(path, EVAL_COLUMNS, rows)


def write_ablation_csv(ablation_rows: list[dict], path) -> None:
    rows = []
    for entry in ablation_rows:
        row = {"variant": entry["variant"]}
        row.update({k: entry["mean"][k] for k in ABLATION_COLUMNS if k != "variant"})
        rows.append(row)
    _write_csv(path, ABLATION_COLUMNS, rows)


def write_sweep_csvs(sweep_rows: list[dict], out_dir) -> list[str]:
    """One plot-data CSV per evaluation split: x = ratio, y = metrics."""
    written = []
    splits = sweep_rows[0]["mean"].keys() if sweep_rows else ()
    for split in splits:
        path = os.path.join(out_dir, f"sweep_{split}.csv")
        rows = []
        for entry in sweep_rows:
            row = {"ratio": entry["ratio"]}
            row.update({k: entry["mean"][split][k] for k in SWEEP_COLUMNS if k != "ratio"})
            rows.append(row)
        _write_csv(path, SWEEP_COLUMNS, rows)
        written.append(path)
    return written
