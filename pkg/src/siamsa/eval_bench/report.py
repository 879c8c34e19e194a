"""Per-sequence and aggregate evaluation reports.

Aggregates average per-sequence curves and AUCs (every sequence weighs the
same, regardless of length). The SV histogram is pooled over all frames of
all sequences. Reductions always run in sequence-name order, so the numbers
do not depend on evaluation order or worker count.
"""
from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DatasetError
from .dataset import ATTRIBUTES, SequenceRecord, read_boxes
from .metrics import (
    NP_THRESHOLDS,
    SUCCESS_THRESHOLDS,
    SV_EDGES,
    auc,
    success_and_precision_curves,
    sv_counts,
)

REPORT_FORMAT = "siamsa-report/1"


@dataclass
class SequenceReport:
    name: str
    n_frames: int
    attributes: tuple
    success: np.ndarray
    precision: np.ndarray
    auc_success: float
    auc_np: float
    sv_counts: np.ndarray

    @property
    def sv_histogram(self):
        return self.sv_counts / self.n_frames


@dataclass
class Aggregate:
    n_sequences: int
    success: np.ndarray
    precision: np.ndarray
    auc_success: float
    auc_np: float


@dataclass
class EvalReport:
    sequences: dict
    overall: Aggregate
    attributes: dict
    sv_counts: np.ndarray
    total_frames: int
    run_info: dict | None = field(default=None)

    @property
    def sv_histogram(self):
        return self.sv_counts / self.total_frames


def evaluate_sequence(pred, record: SequenceRecord) -> SequenceReport:
    success, precision = success_and_precision_curves(pred, record.ground_truth)
    counts, total = sv_counts(record.ground_truth)
    return SequenceReport(
        record.name,
        total,
        tuple(sorted(record.attributes)),
        success,
        precision,
        auc(success),
        auc(precision),
        counts,
    )


def aggregate(reports):
    reports = sorted(reports, key=lambda r: r.name)
    return Aggregate(
        len(reports),
        np.mean([r.success for r in reports], axis=0),
        np.mean([r.precision for r in reports], axis=0),
        float(np.mean([r.auc_success for r in reports])),
        float(np.mean([r.auc_np for r in reports])),
    )


def attribute_report(reports, records=None):
    """Aggregate per attribute tag; tags carried by no sequence map to ``None``.

    ``records`` (optional) supplies the tags when they differ from those stored
    in the reports; sequence sets must match.
    """
    by_name = {r.name: r for r in reports}
    tags = {r.name: set(r.attributes) for r in reports}
    if records is not None:
        if {rec.name for rec in records} != set(by_name):
            raise DatasetError("attribute_report: reports and records cover different sequences")
        tags = {rec.name: set(rec.attributes) for rec in records}
    out = {}
    for tag in ATTRIBUTES:
        members = [by_name[n] for n in sorted(by_name) if tag in tags[n]]
        out[tag] = aggregate(members) if members else None
    return out


def _evaluate_job(args):
    pred, record = args
    return evaluate_sequence(pred, record)


def evaluate(records, results, workers=1, run_info=None) -> EvalReport:
    """``results`` maps sequence name to predicted boxes."""
    records = sorted(records, key=lambda r: r.name)
    missing = [r.name for r in records if r.name not in results]
    if missing:
        raise DatasetError(f"no results for sequences {missing}")
    jobs = [(results[r.name], r) for r in records]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            seq_reports = list(pool.map(_evaluate_job, jobs))
    else:
        seq_reports = [_evaluate_job(j) for j in jobs]
    counts = np.sum([r.sv_counts for r in seq_reports], axis=0)
    total = sum(r.n_frames for r in seq_reports)
    return EvalReport(
        {r.name: r for r in seq_reports},
        aggregate(seq_reports),
        attribute_report(seq_reports, records),
        counts,
        total,
        run_info,
    )


def load_results(results_dir, records):
    results_dir = Path(results_dir)
    results = {}
    for rec in records:
        path = results_dir / f"{rec.name}.txt"
        if not path.exists():
            raise DatasetError(f"missing result file {path}")
        boxes = read_boxes(path)
        if len(boxes) != len(rec):
            raise DatasetError(
                f"{path}: {len(boxes)} result lines but sequence has {len(rec)} frames"
            )
        results[rec.name] = boxes
    return results


def _curves(obj):
    return {
        "success": [float(v) for v in obj.success],
        "precision": [float(v) for v in obj.precision],
        "auc_success": obj.auc_success,
        "auc_np": obj.auc_np,
    }


def report_to_dict(report: EvalReport):
    sequences = {}
    for name, r in sorted(report.sequences.items()):
        entry = {"n_frames": r.n_frames, "attributes": list(r.attributes)}
        entry.update(_curves(r))
        entry["sv_histogram"] = [float(v) for v in r.sv_histogram]
        sequences[name] = entry
    attributes = {}
    for tag in ATTRIBUTES:
        agg = report.attributes.get(tag)
        attributes[tag] = None if agg is None else {"n_sequences": agg.n_sequences, **_curves(agg)}
    overall = {"n_sequences": report.overall.n_sequences, **_curves(report.overall)}
    return {
        "format": REPORT_FORMAT,
        "run": report.run_info,
        "thresholds": {
            "success": [float(v) for v in SUCCESS_THRESHOLDS],
            "np": [float(v) for v in NP_THRESHOLDS],
        },
        "overall": overall,
        "attributes": attributes,
        "sv_histogram": {
            "bin_edges": [float(v) for v in SV_EDGES],
            "total_frames": report.total_frames,
            "counts": [int(v) for v in report.sv_counts],
            "fractions": [float(v) for v in report.sv_histogram],
        },
        "sequences": sequences,
    }


def curves_csv(report_dict):
    """Flat ``scope,metric,threshold,value`` rows for plotting elsewhere."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["scope", "metric", "threshold", "value"])
    thresholds = report_dict["thresholds"]
    scopes = [("overall", report_dict["overall"])]
    scopes += [(f"attribute:{t}", a) for t, a in report_dict["attributes"].items() if a is not None]
    scopes += [(f"sequence:{n}", s) for n, s in report_dict["sequences"].items()]
    for scope, entry in scopes:
        for metric, key in (("success", "success"), ("np", "precision")):
            for t, v in zip(thresholds[metric], entry[key]):
                writer.writerow([scope, metric, repr(t), repr(v)])
    return buf.getvalue()


def csv_path_for(report_path):
    report_path = Path(report_path)
    return report_path.with_name(report_path.stem + "_curves.csv")


def write_report(report: EvalReport, path):
    d = report_to_dict(report)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(d, indent=1, sort_keys=False) + "\n")
    csv_path_for(path).write_text(curves_csv(d))
    return d


def read_report(path):
    try:
        d = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DatasetError(f"cannot read report {path}: {exc}") from None
    if d.get("format") != REPORT_FORMAT:
        raise DatasetError(f"{path}: not a {REPORT_FORMAT} document")
    return d
