"""One-pass evaluation: initialise on frame 1 ground truth, never re-initialise."""
from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from ..config import TrackerConfig
from ..tracker import SiamSATracker
from ..weights import NetworkWeights
from .dataset import SequenceRecord, read_frame, write_boxes

RUN_INFO = "_run.json"


def run_ope(tracker, seq: SequenceRecord, frames=None):
    """Track ``seq`` once. ``frames`` may hold in-memory images; otherwise they
    are read from ``seq.frames``. Only ``seq.ground_truth[0]`` is consulted."""
    def frame(i):
        return frames[i] if frames is not None else read_frame(seq.frames[i])

    init_box = seq.ground_truth[0]
    tracker.init(frame(0), init_box)
    boxes = [init_box]
    for i in range(1, len(seq)):
        box, _ = tracker.track(frame(i))
        boxes.append(box)
    return boxes


def _track_one(args):
    cfg, weights, seq = args
    return seq.name, run_ope(SiamSATracker(cfg, weights), seq)


def track_dataset(records, cfg: TrackerConfig, weights: NetworkWeights, workers=1):
    """Run OPE on every record; returns ``{name: boxes}`` in name order."""
    jobs = [(cfg, weights, r) for r in sorted(records, key=lambda r: r.name)]
    if workers <= 1 or len(jobs) <= 1:
        results = [_track_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_track_one, jobs))
    return dict(sorted(results))


def write_results(out_dir, results, run_info=None):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, boxes in results.items():
        write_boxes(out / f"{name}.txt", boxes)
    if run_info is not None:
        (out / RUN_INFO).write_text(json.dumps(run_info, indent=2, sort_keys=True) + "\n")


def read_run_info(results_dir):
    path = Path(results_dir) / RUN_INFO
    if not path.exists():
        return None
    return json.loads(path.read_text())

