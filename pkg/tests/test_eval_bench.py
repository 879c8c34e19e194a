import math
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from siamsa.bbox import BBox
from siamsa.config import TrackerConfig
from siamsa.errors import DatasetError, InvalidInputError
from siamsa.eval_bench.dataset import ATTRIBUTES, SequenceRecord, load_dataset, load_sequence, write_sequence
from siamsa.eval_bench.metrics import SV_EDGES, sv_histogram
from siamsa.eval_bench.ope import run_ope, track_dataset, write_results
from siamsa.eval_bench.report import (
    attribute_report,
    evaluate,
    evaluate_sequence,
    load_results,
    read_report,
    write_report,
)
from siamsa.eval_bench.synth import SynthSpec, generate_dataset, synth_sequence, trajectory
from siamsa.tracker import SiamSATracker, StaticTracker
from siamsa.weights import NetworkWeights


def make_fixture(root, name="seq", n_frames=3, n_lines=3, attrs=("SV",)):
    d = Path(root) / name
    (d / "img").mkdir(parents=True)
    for i in range(1, n_frames + 1):
        Image.fromarray(np.full((12, 16, 3), i * 20, np.uint8)).save(d / "img" / f"{i:04d}.jpg")
    d.joinpath("groundtruth_rect.txt").write_text("".join(f"{i},20,30,40\n" for i in range(10, 10 + n_lines)))
    d.joinpath("attributes.txt").write_text("".join(f"{a}\n" for a in attrs))
    return d


def test_load_sequence_fixture(tmp_path):
    rec = load_sequence(make_fixture(tmp_path))
    assert rec.name == "seq" and len(rec) == 3
    assert rec.ground_truth[0] == BBox(10, 20, 30, 40)
    assert [p.name for p in rec.frames] == ["0001.jpg", "0002.jpg", "0003.jpg"]
    assert rec.attributes == {"SV"}


def test_frames_sorted_numerically(tmp_path):
    d = tmp_path / "s" / "img"
    d.mkdir(parents=True)
    for n in (10, 2, 1):
        Image.fromarray(np.zeros((4, 4, 3), np.uint8)).save(d / f"{n}.png")
    (tmp_path / "s" / "groundtruth_rect.txt").write_text("0,0,1,1\n" * 3)
    (tmp_path / "s" / "attributes.txt").write_text("")
    assert [p.name for p in load_sequence(tmp_path / "s").frames] == ["1.png", "2.png", "10.png"]


def test_count_mismatch_names_both_counts(tmp_path):
    with pytest.raises(DatasetError, match="5 frames but 4 annotation lines"):
        load_sequence(make_fixture(tmp_path, n_frames=5, n_lines=4))


def test_unknown_attribute_rejected(tmp_path):
    with pytest.raises(DatasetError, match="BLUR"):
        load_sequence(make_fixture(tmp_path, attrs=("SV", "BLUR")))


def test_bad_annotation_line(tmp_path):
    d = make_fixture(tmp_path)
    d.joinpath("groundtruth_rect.txt").write_text("1,2,3,4\n1,2,x,4\n1,2,3,4\n")
    with pytest.raises(DatasetError, match=":2:"):
        load_sequence(d)


def test_record_validation():
    with pytest.raises(DatasetError):
        SequenceRecord("a", ["f"], [BBox(0, 0, 0, 3)])
    with pytest.raises(DatasetError):
        SequenceRecord("a", ["f", "g"], [BBox(0, 0, 3, 3)])


def test_dataset_roundtrip(tmp_path):
    rec, frames = synth_sequence(SynthSpec(name="roundtrip", n_frames=4, area_growth=1.3), seed=2)
    loaded = write_sequence(tmp_path, rec.name, frames, rec.ground_truth, rec.attributes)
    assert loaded.ground_truth == rec.ground_truth
    assert load_dataset(tmp_path)[0].name == "roundtrip"


# synthetic sequences

def test_synth_constant_size_has_no_sv():
    rec, frames = synth_sequence(SynthSpec(n_frames=8), seed=0)
    assert all(b.w == rec.ground_truth[0].w and b.h == rec.ground_truth[0].h for b in rec.ground_truth)
    assert "SV" not in rec.attributes
    assert frames[0].shape == (240, 320, 3) and frames[0].dtype == np.uint8


def test_synth_area_doubling_is_not_sv():
    rec, _ = synth_sequence(SynthSpec(n_frames=8, area_growth=2.0), seed=0)
    assert rec.ground_truth[-1].area / rec.ground_truth[0].area == pytest.approx(2.0)
    assert "SV" not in rec.attributes


def test_synth_area_five_is_sv():
    rec, _ = synth_sequence(SynthSpec(n_frames=8, box=(140, 100, 30, 30), area_growth=5.0), seed=0)
    assert "SV" in rec.attributes
    hist = sv_histogram(rec.ground_truth)
    # final frame: log2 5 = 2.32 -> bin [2.3, 2.4)
    last_bin = int(np.searchsorted(SV_EDGES, math.log2(5.0), side="right")) - 1
    assert SV_EDGES[last_bin] == pytest.approx(2.3)
    assert hist[last_bin] >= 1 / 8 and hist.sum() > 0


def test_synth_rejects_out_of_frame_box():
    with pytest.raises(InvalidInputError, match="exceeds"):
        SynthSpec(box=(300, 10, 40, 40))
    with pytest.raises(InvalidInputError):
        SynthSpec(n_frames=0)


def test_synth_deterministic_and_attributes():
    spec = SynthSpec(n_frames=6, velocity=(30, 0), box=(10, 100, 30, 30), occlusion=(2, 4, 0.5))
    a, fa = synth_sequence(spec, seed=4)
    b, fb = synth_sequence(spec, seed=4)
    assert a.ground_truth == b.ground_truth and all(np.array_equal(x, y) for x, y in zip(fa, fb))
    assert {"FM", "POC"} <= a.attributes
    assert trajectory(spec)[1].cx - trajectory(spec)[0].cx == pytest.approx(30.0)


def test_generate_dataset_rejects_duplicates(tmp_path):
    with pytest.raises(InvalidInputError, match="duplicate"):
        generate_dataset([{"name": "a", "n_frames": 2}, {"name": "a", "n_frames": 2}], tmp_path)
    with pytest.raises(InvalidInputError, match="unknown"):
        generate_dataset([{"name": "b", "speed": 3}], tmp_path)


# one-pass evaluation

class GuardedTruth(list):
    """Ground truth that refuses reads past the first frame."""

    def __getitem__(self, i):
        if i != 0:
            raise AssertionError(f"ground truth frame {i} consulted")
        return super().__getitem__(i)

    def __iter__(self):
        raise AssertionError("ground truth iterated")


def test_run_ope_contract():
    rec, frames = synth_sequence(SynthSpec(n_frames=3, frame_width=160, frame_height=120, box=(60, 40, 30, 30)), seed=1)
    guarded = SequenceRecord(rec.name, rec.frames, GuardedTruth(rec.ground_truth), rec.attributes)
    out = run_ope(SiamSATracker(TrackerConfig(seed=1)), guarded, frames)
    assert len(out) == 3 and out[0] == rec.ground_truth[0]

    single = SequenceRecord("one", ["x"], [rec.ground_truth[0]])
    assert run_ope(SiamSATracker(TrackerConfig(seed=1)), single, frames[:1]) == [rec.ground_truth[0]]


def test_results_bytes_repeatable(tmp_path):
    records = generate_dataset([{"name": "a", "n_frames": 3, "frame_width": 160, "frame_height": 120,
                                 "box": [60, 40, 30, 30]}], tmp_path / "data", seed=3)
    cfg = TrackerConfig(seed=2)
    w = NetworkWeights.init(cfg)
    write_results(tmp_path / "r1", track_dataset(records, cfg, w))
    write_results(tmp_path / "r2", track_dataset(records, cfg, w))
    assert (tmp_path / "r1" / "a.txt").read_bytes() == (tmp_path / "r2" / "a.txt").read_bytes()
    assert load_results(tmp_path / "r1", records)["a"][0] == records[0].ground_truth[0]


# reports

def fake_record(name, attrs, n=4):
    gt = [BBox(10 + i, 10, 20, 20) for i in range(n)]
    return SequenceRecord(name, [f"{i}.png" for i in range(n)], gt, frozenset(attrs))


def shifted(rec, dx):
    return [BBox(b.x + dx, b.y, b.w, b.h) for b in rec.ground_truth]


def test_attribute_report_all_tagged_equals_global():
    recs = [fake_record("a", {"SV"}), fake_record("b", {"SV", "FM"})]
    results = {"a": shifted(recs[0], 3), "b": shifted(recs[1], 8)}
    rep = evaluate(recs, results)
    assert rep.attributes["SV"].auc_success == rep.overall.auc_success
    assert np.array_equal(rep.attributes["SV"].success, rep.overall.success)
    assert rep.attributes["OV"] is None


def test_attribute_report_single_and_mean():
    recs = [fake_record(t, {t}) for t in ATTRIBUTES]
    reports = [evaluate_sequence(shifted(r, k), r) for k, r in enumerate(recs)]
    agg = attribute_report(reports, recs)
    for rep in reports:
        assert agg[rep.attributes[0]].auc_success == rep.auc_success

    a, b = fake_record("a", {"LI"}), fake_record("b", {"LI"})
    ra, rb = evaluate_sequence(shifted(a, 2), a), evaluate_sequence(shifted(b, 9), b)
    mean = (ra.auc_success + rb.auc_success) / 2.0
    assert attribute_report([ra, rb], [a, b])["LI"].auc_success == pytest.approx(mean, abs=1e-15)

    with pytest.raises(DatasetError):
        attribute_report([ra], [a, b])


def test_aggregate_independent_of_order_and_workers(tmp_path):
    recs = [fake_record(n, {"SV"}, n=5) for n in ("c", "a", "b")]
    results = {r.name: shifted(r, k + 1) for k, r in enumerate(recs)}
    one = evaluate(recs, results)
    rev = evaluate(list(reversed(recs)), results, workers=2)
    write_report(one, tmp_path / "one.json")
    write_report(rev, tmp_path / "rev.json")
    assert (tmp_path / "one.json").read_bytes() == (tmp_path / "rev.json").read_bytes()
    assert (tmp_path / "one_curves.csv").read_bytes() == (tmp_path / "rev_curves.csv").read_bytes()
    d = read_report(tmp_path / "one.json")
    assert d["overall"]["n_sequences"] == 3 and list(d["sequences"]) == ["a", "b", "c"]


def test_oracle_and_static_trackers():
    rec, frames = synth_sequence(SynthSpec(n_frames=10, box=(120, 90, 40, 40), area_growth=4.0), seed=0)
    oracle = evaluate_sequence(rec.ground_truth, rec)
    assert oracle.auc_success == pytest.approx(0.995, abs=1e-9) and oracle.auc_np == pytest.approx(1.0, abs=1e-9)
    static = evaluate_sequence(run_ope(StaticTracker(), rec, frames), rec)
    assert static.auc_success < oracle.auc_success


def test_missing_results_rejected(tmp_path):
    rec = fake_record("a", set())
    with pytest.raises(DatasetError, match="missing result"):
        load_results(tmp_path, [rec])
    (tmp_path / "a.txt").write_text("1,2,3,4\n")
    with pytest.raises(DatasetError, match="1 result lines"):
        load_results(tmp_path, [rec])
