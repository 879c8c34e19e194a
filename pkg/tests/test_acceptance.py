"""Acceptance gate: the eight release criteria, one test each.

Every test records a one-line PASS/FAIL verdict; the lines are printed in the
pytest terminal summary, and running this file directly prints them too.
"""
import itertools
import json
import time
from unittest import mock

import numpy as np
import pytest

import oracles
from siamsa import cli, psa, sa_apn
from siamsa.bbox import BBox
from siamsa.config import TrackerConfig
from siamsa.eval_bench.metrics import auc, iou, success_and_precision_curves, sv_histogram
from siamsa.eval_bench.ope import run_ope
from siamsa.eval_bench.report import evaluate_sequence
from siamsa.eval_bench.synth import SynthSpec, synth_sequence
from siamsa.psa import AttentionWeights, ScaleProjection, attention_matrix, psan_forward
from siamsa.psa import sc_cross_attention, sc_self_attention
from siamsa.sa_apn import FusionWeights, fuse_apn_features
from siamsa.se_backbone import ScaledTensor, se_conv
from siamsa.tensor_core import ConvKernel
from siamsa.tracker import SiamSATracker, StaticTracker
from siamsa.weights import NetworkWeights

VERDICTS = {}


def record(number, title, ok, detail):
    VERDICTS[number] = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    return ok


def test_1_scale_equivariance_oracle():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        c, h, w = (int(v) for v in (rng.integers(1, 5), rng.integers(1, 11), rng.integers(1, 11)))
        c_out = int(rng.integers(1, 4))
        x = ScaledTensor(rng.normal(size=(c, 3, h, w)), (1, 2, 3))
        k = ConvKernel(rng.normal(size=(c_out, c, 3, 3)), rng.normal(size=c_out))
        out = se_conv(x, k, inter_scale=1)
        for s, d in enumerate(x.scale_dilations):
            ref = oracles.conv2d_loops(x.data[:, s], k.weights, k.bias, d)
            worst = max(worst, float(np.abs(out.data[:, s] - ref).max()))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 10.0
    assert record(1, "se_conv equals per-slice dilated convolution", ok,
                  f"200 cases, max abs diff {worst:.1e} (<= 1e-9), {elapsed:.1f} s (< 10 s)")


def test_2_attention_contracts():
    rng = np.random.default_rng(202)
    worst_rows = worst_uniform = 0.0
    exact = True
    for _ in range(100):
        c, h, w = (int(v) for v in (rng.integers(1, 5), rng.integers(1, 7), rng.integers(1, 7)))
        x = ScaledTensor(rng.normal(size=(c, 3, h, w)), (1, 2, 3))
        y = ScaledTensor(rng.normal(size=(c, 3, int(rng.integers(1, 7)), int(rng.integers(1, 7)))), (1, 2, 3))
        proj = ScaleProjection.random(rng, scale=0.5)
        q, k = rng.normal(0, 3, size=3 * c), rng.normal(0, 3, size=3 * c)
        worst_rows = max(worst_rows, float(np.abs(attention_matrix(q, k).sum(axis=1) - 1).max()))
        exact &= np.array_equal(sc_self_attention(x, proj, 0.0).data, x.data)
        exact &= np.array_equal(sc_cross_attention(x, y, proj, 0.0).data, y.data)
        zero = AttentionWeights(proj, proj, proj, 0.0, 0.0, 0.0)
        exact &= np.array_equal(psan_forward(x, y, zero).data, y.data)
        # uniform query: a constant driver makes every query entry equal
        const = ScaledTensor(np.full((c, 3, h, w), rng.normal()), (1, 2, 3))
        uni = ScaleProjection(q=[0.0, 1.0, 0.0], k=[0.0, 1.0, 0.0], v=proj.v)
        got = sc_cross_attention(const, y, uni, 1.0).data - y.data
        v = oracles.value_matrix(y.data, uni.v)
        closed = np.broadcast_to(v.mean(axis=0), v.shape).reshape(y.shape)
        worst_uniform = max(worst_uniform, float(np.abs(got - closed).max()))
    ok = worst_rows <= 1e-6 and exact and worst_uniform <= 1e-6
    assert record(2, "attention contracts", ok,
                  f"100 cases, row-sum err {worst_rows:.1e}, gamma=0 bit-exact {bool(exact)}, "
                  f"uniform-query err {worst_uniform:.1e}")


def test_3_fusion_degeneration():
    rng = np.random.default_rng(303)
    same = 0
    for _ in range(50):
        c, h, w = (int(v) for v in (rng.integers(1, 5), rng.integers(1, 9), rng.integers(1, 9)))
        r_d = ScaledTensor(rng.normal(size=(c, 3, h, w)), (1, 2, 3))
        r_s = ScaledTensor(rng.normal(size=(c, 3, h, w)), (1, 2, 3))
        fw = FusionWeights(0.0, 0.0, ConvKernel(rng.normal(size=(c, 2 * c, 1, 1)), rng.normal(size=c)),
                           ScaleProjection.random(rng, scale=0.5))
        same += bool(np.array_equal(fuse_apn_features(r_d, r_s, fw).data, r_d.data))
    assert record(3, "lambda1 = lambda2 = 0 gives deep correlation exactly", same == 50,
                  f"{same}/50 instances bit-identical")


CONFIGS = {
    "baseline": (False, False),
    "+sa-apn": (False, True),
    "+psan": (True, False),
    "full": (True, True),
}


def test_4_ablation_lattice():
    rec, frames = synth_sequence(
        SynthSpec(name="lattice", n_frames=20, frame_width=240, frame_height=180, box=(90, 70, 40, 34),
                  velocity=(1.5, 0.5), area_growth=2.5),
        seed=404,
    )
    weights = NetworkWeights.init(TrackerConfig(seed=404))
    outputs, calls, problems = {}, {}, []
    for name, (use_psan, use_apn) in CONFIGS.items():
        cfg = TrackerConfig(seed=404, enable_psan=use_psan, enable_sa_apn=use_apn)
        with mock.patch.object(psa, "psan_forward", wraps=psa.psan_forward) as p, \
                mock.patch.object(sa_apn, "sa_apn_forward", wraps=sa_apn.sa_apn_forward) as s:
            boxes = run_ope(SiamSATracker(cfg, weights), rec, frames)
        outputs[name] = boxes
        calls[name] = (p.call_count, s.call_count)
        expected = (19 if use_psan else 0, 19 if use_apn else 0)
        if calls[name] != expected:
            problems.append(f"{name} calls {calls[name]} != {expected}")
        if len(boxes) != 20 or not all(b.is_finite() and b.w > 0 and b.h > 0 for b in boxes):
            problems.append(f"{name} produced invalid boxes")
    for a, b in itertools.combinations(CONFIGS, 2):
        if outputs[a] == outputs[b]:
            problems.append(f"{a} and {b} agree on every frame")
    ok = not problems
    detail = "4 configs x 20 frames; (psan, sa-apn) calls " + ", ".join(
        f"{n}={c}" for n, c in calls.items()) + "; all pairs differ" if ok else "; ".join(problems)
    assert record(4, "ablation lattice", ok, detail)


def test_5_metric_oracles():
    rec, _ = synth_sequence(SynthSpec(n_frames=15, velocity=(2, 1), area_growth=3.0), seed=505)
    oracle = evaluate_sequence(list(rec.ground_truth), rec)
    # IoU = 1 fails "> 1.0" only at the last threshold, so the success maximum is 1 - 0.5/100
    max_success, max_np = 1.0 - 0.5 / 100, 1.0
    auc_ok = abs(oracle.auc_success - max_success) <= 1e-9 and abs(oracle.auc_np - max_np) <= 1e-9

    rng = np.random.default_rng(505)
    worst = 0.0
    for _ in range(1000):
        a = tuple(int(v) for v in (*rng.integers(0, 40, 2), *rng.integers(1, 25, 2)))
        b = tuple(int(v) for v in (*rng.integers(0, 40, 2), *rng.integers(1, 25, 2)))
        worst = max(worst, abs(iou(BBox(*a), BBox(*b)) - oracles.raster_iou(a, b)))
    linear = auc(np.linspace(1.0, 0.0, 101))
    ok = auc_ok and worst <= 1e-3 and abs(linear - 0.5) <= 1e-9
    assert record(5, "metric oracles", ok,
                  f"oracle AUC {oracle.auc_success:.12f}/{oracle.auc_np:.12f} "
                  f"(max {max_success}/{max_np}), 1000 raster IoU max err {worst:.1e}, "
                  f"linear AUC {linear:.12f}")


def test_6_sv_hand_enumeration():
    # six frames with area ratio 2 ** (0.5 t): |log2 R| = 0, 0.5, 1.0, 1.5, 2.0, 2.5
    rec, _ = synth_sequence(SynthSpec(n_frames=6, box=(150, 110, 20, 20), area_growth=2 ** 2.5), seed=606)
    # 1.0 is not > 1 and 2.5 is past the last bin, so only 1.5 -> [1.5, 1.6) and 2.0 -> [2.0, 2.1)
    expected = np.zeros(15)
    expected[5] = expected[10] = 1 / 6
    zoom = sv_histogram(rec.ground_truth)

    ratios = [1, 2, 0.5, 4, 0.25, 2 ** 2.5, 6, 3, 2.1, 5, 1 / 3, 2 ** 1.1, 2 ** 2.49]
    hand_bins = [10, 10, 5, 0, 13, 5, 1, 14]
    expected_b = np.bincount(hand_bins, minlength=15) / len(ratios)
    listed = sv_histogram([BBox(0, 0, 10.0 * r, 10.0) for r in ratios])
    ok = np.array_equal(zoom, expected) and np.array_equal(listed, expected_b)
    assert record(6, "SV histogram matches hand enumeration", ok,
                  f"zoom bins {np.nonzero(zoom)[0].tolist()} (expected [5, 10]), "
                  f"listed bins {np.nonzero(listed)[0].tolist()} exact={bool(np.array_equal(listed, expected_b))}")


DETERMINISM_SPEC = {"sequences": [
    {"name": "calm", "n_frames": 5, "frame_width": 200, "frame_height": 150, "box": [80, 55, 36, 32]},
    {"name": "zoom", "n_frames": 5, "frame_width": 200, "frame_height": 150, "box": [85, 60, 24, 24],
     "area_growth": 4.0},
    {"name": "pan", "n_frames": 5, "frame_width": 200, "frame_height": 150, "box": [30, 60, 30, 26],
     "velocity": [6, 1]},
    {"name": "cover", "n_frames": 5, "frame_width": 200, "frame_height": 150, "box": [80, 50, 40, 40],
     "occlusion": [2, 4, 0.5]},
]}


def _run_cli(tmp, data, tag, workers):
    out, rep = tmp / f"res_{tag}", tmp / f"rep_{tag}.json"
    assert cli.main(["track", "--dataset", str(data), "--out", str(out), "--seed", "7",
                     "--workers", str(workers)]) == 0
    assert cli.main(["eval", "--dataset", str(data), "--results", str(out), "--report", str(rep),
                     "--workers", str(workers)]) == 0
    files = {p.name: p.read_bytes() for p in sorted(out.iterdir())}
    files["report"] = rep.read_bytes()
    files["curves"] = (tmp / f"rep_{tag}_curves.csv").read_bytes()
    return files


def test_7_determinism(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps(DETERMINISM_SPEC))
    assert cli.main(["synth", "--spec", str(spec), "--out", str(tmp_path / "data"), "--seed", "7"]) == 0
    a = _run_cli(tmp_path, tmp_path / "data", "a", 1)
    b = _run_cli(tmp_path, tmp_path / "data", "b", 1)
    c = _run_cli(tmp_path, tmp_path / "data", "c", 4)
    ok = a == b == c and len(a) == 4 + 1 + 2
    assert record(7, "determinism", ok,
                  f"{len(a)} files byte-identical across 2 runs (workers=1) and workers=4: {ok}")


def test_8_sv_sensitivity():
    start = time.perf_counter()
    aucs = []
    for growth in (1.0, 2.0, 4.0):
        rec, frames = synth_sequence(
            SynthSpec(name=f"zoom{growth:g}", n_frames=30, box=(140, 100, 40, 40), area_growth=growth), seed=808
        )
        boxes = run_ope(StaticTracker(), rec, frames)
        s, _ = success_and_precision_curves(boxes, rec.ground_truth)
        aucs.append(auc(s))
    elapsed = time.perf_counter() - start
    ok = aucs[0] > aucs[1] > aucs[2] and elapsed < 60.0
    assert record(8, "static-box success AUC falls with zoom", ok,
                  "AUC at area growth 1x/2x/4x = " + " > ".join(f"{v:.4f}" for v in aucs)
                  + f", {elapsed:.1f} s (< 60 s)")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
