"""Quick oracle and invariant checks runnable from an installed package.

Each check compares a library routine against an independent brute-force
computation. ``run_selftest`` prints one PASS/FAIL line per check.
"""
from __future__ import annotations

import numpy as np

from .bbox import BBox
from .config import TrackerConfig
from .eval_bench.metrics import auc, iou, success_and_precision_curves, sv_histogram
from .eval_bench.ope import run_ope
from .eval_bench.synth import SynthSpec, synth_sequence
from .psa import AttentionWeights, ScaleProjection, attention_matrix, psan_forward
from .sa_apn import FusionWeights, fuse_apn_features
from .se_backbone import ScaledTensor, se_conv
from .tensor_core import ConvKernel
from .tracker import SiamSATracker


def _naive_dilated_conv(x, w, b, d):
    C_in, H, W = x.shape
    C_out, _, kh, kw = w.shape
    ph, pw = d * (kh // 2), d * (kw // 2)
    out = np.zeros((C_out, H, W))
    for o in range(C_out):
        for r in range(H):
            for c in range(W):
                acc = b[o]
                for ci in range(C_in):
                    for i in range(kh):
                        for j in range(kw):
                            rr, cc = r + d * i - ph, c + d * j - pw
                            if 0 <= rr < H and 0 <= cc < W:
                                acc += w[o, ci, i, j] * x[ci, rr, cc]
                out[o, r, c] = acc
    return out


def check_se_conv(rng, cases=10):
    worst = 0.0
    for _ in range(cases):
        C, H, W = rng.integers(1, 4), rng.integers(3, 8), rng.integers(3, 8)
        x = ScaledTensor(rng.normal(size=(C, 3, H, W)), (1, 2, 3))
        k = ConvKernel(rng.normal(size=(2, C, 3, 3)), rng.normal(size=2))
        y = se_conv(x, k, 1)
        for s, d in enumerate(x.scale_dilations):
            ref = _naive_dilated_conv(x.data[:, s], k.weights, k.bias, d)
            worst = max(worst, float(np.abs(y.data[:, s] - ref).max()))
    return worst <= 1e-9, f"max abs diff {worst:.2e}"


def check_attention(rng):
    x = ScaledTensor(rng.normal(size=(3, 3, 4, 4)), (1, 2, 3))
    f = ScaledTensor(rng.normal(size=(3, 3, 4, 4)), (1, 2, 3))
    q, k = rng.normal(size=9) * 5, rng.normal(size=9) * 5
    rows = np.abs(attention_matrix(q, k).sum(axis=1) - 1).max()
    zero = AttentionWeights(gamma_self_corr=0.0, gamma_self_apn=0.0, gamma_cross=0.0)
    passthrough = np.array_equal(psan_forward(x, f, zero).data, f.data)
    v = rng.normal(size=(9, 5))
    uniform = np.abs(attention_matrix(np.ones(9), np.ones(9)) @ v - v.mean(axis=0)).max()
    ok = rows <= 1e-6 and passthrough and uniform <= 1e-6
    return ok, f"row-sum err {rows:.1e}, pass-through {passthrough}, uniform err {uniform:.1e}"


def check_fusion(rng):
    C = 3
    r_d = ScaledTensor(rng.normal(size=(C, 3, 5, 5)), (1, 2, 3))
    r_s = ScaledTensor(rng.normal(size=(C, 3, 5, 5)), (1, 2, 3))
    w = FusionWeights(0.0, 0.0, ConvKernel(rng.normal(size=(C, 2 * C, 1, 1)), np.zeros(C)),
                      ScaleProjection.random(rng))
    same = np.array_equal(fuse_apn_features(r_d, r_s, w).data, r_d.data)
    return same, "lambda1 = lambda2 = 0 reproduces deep correlation" if same else "mismatch"


def check_metrics():
    a, b = BBox(0, 0, 2, 2), BBox(1, 1, 2, 2)
    v = iou(a, b)
    gt = [BBox(10, 10, 20, 30), BBox(12, 11, 20, 30), BBox(15, 9, 22, 31)]
    s, p = success_and_precision_curves(gt, gt)
    ok = abs(v - 1 / 7) < 1e-12 and abs(auc(s) - 0.995) < 1e-9 and abs(auc(p) - 1.0) < 1e-9
    ok = ok and abs(auc(np.linspace(1, 0, 101)) - 0.5) < 1e-9
    return ok, f"iou {v:.6f}, oracle AUC {auc(s):.6f} / {auc(p):.6f}"


def check_sv():
    gt = [BBox(0, 0, 10, 10), BBox(0, 0, 20, 20), BBox(0, 0, 10, 20)]
    hist = sv_histogram(gt)
    expected = np.zeros(15)
    expected[10] = 1 / 3
    return bool(np.array_equal(hist, expected)), f"bins {np.nonzero(hist)[0].tolist()}"


def check_tracker_determinism():
    record, frames = synth_sequence(SynthSpec(n_frames=3, frame_width=160, frame_height=120,
                                              box=(60, 40, 30, 30)), seed=1)
    cfg = TrackerConfig(seed=3)
    a = run_ope(SiamSATracker(cfg), record, frames)
    b = run_ope(SiamSATracker(cfg), record, frames)
    return a == b, f"{len(a)} frames, identical={a == b}"


def run_selftest(out=print):
    rng = np.random.default_rng(1234)
    checks = [
        ("se_conv equals per-slice dilated convolution", lambda: check_se_conv(rng)),
        ("attention contracts", lambda: check_attention(rng)),
        ("fusion degenerates to deep correlation", lambda: check_fusion(rng)),
        ("metric oracles", check_metrics),
        ("SV histogram", check_sv),
        ("tracker determinism", check_tracker_determinism),
    ]
    failed = 0
    for name, fn in checks:
        ok, detail = fn()
        failed += not ok
        out(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return failed == 0
