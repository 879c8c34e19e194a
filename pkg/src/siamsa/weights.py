"""Network parameter bank and its text file format.

File layout (all lines UTF-8)::

    siamsa-weights 1
    seed 7
    array backbone.0.weights 8,3,3,3
    <row-major values separated by spaces>
    array attention.gamma_cross scalar
    0.1
    ...

Values are written with shortest round-trip ``repr`` so a save/load cycle is
bit-exact.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import TrackerConfig
from .errors import InvalidInputError
from .psa import AttentionWeights, ScaleProjection
from .sa_apn import AGNWeights, FusionWeights
from .se_backbone import init_backbone
from .tensor_core import ConvKernel

FORMAT_TAG = "siamsa-weights"
FORMAT_VERSION = 1

AGN_HIDDEN = 8
# offset layers start near zero so an untrained tracker roughly holds its box
OFFSET_STD = 1e-3
CLS_PRIOR = 2.0


@dataclass(frozen=True, eq=False)
class NetworkWeights:
    backbone: tuple
    se_bank: tuple
    attention: AttentionWeights
    fusion: FusionWeights
    agn: AGNWeights
    cls_head: ConvKernel
    reg_head: ConvKernel
    seed: int | None = None

    @classmethod
    def init(cls, cfg: TrackerConfig):
        """Seeded random initialisation for ``cfg`` (``cfg.seed``)."""
        rng = np.random.default_rng(cfg.seed)
        bb = cfg.backbone
        backbone = tuple(init_backbone(bb, rng))
        C = bb.channels

        def he(shape):
            fan_in = shape[1] * shape[2] * shape[3]
            return rng.normal(0.0, np.sqrt(2.0 / fan_in), shape)

        se_bank = tuple(ConvKernel(he((C, C, 3, 3)), np.zeros(C)) for _ in range(cfg.inter_scale))
        attention = AttentionWeights(
            ScaleProjection.random(rng), ScaleProjection.random(rng), ScaleProjection.random(rng)
        )
        proj = np.concatenate([np.eye(C), np.eye(C)], axis=1) / 2.0
        proj = proj + rng.normal(0.0, 0.05, proj.shape)
        fusion = FusionWeights(
            0.5, 0.5, ConvKernel(proj[:, :, None, None], np.zeros(C)), ScaleProjection.random(rng)
        )
        agn = AGNWeights(
            ConvKernel(he((AGN_HIDDEN, C, 3, 3)), np.zeros(AGN_HIDDEN)),
            ConvKernel(rng.normal(0.0, OFFSET_STD, (4, AGN_HIDDEN, 3, 3)), np.zeros(4)),
        )
        # correlation prior: foreground logit grows with the mean normalised response
        cls_w = rng.normal(0.0, 0.05, (2, C, 3, 3))
        cls_w[1, :, 1, 1] += CLS_PRIOR / C
        cls_w[0, :, 1, 1] -= CLS_PRIOR / C
        cls_head = ConvKernel(cls_w, np.zeros(2))
        reg_head = ConvKernel(rng.normal(0.0, OFFSET_STD, (4, C, 3, 3)), np.zeros(4))
        return cls(backbone, se_bank, attention, fusion, agn, cls_head, reg_head, cfg.seed)

    def to_arrays(self):
        arrays = {}

        def kernel(prefix, k):
            arrays[f"{prefix}.weights"] = k.weights
            arrays[f"{prefix}.bias"] = k.bias

        def projection(prefix, p):
            for name in ("q", "k", "v"):
                arrays[f"{prefix}.{name}"] = getattr(p, name)

        for i, k in enumerate(self.backbone):
            kernel(f"backbone.{i}", k)
        for i, k in enumerate(self.se_bank):
            kernel(f"se.{i}", k)
        a = self.attention
        projection("attention.self_corr", a.self_corr)
        projection("attention.self_apn", a.self_apn)
        projection("attention.cross", a.cross)
        for name in ("gamma_self_corr", "gamma_self_apn", "gamma_cross"):
            arrays[f"attention.{name}"] = np.array(getattr(a, name))
        f = self.fusion
        arrays["fusion.lambda1"] = np.array(f.lambda1)
        arrays["fusion.lambda2"] = np.array(f.lambda2)
        kernel("fusion.proj", f.proj)
        projection("fusion.cross", f.cross)
        kernel("agn.hidden", self.agn.hidden)
        kernel("agn.out", self.agn.out)
        kernel("head.cls", self.cls_head)
        kernel("head.reg", self.reg_head)
        return arrays

    @classmethod
    def from_arrays(cls, arrays, seed=None):
        arrays = dict(arrays)

        def take(name):
            try:
                return arrays.pop(name)
            except KeyError:
                raise InvalidInputError(f"weights: missing array {name!r}") from None

        def kernel(prefix):
            return ConvKernel(take(f"{prefix}.weights"), take(f"{prefix}.bias"))

        def projection(prefix):
            return ScaleProjection(take(f"{prefix}.q"), take(f"{prefix}.k"), take(f"{prefix}.v"))

        def indexed(prefix):
            out = []
            while f"{prefix}.{len(out)}.weights" in arrays:
                out.append(kernel(f"{prefix}.{len(out)}"))
            return tuple(out)

        backbone = indexed("backbone")
        se_bank = indexed("se")
        attention = AttentionWeights(
            projection("attention.self_corr"),
            projection("attention.self_apn"),
            projection("attention.cross"),
            float(take("attention.gamma_self_corr")),
            float(take("attention.gamma_self_apn")),
            float(take("attention.gamma_cross")),
        )
        fusion = FusionWeights(
            float(take("fusion.lambda1")),
            float(take("fusion.lambda2")),
            kernel("fusion.proj"),
            projection("fusion.cross"),
        )
        agn = AGNWeights(kernel("agn.hidden"), kernel("agn.out"))
        weights = cls(
            backbone, se_bank, attention, fusion, agn, kernel("head.cls"), kernel("head.reg"), seed
        )
        if arrays:
            raise InvalidInputError(f"weights: unexpected arrays {sorted(arrays)}")
        return weights

    def check_compatible(self, cfg: TrackerConfig):
        bb = cfg.backbone
        if len(self.backbone) != len(bb.layers):
            raise InvalidInputError(f"weights have {len(self.backbone)} backbone layers, config {len(bb.layers)}")
        cin = bb.in_channels
        for i, (k, spec) in enumerate(zip(self.backbone, bb.layers)):
            if k.weights.shape != (spec.out_channels, cin, spec.kernel, spec.kernel):
                raise InvalidInputError(f"backbone layer {i}: weights shape {k.weights.shape} does not fit config")
            cin = spec.out_channels
        if len(self.se_bank) != cfg.inter_scale:
            raise InvalidInputError(
                f"weights carry {len(self.se_bank)} scale kernels but inter_scale is {cfg.inter_scale}"
            )


def save_weights(weights: NetworkWeights, path):
    lines = [f"{FORMAT_TAG} {FORMAT_VERSION}"]
    if weights.seed is not None:
        lines.append(f"seed {weights.seed}")
    for name, arr in weights.to_arrays().items():
        arr = np.asarray(arr, dtype=np.float64)
        shape = ",".join(str(n) for n in arr.shape) if arr.ndim else "scalar"
        lines.append(f"array {name} {shape}")
        lines.append(" ".join(repr(float(v)) for v in arr.reshape(-1)))
    Path(path).write_text("\n".join(lines) + "\n")


def read_weight_arrays(path):
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].split()[:1] != [FORMAT_TAG]:
        raise InvalidInputError(f"{path}: not a {FORMAT_TAG} file")
    version = int(lines[0].split()[1])
    if version != FORMAT_VERSION:
        raise InvalidInputError(f"{path}: unsupported weights version {version}")
    seed = None
    arrays = {}
    i = 1
    while i < len(lines):
        parts = lines[i].split()
        if not parts:
            i += 1
            continue
        if parts[0] == "seed":
            seed = int(parts[1])
            i += 1
            continue
        if parts[0] != "array" or len(parts) != 3 or i + 1 >= len(lines):
            raise InvalidInputError(f"{path}:{i + 1}: malformed array header {lines[i]!r}")
        name, shape_text = parts[1], parts[2]
        shape = () if shape_text == "scalar" else tuple(int(n) for n in shape_text.split(","))
        values = np.array([float(v) for v in lines[i + 1].split()], dtype=np.float64)
        if values.size != int(np.prod(shape)):
            raise InvalidInputError(
                f"{path}: array {name} declares shape {shape} but holds {values.size} values"
            )
        arrays[name] = values.reshape(shape)
        i += 2
    return arrays, seed


def load_weights(path):
    arrays, seed = read_weight_arrays(path)
    return NetworkWeights.from_arrays(arrays, seed)
