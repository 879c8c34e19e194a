"""Pairwise scale-channel attention.

Queries and keys are length ``C*S`` vectors obtained by pooling a scale
stack spatially (average for queries, max for keys) and passing the pooled
``(C, S)`` map through a 1x1 scale convolution. Values keep their spatial
extent. The attention matrix is the softmax-normalised outer product of query
and key, so every (channel, scale) pair attends over all others.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError
from .se_backbone import ScaledTensor
from .tensor_core import global_pool, softmax

IDENTITY_TAPS = (0.0, 1.0, 0.0)


def _taps(values):
    t = np.asarray(values, dtype=np.float64).reshape(-1)
    if t.shape != (3,) or not np.all(np.isfinite(t)):
        raise ShapeError(f"scale-conv taps must be 3 finite values, got {values!r}")
    return t


@dataclass(frozen=True, eq=False)
class ScaleProjection:
    """Taps of the three 1x1 scale convolutions producing Q, K and V.

    Each is a 3-tap filter along the scale axis shared by all channels,
    zero-padded at the stack ends (so with ``S < 3`` the window is truncated
    to ``S``, and with ``S == 1`` only the centre tap acts).
    """

    q: np.ndarray = field(default_factory=lambda: _taps(IDENTITY_TAPS))
    k: np.ndarray = field(default_factory=lambda: _taps(IDENTITY_TAPS))
    v: np.ndarray = field(default_factory=lambda: _taps(IDENTITY_TAPS))

    def __post_init__(self):
        for name in ("q", "k", "v"):
            object.__setattr__(self, name, _taps(getattr(self, name)))

    @classmethod
    def random(cls, rng, scale=0.1):
        def one():
            return np.array(IDENTITY_TAPS) + rng.normal(0.0, scale, 3)

        return cls(one(), one(), one())


@dataclass(frozen=True, eq=False)
class AttentionWeights:
    self_corr: ScaleProjection = field(default_factory=ScaleProjection)
    self_apn: ScaleProjection = field(default_factory=ScaleProjection)
    cross: ScaleProjection = field(default_factory=ScaleProjection)
    gamma_self_corr: float = 0.1
    gamma_self_apn: float = 0.1
    gamma_cross: float = 0.1

    def __post_init__(self):
        for name in ("gamma_self_corr", "gamma_self_apn", "gamma_cross"):
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise ShapeError(f"{name} must be finite")
            object.__setattr__(self, name, value)


@dataclass(frozen=True, eq=False)
class QueryKey:
    q: np.ndarray
    k: np.ndarray


def scale_conv(x, taps):
    """1x1 scale convolution: filter axis 1 of ``(C, S, ...)`` with 3 taps."""
    x = np.asarray(x, dtype=np.float64)
    S = x.shape[1]
    pad = [(0, 0)] * x.ndim
    pad[1] = (1, 1)
    xp = np.pad(x, pad)
    return taps[0] * xp[:, 0:S] + taps[1] * xp[:, 1 : S + 1] + taps[2] * xp[:, 2 : S + 2]


def make_query_key(x: ScaledTensor, proj: ScaleProjection) -> QueryKey:
    q = scale_conv(global_pool(x.data, "avg"), proj.q).reshape(-1)
    k = scale_conv(global_pool(x.data, "max"), proj.k).reshape(-1)
    return QueryKey(q, k)


def make_value(x: ScaledTensor, proj: ScaleProjection):
    """Value matrix ``(C*S, H*W)``."""
    C, S, H, W = x.shape
    return scale_conv(x.data, proj.v).reshape(C * S, H * W)


def attention_matrix(q, k):
    """Row-stochastic ``(CS, CS)`` matrix ``softmax(outer(q, k))``."""
    return softmax(np.outer(q, k), axis=-1)


def attend(q, k, v):
    return attention_matrix(q, k) @ v


def sc_self_attention(x: ScaledTensor, proj: ScaleProjection, gamma) -> ScaledTensor:
    qk = make_query_key(x, proj)
    a = attend(qk.q, qk.k, make_value(x, proj)).reshape(x.shape)
    return x.replace(x.data + gamma * a)


def cross_attention_map(x_qk: ScaledTensor, x_v: ScaledTensor, proj: ScaleProjection):
    """Raw cross-attention term, shaped like ``x_v``: queries/keys from ``x_qk``."""
    if x_qk.channels != x_v.channels or x_qk.scales != x_v.scales:
        raise ShapeError(
            f"cross-attention: (channel, scale) = {x_qk.shape[:2]} vs {x_v.shape[:2]}"
        )
    qk = make_query_key(x_qk, proj)
    return attend(qk.q, qk.k, make_value(x_v, proj)).reshape(x_v.shape)


def sc_cross_attention(x_corr: ScaledTensor, x_apn: ScaledTensor, proj: ScaleProjection, gamma):
    """Refine ``x_apn`` with attention driven by ``x_corr``; keeps ``x_apn``'s shape."""
    a = cross_attention_map(x_corr, x_apn, proj)
    return x_apn.replace(x_apn.data + gamma * a)


def psan_forward(r_corr: ScaledTensor, f_apn: ScaledTensor, w: AttentionWeights) -> ScaledTensor:
    corr = sc_self_attention(r_corr, w.self_corr, w.gamma_self_corr)
    apn = sc_self_attention(f_apn, w.self_apn, w.gamma_self_apn)
    return sc_cross_attention(corr, apn, w.cross, w.gamma_cross)
