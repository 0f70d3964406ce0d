"""Set aggregation of value vectors into one configuration seed.

Two variants share projections and the learned query: softmax attention
(standard path) and an elementwise-sigmoid variant whose per-value
weights stay independent, so clipping each weighted value bounds the
sum's sensitivity and calibrated Gaussian noise makes the released seed
differentially private. Value vectors are summed in a canonical byte
order, making permutation invariance exact rather than approximate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import autograd as ag
from . import nn
from .autograd import Tensor
from .dims import ModelDims
from .dp import PrivacyAccount

DEFAULT_K_STANDARD = 8192
DEFAULT_K_PRIVATE = 2048


@dataclass
class DpSeedParams:
    """Release-time settings for a private seed."""

    z: float  # noise multiplier
    delta: float
    s: Optional[float] = None  # clipping norm; None = the model's own


@dataclass
class ConfigSeed:
    """The dense configuration vector plus its provenance."""

    psi: np.ndarray
    k_used: int
    dp: Optional[PrivacyAccount] = None
    rng_seed: Optional[int] = None
    skipped_malformed: int = 0
    seed_id: str = ""
    created_at: float = 0.0


def add_mix_encoder(params: nn.ParamSet, rng, dims: ModelDims) -> None:
    params.add("mix.q", nn.glorot(rng, 1, dims.d_value, (1, dims.d_value)))
    nn.add_dense(params, rng, "mix.gq", dims.d_value, dims.attn_width)
    nn.add_dense(params, rng, "mix.gk", dims.d_value, dims.attn_width)
    nn.add_dense(params, rng, "mix.gv", dims.d_value, dims.attn_width)
    nn.add_dense(params, rng, "mix.out", dims.attn_width, dims.d_seed)


def canonical_order(values: np.ndarray) -> np.ndarray:
    """Deterministic row ordering by raw byte content."""
    return np.array(
        sorted(range(len(values)), key=lambda i: values[i].tobytes()),
        dtype=np.int64,
    )


def _sorted_rows(values: Tensor) -> Tensor:
    order = canonical_order(values.data)
    if np.array_equal(order, np.arange(len(order))):
        return values
    return ag.take_rows(values, order)


def attend_softmax(params: nn.ParamSet, values: Tensor) -> Tensor:
    """psi = out(sum_i softmax(gQ(q) . gK(v_i))_i * gV(v_i)); shape [1, d_seed]."""
    if values.data.ndim != 2 or len(values.data) == 0:
        raise ValueError("attend_softmax requires a non-empty [n, d_value] matrix")
    v = _sorted_rows(values)
    q = nn.dense(params, "mix.gq", params["mix.q"])  # [1, aw]
    keys = nn.dense(params, "mix.gk", v)  # [n, aw]
    scores = ag.matmul(q, ag.transpose(keys))  # [1, n]; no 1/sqrt(d) scaling
    weights = ag.softmax(scores, axis=-1)
    mixed = ag.matmul(weights, nn.dense(params, "mix.gv", v))  # [1, aw]
    return nn.dense(params, "mix.out", mixed)


def dp_weighted_values(params: nn.ParamSet, values: Tensor, s: float) -> Tensor:
    """Clipped sigmoid-weighted value rows; each row's L2 norm is <= s."""
    if s <= 0:
        raise ValueError(f"clip norm must be positive, got {s}")
    v = _sorted_rows(values)
    q = nn.dense(params, "mix.gq", params["mix.q"])
    keys = nn.dense(params, "mix.gk", v)
    scores = ag.matmul(q, ag.transpose(keys))  # [1, n]
    weights = ag.sigmoid(scores)  # independent per value; no normalization
    weighted = ag.transpose(weights) * nn.dense(params, "mix.gv", v)  # [n, aw]
    return ag.clip_by_norm(weighted, s, axis=-1)


def dp_prenoise_sum(params: nn.ParamSet, values: Tensor, s: float) -> Tensor:
    """The bounded-sensitivity sum the Gaussian noise is calibrated to."""
    clipped = dp_weighted_values(params, values, s)
    ones = Tensor(np.ones((1, len(clipped.data))))
    return ag.matmul(ones, clipped)  # [1, aw]


def attend_dp(
    params: nn.ParamSet,
    values: Tensor,
    s: float,
    z: float,
    rng: np.random.Generator,
) -> Tensor:
    """Private aggregation: per-component Gaussian noise with std z*s is
    added to the clipped sum; the output projection is post-processing."""
    if z < 0:
        raise ValueError(f"noise multiplier must be >= 0, got {z}")
    pre = dp_prenoise_sum(params, values, s)
    noise = Tensor(rng.normal(0.0, z * s, size=pre.data.shape))
    return nn.dense(params, "mix.out", pre + noise)
