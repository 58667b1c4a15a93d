"""Building blocks shared by both models: linear maps, positional encoding,
multi-head attention."""

from __future__ import annotations

import math

import numpy as np

from ..errors import InvalidArgumentError
from ..rng import Rng
from ..tensor import (
    Tensor,
    affine,
    matmul,
    reshape,
    scaled_attention,
    transpose,
)


def xavier_uniform(rng: Rng, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    shape = shape if shape is not None else (fan_in, fan_out)
    return (rng.uniform(*shape) * 2.0 - 1.0) * limit


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    return affine(x, w, b) if b is not None else matmul(x, w)


def positional_encoding(seq_len: int, d_model: int, pe_n: float = 10_000.0) -> np.ndarray:
    """Sinusoidal table: PE[k, 2i] = sin(k / pe_n^(2i/d)), PE[k, 2i+1] = cos(...)."""
    if d_model % 2 != 0:
        raise InvalidArgumentError(f"d_model must be even, got {d_model}")
    k = np.arange(seq_len, dtype=np.float64)[:, None]
    denom = pe_n ** (2.0 * np.arange(d_model // 2, dtype=np.float64) / d_model)
    table = np.empty((seq_len, d_model), dtype=np.float64)
    table[:, 0::2] = np.sin(k / denom)
    table[:, 1::2] = np.cos(k / denom)
    return table


def causal_mask(seq_len: int) -> np.ndarray:
    """(seq, seq) additive mask: -inf strictly above the diagonal."""
    mask = np.zeros((seq_len, seq_len), dtype=np.float64)
    mask[np.triu_indices(seq_len, k=1)] = -np.inf
    return mask


def split_heads(x: Tensor, heads: int) -> Tensor:
    """(B, n, d) -> (B, heads, n, d/heads)."""
    b, n, d = x.shape
    return transpose(reshape(x, (b, n, heads, d // heads)), (0, 2, 1, 3))


def merge_heads(x: Tensor) -> Tensor:
    """(B, heads, n, dh) -> (B, n, heads*dh)."""
    b, h, n, dh = x.shape
    return reshape(transpose(x, (0, 2, 1, 3)), (b, n, h * dh))


def multi_head_attention(
    queries: Tensor,
    keys: Tensor,
    values: Tensor,
    heads: int,
    wq: Tensor,
    wk: Tensor,
    wv: Tensor,
    wo: Tensor,
    bq: Tensor,
    bk: Tensor,
    bv: Tensor,
    bo: Tensor,
    mask: np.ndarray | None = None,
    trace: dict | None = None,
    trace_key: str = "attn",
) -> Tensor:
    """softmax(Q_h K_h^T / sqrt(d_head)) V_h per head, concatenated, projected.

    Inputs are (B, seq, d_model); ``mask`` is an additive (seq_q, seq_k)
    array applied before the softmax (-inf for forbidden positions).
    """
    d_model = queries.shape[-1]
    d_head = d_model // heads
    q = split_heads(linear(queries, wq, bq), heads)
    k = split_heads(linear(keys, wk, bk), heads)
    v = split_heads(linear(values, wv, bv), heads)
    mixed = scaled_attention(
        q, k, v, 1.0 / math.sqrt(d_head), mask=mask, trace=trace, trace_key=trace_key
    )
    return linear(merge_heads(mixed), wo, bo)
