"""Encoder-decoder transformer predicting the next normalized open.

The encoder reads the lag-day feature embeddings (plus sinusoidal position
information); the decoder reads the same days' normalized opens under a
causal mask and cross-attends over the encoder output. All decoder inputs
are historical ground truth, so one forward pass suffices: the last decoder
position, one step past the shifted output sequence, feeds the scalar head.
"""

from __future__ import annotations

import numpy as np

from ..errors import InvalidArgumentError, ShapeMismatchError
from ..rng import Rng, derive_seed
from ..tensor import Tensor, add, dropout, layer_norm, relu, reshape, tensor_slice
from .config import ModelConfig, WindowSample, stack_samples
from .layers import causal_mask, linear, multi_head_attention, positional_encoding, xavier_uniform

_INIT_TAG = 1


def _check_mode(mode: str) -> bool:
    if mode not in ("train", "eval"):
        raise InvalidArgumentError(f"mode must be 'train' or 'eval', got {mode!r}")
    return mode == "train"


class StockFormer:
    """Parameter container plus forward pass; training lives in the harness."""

    def __init__(self, cfg: ModelConfig):
        self.cfg = cfg
        self.params: dict[str, Tensor] = {}
        rng = Rng(derive_seed(cfg.seed, _INIT_TAG))
        d, f, ffn = cfg.d_model, cfg.feature_dim, cfg.ffn_width

        if cfg.per_day_embedder:
            for t in range(cfg.lag):
                self._add(f"embed.{t}.w", xavier_uniform(rng, f, d))
                self._add(f"embed.{t}.b", np.zeros(d))
        else:
            self._add("embed.w", xavier_uniform(rng, f, d))
            self._add("embed.b", np.zeros(d))
        self._add("dec_embed.w", xavier_uniform(rng, 1, d))
        self._add("dec_embed.b", np.zeros(d))

        for i in range(cfg.enc_layers):
            self._attention_block(rng, f"enc.{i}.attn", d)
            self._ffn_block(rng, f"enc.{i}.ffn", d, ffn)
            self._norm_block(f"enc.{i}.norm1", d)
            self._norm_block(f"enc.{i}.norm2", d)
        for i in range(cfg.dec_layers):
            self._attention_block(rng, f"dec.{i}.self_attn", d)
            self._attention_block(rng, f"dec.{i}.cross_attn", d)
            self._ffn_block(rng, f"dec.{i}.ffn", d, ffn)
            for k in (1, 2, 3):
                self._norm_block(f"dec.{i}.norm{k}", d)

        self._add("head.w", xavier_uniform(rng, d, 1))
        self._add("head.b", np.zeros(1))

        self._pe = positional_encoding(cfg.lag, d, cfg.pe_n)
        self._mask = causal_mask(cfg.lag)

    def _add(self, name: str, data: np.ndarray) -> None:
        self.params[name] = Tensor(data, requires_grad=True)

    def _attention_block(self, rng: Rng, prefix: str, d: int) -> None:
        for w in ("wq", "wk", "wv", "wo"):
            self._add(f"{prefix}.{w}", xavier_uniform(rng, d, d))
        for b in ("bq", "bk", "bv", "bo"):
            self._add(f"{prefix}.{b}", np.zeros(d))

    def _ffn_block(self, rng: Rng, prefix: str, d: int, ffn: int) -> None:
        self._add(f"{prefix}.w1", xavier_uniform(rng, d, ffn))
        self._add(f"{prefix}.b1", np.zeros(ffn))
        self._add(f"{prefix}.w2", xavier_uniform(rng, ffn, d))
        self._add(f"{prefix}.b2", np.zeros(d))

    def _norm_block(self, prefix: str, d: int) -> None:
        self._add(f"{prefix}.g", np.ones(d))
        self._add(f"{prefix}.b", np.zeros(d))

    # --- forward -------------------------------------------------------------

    def _attend(self, prefix, q, k, v, mask, trace):
        p = self.params
        return multi_head_attention(
            q, k, v, self.cfg.heads,
            p[f"{prefix}.wq"], p[f"{prefix}.wk"], p[f"{prefix}.wv"], p[f"{prefix}.wo"],
            p[f"{prefix}.bq"], p[f"{prefix}.bk"], p[f"{prefix}.bv"], p[f"{prefix}.bo"],
            mask=mask, trace=trace, trace_key=f"{prefix}.weights",
        )

    def _ffn(self, prefix, x):
        p = self.params
        hidden = relu(linear(x, p[f"{prefix}.w1"], p[f"{prefix}.b1"]))
        return linear(hidden, p[f"{prefix}.w2"], p[f"{prefix}.b2"])

    def _sublayer(self, x, sub_out, norm_prefix, training, rng):
        out = add(x, dropout(sub_out, self.cfg.dropout, rng, training))
        if self.cfg.use_layer_norm:
            p = self.params
            out = layer_norm(out, p[f"{norm_prefix}.g"], p[f"{norm_prefix}.b"])
        return out

    def _embed(self, feats: Tensor) -> Tensor:
        p = self.params
        if not self.cfg.per_day_embedder:
            return linear(feats, p["embed.w"], p["embed.b"])
        from ..tensor import concat

        days = []
        for t in range(self.cfg.lag):
            day = tensor_slice(feats, (slice(None), slice(t, t + 1)))
            days.append(linear(day, p[f"embed.{t}.w"], p[f"embed.{t}.b"]))
        return concat(days, axis=1)

    def forward_batch(
        self,
        feats: np.ndarray,
        priors: np.ndarray,
        mode: str = "eval",
        rng: Rng | None = None,
        trace: dict | None = None,
    ) -> Tensor:
        """(B, lag, feature_dim) and (B, lag) -> (B,) predictions."""
        training = _check_mode(mode)
        cfg = self.cfg
        if feats.ndim != 3 or feats.shape[1:] != (cfg.lag, cfg.feature_dim):
            raise ShapeMismatchError(
                f"features shape {feats.shape} vs expected (B, {cfg.lag}, {cfg.feature_dim})"
            )
        if priors.shape != feats.shape[:2]:
            raise ShapeMismatchError(f"prior_opens shape {priors.shape} vs {feats.shape[:2]}")
        p = self.params
        drop = cfg.dropout

        x = add(self._embed(Tensor(feats)), Tensor(self._pe))
        x = dropout(x, drop, rng, training)
        for i in range(cfg.enc_layers):
            attn = self._attend(f"enc.{i}.attn", x, x, x, None, trace)
            x = self._sublayer(x, attn, f"enc.{i}.norm1", training, rng)
            x = self._sublayer(x, self._ffn(f"enc.{i}.ffn", x), f"enc.{i}.norm2", training, rng)
        enc_out = x

        y = linear(reshape(Tensor(priors), (*priors.shape, 1)), p["dec_embed.w"], p["dec_embed.b"])
        y = dropout(add(y, Tensor(self._pe)), drop, rng, training)
        for i in range(cfg.dec_layers):
            self_attn = self._attend(f"dec.{i}.self_attn", y, y, y, self._mask, trace)
            if trace is not None:
                trace[f"dec.{i}.self_attn.out"] = self_attn.data.copy()
            y = self._sublayer(y, self_attn, f"dec.{i}.norm1", training, rng)
            cross = self._attend(f"dec.{i}.cross_attn", y, enc_out, enc_out, None, trace)
            y = self._sublayer(y, cross, f"dec.{i}.norm2", training, rng)
            y = self._sublayer(y, self._ffn(f"dec.{i}.ffn", y), f"dec.{i}.norm3", training, rng)

        last = tensor_slice(y, (slice(None), cfg.lag - 1))
        out = linear(last, p["head.w"], p["head.b"])
        return reshape(out, (out.shape[0],))

    def forward(self, sample: WindowSample, mode: str = "eval", rng: Rng | None = None) -> float:
        feats, priors, _ = stack_samples([sample])
        return float(self.forward_batch(feats, priors, mode=mode, rng=rng).data[0])


def stockformer_forward(
    sample: WindowSample, model: StockFormer, mode: str = "eval", rng: Rng | None = None
) -> float:
    """Single-sample surface over the batched forward pass."""
    return model.forward(sample, mode=mode, rng=rng)
