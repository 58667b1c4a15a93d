"""Stacked bidirectional LSTM baseline.

Each day's features go through the shared affine embedder (no positional
encoding: recurrence already orders the days), then through stacked
bidirectional LSTM layers. The concatenated final forward and backward
hidden states of the top layer feed the scalar output head. The recurrent
backbone carries no dropout.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatchError
from ..rng import Rng, derive_seed
from ..tensor import Tensor, add, concat, matmul, mul, reshape, sigmoid, tanh, tensor_slice
from .config import ModelConfig, WindowSample, stack_samples
from .layers import linear, xavier_uniform
from .transformer import _check_mode

_INIT_TAG = 2

# gate packing order along the 4H axis
_GATES = ("input", "forget", "cell", "output")


class BiLstm:
    def __init__(self, cfg: ModelConfig):
        self.cfg = cfg
        self.params: dict[str, Tensor] = {}
        rng = Rng(derive_seed(cfg.seed, _INIT_TAG))
        d, f, h = cfg.d_model, cfg.feature_dim, cfg.lstm_hidden
        self.directions = ("fwd", "bwd") if cfg.lstm_bidirectional else ("fwd",)

        self._add("embed.w", xavier_uniform(rng, f, d))
        self._add("embed.b", np.zeros(d))
        scale = 1.0 / np.sqrt(h)
        for layer in range(cfg.lstm_layers):
            in_dim = d if layer == 0 else h * len(self.directions)
            for direction in self.directions:
                prefix = f"lstm.{layer}.{direction}"
                self._add(prefix + ".wx", (rng.uniform(in_dim, 4 * h) * 2 - 1) * scale)
                self._add(prefix + ".wh", (rng.uniform(h, 4 * h) * 2 - 1) * scale)
                self._add(prefix + ".b", (rng.uniform(4 * h) * 2 - 1) * scale)
        head_in = h * len(self.directions)
        self._add("head.w", xavier_uniform(rng, head_in, 1))
        self._add("head.b", np.zeros(1))

    def _add(self, name: str, data: np.ndarray) -> None:
        self.params[name] = Tensor(data, requires_grad=True)

    def _run_direction(self, steps: list[Tensor], prefix: str) -> list[Tensor]:
        """One direction over per-step (B, in_dim) inputs; returns hidden per step."""
        p = self.params
        h_dim = self.cfg.lstm_hidden
        batch = steps[0].shape[0]
        wx, wh, b = p[prefix + ".wx"], p[prefix + ".wh"], p[prefix + ".b"]
        h = Tensor(np.zeros((batch, h_dim)))
        c = Tensor(np.zeros((batch, h_dim)))
        hidden = []
        for x_t in steps:
            z = add(add(matmul(x_t, wx), matmul(h, wh)), b)
            gate_i = sigmoid(tensor_slice(z, (slice(None), slice(0, h_dim))))
            gate_f = sigmoid(tensor_slice(z, (slice(None), slice(h_dim, 2 * h_dim))))
            gate_g = tanh(tensor_slice(z, (slice(None), slice(2 * h_dim, 3 * h_dim))))
            gate_o = sigmoid(tensor_slice(z, (slice(None), slice(3 * h_dim, 4 * h_dim))))
            c = add(mul(gate_f, c), mul(gate_i, gate_g))
            h = mul(gate_o, tanh(c))
            hidden.append(h)
        return hidden

    def forward_batch(
        self,
        feats: np.ndarray,
        priors: np.ndarray | None = None,
        mode: str = "eval",
        rng: Rng | None = None,
        trace: dict | None = None,
    ) -> Tensor:
        """(B, lag, feature_dim) -> (B,) predictions; prior opens are unused
        here (the open price is already a feature column)."""
        _check_mode(mode)
        cfg = self.cfg
        if feats.ndim != 3 or feats.shape[1:] != (cfg.lag, cfg.feature_dim):
            raise ShapeMismatchError(
                f"features shape {feats.shape} vs expected (B, {cfg.lag}, {cfg.feature_dim})"
            )
        p = self.params
        x = linear(Tensor(feats), p["embed.w"], p["embed.b"])
        steps = [tensor_slice(x, (slice(None), t)) for t in range(cfg.lag)]

        for layer in range(cfg.lstm_layers):
            fwd = self._run_direction(steps, f"lstm.{layer}.fwd")
            if cfg.lstm_bidirectional:
                bwd = self._run_direction(steps[::-1], f"lstm.{layer}.bwd")[::-1]
                outputs = [concat([f_t, b_t], axis=1) for f_t, b_t in zip(fwd, bwd)]
                final = concat([fwd[-1], bwd[0]], axis=1)
            else:
                outputs = fwd
                final = fwd[-1]
            steps = outputs

        out = linear(final, p["head.w"], p["head.b"])
        return reshape(out, (out.shape[0],))

    def forward(self, sample: WindowSample, mode: str = "eval", rng: Rng | None = None) -> float:
        feats, priors, _ = stack_samples([sample])
        return float(self.forward_batch(feats, priors, mode=mode, rng=rng).data[0])


def bilstm_forward(
    sample: WindowSample, model: BiLstm, mode: str = "eval", rng: Rng | None = None
) -> float:
    """Single-sample surface over the batched forward pass."""
    return model.forward(sample, mode=mode, rng=rng)
