from .config import ModelConfig, WindowSample, stack_samples
from .layers import causal_mask, multi_head_attention, positional_encoding
from .lstm import BiLstm, bilstm_forward
from .transformer import StockFormer, stockformer_forward

MODEL_KINDS = ("stockformer", "bilstm")


def build_model(kind: str, cfg: ModelConfig):
    if kind == "stockformer":
        return StockFormer(cfg)
    if kind == "bilstm":
        return BiLstm(cfg)
    from ..errors import InvalidArgumentError

    raise InvalidArgumentError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")


__all__ = [
    "BiLstm",
    "MODEL_KINDS",
    "ModelConfig",
    "StockFormer",
    "WindowSample",
    "build_model",
    "bilstm_forward",
    "causal_mask",
    "multi_head_attention",
    "positional_encoding",
    "stack_samples",
    "stockformer_forward",
]
