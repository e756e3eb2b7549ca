"""Sequence-to-sequence model: configuration, parameters, network, vocabulary."""

from .config import ModelConfig, ATTENTION_KINDS, RNN_TYPES
from .network import (
    DecodeResult,
    EncodeResult,
    LengthExceeded,
    attend,
    backward,
    decode_forward,
    dropout_mask,
    encode,
    greedy_decode,
    loss_and_grads,
    log_softmax_rows,
    predict_tokens,
    softmax_rows,
)
from .params import (
    ModelParams,
    init_params,
    load_checkpoint,
    load_embeddings,
    save_checkpoint,
    tensor_shapes,
)
from .vocab import Vocab

__all__ = [
    "ATTENTION_KINDS",
    "DecodeResult",
    "EncodeResult",
    "LengthExceeded",
    "ModelConfig",
    "ModelParams",
    "RNN_TYPES",
    "Vocab",
    "attend",
    "backward",
    "decode_forward",
    "dropout_mask",
    "encode",
    "greedy_decode",
    "init_params",
    "load_checkpoint",
    "load_embeddings",
    "log_softmax_rows",
    "loss_and_grads",
    "predict_tokens",
    "save_checkpoint",
    "softmax_rows",
    "tensor_shapes",
]
