"""Central finite-difference gradient checking against the analytic backward."""

from __future__ import annotations

import numpy as np

from vdparse import rst
from vdparse.model import ModelConfig, Vocab, init_params, loss_and_grads

TINY_VOCAB = Vocab(rst.RESERVED_TOKENS + tuple(f"w{i}" for i in range(8)))  # V = 12


def tiny_setup(rnn_type: str, attention: str, layers: int, bidirectional: bool,
               seed: int = 0):
    """H=8, p=5, n=6 (incl. </s>), V=12 model plus one random example."""
    cfg = ModelConfig(
        rnn_type=rnn_type, hidden_units=8, bidirectional=bidirectional,
        encoder_layers=layers, attention=attention, embed_dim=7, feature_dim=6,
        vocab_size=len(TINY_VOCAB), dropout_rate=0.0, max_decode_len=16,
        max_encode_len=32)
    rng = np.random.default_rng(seed)
    params = init_params(cfg, TINY_VOCAB, rng)
    features = rng.normal(size=(5, 6))
    ids = ([TINY_VOCAB.bos_id]
           + [int(rng.integers(4, len(TINY_VOCAB))) for _ in range(5)]
           + [TINY_VOCAB.eos_id])
    return params, features, ids


def max_rel_error(params, features, ids, eps: float = 1e-4) -> float:
    """Check every coordinate of every tensor; returns the worst relative error."""
    loss_sum, n_tokens, grads = loss_and_grads(params, features, ids, train=False)

    def mean_loss() -> float:
        s, n, _ = loss_and_grads(params, features, ids, train=False)
        return s / n

    worst = 0.0
    for name, arr in params.tensors.items():
        analytic = grads[name] / n_tokens
        flat = arr.ravel()
        aflat = analytic.ravel()
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + eps
            up = mean_loss()
            flat[k] = orig - eps
            down = mean_loss()
            flat[k] = orig
            numeric = (up - down) / (2 * eps)
            rel = abs(aflat[k] - numeric) / max(abs(aflat[k]), abs(numeric), 1e-6)
            worst = max(worst, rel)
    return worst
