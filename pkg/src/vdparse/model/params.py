"""Trainable tensors, checkpoint serialization, and embedding bootstrap.

Checkpoint file layout (little-endian): magic ``VDPM``, version u32=1,
meta_len u32 + meta JSON (model config, vocabulary, relation labels),
tensor count u32, then per tensor sorted by name: name_len u32, name utf-8,
ndim u32, shape u32 each, f32 data row-major. Tensors are float64 in memory;
the f32 file payload round-trips bit-exactly through load/save.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .. import binio
from ..rst import DEFAULT_RELATIONS
from .config import ModelConfig
from .vocab import Vocab

CHECKPOINT_MAGIC = b"VDPM"
CHECKPOINT_VERSION = 1

INIT_RANGE = 0.08
FORGET_BIAS = 1.0


@dataclass
class ModelParams:
    config: ModelConfig
    vocab: Vocab
    relations: tuple[str, ...]
    tensors: dict[str, np.ndarray]

    def copy(self) -> "ModelParams":
        return ModelParams(
            self.config, self.vocab, self.relations,
            {k: v.copy() for k, v in self.tensors.items()},
        )

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.tensors.items()}


def tensor_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Name -> shape map for every tensor the configuration needs."""
    H = config.hidden_units
    G = config.gate_dim
    D = config.feature_dim
    E = config.embed_dim
    V = config.vocab_size
    shapes: dict[str, tuple[int, ...]] = {
        "enc.proj.W": (H, D),
        "enc.proj.b": (H,),
    }
    for layer in range(config.encoder_layers):
        if config.bidirectional:
            for direction in ("fwd", "bwd"):
                shapes[f"enc.l{layer}.{direction}.W"] = (G, H)
                shapes[f"enc.l{layer}.{direction}.U"] = (G, H)
                shapes[f"enc.l{layer}.{direction}.b"] = (G,)
            shapes[f"enc.l{layer}.proj.W"] = (H, 2 * H)
            shapes[f"enc.l{layer}.proj.b"] = (H,)
        else:
            shapes[f"enc.l{layer}.W"] = (G, H)
            shapes[f"enc.l{layer}.U"] = (G, H)
            shapes[f"enc.l{layer}.b"] = (G,)
    shapes["dec.embed.E"] = (V, E)
    shapes["dec.cell.W"] = (G, E)
    shapes["dec.cell.U"] = (G, H)
    shapes["dec.cell.b"] = (G,)
    if config.attention == "general":
        shapes["attn.Wa"] = (H, H)
    elif config.attention == "concat":
        shapes["attn.Wa"] = (H, 2 * H)
        shapes["attn.va"] = (H,)
    if config.attention != "none":
        shapes["attn.Wc"] = (H, 2 * H)
    shapes["out.W"] = (V, H)
    shapes["out.b"] = (V,)
    return shapes


def init_params(
    config: ModelConfig,
    vocab: Vocab,
    rng: np.random.Generator,
    relations: tuple[str, ...] = DEFAULT_RELATIONS,
    embeddings: dict[str, np.ndarray] | None = None,
) -> ModelParams:
    """Uniform(-0.08, 0.08) init; LSTM forget-gate bias 1.0; optional embedding bootstrap."""
    if config.vocab_size == 0:
        config = config.with_vocab_size(len(vocab))
    config.validate()
    if config.vocab_size != len(vocab):
        raise ValueError("config.vocab_size disagrees with the vocabulary")
    if config.feature_dim == 0:
        raise ValueError("feature_dim must be resolved before initializing parameters")
    H = config.hidden_units
    tensors: dict[str, np.ndarray] = {}
    for name, shape in tensor_shapes(config).items():
        tensors[name] = rng.uniform(-INIT_RANGE, INIT_RANGE, size=shape)
        if config.rnn_type == "LSTM" and name.endswith(".b") and tensors[name].shape == (config.gate_dim,):
            tensors[name][H:2 * H] = FORGET_BIAS
    if embeddings:
        table = tensors["dec.embed.E"]
        for token, vec in embeddings.items():
            idx = vocab.index.get(token)
            if idx is not None:
                table[idx] = vec
    return ModelParams(config, vocab, tuple(relations), tensors)


def load_embeddings(path, embed_dim: int) -> dict[str, np.ndarray]:
    """Text embeddings: one 'token v1 ... v_embed_dim' line per entry."""
    out: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != embed_dim + 1:
                raise ValueError(
                    f"{path}:{lineno}: expected {embed_dim} values, got {len(parts) - 1}"
                )
            out[parts[0]] = np.array([float(v) for v in parts[1:]])
    return out


def save_checkpoint(params: ModelParams, path) -> None:
    meta = {
        "config": params.config.to_dict(),
        "vocab": list(params.vocab.tokens),
        "relations": list(params.relations),
    }
    meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        binio.write_u32(fh, CHECKPOINT_VERSION)
        binio.write_u32(fh, len(meta_bytes))
        fh.write(meta_bytes)
        binio.write_u32(fh, len(params.tensors))
        for name in sorted(params.tensors):
            arr = params.tensors[name]
            encoded = name.encode("utf-8")
            binio.write_u32(fh, len(encoded))
            fh.write(encoded)
            binio.write_u32(fh, arr.ndim)
            for dim in arr.shape:
                binio.write_u32(fh, dim)
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_checkpoint(path) -> ModelParams:
    with open(path, "rb") as fh:
        binio.expect_magic(fh, CHECKPOINT_MAGIC, path)
        version = binio.read_u32(fh, "version")
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        meta_len = binio.read_u32(fh, "meta length")
        meta = json.loads(binio.read_exact(fh, meta_len, "meta"))
        config = ModelConfig.from_dict(meta["config"])
        vocab = Vocab(tuple(meta["vocab"]))
        relations = tuple(meta["relations"])
        count = binio.read_u32(fh, "tensor count")
        tensors: dict[str, np.ndarray] = {}
        for _ in range(count):
            name_len = binio.read_u32(fh, "tensor name length")
            name = binio.read_exact(fh, name_len, "tensor name").decode("utf-8")
            ndim = binio.read_u32(fh, "tensor rank")
            shape = tuple(binio.read_u32(fh, "tensor dim") for _ in range(ndim))
            n_items = int(np.prod(shape, dtype=np.int64)) if shape else 1
            raw = binio.read_exact(fh, 4 * n_items, f"tensor {name}")
            tensors[name] = np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(shape)
        expected = set(tensor_shapes(config))
        if set(tensors) != expected:
            raise ValueError(f"{path}: tensor names do not match the configuration")
    return ModelParams(config, vocab, relations, tensors)
