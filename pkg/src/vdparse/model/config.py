"""Model hyperparameter axes (the Table-1/Table-2 configuration space)."""

from __future__ import annotations

from dataclasses import dataclass, asdict, replace

RNN_TYPES = ("LSTM", "GRU")
ATTENTION_KINDS = ("none", "general", "dot", "concat")


@dataclass(frozen=True)
class ModelConfig:
    rnn_type: str = "LSTM"
    hidden_units: int = 512
    bidirectional: bool = False
    encoder_layers: int = 1
    attention: str = "none"
    embed_dim: int = 64
    feature_dim: int = 0  # 0 = take the corpus feature dimension at train time
    vocab_size: int = 0   # 0 = fill in from the built vocabulary at train time
    dropout_rate: float = 0.5
    max_decode_len: int = 64
    max_encode_len: int = 128

    def validate(self) -> None:
        if self.rnn_type not in RNN_TYPES:
            raise ValueError(f"rnn_type must be one of {RNN_TYPES}, got {self.rnn_type!r}")
        if self.attention not in ATTENTION_KINDS:
            raise ValueError(f"attention must be one of {ATTENTION_KINDS}, got {self.attention!r}")
        for field in ("hidden_units", "encoder_layers", "embed_dim",
                      "max_decode_len", "max_encode_len"):
            if getattr(self, field) < 1:
                raise ValueError(f"{field} must be positive")
        # vocab_size/feature_dim 0 mean "fill in from the corpus at train time"
        if self.vocab_size < 0 or self.feature_dim < 0:
            raise ValueError("vocab_size and feature_dim must be non-negative")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")

    @property
    def gate_dim(self) -> int:
        return (4 if self.rnn_type == "LSTM" else 3) * self.hidden_units

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown model config fields: {sorted(extra)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def with_vocab_size(self, n: int) -> "ModelConfig":
        return replace(self, vocab_size=n)

    def with_feature_dim(self, d: int) -> "ModelConfig":
        return replace(self, feature_dim=d)
