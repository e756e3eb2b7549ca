"""Training: NLL loss, Adam, the epoch loop with early stopping, sweep grids.

One training run mutates one parameter set; gradients are accumulated over a
mini-batch in manifest order (deterministic fixed-order reduction) and the
update normalizes by the batch token count. Early stopping watches validation
Relations+Edges, the strictest metric; ties keep the earlier epoch.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict, field, replace

import numpy as np

from . import metrics, rst
from .corpus import CorpusSplits, Example
from .metrics import EvalReport, ScoredPair
from .model import (
    ModelConfig,
    ModelParams,
    Vocab,
    init_params,
    load_embeddings,
    loss_and_grads,
    predict_tokens,
)


class NonFiniteGradient(ValueError):
    pass


class DivergedLoss(ValueError):
    pass


class EmptySplit(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 8
    max_epochs: int = 50
    patience: int = 10
    seed: int = 42
    clip_norm: float | None = 5.0  # None disables clipping

    def validate(self) -> None:
        if self.learning_rate <= 0 or self.eps <= 0:
            raise ValueError("learning_rate and eps must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ValueError("batch_size, max_epochs and patience must be >= 1")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ValueError("clip_norm must be positive or None")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown train config fields: {sorted(extra)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg


def nll_loss(step_logp, targets, pad_id: int | None = None) -> float:
    """Mean over steps of -log p(y_t); <pad> targets excluded."""
    logp = np.asarray(step_logp, dtype=np.float64)
    tgt = np.asarray(targets)
    if logp.shape != tgt.shape:
        raise ValueError("log-probabilities and targets must have equal length")
    keep = np.ones(len(tgt), dtype=bool) if pad_id is None else tgt != pad_id
    if not keep.any():
        raise ValueError("no non-pad targets to average over")
    return float(-(logp[keep]).mean())


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def for_params(cls, params: ModelParams) -> "AdamState":
        return cls(m=params.zeros_like(), v=params.zeros_like())


def adam_step(tensors: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: AdamState, t: int, config: TrainConfig):
    """One Adam update (in place): m, v moments with bias correction at step t."""
    if t < 1:
        raise ValueError("Adam step index starts at 1")
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(f"non-finite gradient for {name}")
    b1, b2 = config.beta1, config.beta2
    bc1 = 1.0 - b1 ** t
    bc2 = 1.0 - b2 ** t
    for name, g in grads.items():
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        tensors[name] -= config.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + config.eps)
    state.t = t
    return tensors, state


def clip_gradients(grads: dict[str, np.ndarray], clip_norm: float | None) -> float:
    """Scale all gradients so the global L2 norm is at most clip_norm."""
    total = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if clip_norm is not None and total > clip_norm and total > 0:
        scale = clip_norm / total
        for g in grads.values():
            g *= scale
    return total


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_relations: float
    val_edges: float
    val_relations_edges: float
    val_bleu4: float
    skipped_steps: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass
class TrainResult:
    params: ModelParams          # best-validation checkpoint
    best_epoch: int
    best_metric: float           # validation Relations+Edges at the best epoch
    log: list[EpochRecord] = field(default_factory=list)


def score_examples(params: ModelParams, examples: list[Example]) -> list[ScoredPair]:
    """Greedy-decode each example and pair the output with its gold tree."""
    pairs = []
    for ex in examples:
        tokens, _ = predict_tokens(params, ex.features.frames)
        pairs.append(ScoredPair.from_prediction(ex.gold_tree, tokens, params.relations))
    return pairs


def _val_metrics(params: ModelParams, examples: list[Example]):
    pairs = score_examples(params, examples)
    bleu_pairs = [(list(p.predicted), rst.linearize(p.gold)) for p in pairs]
    return (
        metrics.relations_accuracy(pairs),
        metrics.edges_accuracy(pairs),
        metrics.relations_edges_accuracy(pairs),
        metrics.bleu4(bleu_pairs),
    )


def train(splits: CorpusSplits, model_config: ModelConfig, train_config: TrainConfig,
          relations: tuple[str, ...] = rst.DEFAULT_RELATIONS,
          embeddings_path=None, log_fn=None) -> TrainResult:
    """Seeded epochs of shuffled mini-batches with validation-based early stopping."""
    train_config.validate()
    if not splits.train:
        raise EmptySplit("empty train split")
    if not splits.val:
        raise EmptySplit("empty val split")
    corpus_dim = splits.feature_dim
    cfg = model_config
    if cfg.feature_dim == 0:
        cfg = cfg.with_feature_dim(corpus_dim)
    elif corpus_dim is not None and cfg.feature_dim != corpus_dim:
        raise ValueError(f"config feature_dim {cfg.feature_dim} != corpus dim {corpus_dim}")

    vocab = Vocab.build([ex.gold_tokens for ex in splits.train], relations)
    embeddings = None
    if embeddings_path is not None:
        embeddings = load_embeddings(embeddings_path, cfg.embed_dim)
    rng = np.random.default_rng(train_config.seed)
    params = init_params(cfg.with_vocab_size(len(vocab)), vocab, rng, relations,
                         embeddings=embeddings)
    state = AdamState.for_params(params)

    encoded = {
        ex.video_id: [vocab.bos_id] + vocab.encode_sequence(ex.gold_tokens) + [vocab.eos_id]
        for ex in splits.train
    }
    examples = splits.train
    best_metric = -1.0
    best_epoch = 0
    best_params = params.copy()
    bad_epochs = 0
    log: list[EpochRecord] = []

    for epoch in range(1, train_config.max_epochs + 1):
        order = rng.permutation(len(examples))
        epoch_loss = 0.0
        epoch_tokens = 0.0
        skipped = 0
        for start in range(0, len(order), train_config.batch_size):
            batch = order[start:start + train_config.batch_size]
            batch_grads = params.zeros_like()
            batch_loss = 0.0
            batch_tokens = 0.0
            for idx in batch:
                ex = examples[idx]
                loss_sum, n_tokens, grads = loss_and_grads(
                    params, ex.features.frames, encoded[ex.video_id], train=True, rng=rng)
                batch_loss += loss_sum
                batch_tokens += n_tokens
                for name, g in grads.items():
                    batch_grads[name] += g
            if not math.isfinite(batch_loss):
                raise DivergedLoss(f"non-finite loss at epoch {epoch}")
            for g in batch_grads.values():
                g /= batch_tokens
            clip_gradients(batch_grads, train_config.clip_norm)
            try:
                adam_step(params.tensors, batch_grads, state, state.t + 1, train_config)
            except NonFiniteGradient:
                skipped += 1
            epoch_loss += batch_loss
            epoch_tokens += batch_tokens

        rel, edges, rel_edges, bleu = _val_metrics(params, splits.val)
        record = EpochRecord(
            epoch=epoch,
            train_loss=epoch_loss / epoch_tokens,
            val_relations=rel,
            val_edges=edges,
            val_relations_edges=rel_edges,
            val_bleu4=bleu,
            skipped_steps=skipped,
        )
        log.append(record)
        if log_fn is not None:
            log_fn(record)
        if rel_edges > best_metric:
            best_metric = rel_edges
            best_epoch = epoch
            best_params = params.copy()
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= train_config.patience:
                break
    return TrainResult(params=best_params, best_epoch=best_epoch,
                       best_metric=best_metric, log=log)


def evaluate(params: ModelParams, examples: list[Example]) -> EvalReport:
    """Decode a split and build its report row."""
    if not examples:
        raise EmptySplit("no examples to evaluate")
    pairs = score_examples(params, examples)
    return metrics.build_report(params.config, pairs)


@dataclass(frozen=True)
class SweepRowFailure:
    config: ModelConfig
    error: str


def table1_grid(base: ModelConfig) -> list[ModelConfig]:
    """The eight no-attention configuration rows, in table order."""
    rows = [
        ("LSTM", 256, False, 1),
        ("LSTM", 512, False, 1),
        ("LSTM", 1024, True, 1),
        ("LSTM", 1024, False, 1),
        ("LSTM", 512, False, 2),
        ("LSTM", 512, False, 3),
        ("LSTM", 512, False, 4),
        ("GRU", 512, False, 1),
    ]
    return [
        replace(base, rnn_type=r, hidden_units=h, bidirectional=b,
                encoder_layers=l, attention="none")
        for r, h, b, l in rows
    ]


def table2_grid(base: ModelConfig) -> list[ModelConfig]:
    """The five attention configuration rows, in table order."""
    rows = [
        (1, "general"),
        (1, "dot"),
        (1, "concat"),
        (2, "general"),
        (3, "general"),
    ]
    return [
        replace(base, rnn_type="LSTM", hidden_units=512, bidirectional=False,
                encoder_layers=l, attention=a)
        for l, a in rows
    ]


def load_grid(path, base: ModelConfig) -> list[ModelConfig]:
    """Custom grid file: JSON list of ModelConfig field overrides."""
    with open(path, encoding="utf-8") as fh:
        rows = json.load(fh)
    if not isinstance(rows, list) or not rows:
        raise ValueError(f"{path}: grid file must be a non-empty JSON list")
    out = []
    for row in rows:
        merged = {**base.to_dict(), **row}
        out.append(ModelConfig.from_dict(merged))
    return out


def sweep(grid: list[ModelConfig], splits: CorpusSplits, train_config: TrainConfig,
          relations: tuple[str, ...] = rst.DEFAULT_RELATIONS,
          row_fn=None) -> list[EvalReport | SweepRowFailure]:
    """Train every grid row with the shared TrainConfig; evaluate on the test split.

    Per-row failures are reported in place without aborting the other rows.
    """
    if not grid:
        raise ValueError("empty sweep grid")
    results: list[EvalReport | SweepRowFailure] = []
    for cfg in grid:
        try:
            result = train(splits, cfg, train_config, relations)
            if not splits.test:
                raise EmptySplit("empty test split")
            report = evaluate(result.params, splits.test)
        except Exception as exc:  # keep sweeping the remaining rows
            results.append(SweepRowFailure(cfg, f"{type(exc).__name__}: {exc}"))
        else:
            results.append(report)
        if row_fn is not None:
            row_fn(results[-1])
    return results
