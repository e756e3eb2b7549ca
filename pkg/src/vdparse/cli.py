"""Command-line entry point: data generation through training, scoring, alignment.

Data goes to stdout, diagnostics to stderr, so subcommands compose in shell
pipelines. Exit codes: 0 success, 1 validation/parse failures, 2 usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import align as align_mod
from . import corpus, metrics, rst, trainer
from .model import ModelConfig, load_checkpoint, predict_tokens, save_checkpoint

DEFAULT_SEED = 42


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _relations(args) -> tuple[str, ...]:
    if getattr(args, "relations_vocab", None):
        return rst.read_relations(args.relations_vocab)
    return rst.DEFAULT_RELATIONS


def _read_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _model_config(args) -> ModelConfig:
    base = _read_json(args.model_config) if args.model_config else {}
    cfg = ModelConfig.from_dict(base)
    overrides = {}
    if args.rnn_type is not None:
        overrides["rnn_type"] = args.rnn_type
    if args.hidden_units is not None:
        overrides["hidden_units"] = args.hidden_units
    if args.layers is not None:
        overrides["encoder_layers"] = args.layers
    if args.bidirectional is not None:
        overrides["bidirectional"] = args.bidirectional == "yes"
    if args.attention is not None:
        overrides["attention"] = args.attention
    if args.dropout is not None:
        overrides["dropout_rate"] = args.dropout
    if overrides:
        cfg = replace(cfg, **overrides)
        cfg.validate()
    return cfg


def _train_config(args) -> trainer.TrainConfig:
    base = _read_json(args.train_config) if args.train_config else {}
    cfg = trainer.TrainConfig.from_dict(base)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    elif "seed" not in base:
        overrides["seed"] = DEFAULT_SEED
    if args.max_epochs is not None:
        overrides["max_epochs"] = args.max_epochs
    if args.patience is not None:
        overrides["patience"] = args.patience
    if args.batch_size is not None:
        overrides["batch_size"] = args.batch_size
    if args.learning_rate is not None:
        overrides["learning_rate"] = args.learning_rate
    if overrides:
        cfg = replace(cfg, **overrides)
        cfg.validate()
    return cfg


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model-config", help="JSON file of ModelConfig fields")
    p.add_argument("--rnn-type", choices=["LSTM", "GRU"])
    p.add_argument("--hidden-units", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--bidirectional", choices=["yes", "no"])
    p.add_argument("--attention", choices=["none", "general", "dot", "concat"])
    p.add_argument("--dropout", type=float)


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--train-config", help="JSON file of TrainConfig fields")
    p.add_argument("--seed", type=int, default=None,
                   help="training seed (flag > config file > 42)")
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--learning-rate", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vdparse",
        description="Learn and score linearized discourse structures of videos.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic planted-code corpus")
    p.add_argument("--spec", required=True, help="JSON file of SynthSpec fields")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the spec seed")
    p.add_argument("--relations-vocab")

    p = sub.add_parser("validate", help="check every manifest record")
    p.add_argument("--manifest", required=True)
    p.add_argument("--relations-vocab")

    p = sub.add_parser("train", help="train one model; save best checkpoint + log")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--relations-vocab")
    p.add_argument("--embeddings",
                   help="bootstrap decoder embeddings from a word/vector text file")
    _add_model_flags(p)
    _add_train_flags(p)

    p = sub.add_parser("eval", help="score a checkpoint on a manifest split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", default="test", choices=["train", "val", "test"])
    p.add_argument("--pretty", action="store_true")

    p = sub.add_parser("predict", help="decode one feature file to a token line")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--features", required=True)

    p = sub.add_parser("align", help="map predicted EDUs to frames by attention mass")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--mass-threshold", type=float, default=None)

    p = sub.add_parser("sweep", help="train and score a configuration grid")
    p.add_argument("--grid", required=True,
                   help="'table1', 'table2', or a JSON grid file")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--relations-vocab")
    p.add_argument("--pretty", action="store_true")
    _add_model_flags(p)
    _add_train_flags(p)

    p = sub.add_parser("linearize", help="tree text on stdin -> token line")
    p.add_argument("--relations-vocab")

    p = sub.add_parser("parse", help="token lines on stdin -> tree text")
    p.add_argument("--relations-vocab")

    return parser


def _cmd_synth(args) -> int:
    spec_dict = _read_json(args.spec)
    if args.seed is not None:
        spec_dict["seed"] = args.seed
    spec = corpus.SynthSpec.from_dict(spec_dict)
    manifest = corpus.generate_synthetic(spec, args.out, _relations(args))
    print(manifest)
    return 0


def _cmd_validate(args) -> int:
    splits = corpus.load_corpus(args.manifest, _relations(args))
    for name in ("train", "val", "test"):
        print(f"{name}\t{len(splits.split(name))}")
    for problem in splits.problems:
        _err(f"line {problem.line_no} ({problem.video_id or '?'}): {problem.issue}")
    return 1 if splits.problems else 0


def _cmd_train(args) -> int:
    relations = _relations(args)
    model_cfg = _model_config(args)
    train_cfg = _train_config(args)
    splits = corpus.load_corpus(args.manifest, relations,
                                max_frames=model_cfg.max_encode_len)
    for problem in splits.problems:
        _err(f"line {problem.line_no} ({problem.video_id or '?'}): {problem.issue}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / "train_log.jsonl"
    with open(log_path, "w", encoding="utf-8") as log_fh:
        def log_fn(record: trainer.EpochRecord) -> None:
            log_fh.write(record.to_json() + "\n")
            _err(f"epoch {record.epoch}: loss {record.train_loss:.4f} "
                 f"val R+E {record.val_relations_edges:.3f}")

        result = trainer.train(splits, model_cfg, train_cfg, relations,
                               embeddings_path=args.embeddings, log_fn=log_fn)
    ckpt = out / "checkpoint.vdpm"
    save_checkpoint(result.params, ckpt)
    print(json.dumps({
        "checkpoint": str(ckpt),
        "train_log": str(log_path),
        "best_epoch": result.best_epoch,
        "val_relations_edges": result.best_metric,
    }, sort_keys=True))
    return 0


def _cmd_eval(args) -> int:
    params = load_checkpoint(args.checkpoint)
    splits = corpus.load_corpus(args.manifest, params.relations,
                                max_frames=params.config.max_encode_len)
    examples = splits.split(args.split)
    if not examples:
        _err(f"split {args.split!r} is empty")
        return 1
    report = trainer.evaluate(params, examples)
    print(metrics.render_table([report], pretty=args.pretty))
    return 0


def _cmd_predict(args) -> int:
    params = load_checkpoint(args.checkpoint)
    feats = corpus.read_features(args.features)
    frames = feats.frames[:params.config.max_encode_len]
    tokens, _ = predict_tokens(params, frames)
    print(rst.to_line(tokens))
    try:
        rst.parse(tokens, params.relations)
    except rst.ParseError as exc:
        _err(f"prediction is malformed: {exc}")
        return 1
    return 0


def _cmd_align(args) -> int:
    params = load_checkpoint(args.checkpoint)
    if params.config.attention == "none":
        _err("checkpoint was trained without attention; nothing to align")
        return 1
    feats = corpus.read_features(args.features)
    frames = feats.frames[:params.config.max_encode_len]
    tokens, attn = predict_tokens(params, frames)
    try:
        scenes = align_mod.assign_scenes(tokens, attn, params.relations,
                                         mass_threshold=args.mass_threshold)
    except (align_mod.UnparseablePrediction, align_mod.RowCountMismatch) as exc:
        _err(str(exc))
        return 1
    out = align_mod.format_assignments(feats.video_id, scenes)
    if out:
        print(out)
    return 0


def _cmd_sweep(args) -> int:
    relations = _relations(args)
    base_cfg = _model_config(args)
    train_cfg = _train_config(args)
    splits = corpus.load_corpus(args.manifest, relations,
                                max_frames=base_cfg.max_encode_len)
    for problem in splits.problems:
        _err(f"line {problem.line_no} ({problem.video_id or '?'}): {problem.issue}")
    if args.grid == "table1":
        grid = trainer.table1_grid(base_cfg)
    elif args.grid == "table2":
        grid = trainer.table2_grid(base_cfg)
    else:
        grid = trainer.load_grid(args.grid, base_cfg)
    rows = trainer.sweep(grid, splits, train_cfg, relations,
                         row_fn=lambda r: _err(f"finished row: {r}"))
    reports = [r for r in rows if isinstance(r, metrics.EvalReport)]
    failures = [(i, r) for i, r in enumerate(rows) if isinstance(r, trainer.SweepRowFailure)]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if reports:
        table = metrics.render_table(reports, pretty=args.pretty)
        (out / "sweep.tsv").write_text(
            metrics.render_table(reports) + "\n", encoding="utf-8")
        print(table)
    for i, failure in failures:
        _err(f"row {i} failed: {failure.error}")
    return 1 if failures else 0


def _cmd_linearize(args) -> int:
    text = sys.stdin.read()
    try:
        tree = rst.read_tree_text(text)
    except ValueError as exc:
        _err(f"bad tree text: {exc}")
        return 1
    violations = rst.validate(tree, _relations(args))
    if violations:
        for v in violations:
            _err(f"{v.kind}: {v.detail}")
        return 1
    print(rst.to_line(rst.linearize(tree)))
    return 0


def _cmd_parse(args) -> int:
    relations = _relations(args)
    first = True
    for line in sys.stdin:
        tokens = rst.from_line(line)
        if not tokens:
            continue
        try:
            tree = rst.parse(tokens, relations)
        except rst.ParseError as exc:
            _err(str(exc))
            return 1
        if not first:
            print()
        print(rst.format_tree(tree))
        first = False
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "validate": _cmd_validate,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "predict": _cmd_predict,
    "align": _cmd_align,
    "sweep": _cmd_sweep,
    "linearize": _cmd_linearize,
    "parse": _cmd_parse,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (OSError, ValueError) as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
