"""Evaluation metrics: corpus BLEU-4 and the three structure accuracies.

Relations/edges accuracies micro-average positional matches between the
pre-order label lists of gold and predicted trees (total correct over total
gold). Predictions that fail to parse contribute zero matches but keep their
gold counts in the denominator, so evaluation is total over arbitrary model
output. Relations+Edges is per-video all-or-nothing on the full structure
(shape, labels, nuclearities; EDU wording ignored).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from . import rst
from .rst import ParseError, RstTree

TABLE1_HEADER = "RNN Type\t#Hidden Units\tBidirectional\t#Layers\tRelations\tEdges\tRelations+Edges\tBleu4"
TABLE2_HEADER = "RNN Type\t#Hidden Units\tBidirectional\t#Layers\t#Attention Type\tRelations\tEdges\tRelations+Edges\tBleu4"


class EmptyCorpus(ValueError):
    pass


@dataclass(frozen=True)
class ScoredPair:
    """One video's gold tree plus the raw predicted token sequence."""

    gold: RstTree
    predicted: tuple[str, ...]
    predicted_tree: RstTree | None
    parse_error: ParseError | None

    @classmethod
    def from_prediction(cls, gold: RstTree, predicted,
                        relations: tuple[str, ...] = rst.DEFAULT_RELATIONS) -> "ScoredPair":
        tokens = tuple(t for t in predicted if t not in rst.RESERVED_TOKENS)
        try:
            tree = rst.parse(list(tokens), relations)
            err = None
        except ParseError as exc:
            tree = None
            err = exc
        return cls(gold=gold, predicted=tokens, predicted_tree=tree, parse_error=err)


def _strip_reserved(tokens) -> list[str]:
    return [t for t in tokens if t not in rst.RESERVED_TOKENS]


def _ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu4(pairs) -> float:
    """Corpus-level BLEU with uniform 1..4-gram weights, clipping, no smoothing.

    Structural tokens count as ordinary tokens; reserved tokens are stripped.
    Returns a score in [0, 100]; any empty corpus-level n-gram precision
    collapses the unsmoothed geometric mean to 0.
    """
    pairs = list(pairs)
    if not pairs:
        raise EmptyCorpus("bleu4 needs at least one pair")
    clipped = [0, 0, 0, 0]
    total = [0, 0, 0, 0]
    cand_len = 0
    ref_len = 0
    for predicted, gold in pairs:
        pred = _strip_reserved(predicted)
        ref = _strip_reserved(gold)
        cand_len += len(pred)
        ref_len += len(ref)
        for n in range(1, 5):
            pred_counts = _ngram_counts(pred, n)
            if not pred_counts:
                continue
            ref_counts = _ngram_counts(ref, n)
            total[n - 1] += sum(pred_counts.values())
            clipped[n - 1] += sum(min(c, ref_counts[g]) for g, c in pred_counts.items())
    if cand_len == 0:
        return 0.0
    if any(c == 0 or t == 0 for c, t in zip(clipped, total)):
        return 0.0
    log_precision = sum(0.25 * math.log(c / t) for c, t in zip(clipped, total))
    brevity = 1.0 if cand_len >= ref_len else math.exp(1.0 - ref_len / cand_len)
    return 100.0 * brevity * math.exp(log_precision)


def _positional_accuracy(pairs, extract) -> float:
    pairs = list(pairs)
    if not pairs:
        raise EmptyCorpus("accuracy needs at least one pair")
    matches = 0
    total = 0
    for pair in pairs:
        gold_items = extract(pair.gold)
        total += len(gold_items)
        if pair.predicted_tree is None:
            continue
        pred_items = extract(pair.predicted_tree)
        matches += sum(g == p for g, p in zip(gold_items, pred_items))
    if total == 0:
        return 1.0  # no relations to predict (all k=1 trees): vacuously correct
    return matches / total


def relations_accuracy(pairs) -> float:
    """Fraction of gold relations matched positionally (pre-order)."""
    return _positional_accuracy(pairs, rst.relation_list)


def edges_accuracy(pairs) -> float:
    """Fraction of gold nuclearity directions matched positionally (pre-order)."""
    return _positional_accuracy(pairs, rst.edge_list)


def relations_edges_accuracy(pairs) -> float:
    """Fraction of videos whose full structure is exactly right."""
    pairs = list(pairs)
    if not pairs:
        raise EmptyCorpus("accuracy needs at least one pair")
    correct = sum(
        1 for p in pairs
        if p.predicted_tree is not None and rst.same_structure(p.gold, p.predicted_tree)
    )
    return correct / len(pairs)


@dataclass(frozen=True)
class EvalReport:
    """One Table-1/Table-2 row: configuration axes plus the four metrics."""

    rnn_type: str
    hidden_units: int
    bidirectional: bool
    layers: int
    attention_type: str | None
    relations_acc: float
    edges_acc: float
    relations_edges_acc: float
    bleu4: float

    def header(self) -> str:
        return TABLE2_HEADER if self.attention_type is not None else TABLE1_HEADER

    def row(self) -> str:
        cells = [
            self.rnn_type,
            str(self.hidden_units),
            "YES" if self.bidirectional else "NO",
            str(self.layers),
        ]
        if self.attention_type is not None:
            cells.append(self.attention_type)
        cells += [
            f"{self.relations_acc:.2f}",
            f"{self.edges_acc:.2f}",
            f"{self.relations_edges_acc:.2f}",
            f"{self.bleu4:.1f}",
        ]
        return "\t".join(cells)


def build_report(config, pairs) -> EvalReport:
    """Score a corpus of pairs under a model configuration's report schema."""
    pairs = list(pairs)
    if not pairs:
        raise EmptyCorpus("build_report needs at least one pair")
    bleu_pairs = [(list(p.predicted), rst.linearize(p.gold)) for p in pairs]
    attention = getattr(config, "attention", "none")
    return EvalReport(
        rnn_type=config.rnn_type,
        hidden_units=config.hidden_units,
        bidirectional=config.bidirectional,
        layers=config.encoder_layers,
        attention_type=None if attention == "none" else attention,
        relations_acc=relations_accuracy(pairs),
        edges_acc=edges_accuracy(pairs),
        relations_edges_acc=relations_edges_accuracy(pairs),
        bleu4=bleu4(bleu_pairs),
    )


def render_table(reports, pretty: bool = False) -> str:
    """TSV table (or aligned columns with pretty=True) for a list of reports."""
    reports = list(reports)
    if not reports:
        raise EmptyCorpus("no reports to render")
    schemas = {r.header() for r in reports}
    if len(schemas) != 1:
        raise ValueError("cannot mix Table-1 and Table-2 schema rows in one table")
    header = reports[0].header()
    lines = [header] + [r.row() for r in reports]
    if not pretty:
        return "\n".join(lines)
    grid = [line.split("\t") for line in lines]
    widths = [max(len(row[i]) for row in grid) for i in range(len(grid[0]))]
    return "\n".join(
        "  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
        for row in grid
    )
