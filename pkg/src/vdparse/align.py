"""Map predicted EDUs to representative frames via decoder attention mass.

For each EDU span of a parsed prediction, the attention rows of the decoder
steps that emitted the span's words are averaged into one distribution over
encoder frames; the argmax frame (ties: lowest index) represents the scene
and its probability mass is the confidence. An optional mass-threshold mode
returns the smallest set of frames covering a target cumulative mass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rst


class UnparseablePrediction(ValueError):
    pass


class RowCountMismatch(ValueError):
    pass


@dataclass(frozen=True)
class SceneEntry:
    edu_index: int
    frame_index: int
    confidence: float
    frames: tuple[int, ...] | None = None  # mass-threshold mode only


def _edu_spans(tokens) -> list[list[int]]:
    """Positions of word tokens strictly between <edu> and </edu>, per EDU."""
    spans: list[list[int]] = []
    current: list[int] | None = None
    for pos, tok in enumerate(tokens):
        if tok == rst.EDU_OPEN:
            current = []
        elif tok == rst.EDU_CLOSE:
            spans.append(current)
            current = None
        elif current is not None:
            current.append(pos)
    return spans


def assign_scenes(prediction, attention: np.ndarray,
                  relations: tuple[str, ...] = rst.DEFAULT_RELATIONS,
                  mass_threshold: float | None = None) -> list[SceneEntry]:
    """One SceneEntry per EDU of a parseable prediction."""
    tokens = list(prediction)
    try:
        rst.parse(tokens, relations)
    except rst.ParseError as exc:
        raise UnparseablePrediction(str(exc)) from exc
    attn = np.asarray(attention, dtype=np.float64)
    if attn.ndim != 2 or attn.shape[0] != len(tokens):
        raise RowCountMismatch(
            f"attention has {attn.shape[0] if attn.ndim == 2 else 'bad'} rows "
            f"for {len(tokens)} predicted tokens")
    entries: list[SceneEntry] = []
    for edu_index, span in enumerate(_edu_spans(tokens)):
        dist = attn[span].mean(axis=0)
        frame = int(np.argmax(dist))
        frames = None
        if mass_threshold is not None:
            order = np.lexsort((np.arange(len(dist)), -dist))  # mass desc, index asc
            cum = 0.0
            chosen = []
            for j in order:
                chosen.append(int(j))
                cum += float(dist[j])
                if cum >= mass_threshold:
                    break
            frames = tuple(chosen)
        entries.append(SceneEntry(edu_index=edu_index, frame_index=frame,
                                  confidence=float(dist[frame]), frames=frames))
    return entries


def render_discourse(tree: rst.RstTree, scenes: list[SceneEntry]) -> str:
    """Linearized structure with each EDU span replaced by FRAME:<k>."""
    by_index = {s.edu_index: s for s in scenes}

    def emit(t: rst.RstTree) -> list[str]:
        if isinstance(t, rst.Leaf):
            return [f"FRAME:{by_index[t.edu.index].frame_index}"]
        return (
            [rst.OPEN, rst.REL_PREFIX + t.label, rst.NUC_PREFIX + t.nuclearity]
            + emit(t.left) + emit(t.right) + [rst.CLOSE]
        )

    return " ".join(emit(tree))


def format_assignments(video_id: str, scenes: list[SceneEntry]) -> str:
    """Line-delimited records: video_id, edu_index, frame_index, confidence."""
    lines = []
    for s in scenes:
        cells = [video_id, str(s.edu_index), str(s.frame_index), f"{s.confidence:.6f}"]
        if s.frames is not None:
            cells.append(",".join(str(f) for f in s.frames))
        lines.append("\t".join(cells))
    return "\n".join(lines)
