"""Binary RST discourse trees: data model, linearization grammar, strict parser.

A tree is either a ``Leaf`` holding one EDU (elementary discourse unit) or a
``Node`` carrying a rhetorical relation label plus a nuclearity marker that
names the side holding the nucleus child (``NUC:LEFT`` means the left child
is the nucleus).

Linearization grammar (pre-order, one token per list element)::

    node := "(" REL:<label> NUC:<LEFT|RIGHT> child child ")"
    child := node | "<edu>" word+ "</edu>"

``parse`` is the strict inverse: it accepts arbitrary token lists (model
output included) and either returns the unique tree or raises ``ParseError``
with a position and a kind.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Union

WORD_RE = re.compile(r"[a-z0-9'][a-z0-9'.,-]*$")
_TOKENIZE_RE = re.compile(r"[a-z0-9]+(?:['-][a-z0-9]+)*")

NUC_LEFT = "LEFT"
NUC_RIGHT = "RIGHT"
NUCLEARITIES = (NUC_LEFT, NUC_RIGHT)

# The 18 RST-DT relation classes; override with a vocabulary file.
DEFAULT_RELATIONS = (
    "Attribution",
    "Background",
    "Cause",
    "Comparison",
    "Condition",
    "Contrast",
    "Elaboration",
    "Enablement",
    "Evaluation",
    "Explanation",
    "Joint",
    "Manner-Means",
    "Same-Unit",
    "Summary",
    "Temporal",
    "Textual-Organization",
    "Topic-Change",
    "Topic-Comment",
)

OPEN = "("
CLOSE = ")"
EDU_OPEN = "<edu>"
EDU_CLOSE = "</edu>"
REL_PREFIX = "REL:"
NUC_PREFIX = "NUC:"

PAD = "<pad>"
BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"
RESERVED_TOKENS = (PAD, BOS, EOS, UNK)


@dataclass(frozen=True)
class Edu:
    """One leaf span: 0-based reading-order index and its word tokens."""

    index: int
    words: tuple[str, ...]


@dataclass(frozen=True)
class Leaf:
    edu: Edu


@dataclass(frozen=True)
class Node:
    label: str
    nuclearity: str  # side of the nucleus child: "LEFT" or "RIGHT"
    left: "RstTree"
    right: "RstTree"


RstTree = Union[Leaf, Node]


class ParseError(ValueError):
    """Malformed token sequence; carries the offending position and a kind."""

    UNBALANCED_PAREN = "UnbalancedParen"
    EMPTY_EDU = "EmptyEdu"
    BAD_ARITY = "BadArity"
    UNKNOWN_RELATION = "UnknownRelation"
    TRAILING_TOKENS = "TrailingTokens"
    UNEXPECTED_TOKEN = "UnexpectedToken"

    def __init__(self, position: int, kind: str, message: str):
        super().__init__(f"{kind} at token {position}: {message}")
        self.position = position
        self.kind = kind


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str


def linearize(tree: RstTree) -> list[str]:
    """Serialize a valid tree to its canonical token sequence."""
    out: list[str] = []

    def emit(t: RstTree) -> None:
        if isinstance(t, Leaf):
            out.append(EDU_OPEN)
            out.extend(t.edu.words)
            out.append(EDU_CLOSE)
        else:
            out.append(OPEN)
            out.append(REL_PREFIX + t.label)
            out.append(NUC_PREFIX + t.nuclearity)
            emit(t.left)
            emit(t.right)
            out.append(CLOSE)

    emit(tree)
    return out


def _is_structural(tok: str) -> bool:
    return (
        tok in (OPEN, CLOSE, EDU_OPEN, EDU_CLOSE)
        or tok.startswith(REL_PREFIX)
        or tok.startswith(NUC_PREFIX)
    )


def parse(tokens: list[str], relations: tuple[str, ...] = DEFAULT_RELATIONS) -> RstTree:
    """Single left-to-right pass with an explicit stack; strict inverse of linearize."""
    # Frame: [label, nuclearity, children]; label/nuclearity None while the
    # node header is still being read.
    stack: list[list] = []
    root: RstTree | None = None
    edu_count = 0
    relset = set(relations)

    def attach(subtree: RstTree) -> None:
        nonlocal root
        if stack:
            stack[-1][2].append(subtree)
        else:
            root = subtree

    i = 0
    n = len(tokens)
    while i < n:
        tok = tokens[i]
        if root is not None and not stack:
            raise ParseError(i, ParseError.TRAILING_TOKENS, f"{tok!r} after complete tree")
        expecting_rel = bool(stack) and stack[-1][0] is None
        expecting_nuc = bool(stack) and stack[-1][0] is not None and stack[-1][1] is None
        if expecting_rel:
            if tok.startswith(REL_PREFIX):
                name = tok[len(REL_PREFIX):]
                if name not in relset:
                    raise ParseError(i, ParseError.UNKNOWN_RELATION, f"relation {name!r}")
                stack[-1][0] = name
                i += 1
                continue
            raise ParseError(i, ParseError.UNEXPECTED_TOKEN, f"expected REL:<name>, got {tok!r}")
        if expecting_nuc:
            if tok.startswith(NUC_PREFIX) and tok[len(NUC_PREFIX):] in NUCLEARITIES:
                stack[-1][1] = tok[len(NUC_PREFIX):]
                i += 1
                continue
            raise ParseError(i, ParseError.UNEXPECTED_TOKEN, f"expected NUC:LEFT|RIGHT, got {tok!r}")
        if tok == OPEN:
            stack.append([None, None, []])
            i += 1
        elif tok == CLOSE:
            if not stack:
                raise ParseError(i, ParseError.UNBALANCED_PAREN, "close without open")
            label, nuc, children = stack.pop()
            if len(children) != 2:
                raise ParseError(i, ParseError.BAD_ARITY, f"node has {len(children)} children")
            attach(Node(label, nuc, children[0], children[1]))
            i += 1
        elif tok == EDU_OPEN:
            start = i
            i += 1
            words: list[str] = []
            while i < n and tokens[i] != EDU_CLOSE:
                w = tokens[i]
                if _is_structural(w):
                    raise ParseError(i, ParseError.UNEXPECTED_TOKEN, f"{w!r} inside EDU")
                if not WORD_RE.match(w):
                    raise ParseError(i, ParseError.UNEXPECTED_TOKEN, f"invalid word {w!r}")
                words.append(w)
                i += 1
            if i >= n:
                raise ParseError(n, ParseError.UNBALANCED_PAREN, "unterminated EDU")
            if not words:
                raise ParseError(start, ParseError.EMPTY_EDU, "EDU with no words")
            attach(Leaf(Edu(edu_count, tuple(words))))
            edu_count += 1
            i += 1
        else:
            raise ParseError(i, ParseError.UNEXPECTED_TOKEN, f"{tok!r} outside EDU")
    if stack:
        raise ParseError(n, ParseError.UNBALANCED_PAREN, "unclosed node at end of input")
    if root is None:
        raise ParseError(0, ParseError.UNEXPECTED_TOKEN, "empty token sequence")
    return root


def leaves(tree: RstTree) -> list[Edu]:
    if isinstance(tree, Leaf):
        return [tree.edu]
    return leaves(tree.left) + leaves(tree.right)


def _preorder_nodes(tree: RstTree) -> Iterator[Node]:
    if isinstance(tree, Node):
        yield tree
        yield from _preorder_nodes(tree.left)
        yield from _preorder_nodes(tree.right)


def relation_list(tree: RstTree) -> list[str]:
    """Relation labels of internal nodes in pre-order."""
    return [n.label for n in _preorder_nodes(tree)]


def edge_list(tree: RstTree) -> list[str]:
    """Nuclearity directions of internal nodes in pre-order."""
    return [n.nuclearity for n in _preorder_nodes(tree)]


def same_structure(a: RstTree, b: RstTree) -> bool:
    """Shape, labels and nuclearities equal; EDU word content ignored."""
    if isinstance(a, Leaf) and isinstance(b, Leaf):
        return True
    if isinstance(a, Node) and isinstance(b, Node):
        return (
            a.label == b.label
            and a.nuclearity == b.nuclearity
            and same_structure(a.left, b.left)
            and same_structure(a.right, b.right)
        )
    return False


def validate(tree: RstTree, relations: tuple[str, ...] = DEFAULT_RELATIONS) -> list[Violation]:
    """Collect invariant violations; empty list means the tree is valid."""
    out: list[Violation] = []
    relset = set(relations)
    for node in _preorder_nodes(tree):
        if node.label not in relset:
            out.append(Violation("UnknownRelation", node.label))
        if node.nuclearity not in NUCLEARITIES:
            out.append(Violation("BadNuclearity", node.nuclearity))
    for edu in leaves(tree):
        if not edu.words:
            out.append(Violation("EmptyEdu", f"edu {edu.index}"))
        for w in edu.words:
            if not WORD_RE.match(w):
                out.append(Violation("BadWord", w))
    idx = [e.index for e in leaves(tree)]
    if any(b <= a for a, b in zip(idx, idx[1:])):
        out.append(Violation("NonMonotoneEduOrder", str(idx)))
    elif idx != list(range(len(idx))):
        out.append(Violation("GappyEduIndices", str(idx)))
    return out


def tokenize_words(text: str) -> list[str]:
    """Lowercase and strip punctuation except intra-word apostrophes/hyphens."""
    return _TOKENIZE_RE.findall(text.lower())


def read_relations(path) -> tuple[str, ...]:
    """Relation vocabulary file: one label per line, '#' comments allowed."""
    labels: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                labels.append(line)
    if not labels:
        raise ValueError(f"no relation labels in {path}")
    return tuple(labels)


def to_line(tokens: list[str]) -> str:
    return " ".join(tokens)


def from_line(line: str) -> list[str]:
    return line.split()


def format_tree(tree: RstTree) -> str:
    """Indented human-readable tree text; inverse of read_tree_text."""
    lines: list[str] = []

    def walk(t: RstTree, depth: int) -> None:
        pad = "  " * depth
        if isinstance(t, Leaf):
            lines.append(f"{pad}edu {t.edu.index}: {' '.join(t.edu.words)}")
        else:
            lines.append(f"{pad}node {t.label} {t.nuclearity}")
            walk(t.left, depth + 1)
            walk(t.right, depth + 1)

    walk(tree, 0)
    return "\n".join(lines)


def read_tree_text(text: str) -> RstTree:
    """Parse the indented tree text produced by format_tree."""
    rows: list[tuple[int, str]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        if not raw.strip():
            continue
        indent = len(raw) - len(raw.lstrip(" "))
        if indent % 2:
            raise ValueError(f"line {lineno}: odd indentation")
        rows.append((indent // 2, raw.strip()))
    if not rows:
        raise ValueError("empty tree text")

    pos = 0

    def build(depth: int) -> RstTree:
        nonlocal pos
        if pos >= len(rows) or rows[pos][0] != depth:
            raise ValueError(f"expected a child at depth {depth}")
        d, line = rows[pos]
        pos += 1
        if line.startswith("edu "):
            head, _, words = line[4:].partition(":")
            toks = words.split()
            if not toks:
                raise ValueError(f"edu {head.strip()} has no words")
            return Leaf(Edu(int(head.strip()), tuple(toks)))
        if line.startswith("node "):
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"bad node line: {line!r}")
            _, label, nuc = parts
            left = build(depth + 1)
            right = build(depth + 1)
            return Node(label, nuc, left, right)
        raise ValueError(f"unrecognized line: {line!r}")

    tree = build(0)
    if pos != len(rows):
        raise ValueError(f"trailing lines after complete tree (line {pos + 1})")
    return tree
