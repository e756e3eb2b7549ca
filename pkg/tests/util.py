"""Shared test helpers: random valid trees and small corpora."""

from __future__ import annotations

import numpy as np

from vdparse import rst

WORD_POOL = ("person", "spills", "coffee", "goes", "to", "the", "bathroom",
             "dries", "shirt", "ball", "table", "team", "plays", "a", "it's",
             "well-known", "game", "runs", "stops", "watches")


def random_tree(rng: np.random.Generator, k: int,
                relations=rst.DEFAULT_RELATIONS) -> rst.RstTree:
    """Uniformly shaped random valid tree with k leaves."""
    counter = [0]

    def leaf() -> rst.Leaf:
        n_words = int(rng.integers(1, 5))
        words = tuple(WORD_POOL[rng.integers(len(WORD_POOL))] for _ in range(n_words))
        edu = rst.Edu(counter[0], words)
        counter[0] += 1
        return rst.Leaf(edu)

    def build(n: int) -> rst.RstTree:
        if n == 1:
            return leaf()
        split = int(rng.integers(1, n))
        left = build(split)
        right = build(n - split)
        label = relations[rng.integers(len(relations))]
        nuc = rst.NUCLEARITIES[rng.integers(2)]
        return rst.Node(label, nuc, left, right)

    return build(k)
