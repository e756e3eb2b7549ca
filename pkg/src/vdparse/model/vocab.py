"""Decoder token vocabulary with fixed reserved ids."""

from __future__ import annotations

from .. import rst


class Vocab:
    """Token <-> id maps. Reserved ids: <pad>=0, <s>=1, </s>=2, <unk>=3."""

    pad_id = 0
    bos_id = 1
    eos_id = 2
    unk_id = 3

    def __init__(self, tokens: tuple[str, ...]):
        if tuple(tokens[:4]) != rst.RESERVED_TOKENS:
            raise ValueError("vocabulary must start with the reserved tokens")
        self.tokens = tuple(tokens)
        self.index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")

    def __len__(self) -> int:
        return len(self.tokens)

    def encode(self, token: str) -> int:
        return self.index.get(token, self.unk_id)

    def encode_sequence(self, tokens: list[str]) -> list[int]:
        return [self.encode(t) for t in tokens]

    def decode(self, ids) -> list[str]:
        return [self.tokens[i] for i in ids]

    @classmethod
    def build(cls, token_sequences, relations: tuple[str, ...] = rst.DEFAULT_RELATIONS) -> "Vocab":
        """Deterministic vocabulary: reserved ids, then sorted unique tokens.

        All grammar tokens for the active relation vocabulary are always
        included so the decoder can emit any structure, seen or not.
        """
        pool = {rst.OPEN, rst.CLOSE, rst.EDU_OPEN, rst.EDU_CLOSE}
        pool.update(rst.NUC_PREFIX + d for d in rst.NUCLEARITIES)
        pool.update(rst.REL_PREFIX + r for r in relations)
        for seq in token_sequences:
            pool.update(seq)
        pool.difference_update(rst.RESERVED_TOKENS)
        return cls(rst.RESERVED_TOKENS + tuple(sorted(pool)))
