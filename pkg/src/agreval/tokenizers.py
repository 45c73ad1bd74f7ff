"""Whitespace and sub-word tokenization, and the pair-level length gate.

Generated sentences use single-space token joins with detached punctuation,
so whitespace splitting recovers the token list exactly.  The sub-word
tokenizer is a greedy longest-match-first segmenter over a plain vocabulary
file (one token per line, line number = id, "##" marks continuation pieces).
The gate discards a pair when its two sentences tokenize to different total
lengths, since their scores are then not comparable.
"""

from __future__ import annotations

from dataclasses import dataclass

CONTINUATION = "##"
UNK = "[UNK]"
MAX_WORD_CHARS = 100  # longer words fall back to the unknown token


@dataclass(frozen=True)
class TokenSequence:
    tokens: tuple[str, ...]
    ids: tuple[int, ...]

    def __post_init__(self):
        if len(self.tokens) != len(self.ids) or not self.tokens:
            raise ValueError("tokens and ids must be equally long and non-empty")

    def __len__(self) -> int:
        return len(self.tokens)


class WhitespaceTokenizer:
    """Splits on runs of spaces; ids come from a vocabulary grown on first use."""

    def __init__(self):
        self._ids: dict[str, int] = {}

    def tokenize(self, text: str) -> TokenSequence:
        tokens = text.split()
        if not tokens:
            raise ValueError("cannot tokenize empty input")
        ids = tuple(self._ids.setdefault(t, len(self._ids)) for t in tokens)
        return TokenSequence(tuple(tokens), ids)

    @property
    def vocab_size(self) -> int:
        return len(self._ids)


class SubwordVocab:
    """Ordered sub-word vocabulary with the ## continuation convention."""

    def __init__(self, entries: list[str]):
        if len(set(entries)) != len(entries):
            raise ValueError("vocabulary entries must be unique")
        if UNK not in entries:
            raise ValueError(f"vocabulary must contain {UNK}")
        self.entries = list(entries)
        self._ids = {tok: i for i, tok in enumerate(entries)}

    @classmethod
    def from_file(cls, path) -> "SubwordVocab":
        with open(path, encoding="utf-8") as fh:
            return cls([line.rstrip("\n") for line in fh if line.rstrip("\n")])

    @property
    def size(self) -> int:
        return len(self.entries)

    def id_of(self, token: str) -> int:
        return self._ids[token]

    def __contains__(self, token: str) -> bool:
        return token in self._ids


def segment_word(word: str, vocab: SubwordVocab) -> list[str]:
    """Greedy longest-match-first segmentation of a single word."""
    if word in vocab:
        return [word]
    if len(word) > MAX_WORD_CHARS:
        return [UNK]
    pieces = []
    start = 0
    while start < len(word):
        end = len(word)
        match = None
        while start < end:
            piece = word[start:end]
            if start > 0:
                piece = CONTINUATION + piece
            if piece in vocab:
                match = piece
                break
            end -= 1
        if match is None:
            return [UNK]
        pieces.append(match)
        start = end
    return pieces


def subword_tokenize(text: str, vocab: SubwordVocab) -> TokenSequence:
    pieces: list[str] = []
    for word in text.split():
        pieces.extend(segment_word(word, vocab))
    if not pieces:
        raise ValueError("cannot tokenize empty input")
    return TokenSequence(tuple(pieces), tuple(vocab.id_of(p) for p in pieces))


# --- length gate ------------------------------------------------------------


@dataclass(frozen=True)
class GateResult:
    verdict: str  # "keep" | "discard"
    len_grammatical: int
    len_ungrammatical: int
    reason: str | None = None

    @property
    def keep(self) -> bool:
        return self.verdict == "keep"


def gate_counts(len_grammatical: int, len_ungrammatical: int) -> GateResult:
    """Keep a pair only when both sentences have the same total token count."""
    if len_grammatical == len_ungrammatical:
        return GateResult("keep", len_grammatical, len_ungrammatical)
    return GateResult(
        "discard",
        len_grammatical,
        len_ungrammatical,
        reason=f"token counts differ: {len_grammatical} vs {len_ungrammatical}",
    )


def length_gate(grammatical: str, ungrammatical: str, tokenizer) -> GateResult:
    """Apply the discard rule using any object with a tokenize(text) method."""
    return gate_counts(
        len(tokenizer.tokenize(grammatical)), len(tokenizer.tokenize(ungrammatical))
    )
