"""Language-balanced wordpiece vocabulary learning and greedy tokenization.

Vocabulary learning follows the subword-text-encoder scheme: candidate
pieces are substrings of training words scored by count * length, the
vocabulary is assembled greedily above a minimum-count cutoff, and the
cutoff is tuned by binary search toward the requested size. Every observed
character is kept as both an initial and a continuation piece, so every
training word tokenizes without [UNK].

The vocab file format is one piece per line, UTF-8, reserved tokens first;
the line index is the token id. pretrain-data consumes this format
bit-exactly.
"""

from __future__ import annotations

import logging
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .corpus import TextUnit

logger = logging.getLogger(__name__)

RESERVED_TOKENS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
CONTINUATION_PREFIX = "##"

UNK = "[UNK]"

# Explosion guards for candidate generation; characters of longer words are
# still covered by the mandatory single-character pieces.
MAX_PIECE_CHARS = 16
MAX_CANDIDATE_WORD_CHARS = 64

DEFAULT_SIZE_TOLERANCE = 0.02
DEFAULT_MAX_ITERATIONS = 4


@dataclass(frozen=True)
class LanguageBudget:
    """Tokens to sample from one language for vocabulary learning."""

    lang: str
    token_budget: int

    def __post_init__(self):
        if self.token_budget <= 0:
            raise ValueError(f"token budget must be positive, got {self.token_budget}")


@dataclass
class WordCounts:
    counts: dict[str, int]
    total_tokens: int


@dataclass
class Vocab:
    """Ordered subword inventory; reserved tokens occupy the first indices."""

    pieces: list[str]
    reserved: list[str] = field(default_factory=lambda: list(RESERVED_TOKENS))
    continuation_prefix: str = CONTINUATION_PREFIX
    target_size: int = 0
    piece_ids: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(set(self.pieces)) != len(self.pieces):
            raise ValueError("vocabulary pieces must be unique")
        if self.pieces[: len(self.reserved)] != self.reserved:
            raise ValueError("reserved tokens must occupy the first indices")
        self.piece_ids = {p: i for i, p in enumerate(self.pieces)}

    def __len__(self) -> int:
        return len(self.pieces)

    def __contains__(self, piece: str) -> bool:
        return piece in self.piece_ids

    def id_of(self, piece: str) -> int:
        return self.piece_ids[piece]

    @property
    def pad_id(self) -> int:
        return self.piece_ids["[PAD]"]

    @property
    def unk_id(self) -> int:
        return self.piece_ids[UNK]

    @property
    def cls_id(self) -> int:
        return self.piece_ids["[CLS]"]

    @property
    def sep_id(self) -> int:
        return self.piece_ids["[SEP]"]

    @property
    def mask_id(self) -> int:
        return self.piece_ids["[MASK]"]

    def reserved_ids(self) -> set[int]:
        return {self.piece_ids[t] for t in self.reserved}

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for piece in self.pieces:
                f.write(piece + "\n")

    @classmethod
    def load(cls, path: str) -> "Vocab":
        with open(path, "r", encoding="utf-8") as f:
            pieces = [line.rstrip("\n") for line in f]
        if pieces and pieces[-1] == "":
            pieces.pop()
        reserved = []
        for piece in pieces:
            if piece.startswith("[") and piece.endswith("]"):
                reserved.append(piece)
            else:
                break
        return cls(pieces=pieces, reserved=reserved, target_size=len(pieces))


def sample_subset(
    corpus: Sequence[TextUnit], budget: LanguageBudget, seed: int
) -> list[TextUnit]:
    """Uniform-random units until the cumulative token count reaches the budget.

    Deterministic given the seed; selected units are returned in corpus
    order. A budget at or above the corpus size returns the whole corpus
    (the shortfall is logged).
    """
    if not corpus:
        raise ValueError("empty corpus")
    corpus_tokens = sum(u.token_count() for u in corpus)
    if budget.token_budget >= corpus_tokens:
        if budget.token_budget > corpus_tokens:
            logger.warning(
                "budget for %s exceeds corpus size (%d > %d tokens); taking whole corpus",
                budget.lang,
                budget.token_budget,
                corpus_tokens,
            )
        return list(corpus)
    rng = random.Random(seed)
    order = list(range(len(corpus)))
    rng.shuffle(order)
    picked: list[int] = []
    cum = 0
    for idx in order:
        picked.append(idx)
        cum += corpus[idx].token_count()
        if cum >= budget.token_budget:
            break
    picked.sort()
    return [corpus[i] for i in picked]


def count_words(subsets: Iterable[Iterable[TextUnit]]) -> WordCounts:
    """Merged whitespace-token counts over all per-language subsets."""
    counts: Counter[str] = Counter()
    total = 0
    for subset in subsets:
        for unit in subset:
            tokens = unit.tokens()
            counts.update(tokens)
            total += len(tokens)
    if total == 0:
        raise ValueError("at least one unit required")
    return WordCounts(dict(counts), total)


def _piece_score(piece: str, count: int) -> int:
    length = len(piece) - len(CONTINUATION_PREFIX) if piece.startswith(CONTINUATION_PREFIX) else len(piece)
    return count * length


def _candidate_counts(counts: dict[str, int]) -> Counter[str]:
    """Occurrence counts of every substring piece of the training words."""
    cand: Counter[str] = Counter()
    for word, count in counts.items():
        if len(word) > MAX_CANDIDATE_WORD_CHARS:
            continue
        length = len(word)
        for i in range(length):
            limit = min(length, i + MAX_PIECE_CHARS)
            for j in range(i + 1, limit + 1):
                piece = word[i:j] if i == 0 else CONTINUATION_PREFIX + word[i:j]
                cand[piece] += count
    return cand


def _mandatory_pieces(counts: dict[str, int], max_chars: int | None) -> list[str]:
    """Single-character pieces forced into the vocabulary, initial and continuation."""
    char_counts: Counter[str] = Counter()
    for word, count in counts.items():
        for ch in word:
            char_counts[ch] += count
    chars = sorted(char_counts)
    if max_chars is not None and len(chars) > max_chars:
        keep = sorted(
            sorted(char_counts, key=lambda c: (-char_counts[c], c))[:max_chars]
        )
        logger.warning(
            "character cap %d below alphabet size %d; %d rare characters fall back to %s",
            max_chars,
            len(chars),
            len(chars) - max_chars,
            UNK,
        )
        chars = keep
    return list(chars) + [CONTINUATION_PREFIX + c for c in chars]


def learn_wordpieces(
    counts: WordCounts,
    target_size: int,
    size_tolerance: float = DEFAULT_SIZE_TOLERANCE,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    reserved: Sequence[str] = RESERVED_TOKENS,
    max_chars: int | None = None,
) -> Vocab:
    """Learn a wordpiece vocabulary of approximately target_size pieces.

    Binary search on the minimum-count cutoff runs for max_iterations
    rounds; if the closest cutoff overshoots the target, the lowest-scoring
    optional pieces are dropped so the vocabulary lands exactly on
    target_size. Mandatory character pieces are never dropped, which keeps
    every training word tokenizable. If even cutoff 1 cannot reach the
    target, the largest achievable vocabulary is returned and the shortfall
    is logged.
    """
    reserved = list(reserved)
    mandatory = _mandatory_pieces(counts.counts, max_chars)
    floor_size = len(reserved) + len(mandatory)
    if target_size < floor_size:
        raise ValueError(
            f"target below alphabet size: target {target_size} < "
            f"{len(reserved)} reserved + {len(mandatory)} character pieces"
        )

    alphabet = {p for p in mandatory if not p.startswith(CONTINUATION_PREFIX)}
    candidates = _candidate_counts(counts.counts)
    mandatory_set = set(mandatory)
    optional = {
        p: c
        for p, c in candidates.items()
        if p not in mandatory_set and set(p.removeprefix(CONTINUATION_PREFIX)) <= alphabet
    }
    budget = target_size - floor_size

    def size_at(cutoff: int) -> int:
        return floor_size + sum(1 for c in optional.values() if c >= cutoff)

    max_count = max(optional.values(), default=0)
    best_cutoff = 1
    best_size = size_at(1)
    if best_size > target_size and max_count > 1:
        lo, hi = 1, max_count
        for _ in range(max_iterations):
            if lo > hi:
                break
            mid = (lo + hi) // 2
            size = size_at(mid)
            if size >= target_size:
                # Feasible: overshoot is trimmed below. Prefer the smallest
                # overshooting vocabulary seen so far.
                if size < best_size:
                    best_cutoff, best_size = mid, size
                lo = mid + 1
            else:
                hi = mid - 1

    kept = [(p, c) for p, c in optional.items() if c >= best_cutoff]
    kept.sort(key=lambda pc: (-_piece_score(pc[0], pc[1]), pc[0]))
    if len(kept) > budget:
        kept = kept[:budget]

    mandatory_counts = [(p, candidates.get(p, 0)) for p in mandatory]
    body = mandatory_counts + kept
    body.sort(key=lambda pc: (-_piece_score(pc[0], pc[1]), pc[0]))
    pieces = reserved + [p for p, _ in body]

    achieved = len(pieces)
    if abs(achieved - target_size) > size_tolerance * target_size:
        logger.warning(
            "vocabulary size %d misses target %d beyond tolerance %.1f%% "
            "(corpus too small for the target)",
            achieved,
            target_size,
            100 * size_tolerance,
        )
    return Vocab(pieces=pieces, reserved=reserved, target_size=target_size)


def tokenize(word: str, vocab: Vocab) -> list[str]:
    """Greedy longest-match-first wordpiece split of a single word.

    Non-initial matches carry the continuation prefix. A position with no
    matching piece maps the whole word to [UNK].
    """
    if not word:
        raise ValueError("empty word")
    prefix = vocab.continuation_prefix
    ids = vocab.piece_ids
    pieces: list[str] = []
    start = 0
    length = len(word)
    while start < length:
        end = length
        match = None
        while end > start:
            piece = word[start:end] if start == 0 else prefix + word[start:end]
            if piece in ids:
                match = piece
                break
            end -= 1
        if match is None:
            return [UNK]
        pieces.append(match)
        start = end
    return pieces


def tokenize_text(text: str, vocab: Vocab) -> list[str]:
    """Tokenize whitespace-separated text into wordpieces."""
    out: list[str] = []
    for word in text.split():
        out.extend(tokenize(word, vocab))
    return out
