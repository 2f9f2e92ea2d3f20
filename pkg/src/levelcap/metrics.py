"""Lexical-diversity and semantic-retention metrics over caption corpora.

All word-based metrics share the tokenizer in :mod:`levelcap.tokens`, the
same rule budget checks use, so "average length" and level budgets agree.

MTLD here scans growing segments and closes a full factor as soon as the
segment's type-token ratio drops below the threshold *and* the segment has
reached the minimum length; this close also applies on the final token.
Whatever tail remains afterwards contributes the usual partial factor
``(1 - TTR) / (1 - threshold)``. A pass that accumulates no factor weight
at all (perfectly diverse text) scores ``token_count / (1 - threshold)``,
which keeps longer perfectly-diverse texts scoring strictly higher than any
text that ever closed a factor.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .records import LevelSet
from .tokens import tokenize

DEFAULT_TTR_THRESHOLD = 0.72
DEFAULT_MIN_SEGMENT = 10

LEVEL_PAIRS = ((1, 2), (2, 3), (3, 4), (4, 5))


class MetricError(Exception):
    pass


class EmptyInput(MetricError):
    pass


class EmptySource(MetricError):
    pass


class EmptyCorpus(MetricError):
    pass


class ZeroVector(MetricError):
    """Cosine similarity is undefined for a zero embedding."""


def ttr(tokens: Sequence[str]) -> float:
    """Type-token ratio: distinct tokens over total tokens, in (0, 1]."""
    if not tokens:
        raise EmptyInput("ttr requires at least one token")
    return len(set(tokens)) / len(tokens)


def _mtld_pass(
    tokens: Sequence[str], min_segment: int, threshold: float
) -> float:
    factor = 0.0
    seg_types: set[str] = set()
    seg_len = 0
    for token in tokens:
        seg_len += 1
        seg_types.add(token)
        if len(seg_types) / seg_len < threshold and seg_len >= min_segment:
            factor += 1.0
            seg_types = set()
            seg_len = 0
    if seg_len > 0:
        segment_ttr = len(seg_types) / seg_len
        factor += (1.0 - segment_ttr) / (1.0 - threshold)
    if factor == 0.0:
        return len(tokens) / (1.0 - threshold)
    return len(tokens) / factor


def mtld(
    tokens: Sequence[str],
    min_segment: int = DEFAULT_MIN_SEGMENT,
    threshold: float = DEFAULT_TTR_THRESHOLD,
) -> float:
    """Mean of a forward and a reversed-token factor-count pass."""
    if not tokens:
        raise EmptyInput("mtld requires at least one token")
    forward = _mtld_pass(tokens, min_segment, threshold)
    reverse = _mtld_pass(list(reversed(tokens)), min_segment, threshold)
    return (forward + reverse) / 2.0


def ngram_vocab(corpus: Sequence[Sequence[str]], n: int) -> int:
    """Distinct n-grams formed within captions (never across captions)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    grams: set[tuple[str, ...]] = set()
    for tokens in corpus:
        for i in range(len(tokens) - n + 1):
            grams.add(tuple(tokens[i : i + n]))
    return len(grams)


def compression_ratio(source: Sequence[str], target: Sequence[str]) -> float:
    """1 minus the target/source word-count ratio.

    0 means no compression, 1 means the target vanished; negative values
    (target longer than source) are reported raw.
    """
    if not source:
        raise EmptySource("compression ratio needs a non-empty source")
    return 1.0 - len(target) / len(source)


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ZeroVector("cosine similarity undefined for zero vectors")
    return float(np.dot(a, b) / (norm_a * norm_b))


def semantic_similarity(a: str, b: str, backend) -> float:
    """Cosine similarity of the two texts' embeddings, in [-1, 1]."""
    if not a or not b:
        raise EmptyInput("semantic similarity needs two non-empty texts")
    return cosine_similarity(backend.embed(a), backend.embed(b))


def scs(s: float, c: float) -> float:
    """Harmonic mean of semantic similarity and compression ratio.

    Both arguments are clamped to [0, 1] first (embeddings can produce
    negative cosines); a zero sum yields 0. Bounded in [0, 1].
    """
    s = min(max(s, 0.0), 1.0)
    c = min(max(c, 0.0), 1.0)
    if s + c == 0.0:
        return 0.0
    return 2.0 * s * c / (s + c)


@dataclass
class CorpusReport:
    n_captions: int
    average_length: float
    mtld_mean: float
    unigram_vocab: int
    bigram_vocab: int

    def to_dict(self) -> dict:
        return {
            "n_captions": self.n_captions,
            "average_length": self.average_length,
            "mtld_mean": self.mtld_mean,
            "unigram_vocab": self.unigram_vocab,
            "bigram_vocab": self.bigram_vocab,
        }


@dataclass
class PairRetention:
    similarity: float
    compression: float
    scs: float


@dataclass
class RetentionReport:
    pairs: dict[tuple[int, int], PairRetention]

    def to_dict(self) -> dict:
        return {
            f"level{i}_to_level{j}": {
                "semantic_similarity": p.similarity,
                "compression_ratio": p.compression,
                "scs": p.scs,
            }
            for (i, j), p in sorted(self.pairs.items())
        }


def corpus_report(
    captions: Sequence[str],
    tokenizer: Callable[[str], list[str]] = tokenize,
) -> CorpusReport:
    """Lexical metrics over a caption corpus; MTLD is a per-caption mean.

    Captions that tokenize to nothing contribute a zero length but are
    skipped for MTLD (undefined on empty input).
    """
    if not captions:
        raise EmptyCorpus("corpus report needs at least one caption")
    token_lists = [tokenizer(c) for c in captions]
    lengths = [len(t) for t in token_lists]
    mtld_scores = [mtld(t) for t in token_lists if t]
    return CorpusReport(
        n_captions=len(captions),
        average_length=float(np.mean(lengths)),
        mtld_mean=float(np.mean(mtld_scores)) if mtld_scores else 0.0,
        unigram_vocab=ngram_vocab(token_lists, 1),
        bigram_vocab=ngram_vocab(token_lists, 2),
    )


def retention_report(
    levelsets: Sequence[LevelSet],
    backend,
    tokenizer: Callable[[str], list[str]] = tokenize,
) -> RetentionReport:
    """Semantic retention between adjacent levels, averaged per asset.

    For each adjacent pair, per-asset cosine similarities and compression
    ratios are averaged across the corpus, then SCS is taken of the two
    aggregates.
    """
    if not levelsets:
        raise EmptyCorpus("retention report needs at least one level set")
    pairs: dict[tuple[int, int], PairRetention] = {}
    for i, j in LEVEL_PAIRS:
        sims = []
        comps = []
        for levels in levelsets:
            source, target = levels.get(i), levels.get(j)
            sims.append(semantic_similarity(source, target, backend))
            comps.append(compression_ratio(tokenizer(source), tokenizer(target)))
        mean_sim = float(np.mean(sims))
        mean_comp = float(np.mean(comps))
        pairs[(i, j)] = PairRetention(
            similarity=mean_sim, compression=mean_comp, scs=scs(mean_sim, mean_comp)
        )
    return RetentionReport(pairs=pairs)
