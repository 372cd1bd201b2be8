"""Text metrics for summarization and recognition quality.

Implements the evaluation protocol used throughout the toolkit:

* ROUGE-L: longest-common-subsequence precision/recall/F at sentence
  level, taking the max-F reference when several are given.
* WER / CER: Levenshtein distance over words or characters, divided by
  the reference length.
* Compression rate: percent length of the summary relative to its
  source.
* Embedding-similarity F score: greedy cosine matching between token
  embeddings, optionally idf-weighted.
* Percentile bootstrap confidence intervals for all of the above.

Everything here is pure python plus numpy for the embedding math, so
scores are reproducible bit for bit.
"""

from __future__ import annotations

import enum
import json
import math
import unicodedata
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, InvalidInput
from .prng import Prng

# ---------------------------------------------------------------------------
# Tokenization
# ---------------------------------------------------------------------------


class Unit(enum.Enum):
    """Granularity a metric is computed over."""

    WORD = "word"
    CHAR = "char"


def words(text: str) -> tuple[str, ...]:
    """Split NFC-normalized text on unicode whitespace."""
    return tuple(unicodedata.normalize("NFC", text).split())


def chars(text: str, keep_whitespace: bool = False) -> tuple[str, ...]:
    """One token per unicode scalar of the NFC-normalized text.

    Whitespace characters are dropped unless `keep_whitespace` is set,
    so CER does not reward getting the spacing right.
    """
    norm = unicodedata.normalize("NFC", text)
    if keep_whitespace:
        return tuple(norm)
    return tuple(ch for ch in norm if not ch.isspace())


@dataclass(frozen=True)
class TokenSeq:
    """An immutable token sequence tagged with its unit.

    Word-unit tokens must be non-empty and free of internal whitespace;
    mixing units in a metric call is an error.
    """

    tokens: tuple[str, ...]
    unit: Unit = Unit.WORD

    def __post_init__(self):
        for tok in self.tokens:
            if not tok:
                raise InvalidInput("empty token in sequence")
            if self.unit is Unit.WORD and any(c.isspace() for c in tok):
                raise InvalidInput(f"word token contains whitespace: {tok!r}")

    def __len__(self) -> int:
        return len(self.tokens)

    @classmethod
    def from_text(cls, text: str, unit: Unit = Unit.WORD) -> "TokenSeq":
        if unit is Unit.WORD:
            return cls(words(text), Unit.WORD)
        return cls(chars(text), Unit.CHAR)


def _check_units(a: TokenSeq, b: TokenSeq):
    if a.unit is not b.unit:
        raise InvalidInput(f"unit mismatch: {a.unit.value} vs {b.unit.value}")


# ---------------------------------------------------------------------------
# Sequence kernels
# ---------------------------------------------------------------------------


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    """Length of the longest common subsequence, two-row DP."""
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return 0
    prev = [0] * (len(b) + 1)
    cur = [0] * (len(b) + 1)
    for x in a:
        for j, y in enumerate(b, start=1):
            if x == y:
                cur[j] = prev[j - 1] + 1
            else:
                cur[j] = cur[j - 1] if cur[j - 1] >= prev[j] else prev[j]
        prev, cur = cur, prev
    return prev[len(b)]


def edit_distance(a: Sequence[str], b: Sequence[str]) -> int:
    """Levenshtein distance with unit substitution/insert/delete costs."""
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    cur = [0] * (len(b) + 1)
    for i, x in enumerate(a, start=1):
        cur[0] = i
        for j, y in enumerate(b, start=1):
            sub = prev[j - 1] + (x != y)
            ins = cur[j - 1] + 1
            dele = prev[j] + 1
            cur[j] = min(sub, ins, dele)
        prev, cur = cur, prev
    return prev[len(b)]


# ---------------------------------------------------------------------------
# ROUGE-L
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f: float


def _rouge_l_single(hyp: TokenSeq, ref: TokenSeq) -> RougeScore:
    if len(hyp) == 0 or len(ref) == 0:
        return RougeScore(0.0, 0.0, 0.0)
    lcs = lcs_length(hyp.tokens, ref.tokens)
    p = lcs / len(hyp)
    r = lcs / len(ref)
    f = 0.0 if p + r == 0 else 2 * p * r / (p + r)
    return RougeScore(p, r, f)


def rouge_l(hyp: TokenSeq, refs: TokenSeq | Sequence[TokenSeq]) -> RougeScore:
    """Sentence-level ROUGE-L against one or more references.

    With several references the score of the max-F reference is
    returned, ties resolved in favor of the earliest. An empty
    hypothesis or reference scores zero; an empty reference list is an
    error.
    """
    if isinstance(refs, TokenSeq):
        refs = [refs]
    if not refs:
        raise InvalidInput("need at least one reference")
    best: RougeScore | None = None
    for ref in refs:
        _check_units(hyp, ref)
        score = _rouge_l_single(hyp, ref)
        if best is None or score.f > best.f:
            best = score
    assert best is not None
    return best


# ---------------------------------------------------------------------------
# Error rates and compression
# ---------------------------------------------------------------------------


def error_rate(hyp: TokenSeq, ref: TokenSeq) -> float:
    """Edit distance normalized by reference length (WER or CER).

    Can exceed 1 when the hypothesis is much longer than the reference.
    An empty reference is undefined and raises.
    """
    _check_units(hyp, ref)
    if len(ref) == 0:
        raise InvalidInput("error rate undefined for empty reference")
    return edit_distance(hyp.tokens, ref.tokens) / len(ref)


def compression_rate(summary: TokenSeq, source: TokenSeq) -> float:
    """Percent of the source retained: 100 * |summary| / |source|."""
    _check_units(summary, source)
    if len(source) == 0:
        raise InvalidInput("compression rate undefined for empty source")
    return 100.0 * len(summary) / len(source)


# ---------------------------------------------------------------------------
# Embedding similarity F score
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EmbeddingSeq:
    """Token embeddings as a (n_tokens, dim) float array."""

    vectors: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        if self.vectors.ndim != 2:
            raise InvalidInput("vectors must be 2-dimensional")
        if self.weights is not None:
            if self.weights.shape != (self.vectors.shape[0],):
                raise InvalidInput("one weight per token required")
            if np.any(self.weights < 0) or self.weights.sum() == 0:
                raise InvalidInput("weights must be non-negative, not all zero")

    def __len__(self) -> int:
        return int(self.vectors.shape[0])


def bertscore_greedy(hyp: EmbeddingSeq, ref: EmbeddingSeq) -> RougeScore:
    """Greedy-matching similarity F between embedded token sequences.

    Each hypothesis token is matched to its most cosine-similar
    reference token (precision side) and vice versa (recall side); the
    per-token maxima are averaged, weighted when weights are attached.
    No baseline rescaling is applied.
    """
    if len(hyp) == 0 or len(ref) == 0:
        return RougeScore(0.0, 0.0, 0.0)
    if hyp.vectors.shape[1] != ref.vectors.shape[1]:
        raise InvalidInput("embedding dimension mismatch")
    hn = np.linalg.norm(hyp.vectors, axis=1)
    rn = np.linalg.norm(ref.vectors, axis=1)
    if np.any(hn == 0) or np.any(rn == 0):
        raise InvalidInput("zero-norm embedding vector")
    sim = (hyp.vectors / hn[:, None]) @ (ref.vectors / rn[:, None]).T

    def _avg(maxima: np.ndarray, weights: np.ndarray | None) -> float:
        if weights is None:
            return float(maxima.mean())
        return float((maxima * weights).sum() / weights.sum())

    p = _avg(sim.max(axis=1), hyp.weights)
    r = _avg(sim.max(axis=0), ref.weights)
    f = 0.0 if p + r == 0 else 2 * p * r / (p + r)
    return RougeScore(p, r, f)


def idf_weights(seqs: Iterable[Sequence[str]]) -> dict[str, float]:
    """Smoothed inverse document frequency over a corpus of sequences."""
    seqs = list(seqs)
    n = len(seqs)
    if n == 0:
        raise InvalidInput("idf needs at least one document")
    df: dict[str, int] = {}
    for seq in seqs:
        for tok in set(seq):
            df[tok] = df.get(tok, 0) + 1
    return {tok: math.log((n + 1) / (count + 1)) + 1.0 for tok, count in df.items()}


# ---------------------------------------------------------------------------
# Bootstrap confidence intervals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MetricSummary:
    """Mean of per-item scores with a percentile-bootstrap interval."""

    mean: float
    ci_low: float
    ci_high: float
    n: int
    b: int
    level: float = 0.95

    @property
    def halfwidth(self) -> float:
        return (self.ci_high - self.ci_low) / 2.0

    def overlaps(self, other: "MetricSummary") -> bool:
        return self.ci_low <= other.ci_high and other.ci_low <= self.ci_high


def _percentile(sorted_vals: list[float], q: float) -> float:
    """Linear-interpolated percentile of pre-sorted values, q in [0, 1]."""
    if not sorted_vals:
        raise InvalidInput("percentile of empty list")
    pos = q * (len(sorted_vals) - 1)
    lo = math.floor(pos)
    hi = math.ceil(pos)
    if lo == hi or sorted_vals[lo] == sorted_vals[hi]:
        return sorted_vals[lo]
    frac = pos - lo
    return sorted_vals[lo] * (1 - frac) + sorted_vals[hi] * frac


def bootstrap_ci(
    scores: Sequence[float],
    b: int = 1000,
    level: float = 0.95,
    seed: int = 0,
) -> MetricSummary:
    """Percentile bootstrap interval for the mean of `scores`.

    Draws `b` resamples with replacement and takes the (1-level)/2 and
    (1+level)/2 percentiles of the resample means. When the number of
    distinct resamples n^n is at most `b` the enumeration is exhaustive
    instead, which makes tiny cases exact. Identical inputs give
    identical intervals for a fixed seed.
    """
    if not scores:
        raise InvalidInput("bootstrap needs at least one score")
    if b < 1:
        raise InvalidInput(f"resample count must be positive, got {b}")
    if not 0 < level < 1:
        raise InvalidInput(f"level must be in (0, 1), got {level}")
    vals = [float(s) for s in scores]
    n = len(vals)
    mean = sum(vals) / n

    if n ** n <= b:
        means = sorted(
            sum(vals[i] for i in idx) / n
            for idx in _index_product(n)
        )
    else:
        rng = Prng(seed)
        means = sorted(
            sum(vals[rng.next_below(n)] for _ in range(n)) / n
            for _ in range(b)
        )

    alpha = (1.0 - level) / 2.0
    return MetricSummary(
        mean=mean,
        ci_low=_percentile(means, alpha),
        ci_high=_percentile(means, 1.0 - alpha),
        n=n,
        b=len(means),
        level=level,
    )


def _index_product(n: int):
    """All n^n index tuples, in lexicographic order."""
    idx = [0] * n
    while True:
        yield tuple(idx)
        pos = n - 1
        while pos >= 0 and idx[pos] == n - 1:
            idx[pos] = 0
            pos -= 1
        if pos < 0:
            return
        idx[pos] += 1


# ---------------------------------------------------------------------------
# Per-item score files
# ---------------------------------------------------------------------------


@dataclass
class ScoreRow:
    """One scored item, as written to a scores file."""

    id: str
    values: dict[str, float] = field(default_factory=dict)


def save_scores(path: str, rows: Sequence[ScoreRow]):
    """Write per-item scores as json lines: {"id": ..., <metric>: ...}."""
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            payload = {"id": row.id}
            payload.update({k: row.values[k] for k in sorted(row.values)})
            fh.write(json.dumps(payload, ensure_ascii=False) + "\n")


def load_scores(path: str) -> list[ScoreRow]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"scores line {lineno}: {exc}") from exc
            if "id" not in payload:
                raise DataError(f"scores line {lineno}: missing id")
            values = {
                k: float(v) for k, v in payload.items()
                if k != "id" and isinstance(v, (int, float))
            }
            rows.append(ScoreRow(id=str(payload["id"]), values=values))
    return rows
