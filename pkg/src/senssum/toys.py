"""Deterministic toy task and models for desk-scale pipeline runs.

The synthetic task: sentences interleave salient content tokens with
filler runs; the gold summary is exactly the content tokens in order.
A character-level corruption channel stands in for the acoustics, an
edit-distance oracle stands in for a robust pretrained summarizer, and
a trainable token-salience model stands in for the end-to-end student.

Everything is a pure function of explicit seeds, so whole experiment
sweeps are bit-reproducible.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

from .errors import ConfigError, InvalidInput
from .manifest import Manifest, Record
from .metrics import TokenSeq, edit_distance
from .prng import Prng, derive_seed

# ---------------------------------------------------------------------------
# Synthetic task
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticTaskConfig:
    """Shape of the synthetic summarization task.

    Ranges are inclusive (lo, hi) pairs. Content and filler vocabularies
    must be disjoint; keeping filler words short and content words long
    keeps them apart under moderate character noise.
    """

    content_vocab: tuple[str, ...]
    filler_vocab: tuple[str, ...]
    content_per_sentence: tuple[int, int] = (1, 3)
    filler_per_content: tuple[int, int] = (2, 4)
    n_sentences: int = 100
    seed: int = 0

    def __post_init__(self):
        if not self.content_vocab or not self.filler_vocab:
            raise ConfigError("vocabularies must be nonempty")
        if set(self.content_vocab) & set(self.filler_vocab):
            raise ConfigError("content and filler vocabularies overlap")
        for word in self.content_vocab + self.filler_vocab:
            if not word or any(c.isspace() for c in word):
                raise ConfigError(f"bad vocabulary word {word!r}")
        for name, (lo, hi) in (("content_per_sentence", self.content_per_sentence),
                               ("filler_per_content", self.filler_per_content)):
            if lo > hi or lo < 0:
                raise ConfigError(f"empty range for {name}: ({lo}, {hi})")
        if self.content_per_sentence[0] < 1:
            raise ConfigError("need at least one content token per sentence")
        if self.n_sentences < 0:
            raise ConfigError("n_sentences must be >= 0")

    def alphabet(self) -> tuple[str, ...]:
        seen = sorted({c for w in self.content_vocab + self.filler_vocab for c in w})
        return tuple(seen)


DEFAULT_CONTENT = (
    "market", "signal", "policy", "engine", "harbor", "violet",
    "dragon", "stadium", "pepper", "canyon", "ladder", "monkey",
)
DEFAULT_FILLER = ("um", "uh", "so", "well", "now", "then", "okay", "right")


def default_task_config(n_sentences: int = 100, seed: int = 0) -> SyntheticTaskConfig:
    """The stock task: 12 long content words, 8 short fillers.

    Content words sit at pairwise edit distance >= 3, so one character
    error never makes two of them confusable, and fillers are short
    enough that no single error drags one within reach of content.
    """
    return SyntheticTaskConfig(
        content_vocab=DEFAULT_CONTENT,
        filler_vocab=DEFAULT_FILLER,
        content_per_sentence=(1, 3),
        filler_per_content=(2, 4),
        n_sentences=n_sentences,
        seed=seed,
    )


def gen_synthetic_corpus(
    cfg: SyntheticTaskConfig,
    channel: "CorruptionChannel | None" = None,
    split: str = "train",
    id_prefix: str = "syn",
) -> Manifest:
    """Generate the synthetic corpus as a manifest.

    Each record derives its own seed from (cfg.seed, index), so records
    are independent of n_sentences and generation could parallelize.
    With a channel, the corrupted transcription is stored in the
    speech_surrogate sidecar to stand in for audio.
    """
    records = []
    for i in range(cfg.n_sentences):
        record_seed = derive_seed(cfg.seed, i)
        rng = Prng(record_seed)
        clo, chi = cfg.content_per_sentence
        flo, fhi = cfg.filler_per_content
        n_content = clo + rng.next_below(chi - clo + 1)
        tokens: list[str] = []
        summary: list[str] = []
        for _ in range(n_content):
            n_fill = flo + rng.next_below(fhi - flo + 1)
            for _ in range(n_fill):
                tokens.append(rng.choice(cfg.filler_vocab))
            word = rng.choice(cfg.content_vocab)
            tokens.append(word)
            summary.append(word)
        speaker = f"spk{rng.next_below(8)}"
        transcription = " ".join(tokens)
        extras = {}
        if channel is not None:
            extras["speech_surrogate"] = corrupt(transcription, channel, record_seed)
        records.append(Record(
            id=f"{id_prefix}{i:06d}",
            audio=None,
            transcription=transcription,
            summary=" ".join(summary),
            split=split,
            origin="human",
            speaker=speaker,
            duration_sec=round(0.3 * len(tokens), 2),
            extras=extras,
        ))
    return Manifest(records=tuple(records), name=f"{id_prefix}-synthetic")


# ---------------------------------------------------------------------------
# Corruption channel
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CorruptionChannel:
    """Per-character noise: substitute, delete, or insert.

    One uniform draw decides each character's fate against the three
    rate thresholds in that order, so the expected character error rate
    is close to sub_rate + del_rate + ins_rate.
    """

    sub_rate: float = 0.0
    del_rate: float = 0.0
    ins_rate: float = 0.0
    alphabet: tuple[str, ...] = tuple("abcdefghijklmnopqrstuvwxyz")
    seed: int = 0

    def __post_init__(self):
        for name, rate in (("sub_rate", self.sub_rate), ("del_rate", self.del_rate),
                           ("ins_rate", self.ins_rate)):
            if not 0.0 <= rate <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1]")
        if self.sub_rate + self.del_rate + self.ins_rate > 1.0:
            raise ConfigError("rates must sum to at most 1")
        if not self.alphabet:
            raise ConfigError("alphabet must be nonempty")

    @property
    def total_rate(self) -> float:
        return self.sub_rate + self.del_rate + self.ins_rate


def corrupt(text: str, ch: CorruptionChannel, record_seed: int) -> str:
    """Apply the channel to one string, seeded per record.

    Substitutions never reproduce the original character, so every
    triggered decision is a real edit.
    """
    rng = Prng((ch.seed ^ record_seed) & ((1 << 64) - 1))
    out: list[str] = []
    for c in text:
        u = rng.next_float()
        if u < ch.sub_rate:
            pool = [a for a in ch.alphabet if a != c] or list(ch.alphabet)
            out.append(pool[rng.next_below(len(pool))])
        elif u < ch.sub_rate + ch.del_rate:
            continue
        elif u < ch.total_rate:
            out.append(c)
            out.append(ch.alphabet[rng.next_below(len(ch.alphabet))])
        else:
            out.append(c)
    return "".join(out)


# ---------------------------------------------------------------------------
# Oracle summarizer
# ---------------------------------------------------------------------------


def oracle_tsum(
    text: str,
    cfg: SyntheticTaskConfig,
    max_edit: int = 1,
    copy_every: int = 0,
) -> str:
    """Summarize by recovering content tokens despite character noise.

    Every whitespace token within edit distance max_edit of a content
    word is emitted as that word's canonical form, in order; everything
    else is dropped. `copy_every` > 0 makes the oracle copy-prone: every
    copy_every-th unmatched token is kept verbatim, imitating a
    summarizer that pads its output with source material.
    """
    out: list[str] = []
    skipped = 0
    for token in unicodedata.normalize("NFC", text).split():
        match = _nearest_content(token, cfg.content_vocab, max_edit)
        if match is not None:
            out.append(match)
        else:
            skipped += 1
            if copy_every > 0 and skipped % copy_every == 0:
                out.append(token)
    return " ".join(out)


@lru_cache(maxsize=65536)
def _nearest_content(token: str, vocab: tuple[str, ...], max_edit: int) -> str | None:
    best: tuple[int, int] | None = None   # (distance, vocab index)
    for idx, word in enumerate(vocab):
        if abs(len(word) - len(token)) > max_edit:
            continue
        d = edit_distance(tuple(token), tuple(word))
        if d <= max_edit and (best is None or d < best[0]):
            best = (d, idx)
    return vocab[best[1]] if best else None


# ---------------------------------------------------------------------------
# Trainable salience model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SalienceModel:
    """Keep-or-drop classifier over input tokens.

    keep_prob holds the smoothed probability that a token survives into
    the summary; unseen tokens fall back to default_prob. Inference
    keeps tokens whose probability reaches the threshold.
    """

    keep_prob: dict[str, float] = field(compare=True)
    alpha: float = 1.0
    default_prob: float = 0.5
    threshold: float = 0.5

    def __post_init__(self):
        for name, p in (("default_prob", self.default_prob),):
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1]")
        if self.threshold < 0.0:
            raise ConfigError("threshold must be >= 0")

    def save(self, path: str):
        payload = {
            "alpha": self.alpha,
            "default_prob": self.default_prob,
            "threshold": self.threshold,
            "keep_prob": {k: self.keep_prob[k] for k in sorted(self.keep_prob)},
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, ensure_ascii=False, sort_keys=True, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path: str) -> "SalienceModel":
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        return cls(
            keep_prob=dict(payload["keep_prob"]),
            alpha=float(payload["alpha"]),
            default_prob=float(payload["default_prob"]),
            threshold=float(payload["threshold"]),
        )


def train_salience(
    pairs: Sequence[tuple[TokenSeq, TokenSeq]],
    alpha: float = 1.0,
    threshold: float = 0.5,
) -> SalienceModel:
    """Fit keep-probabilities from (input, summary) pairs.

    Each pair is aligned by LCS; input tokens on the alignment path
    count as kept, the rest as dropped. Probabilities are Laplace
    smoothed: (kept + alpha) / (seen + 2 alpha), and a never-seen token
    gets alpha / (2 alpha) = 1/2, i.e. no opinion.
    """
    if not pairs:
        raise InvalidInput("need at least one training pair")
    if alpha <= 0:
        raise InvalidInput("alpha must be positive")
    seen: dict[str, int] = {}
    kept: dict[str, int] = {}
    for source, summary in pairs:
        flags = _lcs_keep_flags(source.tokens, summary.tokens)
        for token, used in zip(source.tokens, flags):
            seen[token] = seen.get(token, 0) + 1
            if used:
                kept[token] = kept.get(token, 0) + 1
    keep_prob = {
        token: (kept.get(token, 0) + alpha) / (count + 2 * alpha)
        for token, count in seen.items()
    }
    return SalienceModel(
        keep_prob=keep_prob, alpha=alpha,
        default_prob=alpha / (2 * alpha), threshold=threshold,
    )


def _lcs_keep_flags(source: tuple[str, ...], summary: tuple[str, ...]) -> list[bool]:
    """Which source tokens lie on one deterministic LCS path."""
    n, m = len(source), len(summary)
    dp = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        row = dp[i]
        prev = dp[i - 1]
        for j in range(1, m + 1):
            if source[i - 1] == summary[j - 1]:
                row[j] = prev[j - 1] + 1
            else:
                row[j] = prev[j] if prev[j] >= row[j - 1] else row[j - 1]
    flags = [False] * n
    i, j = n, m
    while i > 0 and j > 0:
        if source[i - 1] == summary[j - 1] and dp[i][j] == dp[i - 1][j - 1] + 1:
            flags[i - 1] = True
            i -= 1
            j -= 1
        elif dp[i - 1][j] >= dp[i][j - 1]:
            i -= 1
        else:
            j -= 1
    return flags


def infer_salience(model: SalienceModel, source: TokenSeq) -> TokenSeq:
    """Keep the tokens the model believes belong in the summary."""
    kept = tuple(
        token for token in source.tokens
        if model.keep_prob.get(token, model.default_prob) >= model.threshold
    )
    return TokenSeq(kept, source.unit)
