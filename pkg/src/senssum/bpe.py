"""Byte-pair-encoding subword tokenizer and a character tokenizer.

Training follows the classic greedy recipe: represent each word as a
character sequence with an end-of-word marker fused onto the final
character, then repeatedly merge the most frequent adjacent symbol
pair. Ties break to the lexicographically smallest pair so identical
corpora always produce identical tables.

Whitespace and the marker metacharacter are carried through encoding as
explicit escape symbols, which makes decode(encode(x)) == x hold for
arbitrary strings, not just tidy ones.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import InvalidInput
from .metrics import TokenSeq, Unit, chars

WORD_END = "⟨w⟩"          # ⟨w⟩, fused onto the last symbol of a word
_META = "⟨"                    # ⟨ opens marker and escape groups
_CLOSE = "⟩"

SPECIALS = ("<pad>", "<unk>", "<bos>", "<eos>")


def _escape_char(ch: str) -> str:
    """Atomic symbol for one character; whitespace and the marker
    metacharacter become hex escape groups so they survive decoding."""
    if ch.isspace() or ch == _META:
        return f"{_META}{ord(ch):x}{_CLOSE}"
    return ch


def _word_symbols(word: str) -> tuple[str, ...]:
    syms = [_escape_char(ch) for ch in word]
    syms[-1] += WORD_END
    return tuple(syms)


def _segments(text: str) -> Iterable[tuple[bool, str]]:
    """Alternating (is_word, run) segments of the text."""
    i = 0
    while i < len(text):
        is_space = text[i].isspace()
        j = i
        while j < len(text) and text[j].isspace() == is_space:
            j += 1
        yield (not is_space, text[i:j])
        i = j


@dataclass(frozen=True)
class MergeTable:
    """An ordered merge list with the vocabulary it induces.

    `vocab` maps symbols to ids: specials take 0..3, base symbols come
    next in sorted order, then merge products in training order.
    """

    merges: tuple[tuple[str, str], ...]
    vocab: dict[str, int] = field(compare=False)
    target_size: int = 0

    def apply(self, symbols: Sequence[str]) -> list[str]:
        """Apply every merge in training order to a symbol sequence."""
        out = tuple(symbols)
        for pair in self.merges:
            out = _apply_one(out, pair)
        return list(out)


def _build_vocab(base: Iterable[str], merges: Sequence[tuple[str, str]]) -> dict[str, int]:
    vocab: dict[str, int] = {}
    for sym in SPECIALS:
        vocab[sym] = len(vocab)
    for sym in sorted(set(base)):
        vocab[sym] = len(vocab)
    for left, right in merges:
        merged = left + right
        if merged not in vocab:
            vocab[merged] = len(vocab)
    return vocab


def train_bpe(corpus: Sequence[str], target_size: int) -> MergeTable:
    """Train a merge table on whitespace-delimited words of `corpus`.

    Stops when the vocabulary reaches `target_size` or when no symbol
    pair occurs at least twice. `target_size` must cover the base
    character inventory plus the four specials.
    """
    if not corpus:
        raise InvalidInput("training corpus is empty")
    word_freqs: Counter[tuple[str, ...]] = Counter()
    for text in corpus:
        for word in text.split():
            word_freqs[_word_symbols(word)] += 1

    base = {sym for word in word_freqs for sym in word}
    floor = len(base) + len(SPECIALS)
    if target_size < floor:
        raise InvalidInput(
            f"target_size {target_size} below base vocabulary size {floor}"
        )

    merges: list[tuple[str, str]] = []
    vocab = _build_vocab(base, [])
    words = dict(word_freqs)

    while len(vocab) < target_size:
        pair_counts: Counter[tuple[str, str]] = Counter()
        for word, freq in words.items():
            for i in range(len(word) - 1):
                pair_counts[(word[i], word[i + 1])] += freq
        if not pair_counts:
            break
        best_count = max(pair_counts.values())
        if best_count < 2:
            break
        best = min(p for p, c in pair_counts.items() if c == best_count)
        merges.append(best)
        merged = best[0] + best[1]
        if merged not in vocab:
            vocab[merged] = len(vocab)
        # Two old forms can collapse to one after a merge; sum their counts.
        regrouped: Counter[tuple[str, ...]] = Counter()
        for word, freq in words.items():
            regrouped[_apply_one(word, best)] += freq
        words = dict(regrouped)

    return MergeTable(merges=tuple(merges), vocab=vocab, target_size=target_size)


def _apply_one(word: tuple[str, ...], pair: tuple[str, str]) -> tuple[str, ...]:
    left, right = pair
    out: list[str] = []
    i = 0
    while i < len(word):
        if i < len(word) - 1 and word[i] == left and word[i + 1] == right:
            out.append(left + right)
            i += 2
        else:
            out.append(word[i])
            i += 1
    return tuple(out)


def encode(table: MergeTable, text: str) -> TokenSeq:
    """Segment text into subword tokens.

    Words are merged per the table; characters never seen in training
    pass through as singleton symbols; whitespace runs are emitted as
    escape symbols so decoding can restore them exactly.
    """
    tokens: list[str] = []
    for is_word, run in _segments(text):
        if is_word:
            tokens.extend(table.apply(_word_symbols(run)))
        else:
            tokens.extend(_escape_char(ch) for ch in run)
    return TokenSeq(tuple(tokens), Unit.WORD)


def decode(table: MergeTable, tokens: TokenSeq | Sequence[str]) -> str:
    """Inverse of encode. Raises on malformed marker or escape groups."""
    if isinstance(tokens, TokenSeq):
        tokens = tokens.tokens
    out: list[str] = []
    for tok in tokens:
        i = 0
        while i < len(tok):
            ch = tok[i]
            if ch != _META:
                out.append(ch)
                i += 1
                continue
            end = tok.find(_CLOSE, i + 1)
            if end < 0:
                raise InvalidInput(f"unterminated marker in token {tok!r}")
            body = tok[i + 1 : end]
            if body == "w":
                if end != len(tok) - 1:
                    raise InvalidInput(f"word marker not at token end: {tok!r}")
            else:
                try:
                    out.append(chr(int(body, 16)))
                except ValueError as exc:
                    raise InvalidInput(f"bad escape {body!r} in token {tok!r}") from exc
            i = end + 1
    return "".join(out)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

_HEADER = "bpe-v1"


def save_table(table: MergeTable, path: str):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_table(table))


def serialize_table(table: MergeTable) -> str:
    lines = [f"{_HEADER} {table.target_size}"]
    lines.extend(f"{left} {right}" for left, right in table.merges)
    return "\n".join(lines) + "\n"


def load_table(path: str, base_inventory: Iterable[str] | None = None) -> MergeTable:
    with open(path, encoding="utf-8") as fh:
        return deserialize_table(fh.read(), base_inventory)


def deserialize_table(text: str, base_inventory: Iterable[str] | None = None) -> MergeTable:
    """Rebuild a table from its serialized form.

    Without an explicit base inventory, the base symbols are recovered
    as every merge operand that is not itself the product of an earlier
    merge. That reproduces the training-time vocabulary whenever all
    base symbols took part in some merge.
    """
    lines = text.splitlines()
    if not lines:
        raise InvalidInput("empty merge table file")
    head = lines[0].split()
    if len(head) != 2 or head[0] != _HEADER:
        raise InvalidInput(f"bad merge table header: {lines[0]!r}")
    try:
        target_size = int(head[1])
    except ValueError as exc:
        raise InvalidInput(f"bad target size: {head[1]!r}") from exc
    merges: list[tuple[str, str]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(" ")
        if len(parts) != 2:
            raise InvalidInput(f"line {lineno}: expected 'left right', got {line!r}")
        merges.append((parts[0], parts[1]))

    if base_inventory is None:
        produced: set[str] = set()
        base = []
        for left, right in merges:
            for operand in (left, right):
                if operand not in produced:
                    base.append(operand)
            produced.add(left + right)
        base_inventory = base
    return MergeTable(
        merges=tuple(merges),
        vocab=_build_vocab(base_inventory, merges),
        target_size=target_size,
    )


def char_tokenize(text: str, keep_whitespace: bool = False) -> TokenSeq:
    """One token per Unicode scalar after NFC normalization."""
    norm = chars(text, keep_whitespace=keep_whitespace)
    return TokenSeq(norm, Unit.CHAR)
