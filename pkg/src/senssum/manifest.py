"""Corpus manifests: one JSONL record per spoken sentence.

A record ties together the audio (or its stand-in), the transcription,
and the summary, plus bookkeeping fields. Manifests are immutable after
load; every operation returns new manifests and leaves inputs alone.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from .errors import InvalidInput, ManifestError
from .metrics import TokenSeq, Unit, compression_rate

SPLITS = ("train", "core", "eval")
ORIGINS = ("human", "pseudo_hyp", "pseudo_ref")

# Wire order of the fixed record keys; extras follow sorted by name.
_FIELD_ORDER = (
    "id", "audio", "transcription", "summary",
    "split", "origin", "speaker", "duration_sec",
)

DEFAULT_SENTENCE_ENDS = ("。", "．", ".", "?", "!", "？", "！")


@dataclass(frozen=True)
class Record:
    id: str
    audio: str | None = None
    transcription: str | None = None
    summary: str | None = None
    split: str = "train"
    origin: str = "human"
    speaker: str | None = None
    duration_sec: float | None = None
    extras: dict = field(default_factory=dict, compare=True)

    def __post_init__(self):
        if not self.id:
            raise InvalidInput("record id must be non-empty")
        if self.split not in SPLITS:
            raise InvalidInput(f"unknown split {self.split!r}")
        if self.origin not in ORIGINS:
            raise InvalidInput(f"unknown origin {self.origin!r}")
        if self.origin.startswith("pseudo") and self.summary is None:
            raise InvalidInput(f"record {self.id}: pseudo origin requires a summary")
        if self.split == "core" and (self.transcription is None or self.summary is None):
            raise InvalidInput(f"record {self.id}: core records need transcription and summary")
        if self.duration_sec is not None and self.duration_sec < 0:
            raise InvalidInput(f"record {self.id}: negative duration")

    def is_labeled(self) -> bool:
        return self.transcription is not None and self.summary is not None

    def to_json(self) -> str:
        payload = {key: getattr(self, key) for key in _FIELD_ORDER}
        for key in sorted(self.extras):
            payload[key] = self.extras[key]
        return json.dumps(payload, ensure_ascii=False)

    @classmethod
    def from_payload(cls, payload: dict) -> "Record":
        known = {key: payload[key] for key in _FIELD_ORDER if key in payload}
        extras = {k: v for k, v in payload.items() if k not in _FIELD_ORDER}
        if "id" not in known:
            raise InvalidInput("record missing id")
        for key in ("id", "audio", "transcription", "summary", "split", "origin", "speaker"):
            val = known.get(key)
            if val is not None and not isinstance(val, str):
                raise InvalidInput(f"field {key} must be a string, got {type(val).__name__}")
        dur = known.get("duration_sec")
        if dur is not None and not isinstance(dur, (int, float)):
            raise InvalidInput(f"duration_sec must be numeric, got {type(dur).__name__}")
        for key in ("split", "origin"):
            if key in known and known[key] is None:
                known.pop(key)
        return cls(extras=extras, **known)


@dataclass(frozen=True)
class Manifest:
    records: tuple[Record, ...]
    name: str = ""

    def __post_init__(self):
        seen: set[str] = set()
        for rec in self.records:
            if rec.id in seen:
                raise InvalidInput(f"duplicate record id {rec.id!r}")
            seen.add(rec.id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def by_id(self) -> dict[str, Record]:
        return {rec.id: rec for rec in self.records}


def load_manifest(path: str, name: str = "") -> Manifest:
    """Read a JSONL manifest, reporting the line number of any bad record."""
    records: list[Record] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"malformed JSON: {exc.msg}", line=lineno) from exc
            if not isinstance(payload, dict):
                raise ManifestError("record is not a JSON object", line=lineno)
            try:
                rec = Record.from_payload(payload)
            except InvalidInput as exc:
                raise ManifestError(str(exc), line=lineno) from exc
            if rec.id in seen:
                raise ManifestError(f"duplicate record id {rec.id!r}", line=lineno)
            seen.add(rec.id)
            records.append(rec)
    return Manifest(records=tuple(records), name=name or path)


def save_manifest(manifest: Manifest, path: str):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in manifest.records:
            fh.write(rec.to_json() + "\n")


def split_core(manifest: Manifest, k: int) -> tuple[Manifest, Manifest]:
    """First k fully labeled records become the core set; the rest are
    the remaining set. Pure partition: no record is altered."""
    if k < 0 or k > len(manifest):
        raise InvalidInput(f"core size {k} out of range for {len(manifest)} records")
    head = manifest.records[:k]
    for rec in head:
        if not rec.is_labeled():
            raise InvalidInput(f"record {rec.id} inside core prefix lacks labels")
    return (
        Manifest(records=head, name=f"{manifest.name}/core"),
        Manifest(records=manifest.records[k:], name=f"{manifest.name}/remaining"),
    )


@dataclass(frozen=True)
class FilterRule:
    """Keep records whose transcription is longer than `min_chars`
    Unicode scalars (after NFC) and ends with one of the suffixes."""

    min_chars: int = 10
    sentence_end_patterns: tuple[str, ...] = DEFAULT_SENTENCE_ENDS

    def __post_init__(self):
        if self.min_chars < 0:
            raise InvalidInput("min_chars must be >= 0")
        if not self.sentence_end_patterns:
            raise InvalidInput("need at least one sentence-end pattern")

    def accepts(self, transcription: str) -> bool:
        norm = unicodedata.normalize("NFC", transcription)
        if len(norm) <= self.min_chars:
            return False
        return any(norm.endswith(p) for p in self.sentence_end_patterns)


def filter_kd_pool(manifest: Manifest, rule: FilterRule, report: dict | None = None) -> Manifest:
    """Select distillation-pool candidates by the transcription rule.

    Records without a transcription are skipped, not errors; pass a
    `report` dict to collect rejection counts by reason.
    """
    kept: list[Record] = []
    counts = {"kept": 0, "missing_transcription": 0, "too_short": 0, "no_sentence_end": 0}
    for rec in manifest.records:
        if rec.transcription is None:
            counts["missing_transcription"] += 1
            continue
        norm = unicodedata.normalize("NFC", rec.transcription)
        if len(norm) <= rule.min_chars:
            counts["too_short"] += 1
            continue
        if not any(norm.endswith(p) for p in rule.sentence_end_patterns):
            counts["no_sentence_end"] += 1
            continue
        counts["kept"] += 1
        kept.append(rec)
    if report is not None:
        report.update(counts)
    return Manifest(records=tuple(kept), name=f"{manifest.name}/pool")


def concat_manifests(parts: Sequence[Manifest], name: str) -> Manifest:
    records: list[Record] = []
    for part in parts:
        records.extend(part.records)
    return Manifest(records=tuple(records), name=name)


def retag(manifest: Manifest, **changes) -> Manifest:
    """Copy with fields changed on every record (split=..., origin=...)."""
    return Manifest(
        records=tuple(replace(rec, **changes) for rec in manifest.records),
        name=manifest.name,
    )


def manifest_stats(manifest: Manifest, unit: Unit = Unit.WORD) -> dict:
    """Corpus statistics: sample/speaker counts, durations, mean
    compression rate over records carrying both texts."""
    n_speakers = len({rec.speaker for rec in manifest.records if rec.speaker is not None})
    durations = [rec.duration_sec for rec in manifest.records if rec.duration_sec is not None]
    crs: list[float] = []
    skipped_cr = 0
    for rec in manifest.records:
        if rec.transcription is None or rec.summary is None:
            skipped_cr += 1
            continue
        source = TokenSeq.from_text(rec.transcription, unit)
        summary = TokenSeq.from_text(rec.summary, unit)
        if len(source) == 0:
            skipped_cr += 1
            continue
        crs.append(compression_rate(summary, source))
    return {
        "n_samples": len(manifest),
        "n_speakers": n_speakers,
        "total_dur_hrs": sum(durations) / 3600.0,
        "mean_dur_sec": (sum(durations) / len(durations)) if durations else 0.0,
        "mean_cr_percent": (sum(crs) / len(crs)) if crs else 0.0,
        "n_missing_duration": len(manifest) - len(durations),
        "n_excluded_from_cr": skipped_cr,
    }
