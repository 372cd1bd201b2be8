"""Sequence-level distillation: pseudo-summary generation and mixes.

The teacher cascade summarizes unlabeled speech (or its reference
transcription); the resulting pseudo-labeled records are concatenated
after the human-labeled core set in fixed prefix order, so every
smaller training mix is literally a prefix of every larger one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Sequence

from .backend import Backend, TransduceRequest, cascade_transduce, transduce_batch
from .errors import ConfigError, InvalidInput
from .manifest import FilterRule, Manifest, Record, filter_kd_pool
from .metrics import MetricSummary, TokenSeq, bootstrap_ci, rouge_l

MODES = ("from_asr_hypothesis", "from_reference_transcription")


@dataclass(frozen=True)
class KdConfig:
    """Distillation settings.

    mix_sizes are total training-set sizes (core plus pseudo), sorted
    ascending. The seed only feeds downstream training shuffles; label
    generation itself is deterministic.
    """

    mode: str = "from_asr_hypothesis"
    pool_filter: FilterRule = field(default_factory=FilterRule)
    mix_sizes: tuple[int, ...] = ()
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if list(self.mix_sizes) != sorted(self.mix_sizes):
            raise ConfigError("mix_sizes must be sorted ascending")
        if any(s < 1 for s in self.mix_sizes):
            raise ConfigError("mix sizes must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be unsigned")


def _surrogate_input(rec: Record) -> str | None:
    surrogate = rec.extras.get("speech_surrogate")
    if isinstance(surrogate, str) and surrogate:
        return surrogate
    return rec.audio


def generate_pseudo_labels(
    pool: Manifest,
    asr: Backend | None,
    tsum: Backend,
    cfg: KdConfig,
    log_path: str | None = None,
    report: dict | None = None,
) -> Manifest:
    """Label the pool with teacher summaries.

    In from_asr_hypothesis mode each record's speech surrogate (or audio
    reference) runs through ASR then TSum; in
    from_reference_transcription mode the reference transcription goes
    straight to TSum and the ASR endpoint is never touched. Records
    whose generation fails or comes back empty are dropped, counted,
    and logged, not errors.
    """
    filter_report: dict = {}
    filtered = filter_kd_pool(pool, cfg.pool_filter, report=filter_report)
    if len(filtered) == 0:
        raise ConfigError(
            f"pool {pool.name!r} is empty after filtering: {filter_report}"
        )

    reqs = []
    for rec in filtered:
        if cfg.mode == "from_asr_hypothesis":
            source = _surrogate_input(rec)
            if source is None:
                raise InvalidInput(
                    f"record {rec.id} has neither speech surrogate nor audio"
                )
        else:
            source = rec.transcription
        reqs.append(TransduceRequest(id=rec.id, input=source))

    latencies: list = []
    if cfg.mode == "from_asr_hypothesis":
        if asr is None:
            raise InvalidInput("from_asr_hypothesis mode needs an ASR backend")
        responses = cascade_transduce(asr, tsum, reqs, latency_out=latencies)
        stage = "cascade"
        origin = "pseudo_hyp"
    else:
        responses = transduce_batch(tsum, reqs, latency_out=latencies)
        stage = "tsum"
        origin = "pseudo_ref"

    latency_by_id: dict[str, float] = {}
    for rid, seconds in latencies:
        latency_by_id[rid] = latency_by_id.get(rid, 0.0) + seconds

    kept: list[Record] = []
    counts = {"generated": 0, "backend_failed": 0, "empty_summary": 0}
    counts.update({f"filter_{k}": v for k, v in filter_report.items()})
    log_rows = []
    for rec, resp in zip(filtered, responses):
        row = {
            "id": rec.id,
            "stage": stage,
            "latency_ms": round(latency_by_id.get(rec.id, 0.0) * 1000.0, 3),
            "error": resp.error,
        }
        log_rows.append(row)
        if not resp.ok:
            counts["backend_failed"] += 1
            continue
        if not resp.output.strip():
            counts["empty_summary"] += 1
            continue
        counts["generated"] += 1
        kept.append(replace(rec, summary=resp.output, origin=origin))

    if log_path is not None:
        with open(log_path, "w", encoding="utf-8") as fh:
            for row in log_rows:
                fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    if report is not None:
        report.update(counts)
    return Manifest(records=tuple(kept), name=f"{pool.name}/{origin}")


def assemble_mix(core: Manifest, pseudo: Manifest, n_pseudo: int) -> Manifest:
    """Core records followed by the first n_pseudo pseudo records.

    Prefix selection, never sampling: assemble_mix(c, p, a) is a prefix
    of assemble_mix(c, p, b) whenever a <= b.
    """
    if n_pseudo < 0 or n_pseudo > len(pseudo):
        raise InvalidInput(
            f"n_pseudo {n_pseudo} out of range for pool of {len(pseudo)}"
        )
    return Manifest(
        records=core.records + pseudo.records[:n_pseudo],
        name=f"{core.name}+{n_pseudo}",
    )


def mixes_for_sizes(core: Manifest, pseudo: Manifest, cfg: KdConfig) -> dict[int, Manifest]:
    """One training mix per configured total size."""
    out: dict[int, Manifest] = {}
    for size in cfg.mix_sizes:
        if size < len(core):
            raise ConfigError(f"mix size {size} smaller than core {len(core)}")
        out[size] = assemble_mix(core, pseudo, size - len(core))
    return out


def extractiveness_report(
    pseudo: Manifest,
    human: Manifest,
    b: int = 1000,
    seed: int = 0,
) -> dict:
    """How much each summary set copies its own transcription.

    Returns bootstrap summaries of per-record ROUGE-L F between summary
    and transcription for both manifests, plus skip counts for records
    missing either text.
    """
    def scores(manifest: Manifest) -> tuple[list[float], int]:
        vals: list[float] = []
        skipped = 0
        for rec in manifest:
            if rec.transcription is None or rec.summary is None:
                skipped += 1
                continue
            vals.append(rouge_l(
                TokenSeq.from_text(rec.summary),
                TokenSeq.from_text(rec.transcription),
            ).f)
        return vals, skipped

    pseudo_vals, pseudo_skipped = scores(pseudo)
    human_vals, human_skipped = scores(human)
    if not pseudo_vals or not human_vals:
        raise InvalidInput("no scorable records in one of the manifests")
    return {
        "rl_pseudo_vs_transcript": bootstrap_ci(pseudo_vals, b=b, seed=seed),
        "rl_human_vs_transcript": bootstrap_ci(human_vals, b=b, seed=seed),
        "skipped_pseudo": pseudo_skipped,
        "skipped_human": human_skipped,
    }
