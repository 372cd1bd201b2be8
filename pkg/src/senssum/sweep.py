"""End-to-end distillation sweep on the synthetic task.

This is the desk-scale experiment: build a corpus, pseudo-label the
unlabeled pool with the teacher cascade, train the salience student on
growing mixes, and score everything on a held-out set. The same driver
backs the experiment script and the trend verification suite, entirely
on in-process backends, so a full sweep takes seconds and is exactly
reproducible from its seed.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .backend import (
    InProcessBackend,
    TransduceRequest,
    cascade_transduce,
    e2e_transduce,
)
from .errors import ConfigError
from .judge import MockRougeJudge, PreferenceResult, judge_batch, make_items
from .kd import KdConfig, assemble_mix, generate_pseudo_labels
from .manifest import FilterRule, Manifest, Record, split_core
from .metrics import MetricSummary, TokenSeq, bootstrap_ci, compression_rate, rouge_l
from .prng import derive_seed, fnv1a64
from .toys import (
    CorruptionChannel,
    SalienceModel,
    SyntheticTaskConfig,
    corrupt,
    default_task_config,
    gen_synthetic_corpus,
    infer_salience,
    oracle_tsum,
    train_salience,
)

# Identity-style pool rule: synthetic transcriptions carry no sentence
# punctuation, so the paper-style suffix filter stays out of the sweep.
PASS_ALL = FilterRule(min_chars=0, sentence_end_patterns=("",))


@dataclass(frozen=True)
class SweepConfig:
    """Everything a sweep run depends on, seed included."""

    seed: int = 0
    n_core: int = 1000
    n_pool: int = 16000
    n_eval: int = 600
    pseudo_sizes: tuple[int, ...] = (1000, 4000, 16000)
    speech_rates: tuple[float, float, float] = (0.04, 0.03, 0.03)
    asr_rates: tuple[float, float, float] = (0.012, 0.009, 0.009)
    max_edit: int = 1
    alpha: float = 1.0
    threshold: float = 0.5
    bootstrap_b: int = 1000
    level: float = 0.95

    def __post_init__(self):
        if max(self.pseudo_sizes) > self.n_pool:
            raise ConfigError("pseudo_sizes exceed the pool")
        if list(self.pseudo_sizes) != sorted(self.pseudo_sizes):
            raise ConfigError("pseudo_sizes must be ascending")


@dataclass
class SweepResult:
    config: SweepConfig
    summaries: dict[str, dict[str, MetricSummary]]
    preference_by_size: dict[int, PreferenceResult]
    extractiveness: dict
    outputs: dict[str, dict[str, str]] = field(default_factory=dict)


def _speech_channel(cfg: SweepConfig, task: SyntheticTaskConfig) -> CorruptionChannel:
    sub, dele, ins = cfg.speech_rates
    return CorruptionChannel(
        sub_rate=sub, del_rate=dele, ins_rate=ins,
        alphabet=task.alphabet(), seed=derive_seed(cfg.seed, 101),
    )


def _asr_channel(cfg: SweepConfig, task: SyntheticTaskConfig) -> CorruptionChannel:
    sub, dele, ins = cfg.asr_rates
    return CorruptionChannel(
        sub_rate=sub, del_rate=dele, ins_rate=ins,
        alphabet=task.alphabet(), seed=derive_seed(cfg.seed, 102),
    )


def make_backends(cfg: SweepConfig, task: SyntheticTaskConfig) -> dict:
    """The toy model zoo as in-process backends."""
    asr_channel = _asr_channel(cfg, task)

    def asr_fn(text: str) -> str:
        return corrupt(text, asr_channel, fnv1a64(text))

    def tsum_fn(text: str) -> str:
        return oracle_tsum(text, task, max_edit=cfg.max_edit)

    return {
        "asr": InProcessBackend(kind="asr", fn=asr_fn),
        "tsum": InProcessBackend(kind="tsum", fn=tsum_fn),
        "identity_asr": InProcessBackend(kind="asr", fn=lambda text: text),
    }


def salience_backend(model: SalienceModel) -> InProcessBackend:
    def fn(text: str) -> str:
        return " ".join(infer_salience(model, TokenSeq.from_text(text)).tokens)

    return InProcessBackend(kind="e2e", fn=fn)


def _training_pairs(manifest: Manifest) -> list[tuple[TokenSeq, TokenSeq]]:
    """(speech surrogate, summary) token pairs for the student."""
    pairs = []
    for rec in manifest:
        surrogate = rec.extras.get("speech_surrogate")
        if not surrogate or not rec.summary:
            continue
        pairs.append((
            TokenSeq.from_text(surrogate),
            TokenSeq.from_text(rec.summary),
        ))
    return pairs


def _surrogate_requests(manifest: Manifest) -> list[TransduceRequest]:
    return [
        TransduceRequest(id=rec.id, input=rec.extras["speech_surrogate"])
        for rec in manifest
    ]


def _score_outputs(
    eval_set: Manifest,
    outputs: dict[str, str],
    b: int,
    seed: int,
    level: float,
) -> dict[str, MetricSummary]:
    """Percent-scale ROUGE-L and CR bootstrap summaries."""
    f_vals: list[float] = []
    cr_vals: list[float] = []
    for rec in eval_set:
        hyp = TokenSeq.from_text(outputs.get(rec.id, ""))
        ref = TokenSeq.from_text(rec.summary)
        f_vals.append(100.0 * rouge_l(hyp, ref).f)
        cr_vals.append(compression_rate(hyp, TokenSeq.from_text(rec.transcription)))
    return {
        "rouge_l": bootstrap_ci(f_vals, b=b, seed=seed, level=level),
        "cr": bootstrap_ci(cr_vals, b=b, seed=derive_seed(seed, 1), level=level),
    }


def run_sweep(cfg: SweepConfig) -> SweepResult:
    """The full distillation experiment at desk scale."""
    task = default_task_config(n_sentences=cfg.n_core + cfg.n_pool, seed=cfg.seed)
    channel = _speech_channel(cfg, task)
    corpus = gen_synthetic_corpus(task, channel=channel)
    core, pool = split_core(corpus, cfg.n_core)

    eval_task = default_task_config(
        n_sentences=cfg.n_eval, seed=derive_seed(cfg.seed, 7),
    )
    eval_set = gen_synthetic_corpus(
        eval_task, channel=channel, split="eval", id_prefix="ev",
    )

    backends = make_backends(cfg, task)
    mock_judge = MockRougeJudge()

    # Teacher pseudo-labels over the full pool, both sourcing modes.
    pseudo = {}
    for mode, origin in (("from_asr_hypothesis", "hyp"), ("from_reference_transcription", "ref")):
        kd_cfg = KdConfig(mode=mode, pool_filter=PASS_ALL, seed=cfg.seed)
        pseudo[origin] = generate_pseudo_labels(
            pool, backends["asr"], backends["tsum"], kd_cfg,
        )

    # Students: base on the core alone, then one per pool size and mode.
    # A pool size counts unlabeled records consumed, not pairs kept: the
    # mix takes every surviving pseudo record from the first `size` pool
    # records, so a mode that drops empty summaries trains on a subset.
    pool_position = {rec.id: i for i, rec in enumerate(pool)}
    students: dict[str, SalienceModel] = {}
    students["e2e_base"] = train_salience(
        _training_pairs(core), alpha=cfg.alpha, threshold=cfg.threshold,
    )
    for origin in ("hyp", "ref"):
        positions = [pool_position[rec.id] for rec in pseudo[origin]]
        for size in cfg.pseudo_sizes:
            n_kept = bisect_right(positions, size - 1)
            mix = assemble_mix(core, pseudo[origin], n_kept)
            students[f"e2e_kd_{origin}_{size}"] = train_salience(
                _training_pairs(mix), alpha=cfg.alpha, threshold=cfg.threshold,
            )

    # Evaluation transductions, all from the speech surrogate.
    reqs = _surrogate_requests(eval_set)
    outputs: dict[str, dict[str, str]] = {}
    cascade_resp = cascade_transduce(backends["asr"], backends["tsum"], reqs)
    outputs["cascade"] = {r.id: r.output for r in cascade_resp}
    for name, model in students.items():
        resp = e2e_transduce(salience_backend(model), reqs)
        outputs[name] = {r.id: r.output for r in resp}

    summaries = {
        name: _score_outputs(
            eval_set, outs, cfg.bootstrap_b,
            derive_seed(cfg.seed, 200 + i), cfg.level,
        )
        for i, (name, outs) in enumerate(sorted(outputs.items()))
    }

    # Judge preference between the cascade and each hyp-mode student.
    preference_by_size: dict[int, PreferenceResult] = {}
    for size in cfg.pseudo_sizes:
        items = make_items(
            eval_set.records, outputs["cascade"], outputs[f"e2e_kd_hyp_{size}"],
            system_a="cascade", system_b="e2e",
        )
        preference_by_size[size] = judge_batch(items, mock_judge)

    # Extractiveness: a copy-prone teacher against the oracle summaries.
    copy_prone = tuple(
        Record(
            id=rec.id, transcription=rec.transcription,
            summary=oracle_tsum(rec.transcription, eval_task,
                                max_edit=cfg.max_edit, copy_every=2),
            split=rec.split, origin="pseudo_ref",
        )
        for rec in eval_set
    )
    from .kd import extractiveness_report

    extractiveness = extractiveness_report(
        Manifest(records=copy_prone, name="copy-prone"),
        eval_set,
        b=cfg.bootstrap_b,
        seed=derive_seed(cfg.seed, 300),
    )

    return SweepResult(
        config=cfg,
        summaries=summaries,
        preference_by_size=preference_by_size,
        extractiveness=extractiveness,
        outputs=outputs,
    )
