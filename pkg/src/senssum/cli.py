"""Command-line surface over the toolkit.

One executable, one seed. Every subcommand takes --seed and derives its
stage seeds from it, so a run saved with --save-config replays
bit-identically through --config. Exit codes: 0 success, 1 usage error,
2 data error, 3 backend error.
"""

from __future__ import annotations

import argparse
import difflib
import json
import logging
import sys
from typing import Sequence

from . import bpe
from .backend import (
    DEFAULT_BEAM_WIDTH,
    BackendEndpoint,
    InProcessBackend,
    TransduceRequest,
    cascade_transduce,
    e2e_transduce,
    transduce_batch,
)
from .errors import (
    BackendError,
    ConfigError,
    DataError,
    InvalidInput,
    ManifestError,
    UsageError,
)
from .judge import MockRougeJudge, aggregate, judge_items, make_items, save_results
from .kd import MODES, KdConfig, assemble_mix, generate_pseudo_labels
from .manifest import (
    DEFAULT_SENTENCE_ENDS,
    FilterRule,
    filter_kd_pool,
    load_manifest,
    manifest_stats,
    save_manifest,
    split_core,
)
from .metrics import (
    MetricSummary,
    ScoreRow,
    TokenSeq,
    Unit,
    bootstrap_ci,
    compression_rate,
    error_rate,
    load_scores,
    rouge_l,
    save_scores,
)
from .prng import derive_seed, fnv1a64
from .report import render_report
from .toys import (
    CorruptionChannel,
    SalienceModel,
    corrupt,
    default_task_config,
    gen_synthetic_corpus,
    infer_salience,
    oracle_tsum,
    train_salience,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_BACKEND = 3

CONFIG_FORMAT = "senssum-run-v1"

# Namespace entries that describe the invocation, not the work.
_NOT_SAVED = frozenset({"func", "command", "bpe_command", "command_path",
                        "config", "save_config"})

log = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """Parser that raises UsageError instead of exiting the process."""

    all_options: tuple[str, ...] = ()

    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message):
        raise UsageError(message + _flag_hint(message, self._known_options()))

    def _known_options(self) -> tuple[str, ...]:
        return self.all_options or tuple(self._option_string_actions)


def _flag_hint(message: str, options: Sequence[str]) -> str:
    prefix = "unrecognized arguments: "
    if not message.startswith(prefix):
        return ""
    first = message[len(prefix):].split()[0]
    if not first.startswith("-"):
        return ""
    close = difflib.get_close_matches(first, options, n=1)
    return f" (did you mean {close[0]}?)" if close else ""


def _emit(payload: dict):
    print(json.dumps(payload, ensure_ascii=False, sort_keys=True))


# ---------------------------------------------------------------------------
# Backend spec strings
# ---------------------------------------------------------------------------

def _make_backend(spec: str, kind: str, ns) -> "BackendEndpoint | InProcessBackend":
    """Build a backend from a spec string.

    http(s)://HOST:PORT/...        remote endpoint
    stdio:COMMAND LINE             subprocess speaking line-delimited JSON
    toy:echo                       returns input unchanged
    toy:oracle                     nearest-content extractive summarizer
    toy:corrupt:sub=F,del=F,ins=F  character noise, seeded from --seed
    toy:salience:PATH              saved keep-probability model
    """
    if spec.startswith(("http://", "https://")):
        return BackendEndpoint(kind=kind, transport="http", address=spec,
                               timeout_sec=ns.timeout,
                               max_inflight=ns.max_inflight)
    if spec.startswith("stdio:"):
        command = spec[len("stdio:"):].strip()
        if not command:
            raise UsageError("stdio backend spec needs a command line")
        return BackendEndpoint(kind=kind, transport="subprocess_stdio",
                               address=command, timeout_sec=ns.timeout,
                               max_inflight=ns.max_inflight)
    if spec.startswith("toy:"):
        return _toy_backend(spec, kind, ns)
    raise UsageError(f"cannot parse backend spec {spec!r}")


def _toy_backend(spec: str, kind: str, ns) -> InProcessBackend:
    parts = spec.split(":", 2)
    name = parts[1] if len(parts) > 1 else ""
    arg = parts[2] if len(parts) > 2 else ""
    if name in ("echo", "identity") and not arg:
        return InProcessBackend(kind=kind, fn=lambda text: text,
                                max_inflight=ns.max_inflight)
    if name == "oracle" and not arg:
        task = default_task_config()
        return InProcessBackend(
            kind=kind, fn=lambda text: oracle_tsum(text, task),
            max_inflight=ns.max_inflight)
    if name == "corrupt":
        rates = {"sub": 0.0, "del": 0.0, "ins": 0.0}
        for chunk in filter(None, arg.split(",")):
            key, _, value = chunk.partition("=")
            if key not in rates:
                raise UsageError(f"bad corrupt parameter {chunk!r}")
            try:
                rates[key] = float(value)
            except ValueError:
                raise UsageError(f"bad corrupt parameter {chunk!r}") from None
        task = default_task_config()
        channel = CorruptionChannel(
            sub_rate=rates["sub"], del_rate=rates["del"],
            ins_rate=rates["ins"], alphabet=task.alphabet(),
            seed=derive_seed(ns.seed, 102))
        return InProcessBackend(
            kind=kind,
            fn=lambda text: corrupt(text, channel, fnv1a64(text)),
            max_inflight=ns.max_inflight)
    if name == "salience" and arg:
        model = SalienceModel.load(arg)

        def fn(text: str) -> str:
            return " ".join(infer_salience(model, TokenSeq.from_text(text)).tokens)

        return InProcessBackend(kind=kind, fn=fn, max_inflight=ns.max_inflight)
    raise UsageError(f"unknown toy backend {spec!r}")


def _filter_rule(ns) -> FilterRule:
    ends = DEFAULT_SENTENCE_ENDS if ns.ends is None else tuple(ns.ends.split(","))
    return FilterRule(min_chars=ns.min_chars, sentence_end_patterns=ends)


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------

def _cmd_gen_synthetic(ns) -> int:
    task = default_task_config(n_sentences=ns.n, seed=ns.seed)
    channel = None
    if ns.sub_rate or ns.del_rate or ns.ins_rate:
        channel = CorruptionChannel(
            sub_rate=ns.sub_rate, del_rate=ns.del_rate, ins_rate=ns.ins_rate,
            alphabet=task.alphabet(), seed=derive_seed(ns.seed, 101))
    corpus = gen_synthetic_corpus(task, channel, split=ns.split,
                                  id_prefix=ns.id_prefix)
    save_manifest(corpus, ns.out)
    _emit({"written": len(corpus), "out": ns.out})
    return EXIT_OK


def _cmd_split(ns) -> int:
    manifest = load_manifest(ns.inp)
    core, rest = split_core(manifest, ns.core_size)
    save_manifest(core, ns.core_out)
    save_manifest(rest, ns.rest_out)
    _emit({"core": len(core), "rest": len(rest)})
    return EXIT_OK


def _cmd_filter_pool(ns) -> int:
    manifest = load_manifest(ns.inp)
    report: dict = {}
    kept = filter_kd_pool(manifest, _filter_rule(ns), report)
    save_manifest(kept, ns.out)
    _emit(report)
    return EXIT_OK


def _cmd_pseudo_label(ns) -> int:
    pool = load_manifest(ns.pool)
    cfg = KdConfig(mode=ns.mode, pool_filter=_filter_rule(ns), seed=ns.seed)
    if cfg.mode == "from_asr_hypothesis" and not ns.asr:
        raise UsageError("mode from_asr_hypothesis needs --asr")
    asr = _make_backend(ns.asr, "asr", ns) if ns.asr else None
    tsum = _make_backend(ns.tsum, "tsum", ns)
    report: dict = {}
    pseudo = generate_pseudo_labels(pool, asr, tsum, cfg,
                                    log_path=ns.log, report=report)
    save_manifest(pseudo, ns.out)
    _emit(report)
    return EXIT_OK


def _cmd_mix(ns) -> int:
    core = load_manifest(ns.core)
    pseudo = load_manifest(ns.pseudo)
    mixed = assemble_mix(core, pseudo, ns.n)
    save_manifest(mixed, ns.out)
    _emit({"total": len(mixed), "core": len(core), "pseudo": ns.n})
    return EXIT_OK


def _cmd_train_toy(ns) -> int:
    manifest = load_manifest(ns.mix)
    pairs = []
    for rec in manifest:
        text = rec.extras.get("speech_surrogate") or rec.transcription
        if not text or rec.summary is None:
            continue
        pairs.append((TokenSeq.from_text(text), TokenSeq.from_text(rec.summary)))
    model = train_salience(pairs, alpha=ns.alpha, threshold=ns.threshold)
    model.save(ns.model_out)
    _emit({"pairs": len(pairs), "vocab": len(model.keep_prob)})
    return EXIT_OK


def _pick_input(rec, field: str) -> str | None:
    if field == "transcription":
        return rec.transcription
    surrogate = rec.extras.get("speech_surrogate")
    if field == "surrogate":
        return surrogate
    return surrogate or rec.transcription


def _cmd_transduce(ns) -> int:
    manifest = load_manifest(ns.inp)
    reqs = []
    for rec in manifest:
        text = _pick_input(rec, ns.input_field)
        if not isinstance(text, str) or not text:
            raise DataError(f"record {rec.id} has no {ns.input_field} input")
        reqs.append(TransduceRequest(id=rec.id, input=text,
                                     beam_width=ns.beam_width))
    if ns.pipeline == "cascade":
        if not (ns.asr and ns.tsum):
            raise UsageError("pipeline cascade needs --asr and --tsum")
        responses = cascade_transduce(_make_backend(ns.asr, "asr", ns),
                                      _make_backend(ns.tsum, "tsum", ns), reqs)
    else:
        if not ns.e2e:
            raise UsageError("pipeline e2e needs --e2e")
        responses = e2e_transduce(_make_backend(ns.e2e, "e2e", ns), reqs)
    with open(ns.out, "w", encoding="utf-8") as fh:
        for resp in responses:
            fh.write(json.dumps(resp.to_wire(), ensure_ascii=False,
                                sort_keys=True) + "\n")
    _emit({"written": len(responses),
           "errors": sum(1 for r in responses if not r.ok), "out": ns.out})
    return EXIT_OK


def _text_field(row: dict, field: str) -> str | None:
    if field != "auto":
        value = row.get(field)
        return value if isinstance(value, str) else None
    for key in ("summary", "output"):
        if isinstance(row.get(key), str):
            return row[key]
    return None


def _text_map(path: str, field: str) -> tuple[dict[str, str], int]:
    """id -> text from a manifest or response file; also counts skips."""
    texts: dict[str, str] = {}
    skipped = 0
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{line_no}: not JSON ({exc.msg})") from None
            if not isinstance(row, dict) or not isinstance(row.get("id"), str):
                raise DataError(f"{path}:{line_no}: record needs a string id")
            text = _text_field(row, field)
            if text is None:
                skipped += 1
                continue
            texts[row["id"]] = text
    return texts, skipped


def _score_pair(metric: str, hyp: str, ref: str) -> float:
    if metric == "rouge-l":
        return rouge_l(TokenSeq.from_text(hyp), TokenSeq.from_text(ref)).f
    if metric == "wer":
        return error_rate(TokenSeq.from_text(hyp), TokenSeq.from_text(ref))
    if metric == "cer":
        return error_rate(TokenSeq.from_text(hyp, Unit.CHAR),
                          TokenSeq.from_text(ref, Unit.CHAR))
    return compression_rate(TokenSeq.from_text(hyp), TokenSeq.from_text(ref))


def _cmd_score(ns) -> int:
    ref_field = ns.ref_field
    if ref_field == "auto" and ns.metric == "cr":
        ref_field = "transcription"  # CR compares summary length to source
    hyp_map, hyp_skipped = _text_map(ns.hyp, ns.hyp_field)
    ref_map, ref_skipped = _text_map(ns.ref, ref_field)
    key = ns.metric.replace("-", "_")
    rows = []
    missing = unscorable = 0
    for rec_id, ref_text in ref_map.items():
        hyp_text = hyp_map.get(rec_id)
        if hyp_text is None:
            missing += 1
            continue
        try:
            value = _score_pair(ns.metric, hyp_text, ref_text)
        except InvalidInput:
            unscorable += 1
            continue
        rows.append(ScoreRow(id=rec_id, values={key: value}))
    if not rows:
        raise DataError("no records scored; check ids and fields")
    if ns.per_record:
        save_scores(ns.per_record, rows)
    _emit({"metric": ns.metric, "n": len(rows),
           "mean": sum(r.values[key] for r in rows) / len(rows),
           "missing_hyp": missing, "unscorable": unscorable,
           "skipped_rows": hyp_skipped + ref_skipped})
    return EXIT_OK


def _cmd_ci(ns) -> int:
    rows = load_scores(ns.scores)
    keys = sorted({k for row in rows for k in row.values})
    metric = ns.metric
    if metric is None:
        if len(keys) != 1:
            raise DataError(f"scores hold {keys or 'no metrics'}; pick one with --metric")
        metric = keys[0]
    values = [row.values[metric] for row in rows if metric in row.values]
    if not values:
        raise DataError(f"no {metric!r} values in {ns.scores}")
    summary = bootstrap_ci(values, b=ns.b, seed=ns.seed, level=ns.level)
    _emit({"metric": metric, "mean": summary.mean, "ci_low": summary.ci_low,
           "ci_high": summary.ci_high, "halfwidth": summary.halfwidth,
           "n": summary.n, "b": summary.b, "level": summary.level})
    return EXIT_OK


def _cmd_abtest(ns) -> int:
    transcripts = load_manifest(ns.transcripts)
    map_a, _ = _text_map(ns.a, "auto")
    map_b, _ = _text_map(ns.b, "auto")
    items = make_items(list(transcripts), map_a, map_b,
                       ns.system_a, ns.system_b)
    if not items:
        raise DataError("no records present in both output files")
    if ns.judge == "toy:rouge":
        judge = MockRougeJudge()
    else:
        judge = _make_backend(ns.judge, "judge", ns)
    judgements = judge_items(items, judge)
    result = aggregate(items, judgements)
    if ns.out:
        save_results(ns.out, judgements, result)
    _emit(result.to_payload())
    return EXIT_OK


_SUMMARY_KEYS = ("mean", "ci_low", "ci_high", "n", "b")


def _cmd_report(ns) -> int:
    with open(ns.inp, encoding="utf-8") as fh:
        payload = json.load(fh)
    if not isinstance(payload, dict):
        raise DataError(f"{ns.inp}: expected an object of systems")
    results: dict[str, dict[str, MetricSummary]] = {}
    for system, metrics in payload.items():
        if not isinstance(metrics, dict):
            raise DataError(f"{ns.inp}: system {system!r} is not an object")
        results[system] = {}
        for metric, cell in metrics.items():
            if not isinstance(cell, dict) or any(k not in cell for k in _SUMMARY_KEYS):
                raise DataError(
                    f"{ns.inp}: {system}/{metric} needs {', '.join(_SUMMARY_KEYS)}")
            results[system][metric] = MetricSummary(
                mean=cell["mean"], ci_low=cell["ci_low"],
                ci_high=cell["ci_high"], n=cell["n"], b=cell["b"],
                level=cell.get("level", 0.95))
    sys.stdout.write(render_report(results))
    return EXIT_OK


def _cmd_stats(ns) -> int:
    manifest = load_manifest(ns.inp)
    _emit(manifest_stats(manifest, unit=Unit(ns.unit)))
    return EXIT_OK


def _read_text_arg(value: str | None) -> str:
    if value is not None:
        return value
    data = sys.stdin.read()
    return data[:-1] if data.endswith("\n") else data


def _cmd_bpe_train(ns) -> int:
    with open(ns.corpus, encoding="utf-8") as fh:
        lines = [line for line in fh.read().splitlines() if line]
    table = bpe.train_bpe(lines, ns.target_size)
    bpe.save_table(table, ns.out)
    _emit({"merges": len(table.merges), "vocab": len(table.vocab),
           "out": ns.out})
    return EXIT_OK


def _cmd_bpe_encode(ns) -> int:
    table = bpe.load_table(ns.table)
    tokens = bpe.encode(table, _read_text_arg(ns.text))
    print(json.dumps(list(tokens.tokens), ensure_ascii=False))
    return EXIT_OK


def _cmd_bpe_decode(ns) -> int:
    table = bpe.load_table(ns.table)
    raw = _read_text_arg(ns.tokens)
    try:
        tokens = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise DataError(f"tokens must be a JSON array ({exc.msg})") from None
    if not isinstance(tokens, list) or any(not isinstance(t, str) for t in tokens):
        raise DataError("tokens must be a JSON array of strings")
    print(bpe.decode(table, tokens))
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser assembly
# ---------------------------------------------------------------------------

_HANDLERS = {
    "gen-synthetic": _cmd_gen_synthetic,
    "split": _cmd_split,
    "filter-pool": _cmd_filter_pool,
    "pseudo-label": _cmd_pseudo_label,
    "mix": _cmd_mix,
    "train-toy": _cmd_train_toy,
    "transduce": _cmd_transduce,
    "score": _cmd_score,
    "ci": _cmd_ci,
    "abtest": _cmd_abtest,
    "report": _cmd_report,
    "stats": _cmd_stats,
    "bpe train": _cmd_bpe_train,
    "bpe encode": _cmd_bpe_encode,
    "bpe decode": _cmd_bpe_decode,
}


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0,
                        help="root seed; every stage derives its own from it")
    common.add_argument("--max-inflight", type=int, default=8,
                        help="cap on concurrent backend requests")
    common.add_argument("--timeout", type=float, default=30.0,
                        help="per-request backend timeout in seconds")
    common.add_argument("--save-config", metavar="PATH",
                        help="write a replayable run config, then run")
    common.add_argument("--verbose", action="store_true",
                        help="debug logging on stderr")
    return common


def _add_filter_flags(p: argparse.ArgumentParser):
    p.add_argument("--min-chars", type=int, default=10,
                   help="keep records strictly longer than this many characters")
    p.add_argument("--ends", default=None,
                   help="comma-separated sentence-final suffixes; empty string keeps all")


def build_parser() -> _Parser:
    common = [_common_flags()]
    parser = _Parser(
        prog="senssum",
        description="Sentence-wise speech summarization toolkit.",
        epilog="exit codes: 0 ok, 1 usage error, 2 data error, 3 backend error")
    parser.add_argument("--config", metavar="PATH",
                        help="replay a run config saved with --save-config")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("gen-synthetic", parents=common,
                       help="generate a synthetic spoken-sentence corpus",
                       description="Generate a synthetic corpus manifest; "
                       "nonzero noise rates add a corrupted speech surrogate.")
    p.add_argument("--n", type=int, default=100, help="number of records")
    p.add_argument("--out", required=True, help="manifest output path")
    p.add_argument("--split", default="train",
                   choices=("train", "dev", "test"), help="split tag")
    p.add_argument("--id-prefix", default="syn", help="record id prefix")
    p.add_argument("--sub-rate", type=float, default=0.0,
                   help="character substitution rate")
    p.add_argument("--del-rate", type=float, default=0.0,
                   help="character deletion rate")
    p.add_argument("--ins-rate", type=float, default=0.0,
                   help="character insertion rate")
    p.set_defaults(func=_cmd_gen_synthetic, command_path="gen-synthetic")

    p = sub.add_parser("split", parents=common,
                       help="split a manifest into a labeled core and the rest",
                       description="Take the first records as the labeled core "
                       "and leave the remainder as an unlabeled pool.")
    p.add_argument("--in", dest="inp", required=True, help="input manifest")
    p.add_argument("--core-size", type=int, required=True,
                   help="number of records in the core")
    p.add_argument("--core-out", required=True, help="core manifest path")
    p.add_argument("--rest-out", required=True, help="remainder manifest path")
    p.set_defaults(func=_cmd_split, command_path="split")

    p = sub.add_parser("filter-pool", parents=common,
                       help="drop unusable records from an unlabeled pool",
                       description="Keep records with a transcription that is "
                       "long enough and sentence-final; prints drop counts.")
    p.add_argument("--in", dest="inp", required=True, help="input manifest")
    p.add_argument("--out", required=True, help="filtered manifest path")
    _add_filter_flags(p)
    p.set_defaults(func=_cmd_filter_pool, command_path="filter-pool")

    p = sub.add_parser("pseudo-label", parents=common,
                       help="label a pool with teacher summaries",
                       description="Run the pool through a teacher to produce "
                       "pseudo-labeled training records. Mode "
                       "from_asr_hypothesis transcribes speech first; "
                       "from_reference_transcription summarizes the reference "
                       "text directly.")
    p.add_argument("--pool", required=True, help="unlabeled pool manifest")
    p.add_argument("--out", required=True, help="pseudo-labeled manifest path")
    p.add_argument("--mode", default="from_asr_hypothesis", choices=MODES,
                   help="teacher input source")
    p.add_argument("--asr", help="ASR backend spec (required for hypothesis mode)")
    p.add_argument("--tsum", required=True, help="summarizer backend spec")
    p.add_argument("--log", help="per-record JSONL log path")
    _add_filter_flags(p)
    p.set_defaults(func=_cmd_pseudo_label, command_path="pseudo-label")

    p = sub.add_parser("mix", parents=common,
                       help="append pseudo-labeled records to a labeled core",
                       description="Concatenate the core with the first N "
                       "pseudo records; --n 0 reproduces the core.")
    p.add_argument("--core", required=True, help="labeled core manifest")
    p.add_argument("--pseudo", required=True, help="pseudo-labeled manifest")
    p.add_argument("--n", type=int, required=True,
                   help="number of pseudo records to take")
    p.add_argument("--out", required=True, help="mixed manifest path")
    p.set_defaults(func=_cmd_mix, command_path="mix")

    p = sub.add_parser("train-toy", parents=common,
                       help="fit the toy keep-probability summarizer",
                       description="Train the token-salience model on a "
                       "manifest, pairing each record's speech surrogate (or "
                       "transcription) with its summary.")
    p.add_argument("--mix", required=True, help="training manifest")
    p.add_argument("--model-out", required=True, help="model output path")
    p.add_argument("--alpha", type=float, default=1.0,
                   help="Laplace smoothing strength")
    p.add_argument("--threshold", type=float, default=0.5,
                   help="keep-probability needed to emit a token")
    p.set_defaults(func=_cmd_train_toy, command_path="train-toy")

    p = sub.add_parser("transduce", parents=common,
                       help="run a manifest through a summarization pipeline",
                       description="Send every record to a cascade (ASR then "
                       "summarizer) or an end-to-end backend and write one "
                       "response per line.")
    p.add_argument("--in", dest="inp", required=True, help="input manifest")
    p.add_argument("--out", required=True, help="responses output path")
    p.add_argument("--pipeline", required=True, choices=("cascade", "e2e"),
                   help="pipeline shape")
    p.add_argument("--asr", help="ASR backend spec (cascade)")
    p.add_argument("--tsum", help="summarizer backend spec (cascade)")
    p.add_argument("--e2e", help="end-to-end backend spec")
    p.add_argument("--beam-width", type=int, default=DEFAULT_BEAM_WIDTH,
                   help="decoder beam width passed to backends")
    p.add_argument("--input-field", default="auto",
                   choices=("auto", "surrogate", "transcription"),
                   help="which text each record contributes")
    p.set_defaults(func=_cmd_transduce, command_path="transduce")

    p = sub.add_parser("score", parents=common,
                       help="score hypothesis summaries against references",
                       description="Compute a per-record metric over ids "
                       "shared by two JSONL files (manifests or transduce "
                       "responses) and print the mean. CR references the "
                       "transcription unless --ref-field overrides it.")
    p.add_argument("--metric", required=True,
                   choices=("rouge-l", "wer", "cer", "cr"), help="metric")
    p.add_argument("--hyp", required=True, help="hypothesis JSONL path")
    p.add_argument("--ref", required=True, help="reference JSONL path")
    p.add_argument("--hyp-field", default="auto",
                   help="hypothesis text field (default: summary, then output)")
    p.add_argument("--ref-field", default="auto",
                   help="reference text field (default: summary, then output)")
    p.add_argument("--per-record", metavar="PATH",
                   help="write per-record scores as JSONL")
    p.set_defaults(func=_cmd_score, command_path="score")

    p = sub.add_parser("ci", parents=common,
                       help="bootstrap a confidence interval over scores",
                       description="Read per-record scores and print the mean "
                       "with a percentile-bootstrap interval.")
    p.add_argument("--scores", required=True, help="per-record scores JSONL")
    p.add_argument("--metric", default=None,
                   help="metric name (default: the only one present)")
    p.add_argument("--b", type=int, default=1000, help="bootstrap resamples")
    p.add_argument("--level", type=float, default=0.95, help="confidence level")
    p.set_defaults(func=_cmd_ci, command_path="ci")

    p = sub.add_parser("abtest", parents=common,
                       help="preference-judge two systems' summaries",
                       description="Judge two output files over a transcript "
                       "manifest, with position swapping. The judge is "
                       "toy:rouge or a backend spec; http judges send "
                       "Authorization from SENSSUM_JUDGE_KEY when set.")
    p.add_argument("--transcripts", required=True,
                   help="manifest with reference transcriptions")
    p.add_argument("--a", required=True, help="first system's outputs JSONL")
    p.add_argument("--b", required=True, help="second system's outputs JSONL")
    p.add_argument("--system-a", default="A", help="first system's name")
    p.add_argument("--system-b", default="B", help="second system's name")
    p.add_argument("--judge", default="toy:rouge", help="judge backend spec")
    p.add_argument("--out", help="write per-item verdicts as JSON")
    p.set_defaults(func=_cmd_abtest, command_path="abtest")

    p = sub.add_parser("report", parents=common,
                       help="render system-by-metric summaries as a table",
                       description="Read a JSON object "
                       "{system: {metric: {mean, ci_low, ci_high, n, b}}} and "
                       "print the comparison table.")
    p.add_argument("--in", dest="inp", required=True, help="summaries JSON path")
    p.set_defaults(func=_cmd_report, command_path="report")

    p = sub.add_parser("stats", parents=common,
                       help="print corpus statistics for a manifest",
                       description="Count records, speakers, duration, and "
                       "mean compression of a manifest.")
    p.add_argument("--in", dest="inp", required=True, help="manifest path")
    p.add_argument("--unit", default="word", choices=("word", "char"),
                   help="token unit for compression")
    p.set_defaults(func=_cmd_stats, command_path="stats")

    p = sub.add_parser("bpe", help="subword table operations",
                       description="Train or apply a byte-pair merge table.")
    bpe_sub = p.add_subparsers(dest="bpe_command", metavar="ACTION",
                               required=True)

    q = bpe_sub.add_parser("train", parents=common,
                           help="train a merge table on a text corpus",
                           description="Learn merges from a text file, one "
                           "document per line.")
    q.add_argument("--corpus", required=True, help="training text path")
    q.add_argument("--target-size", type=int, required=True,
                   help="vocabulary size to stop at")
    q.add_argument("--out", required=True, help="table output path")
    q.set_defaults(func=_cmd_bpe_train, command_path="bpe train")

    q = bpe_sub.add_parser("encode", parents=common,
                           help="encode text with a merge table",
                           description="Print the token sequence as a JSON "
                           "array; reads stdin without --text.")
    q.add_argument("--table", required=True, help="merge table path")
    q.add_argument("--text", help="text to encode (default: stdin)")
    q.set_defaults(func=_cmd_bpe_encode, command_path="bpe encode")

    q = bpe_sub.add_parser("decode", parents=common,
                           help="decode a token sequence back to text",
                           description="Read a JSON array of tokens from "
                           "--tokens or stdin and print the text.")
    q.add_argument("--table", required=True, help="merge table path")
    q.add_argument("--tokens", help="JSON array of tokens (default: stdin)")
    q.set_defaults(func=_cmd_bpe_decode, command_path="bpe decode")

    # Unknown-flag errors surface on the outermost parser, so it needs
    # the full option inventory to suggest from.
    options: set[str] = set(parser._option_string_actions)
    stack = [action for action in parser._subparsers._group_actions]
    for action in stack:
        for child in getattr(action, "choices", {}).values():
            options.update(child._option_string_actions)
            if child._subparsers is not None:
                stack.extend(child._subparsers._group_actions)
    parser.all_options = tuple(sorted(options))
    return parser


# ---------------------------------------------------------------------------
# Run configs
# ---------------------------------------------------------------------------

def _save_run_config(ns):
    payload = {
        "format": CONFIG_FORMAT,
        "command": ns.command_path,
        "args": {k: v for k, v in vars(ns).items() if k not in _NOT_SAVED},
    }
    with open(ns.save_config, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")


def _replay(path: str) -> int:
    with open(path, encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: not JSON ({exc.msg})") from None
    if not isinstance(payload, dict) or payload.get("format") != CONFIG_FORMAT:
        raise DataError(f"{path} is not a {CONFIG_FORMAT} run config")
    handler = _HANDLERS.get(payload.get("command"))
    if handler is None:
        raise DataError(f"{path} names unknown command {payload.get('command')!r}")
    args = payload.get("args")
    if not isinstance(args, dict):
        raise DataError(f"{path} has no args object")
    return handler(argparse.Namespace(**args))


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------

def cli_dispatch(argv: Sequence[str]) -> int:
    parser = build_parser()
    try:
        try:
            ns = parser.parse_args(list(argv))
        except SystemExit as exc:  # argparse --help prints, then exits
            return int(exc.code) if exc.code else EXIT_OK
        logging.basicConfig(
            stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s",
            level=logging.DEBUG if getattr(ns, "verbose", False) else logging.WARNING)
        if ns.config:
            if getattr(ns, "command", None):
                raise UsageError("--config replaces the subcommand; give one or the other")
            return _replay(ns.config)
        if not getattr(ns, "command", None):
            raise UsageError("a subcommand is required (or --config PATH)")
        if getattr(ns, "save_config", None):
            _save_run_config(ns)
        return ns.func(ns)
    except UsageError as exc:
        print(f"senssum: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BackendError as exc:
        print(f"senssum: backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (ManifestError, DataError, ConfigError, InvalidInput, OSError) as exc:
        print(f"senssum: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


def entrypoint():
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    entrypoint()
