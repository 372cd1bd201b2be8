"""Release gate: one test per shipped guarantee.

Every test here states a promise the toolkit makes, checks it at the
stated tolerance, and prints one "ACCEPTANCE <name>: PASS" line (run
with -s to see them; under plain -v the test names carry the verdicts).
The distillation sweep runs twice at full desk scale, so this file
costs about half a minute.
"""

import itertools
import time

import pytest

from oracles import (
    bootstrap_means_exhaustive,
    edit_distance_recursive,
    lcs_brute,
    rouge_l_brute,
)
from senssum.backend import InProcessBackend
from senssum.bpe import decode, encode, load_table, save_table, serialize_table, train_bpe
from senssum.judge import MockRougeJudge, judge_batch, make_items, preference_curve
from senssum.kd import KdConfig, assemble_mix, generate_pseudo_labels
from senssum.manifest import FilterRule, split_core
from senssum.metrics import (
    MetricSummary,
    TokenSeq,
    bootstrap_ci,
    compression_rate,
    edit_distance,
    lcs_length,
    rouge_l,
)
from senssum.prng import Prng, derive_seed
from senssum.report import format_mean_halfwidth
from senssum.sweep import SweepConfig, run_sweep
from senssum.toys import (
    CorruptionChannel,
    default_task_config,
    gen_synthetic_corpus,
    oracle_tsum,
)

PASS_ANY = FilterRule(min_chars=0, sentence_end_patterns=("",))


def _ok(name: str):
    print(f"ACCEPTANCE {name}: PASS")


@pytest.fixture(scope="module")
def sweep_runs():
    started = time.monotonic()
    first = run_sweep(SweepConfig())
    elapsed = time.monotonic() - started
    second = run_sweep(SweepConfig())
    return first, second, elapsed


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def test_metrics_agree_with_brute_force_oracles():
    started = time.monotonic()
    sigma = ("x", "y", "z")
    seqs = [seq for length in range(0, 9)
            for seq in itertools.product(sigma, repeat=length)]
    pairs = 0
    for a in seqs:
        for b in seqs:
            if len(a) + len(b) > 8:  # joint budget keeps this exhaustive
                continue
            pairs += 1
            assert lcs_length(a, b) == lcs_brute(a, b)
            assert edit_distance(a, b) == edit_distance_recursive(a, b)
            got = rouge_l(TokenSeq(a), TokenSeq(b))
            assert (got.precision, got.recall, got.f) == rouge_l_brute(a, b)
    assert pairs == 83653

    rng = Prng(2024)
    wide = ("p", "q", "r", "s", "t")
    for _ in range(1000):
        a = tuple(wide[rng.next_below(5)] for _ in range(9 + rng.next_below(6)))
        b = tuple(wide[rng.next_below(5)] for _ in range(9 + rng.next_below(6)))
        assert lcs_length(a, b) == lcs_brute(a, b)
        assert edit_distance(a, b) == edit_distance_recursive(a, b)
        got = rouge_l(TokenSeq(a), TokenSeq(b))
        assert (got.precision, got.recall, got.f) == rouge_l_brute(a, b)

    elapsed = time.monotonic() - started
    assert elapsed < 60.0
    _ok("metric-oracles")


def test_compression_rate_matches_the_word_ratio():
    rng = Prng(77)
    vocab = ("alpha", "beta", "gamma", "delta", "eps")
    for _ in range(100):
        n_src = 1 + rng.next_below(40)
        n_sum = rng.next_below(n_src + 1)
        source = " ".join(vocab[rng.next_below(5)] for _ in range(n_src))
        summary = " ".join(vocab[rng.next_below(5)] for _ in range(n_sum))
        got = compression_rate(TokenSeq.from_text(summary),
                               TokenSeq.from_text(source))
        want = 100.0 * n_sum / n_src
        assert abs(got - want) <= 1e-12 * max(1.0, abs(want))
    _ok("cr-formula")


def test_bootstrap_degenerate_exhaustive_and_reproducible():
    flat = bootstrap_ci([5.0] * 7, b=50, seed=1)
    assert flat.ci_low == flat.ci_high == flat.mean == 5.0

    # n = 2 enumerates all four resamples; the interval interpolates
    # the hand-listed means at ranks q * (len - 1).
    two = bootstrap_ci([1.0, 3.0], b=1000, seed=0)
    means = bootstrap_means_exhaustive([1.0, 3.0])
    assert means == [1.0, 2.0, 2.0, 3.0]
    assert two.b == 4
    lo_rank = 0.025 * (len(means) - 1)  # falls between the first two means
    assert two.ci_low == means[0] * (1 - lo_rank) + means[1] * lo_rank
    hi_rank = 0.975 * (len(means) - 1) - 2  # between the last two
    assert two.ci_high == means[2] * (1 - hi_rank) + means[3] * hi_rank

    sampled = bootstrap_ci([3.1, 4.1, 5.9, 2.6], b=100, seed=7)
    assert sampled == bootstrap_ci([3.1, 4.1, 5.9, 2.6], b=100, seed=7)
    assert sampled == MetricSummary(mean=3.925, ci_low=2.725,
                                    ci_high=5.200000000000001,
                                    n=4, b=100, level=0.95)
    _ok("bootstrap")


def test_bpe_round_trip_first_merge_and_byte_stable_tables():
    table = train_bpe(["aaab"], target_size=50)
    assert table.merges[0] == ("a", "a")

    rng = Prng(41)
    for _ in range(1000):
        chars = []
        for _ in range(rng.next_below(33)):
            cp = rng.next_below(0x10000)
            while 0xD800 <= cp <= 0xDFFF:  # surrogates are not text
                cp = rng.next_below(0x10000)
            chars.append(chr(cp))
        text = "".join(chars)
        assert decode(table, encode(table, text)) == text

    wide = train_bpe(["the quick brown fox", "pack my box", "aaab aaab"],
                     target_size=60)
    blob = serialize_table(wide)
    assert blob == serialize_table(wide)
    assert serialize_table(train_bpe(
        ["the quick brown fox", "pack my box", "aaab aaab"],
        target_size=60)) == blob
    _ok("bpe")


# ---------------------------------------------------------------------------
# Pipeline laws
# ---------------------------------------------------------------------------

def test_split_mix_and_relabel_pipeline_laws(tmp_path):
    task = default_task_config(n_sentences=30, seed=9)
    channel = CorruptionChannel(sub_rate=0.05, del_rate=0.02, ins_rate=0.02,
                                alphabet=task.alphabet(), seed=3)
    corpus = gen_synthetic_corpus(task, channel=channel)

    for k in (0, 7, 30):
        core, rest = split_core(corpus, k)
        assert core.records + rest.records == corpus.records
        assert not set(r.id for r in core) & set(r.id for r in rest)

    core, pool = split_core(corpus, 3)
    ref_cfg = KdConfig(mode="from_reference_transcription",
                       pool_filter=PASS_ANY)
    tsum = InProcessBackend(kind="tsum",
                            fn=lambda text: oracle_tsum(text, task))
    pseudo = generate_pseudo_labels(pool, None, tsum, ref_cfg)

    mixes = {n: assemble_mix(core, pseudo, n) for n in range(len(pseudo) + 1)}
    for m in mixes:
        for n in mixes:
            if m <= n:
                assert mixes[n].records[:len(core) + m] == mixes[m].records

    def explode(text):
        raise RuntimeError("recognizer must stay untouched")

    for asr in (None,
                InProcessBackend(kind="asr", fn=lambda text: text),
                InProcessBackend(kind="asr", fn=explode)):
        again = generate_pseudo_labels(pool, asr, tsum, ref_cfg)
        assert again.records == pseudo.records
    _ok("pipeline-laws")


# ---------------------------------------------------------------------------
# Distillation sweep
# ---------------------------------------------------------------------------

def test_distillation_trend_on_the_toy_task(sweep_runs):
    first, second, elapsed = sweep_runs
    cfg = first.config
    assert elapsed < 300.0

    # The speech channel sits in the intended error regime.
    task = default_task_config(n_sentences=cfg.n_core + cfg.n_pool,
                               seed=cfg.seed)
    sub, dele, ins = cfg.speech_rates
    channel = CorruptionChannel(sub_rate=sub, del_rate=dele, ins_rate=ins,
                                alphabet=task.alphabet(),
                                seed=derive_seed(cfg.seed, 101))
    corpus = gen_synthetic_corpus(task, channel=channel)
    errors = length = 0
    for rec in corpus.records[:2000]:
        errors += edit_distance(tuple(rec.extras["speech_surrogate"]),
                                tuple(rec.transcription))
        length += len(rec.transcription)
    assert 0.08 <= errors / length <= 0.12

    cascade = first.summaries["cascade"]["rouge_l"]
    base = first.summaries["e2e_base"]["rouge_l"]
    largest = max(cfg.pseudo_sizes)
    kd_hyp = {size: first.summaries[f"e2e_kd_hyp_{size}"]["rouge_l"]
              for size in cfg.pseudo_sizes}

    assert cascade.mean >= kd_hyp[largest].mean > base.mean
    assert kd_hyp[largest].ci_low > base.ci_high  # clear of the baseline

    for small, large in zip(cfg.pseudo_sizes, cfg.pseudo_sizes[1:]):
        overlap = (kd_hyp[large].ci_low <= kd_hyp[small].ci_high
                   and kd_hyp[small].ci_low <= kd_hyp[large].ci_high)
        assert kd_hyp[large].mean >= kd_hyp[small].mean or overlap

    assert first.summaries == second.summaries
    assert first.outputs == second.outputs
    _ok("kd-trend")


def test_reference_labels_never_trail_hypothesis_labels(sweep_runs):
    first, _, _ = sweep_runs
    for size in first.config.pseudo_sizes:
        ref = first.summaries[f"e2e_kd_ref_{size}"]["rouge_l"].mean
        hyp = first.summaries[f"e2e_kd_hyp_{size}"]["rouge_l"].mean
        assert ref >= hyp
    _ok("ref-vs-hyp")


def test_copy_prone_teacher_inflates_extractiveness(sweep_runs):
    ext = sweep_runs[0].extractiveness
    assert (ext["rl_pseudo_vs_transcript"].mean
            > ext["rl_human_vs_transcript"].mean)
    _ok("extractiveness")


def test_judge_preference_curve_and_position_symmetry(sweep_runs):
    first, _, _ = sweep_runs
    cfg = first.config
    curve = preference_curve(first.preference_by_size, "e2e")
    assert [size for size, _ in curve] == sorted(cfg.pseudo_sizes)
    for (_, lo), (_, hi) in zip(curve, curve[1:]):
        assert hi >= lo

    eval_task = default_task_config(n_sentences=cfg.n_eval,
                                    seed=derive_seed(cfg.seed, 7))
    evals = gen_synthetic_corpus(eval_task, split="eval", id_prefix="ev")
    a = first.outputs["cascade"]
    b = first.outputs[f"e2e_kd_hyp_{max(cfg.pseudo_sizes)}"]
    judge = MockRougeJudge()
    straight = judge_batch(
        make_items(evals.records, a, b, "cascade", "e2e"), judge)
    swapped = judge_batch(
        make_items(evals.records, b, a, "e2e", "cascade"), judge)
    assert straight.pct_for("e2e") == swapped.pct_for("e2e")
    assert (straight.wins_a, straight.wins_b) == (swapped.wins_b, swapped.wins_a)
    assert straight.ties == swapped.ties
    assert straight.failures == swapped.failures
    _ok("preference-curve")


# ---------------------------------------------------------------------------
# Reporting
# ---------------------------------------------------------------------------

def test_report_cell_formatting():
    assert format_mean_halfwidth(35.97, 1.54) == "36.0±1.5"
    _ok("report-format")
