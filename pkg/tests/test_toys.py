"""Synthetic task, corruption channel, oracle summarizer, salience model."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from senssum.errors import ConfigError, InvalidInput
from senssum.metrics import TokenSeq, edit_distance
from senssum.prng import Prng
from senssum.toys import (
    DEFAULT_CONTENT,
    DEFAULT_FILLER,
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


# ---------------------------------------------------------------------------
# Task configuration
# ---------------------------------------------------------------------------


def test_default_vocabularies_keep_noise_safe_margins():
    # Pairwise separation is what lets a 1-edit oracle recover content
    # without ever confusing two content words or promoting a filler.
    content = [tuple(w) for w in DEFAULT_CONTENT]
    for i, a in enumerate(content):
        for b in content[i + 1:]:
            assert edit_distance(a, b) >= 3
    for f in DEFAULT_FILLER:
        for c in DEFAULT_CONTENT:
            assert edit_distance(tuple(f), tuple(c)) >= 3


def test_config_rejects_overlapping_vocabularies():
    with pytest.raises(ConfigError):
        SyntheticTaskConfig(content_vocab=("market",),
                            filler_vocab=("um", "market"))


def test_config_rejects_degenerate_shapes():
    with pytest.raises(ConfigError):
        SyntheticTaskConfig(content_vocab=(), filler_vocab=("um",))
    with pytest.raises(ConfigError):
        SyntheticTaskConfig(content_vocab=("a b",), filler_vocab=("um",))
    with pytest.raises(ConfigError):
        SyntheticTaskConfig(content_vocab=("market",), filler_vocab=("um",),
                            content_per_sentence=(0, 2))
    with pytest.raises(ConfigError):
        SyntheticTaskConfig(content_vocab=("market",), filler_vocab=("um",),
                            filler_per_content=(4, 2))


def test_alphabet_is_sorted_union_of_vocab_characters():
    cfg = SyntheticTaskConfig(content_vocab=("cab",), filler_vocab=("de",))
    assert cfg.alphabet() == ("a", "b", "c", "d", "e")


# ---------------------------------------------------------------------------
# Corpus generation
# ---------------------------------------------------------------------------


def test_corpus_is_deterministic():
    cfg = default_task_config(n_sentences=40, seed=17)
    a = gen_synthetic_corpus(cfg)
    b = gen_synthetic_corpus(cfg)
    assert [r.to_json() for r in a] == [r.to_json() for r in b]


def test_records_do_not_depend_on_corpus_length():
    small = gen_synthetic_corpus(default_task_config(n_sentences=10, seed=3))
    large = gen_synthetic_corpus(default_task_config(n_sentences=50, seed=3))
    assert [r.to_json() for r in small] == [r.to_json() for r in list(large)[:10]]


def test_summary_is_the_content_subsequence():
    cfg = default_task_config(n_sentences=60, seed=5)
    for rec in gen_synthetic_corpus(cfg):
        tokens = rec.transcription.split()
        content = [t for t in tokens if t in cfg.content_vocab]
        assert rec.summary.split() == content
        assert all(t in cfg.content_vocab or t in cfg.filler_vocab for t in tokens)
        lo, hi = cfg.content_per_sentence
        assert lo <= len(content) <= hi


def test_corpus_sidecar_carries_corrupted_speech():
    cfg = default_task_config(n_sentences=30, seed=2)
    channel = CorruptionChannel(sub_rate=0.05, del_rate=0.03, ins_rate=0.02,
                                alphabet=cfg.alphabet(), seed=77)
    plain = gen_synthetic_corpus(cfg)
    noisy = gen_synthetic_corpus(cfg, channel=channel)
    assert all("speech_surrogate" not in r.extras for r in plain)
    surrogates = [r.extras["speech_surrogate"] for r in noisy]
    assert any(s != r.transcription for s, r in zip(surrogates, noisy))
    # channel only touches the sidecar, never the reference text
    assert [r.transcription for r in noisy] == [r.transcription for r in plain]


# ---------------------------------------------------------------------------
# Corruption channel
# ---------------------------------------------------------------------------


def test_channel_validation():
    with pytest.raises(ConfigError):
        CorruptionChannel(sub_rate=-0.1)
    with pytest.raises(ConfigError):
        CorruptionChannel(sub_rate=0.6, del_rate=0.6)
    with pytest.raises(ConfigError):
        CorruptionChannel(alphabet=())


def test_zero_rate_channel_is_identity():
    ch = CorruptionChannel(seed=5)
    assert corrupt("um market well", ch, 123) == "um market well"
    assert corrupt("", ch, 0) == ""


def test_full_deletion_channel_erases_everything():
    ch = CorruptionChannel(del_rate=1.0, seed=5)
    assert corrupt("anything at all", ch, 9) == ""


def test_full_substitution_never_reproduces_a_character():
    ch = CorruptionChannel(sub_rate=1.0, alphabet=tuple("abcd"), seed=5)
    src = "abcdabcd"
    out = corrupt(src, ch, 31)
    assert len(out) == len(src)
    assert all(a != b for a, b in zip(src, out))


def test_corruption_is_a_pure_function_of_seeds():
    ch = CorruptionChannel(sub_rate=0.2, del_rate=0.1, ins_rate=0.1, seed=4)
    assert corrupt("market signal", ch, 8) == corrupt("market signal", ch, 8)
    assert corrupt("market signal", ch, 8) != corrupt("market signal", ch, 9)


def test_character_error_rate_matches_configured_rate():
    # 100 independent 100-char segments give a 10k-char sample; summed
    # segment edit distances estimate CER tightly because edits are local.
    ch = CorruptionChannel(sub_rate=0.04, del_rate=0.03, ins_rate=0.03,
                           alphabet=tuple("abcdefghijklmnopqrstuvwxyz"), seed=2)
    rng = Prng(99)
    total_dist = 0
    total_len = 0
    for i in range(100):
        src = "".join(rng.choice(ch.alphabet) for _ in range(100))
        out = corrupt(src, ch, i)
        total_dist += edit_distance(tuple(src), tuple(out))
        total_len += len(src)
    cer = total_dist / total_len
    assert abs(cer - ch.total_rate) <= 0.01


# ---------------------------------------------------------------------------
# Oracle summarizer
# ---------------------------------------------------------------------------


def test_oracle_on_clean_text_returns_gold_summary():
    cfg = default_task_config(n_sentences=40, seed=21)
    for rec in gen_synthetic_corpus(cfg):
        assert oracle_tsum(rec.transcription, cfg) == rec.summary


def test_oracle_recovers_single_edit_variants():
    cfg = default_task_config()
    assert oracle_tsum("um margket well", cfg) == "market"     # insertion
    assert oracle_tsum("so vialet then", cfg) == "violet"      # substitution
    assert oracle_tsum("okay signl um", cfg) == "signal"       # deletion


def test_oracle_drops_far_variants_and_fillers():
    cfg = default_task_config()
    assert oracle_tsum("um well so okay", cfg) == ""
    assert oracle_tsum("mxrkxt", cfg) == ""          # two edits from market
    assert oracle_tsum("um mxrkxt market", cfg) == "market"


def test_oracle_tie_prefers_first_vocabulary_word():
    cfg = SyntheticTaskConfig(content_vocab=("aaaa", "aaab"), filler_vocab=("um",))
    assert oracle_tsum("aaac", cfg) == "aaaa"


def test_copy_prone_oracle_copies_every_second_unmatched_token():
    cfg = default_task_config()
    text = "um uh market so well violet"
    assert oracle_tsum(text, cfg, copy_every=2) == "uh market well violet"


# ---------------------------------------------------------------------------
# Salience model
# ---------------------------------------------------------------------------


def test_training_counts_match_hand_computation():
    pairs = [
        (TokenSeq.from_text("a b"), TokenSeq.from_text("a")),
        (TokenSeq.from_text("a c"), TokenSeq.from_text("a")),
    ]
    model = train_salience(pairs)
    assert model.keep_prob["a"] == pytest.approx((2 + 1) / (2 + 2))
    assert model.keep_prob["b"] == pytest.approx((0 + 1) / (1 + 2))
    assert model.default_prob == 0.5


def test_repeated_source_token_counts_one_alignment():
    model = train_salience([(TokenSeq.from_text("a a b"), TokenSeq.from_text("a"))])
    assert model.keep_prob["a"] == pytest.approx((1 + 1) / (2 + 2))


def test_inference_keeps_tokens_at_or_above_threshold():
    model = SalienceModel(keep_prob={"keep": 0.9, "drop": 0.1})
    out = infer_salience(model, TokenSeq.from_text("keep drop unseen keep"))
    # unseen tokens sit exactly at the threshold and stay in
    assert out.tokens == ("keep", "unseen", "keep")


def test_untrained_model_at_threshold_one_emits_nothing():
    model = SalienceModel(keep_prob={}, threshold=1.0)
    assert infer_salience(model, TokenSeq.from_text("um market well")).tokens == ()


def test_training_validation():
    with pytest.raises(InvalidInput):
        train_salience([])
    with pytest.raises(InvalidInput):
        train_salience([(TokenSeq.from_text("a"), TokenSeq.from_text("a"))], alpha=0)


def test_model_save_load_round_trip(tmp_path):
    pairs = [(TokenSeq.from_text("a b c"), TokenSeq.from_text("a c"))]
    model = train_salience(pairs, alpha=0.5, threshold=0.6)
    path = tmp_path / "model.json"
    model.save(str(path))
    assert SalienceModel.load(str(path)) == model


def test_clean_training_separates_content_from_filler():
    cfg = default_task_config(n_sentences=200, seed=13)
    corpus = gen_synthetic_corpus(cfg)
    pairs = [(TokenSeq.from_text(r.transcription), TokenSeq.from_text(r.summary))
             for r in corpus]
    model = train_salience(pairs)
    seen_content = [w for w in cfg.content_vocab if w in model.keep_prob]
    assert seen_content
    assert all(model.keep_prob[w] > 0.9 for w in seen_content)
    assert all(model.keep_prob[w] < 0.1 for w in cfg.filler_vocab
               if w in model.keep_prob)
    for rec in list(corpus)[:20]:
        out = infer_salience(model, TokenSeq.from_text(rec.transcription))
        assert " ".join(out.tokens) == rec.summary


@settings(max_examples=50)
@given(st.integers(min_value=0, max_value=2 ** 32))
def test_corruption_output_stays_in_alphabet_or_source(record_seed):
    ch = CorruptionChannel(sub_rate=0.3, del_rate=0.2, ins_rate=0.2,
                           alphabet=tuple("xyz"), seed=6)
    src = "um market well"
    out = corrupt(src, ch, record_seed)
    allowed = set("xyz") | set(src)
    assert set(out) <= allowed
