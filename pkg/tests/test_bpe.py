import pytest
from hypothesis import given, settings, strategies as st

from senssum.bpe import (
    SPECIALS,
    WORD_END,
    MergeTable,
    char_tokenize,
    decode,
    deserialize_table,
    encode,
    load_table,
    save_table,
    serialize_table,
    train_bpe,
)
from senssum.errors import InvalidInput
from senssum.metrics import Unit


def test_first_merge_on_aaab_corpus():
    # Pair counts over two copies of a-a-a-b⟨w⟩: ("a","a") occurs 4
    # times, ("a","b⟨w⟩") twice, so ("a","a") merges first.
    table = train_bpe(["aaab", "aaab"], target_size=20)
    assert table.merges[0] == ("a", "a")


def test_encode_after_single_merge():
    table = train_bpe(["aaab", "aaab"], target_size=7)
    # Base vocab: specials (4) + {"a", "b⟨w⟩"} = 6; one merge reaches 7.
    assert table.merges == (("a", "a"),)
    assert encode(table, "aaab").tokens == ("aa", "a", "b" + WORD_END)


def test_single_character_corpus_has_no_merges():
    table = train_bpe(["b"], target_size=10)
    assert table.merges == ()
    assert set(table.vocab) == set(SPECIALS) | {"b" + WORD_END}


def test_specials_hold_low_ids():
    table = train_bpe(["abc abd"], target_size=30)
    assert [table.vocab[s] for s in SPECIALS] == [0, 1, 2, 3]


def test_target_size_below_inventory_rejected():
    with pytest.raises(InvalidInput):
        train_bpe(["abcdefgh"], target_size=5)


def test_empty_corpus_rejected():
    with pytest.raises(InvalidInput):
        train_bpe([], target_size=100)


def test_training_stops_when_pairs_unique():
    # Every pair occurs once; no merge may fire.
    table = train_bpe(["abcd"], target_size=100)
    assert table.merges == ()


def test_merge_list_prefix_under_larger_target():
    corpus = ["the cat sat on the mat", "the cat ran", "a mat on the cat"]
    small = train_bpe(corpus, target_size=30)
    large = train_bpe(corpus, target_size=40)
    assert large.merges[: len(small.merges)] == small.merges


def test_vocab_never_exceeds_target():
    corpus = ["aa ab ab aa ba aa bb ab"]
    for target in range(8, 16):
        table = train_bpe(corpus, target_size=target)
        assert len(table.vocab) <= target


def test_encode_empty_text():
    table = train_bpe(["ab"], target_size=10)
    assert encode(table, "").tokens == ()


def test_encode_unknown_characters_pass_through():
    table = train_bpe(["ab ab"], target_size=10)
    toks = encode(table, "xyz")
    assert toks.tokens == ("x", "y", "z" + WORD_END)


def test_decode_inverts_encode_on_examples():
    table = train_bpe(["aaab", "aaab"], target_size=20)
    for text in ["aaab", "aaab aaab", "  spaced\tout\n", "", "mix aaab end"]:
        assert decode(table, encode(table, text)) == text


def test_decode_rejects_malformed_markers():
    table = train_bpe(["ab"], target_size=10)
    with pytest.raises(InvalidInput):
        decode(table, ["a⟨w⟩b"])   # marker not at token end
    with pytest.raises(InvalidInput):
        decode(table, ["a⟨zz⟩"])   # bad escape body
    with pytest.raises(InvalidInput):
        decode(table, ["a⟨w"])          # unterminated


@given(st.text(max_size=60))
@settings(max_examples=300, deadline=None)
def test_round_trip_arbitrary_text(text):
    table = train_bpe(["the quick brown fox", "pack my box"], target_size=40)
    assert decode(table, encode(table, text)) == text


@given(st.lists(st.text(alphabet="abcde ⟨", max_size=12), min_size=1, max_size=6),
       st.integers(min_value=0, max_value=40))
@settings(max_examples=100, deadline=None)
def test_round_trip_with_trained_table_on_own_corpus(corpus, extra):
    floor = _inventory_floor(corpus)
    table = train_bpe(corpus, target_size=floor + extra)
    for text in corpus:
        assert decode(table, encode(table, text)) == text


def _inventory_floor(corpus):
    from senssum.bpe import _word_symbols
    base = {s for text in corpus for w in text.split() for s in _word_symbols(w)}
    return len(base) + len(SPECIALS)


def test_encode_reproduces_training_segmentation():
    corpus = ["low lower lowest", "low low lower"]
    table = train_bpe(corpus, target_size=40)
    # Training's final word forms equal apply() on the raw symbols.
    from senssum.bpe import _word_symbols
    for word in ["low", "lower", "lowest"]:
        assert encode(table, word).tokens == tuple(table.apply(_word_symbols(word)))


def test_serialization_round_trip_and_stability(tmp_path):
    corpus = ["banana bandana", "banana banana"]
    table = train_bpe(corpus, target_size=25)
    text1 = serialize_table(table)
    text2 = serialize_table(train_bpe(corpus, target_size=25))
    assert text1 == text2
    assert text1.startswith("bpe-v1 25\n")

    path = tmp_path / "table.bpe"
    save_table(table, str(path))
    back = load_table(str(path))
    assert back.merges == table.merges
    assert back.target_size == table.target_size
    # Same encodings for words whose symbols all took part in merges.
    assert encode(back, "banana").tokens == encode(table, "banana").tokens


def test_deserialize_with_explicit_inventory():
    table = train_bpe(["abab abab"], target_size=12)
    blob = serialize_table(table)
    base = [s for s in table.vocab if s not in SPECIALS and s not in
            {l + r for l, r in table.merges}]
    back = deserialize_table(blob, base_inventory=base)
    assert back.vocab == table.vocab


def test_deserialize_rejects_garbage():
    with pytest.raises(InvalidInput):
        deserialize_table("")
    with pytest.raises(InvalidInput):
        deserialize_table("nope 5\n")
    with pytest.raises(InvalidInput):
        deserialize_table("bpe-v1 x\n")
    with pytest.raises(InvalidInput):
        deserialize_table("bpe-v1 5\na b c\n")


def test_char_tokenize_basics():
    assert char_tokenize("abc").tokens == ("a", "b", "c")
    assert char_tokenize("").tokens == ()
    assert char_tokenize("a b").tokens == ("a", "b")
    assert char_tokenize("a b", keep_whitespace=True).tokens == ("a", " ", "b")
    assert char_tokenize("abc").unit is Unit.CHAR


def test_char_tokenize_applies_nfc():
    # e followed by combining acute composes into one scalar.
    assert char_tokenize("é") .tokens == ("é",)
