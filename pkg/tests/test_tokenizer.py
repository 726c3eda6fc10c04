import unicodedata

import pytest
from hypothesis import given
from hypothesis import strategies as st

from lismore.tokenizer import (
    BOS,
    EOS,
    MASK,
    PAD,
    UNK,
    SequenceTooLong,
    Vocabulary,
    build_vocab,
    decode,
    encode,
)


def test_specials_are_fixed():
    assert (PAD, BOS, EOS, UNK, MASK) == (0, 1, 2, 3, 4)


def test_two_letter_vocab():
    v = build_vocab(["ab", "ba"])
    assert len(v) == 7
    assert v.index == {"a": 5, "b": 6}


def test_build_is_idempotent():
    assert build_vocab(["trane", "tréan"]) == build_vocab(["trane", "tréan"])


def test_build_rejects_empty():
    with pytest.raises(ValueError):
        build_vocab([])
    with pytest.raises(ValueError):
        build_vocab(["", ""])


def test_transcription_glyphs_survive_normalization():
    v = build_vocab(["wēniᵗ", "grawġ"])
    assert "ē" in v and "ᵗ" in v and "ġ" in v
    # decomposed input composes to the same entries
    assert build_vocab([unicodedata.normalize("NFD", "wēniᵗ")]).chars == build_vocab(["wēniᵗ"]).chars


def test_encode_trane(toy_vocab):
    ids = encode(toy_vocab, "trane")
    assert len(ids) == 7 and ids[0] == BOS and ids[-1] == EOS
    assert ids[1:-1] == [toy_vocab.index[c] for c in "trane"]


def test_space_is_a_token(toy_vocab):
    assert toy_vocab.index[" "] in encode(toy_vocab, "dwgis i")


def test_unknown_character_maps_to_unk(toy_vocab):
    assert encode(toy_vocab, "aq")[2] == UNK


def test_decode_specials(toy_vocab):
    assert decode(toy_vocab, [BOS, EOS]) == ""
    assert decode(toy_vocab, [BOS, UNK, EOS]) == "[UNK]"
    assert decode(toy_vocab, [BOS, 5, EOS, PAD, PAD]) == toy_vocab.chars[0]
    with pytest.raises(IndexError):
        decode(toy_vocab, [len(toy_vocab)])


def test_length_limit_names_the_word(toy_vocab):
    assert len(encode(toy_vocab, "a" * 20)) == 22
    with pytest.raises(SequenceTooLong, match="a{21}"):
        encode(toy_vocab, "a" * 21)


@given(st.lists(st.text(alphabet="abcdéèᵗ ġ'-", min_size=1, max_size=20), min_size=1, max_size=8))
def test_roundtrip(words):
    v = build_vocab(words)
    for w in words:
        ids = v.encode(w)
        assert len(ids) <= 22
        assert v.decode(ids) == unicodedata.normalize("NFC", w)


def test_vocab_file_roundtrip(tmp_path, toy_vocab):
    p = tmp_path / "vocab.tsv"
    toy_vocab.save(p)
    lines = p.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "0\t003C 0070 0061 0064 003E"
    assert lines[3].startswith("3\t005B 0055 004E 004B 005D")
    assert Vocabulary.load(p) == toy_vocab


def test_vocab_file_rejects_bad_specials(tmp_path):
    p = tmp_path / "vocab.tsv"
    p.write_text("0\t0061\n", encoding="utf-8")
    with pytest.raises(ValueError, match="special"):
        Vocabulary.load(p)
