import pytest
from hypothesis import given
from hypothesis import strategies as st

from lismore.orthography import BROAD, SLENDER, validate, validate_batch

MODEL_OUTPUTS = ["chuaiseach", "mhíos", "díonar", "fén", "dhuanancht", "gáimh", "duise"]


def test_vowel_classes_disjoint():
    assert not BROAD & SLENDER
    assert set("aou") <= BROAD and set("ei") <= SLENDER


def test_duigas_is_invalid():
    r = validate("duigas")
    assert r.valid is False and r.label == "invalid"
    assert [(v.start, v.left_vowel, v.right_vowel) for v in r.violations] == [(3, "i", "a")]


@pytest.mark.parametrize("word", MODEL_OUTPUTS)
def test_model_outputs_plausible(word):
    assert validate(word).label in ("valid", "n/a")


def test_fixed_cases():
    assert validate("a' phláigh").valid is True
    assert validate("ao").valid is True
    assert validate("dtugas-sa").valid is True
    assert validate("[UNK]").label == "n/a"
    assert validate("wēniᵗ").label == "n/a"


def test_repair_oracle():
    # drop the right-hand vowels up to the next vowel of the left class
    bad = validate("tuigaeis")
    assert not bad.valid and bad.violations[0].start == 3
    assert validate("tuigeis").valid


def test_batch():
    assert validate_batch(["duigas"]).fraction_valid == 0.0
    assert validate_batch([]).fraction_valid is None
    summary = validate_batch(["duigas", *MODEL_OUTPUTS, "[UNK]"])
    assert summary.assessed == 8
    assert summary.fraction_valid == pytest.approx(7 / 8)
    assert summary.to_tsv().splitlines()[0] == "duigas\tinvalid\t3"


gaelic_words = st.text(alphabet="bcdghlmnrstaeiouáéíóú", min_size=1, max_size=12)


@given(gaelic_words)
def test_reversal_preserves_validity(w):
    if validate(w).valid:
        assert validate(w[::-1]).valid


@given(st.text(alphabet="aeiouáé", min_size=1, max_size=6), st.text(alphabet="bcdlmnrst", max_size=3))
def test_no_medial_cluster_is_valid(vowels, edge):
    assert validate(edge + vowels + edge).valid
