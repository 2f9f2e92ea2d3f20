from hypothesis import given
from hypothesis import strategies as st

from levelcap.tokens import tokenize, word_count


def test_lowercase_and_edge_punctuation():
    assert tokenize("Hello, World!") == ["hello", "world"]


def test_internal_punctuation_kept():
    assert tokenize("it's a state-of-the-art co-op.") == ["it's", "a", "state-of-the-art", "co-op"]


def test_pure_punctuation_tokens_vanish():
    assert tokenize("well ... -- !") == ["well"]


def test_unicode_whitespace_split():
    assert tokenize("a b\tc\nd") == ["a", "b", "c", "d"]


def test_word_count_empty():
    assert word_count("") == 0
    assert word_count("   ") == 0


@given(st.lists(st.text(alphabet="abcxyz", min_size=1, max_size=6), max_size=30))
def test_count_matches_clean_join(words):
    text = " ".join(words)
    assert word_count(text) == len(words)
