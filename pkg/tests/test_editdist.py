"""Edit-distance oracles: exhaustive recursion battery, metric properties,
and the word-alignment rate formulas."""

import random
from functools import lru_cache
from itertools import product

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noteval.editdist import (
    AlignmentCounts,
    DegenerateInput,
    align_words,
    levenshtein,
    levenshtein_normalized,
    mer,
    wer,
    wil,
)


@lru_cache(maxsize=None)
def recursive_lev(a: str, b: str) -> int:
    """Plain textbook recursion, the independent oracle."""
    if not a:
        return len(b)
    if not b:
        return len(a)
    cost = 0 if a[0] == b[0] else 1
    return min(
        recursive_lev(a[1:], b[1:]) + cost,
        recursive_lev(a[1:], b) + 1,
        recursive_lev(a, b[1:]) + 1,
    )


def all_strings(alphabet: str, max_len: int):
    for size in range(max_len + 1):
        for chars in product(alphabet, repeat=size):
            yield "".join(chars)


class TestLevenshtein:
    def test_classics(self):
        assert levenshtein("abc", "abc") == 0
        assert levenshtein("", "abc") == 3
        assert levenshtein("abc", "") == 3
        assert levenshtein("kitten", "sitting") == 3

    def test_case_insensitive(self):
        assert levenshtein("ABC", "abc") == 0

    def test_exhaustive_two_letter_alphabet(self):
        strings = list(all_strings("ab", 6))
        assert len(strings) == 127
        for a in strings:
            for b in strings:
                assert levenshtein(a, b) == recursive_lev(a, b), (a, b)

    def test_unicode(self):
        assert levenshtein("café", "cafe") == 1

    @given(st.text(alphabet="abcd", max_size=12))
    def test_identity(self, s):
        assert levenshtein(s, s) == 0

    @given(st.text(alphabet="abcd", max_size=12), st.text(alphabet="abcd", max_size=12))
    def test_symmetry_and_upper_bound(self, a, b):
        d = levenshtein(a, b)
        assert d == levenshtein(b, a)
        assert d <= max(len(a), len(b))
        if a != b:
            assert d >= 1

    def test_triangle_inequality_thousand_triples(self):
        rng = random.Random(99)
        for _ in range(1000):
            a, b, c = (
                "".join(rng.choice("abcd") for _ in range(rng.randint(0, 12)))
                for _ in range(3)
            )
            assert levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c)

    def test_normalized(self):
        assert levenshtein_normalized("kitten", "sitting") == pytest.approx(3 / 7)
        with pytest.raises(DegenerateInput):
            levenshtein_normalized("abc", "")


def exhaustive_align_distance(hyp, ref):
    """Reference word-level edit distance by plain DP (independent route)."""
    n, m = len(ref), len(hyp)
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        dist[i][0] = i
    for j in range(m + 1):
        dist[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            cost = 0 if ref[i - 1] == hyp[j - 1] else 1
            dist[i][j] = min(
                dist[i - 1][j - 1] + cost, dist[i - 1][j] + 1, dist[i][j - 1] + 1
            )
    return dist[n][m]


class TestAlignWords:
    def test_identical(self):
        counts = align_words("a b c d".split(), "a b c d".split())
        assert counts == AlignmentCounts(4, 0, 0, 0)

    def test_spec_substitution_deletion(self):
        counts = align_words("a x c".split(), "a b c d".split())
        assert counts == AlignmentCounts(hits=2, substitutions=1, deletions=1, insertions=0)

    def test_spec_insertion(self):
        counts = align_words("a b c".split(), "a b".split())
        assert counts == AlignmentCounts(hits=2, substitutions=0, deletions=0, insertions=1)

    def test_empty_sides(self):
        assert align_words([], "a b".split()) == AlignmentCounts(0, 0, 2, 0)
        assert align_words("a b".split(), []) == AlignmentCounts(0, 0, 0, 2)
        assert align_words([], []) == AlignmentCounts(0, 0, 0, 0)

    @given(
        st.lists(st.sampled_from("abcd"), max_size=10),
        st.lists(st.sampled_from("abcd"), max_size=10),
    )
    @settings(max_examples=300)
    def test_counts_partition_both_sides(self, hyp, ref):
        counts = align_words(hyp, ref)
        assert counts.hits + counts.substitutions + counts.deletions == len(ref)
        assert counts.hits + counts.substitutions + counts.insertions == len(hyp)
        # The alignment is minimum-edit: S + D + I equals the edit distance.
        assert (
            counts.substitutions + counts.deletions + counts.insertions
            == exhaustive_align_distance(hyp, ref)
        )


class TestRates:
    def test_perfect(self):
        counts = AlignmentCounts(4, 0, 0, 0)
        assert wer(counts) == mer(counts) == wil(counts) == 0.0

    def test_spec_insertion_case(self):
        counts = AlignmentCounts(hits=2, substitutions=0, deletions=0, insertions=1)
        assert wer(counts) == pytest.approx(0.5)
        assert mer(counts) == pytest.approx(1 / 3)
        assert wil(counts) == pytest.approx(1 / 3)

    def test_spec_mixed_case(self):
        counts = AlignmentCounts(hits=2, substitutions=1, deletions=1, insertions=0)
        assert wer(counts) == pytest.approx(0.5)
        assert mer(counts) == pytest.approx(0.5)
        assert wil(counts) == pytest.approx(2 / 3)

    def test_degenerate(self):
        with pytest.raises(DegenerateInput):
            wer(AlignmentCounts(0, 0, 0, 3))
        with pytest.raises(DegenerateInput):
            mer(AlignmentCounts(0, 0, 0, 0))
        with pytest.raises(DegenerateInput):
            wil(AlignmentCounts(0, 0, 0, 3))

    @given(
        st.lists(st.sampled_from("abcd"), min_size=1, max_size=10),
        st.lists(st.sampled_from("abcd"), min_size=1, max_size=10),
    )
    @settings(max_examples=300)
    def test_rate_orderings(self, hyp, ref):
        counts = align_words(hyp, ref)
        assert 0.0 <= mer(counts) <= 1.0
        assert 0.0 <= wil(counts) <= 1.0
        assert mer(counts) <= wer(counts)
