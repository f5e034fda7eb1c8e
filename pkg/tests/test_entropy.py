import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from oracles import bf_entropy, bf_g2, bf_top_k_mass, traj
from toolinertia.entropy import (analyze, chi2_sf, conditional_entropy, entropy_profile, fit_markov, g2_test,
                                 gammaincc, preprocess, successor_distribution, top_k_mass)
from toolinertia.errors import ArgumentError, NotFoundError
from toolinertia.trajectory import TrajectoryLog

corpora = st.lists(st.lists(st.sampled_from("ABCDE"), min_size=2, max_size=15), min_size=1, max_size=6)


def test_preprocess():
    log = TrajectoryLog((traj([(x, {}, {}) for x in "AAB"], tid="1"), traj([("A", {}, {})], tid="2")))
    assert preprocess(log) == [["A", "B"]]
    assert preprocess(log, drop_self_transitions=False, min_length=1) == [["A", "A", "B"], ["A"]]


def test_fit_examples():
    m1 = fit_markov([list("ABAB")], 1)
    assert m1.counts == {("A",): {"B": 2}, ("B",): {"A": 1}} and m1.N == 3
    m0 = fit_markov([list("ABAB")], 0)
    assert m0.counts == {(): {"A": 2, "B": 2}} and m0.N == 4


def test_fit_empty():
    with pytest.raises(ArgumentError):
        fit_markov([], 1)
    with pytest.raises(ArgumentError):
        fit_markov([["A"]], 1)


def test_entropy_cases():
    assert conditional_entropy(fit_markov([list("ABCABCABC")], 1)).entropy_bits == 0.0
    uniform = conditional_entropy(fit_markov([list("ABCDEFGH")], 0))
    assert abs(uniform.entropy_bits - 3.0) < 1e-12 and abs(uniform.reduction_percent) < 1e-6


def test_two_point_entropy():
    seqs = [["g", "l"]] * 887 + [["g", "o"]] * 113
    h = conditional_entropy(fit_markov(seqs, 1)).entropy_bits
    p = (0.887, 0.113)
    assert abs(h - -sum(x * math.log2(x) for x in p)) < 1e-9
    assert abs(h - 0.5088) < 1e-4


def test_deterministic_reduction_is_100():
    assert conditional_entropy(fit_markov([list("ABCABC")], 1)).reduction_percent == 100.0


@settings(max_examples=80)
@given(corpora, st.integers(0, 2))
def test_entropy_matches_brute_force(seqs, order):
    if all(len(s) <= order for s in seqs):
        return
    assert abs(conditional_entropy(fit_markov(seqs, order)).entropy_bits - bf_entropy(seqs, order)) < 1e-9


@settings(max_examples=80)
@given(corpora)
def test_profile_monotone_and_bounded(seqs):
    if all(len(s) <= 3 for s in seqs):
        return
    reps = entropy_profile(seqs, [0, 1, 2, 3])
    for a, b in zip(reps, reps[1:]):
        assert b.entropy_bits <= a.entropy_bits + 1e-9
    for r in reps:
        assert 0 <= r.entropy_bits <= r.max_entropy_bits + 1e-9


@given(corpora, st.permutations("ABCDE"))
def test_permutation_invariance(seqs, perm):
    rename = dict(zip("ABCDE", perm))
    renamed = [[rename[x] for x in s] for s in seqs]
    a = conditional_entropy(fit_markov(seqs, 1))
    b = conditional_entropy(fit_markov(renamed, 1))
    assert abs(a.entropy_bits - b.entropy_bits) < 1e-12
    assert abs(top_k_mass(fit_markov(seqs, 1), 2) - top_k_mass(fit_markov(renamed, 1), 2)) < 1e-12


class TestGamma:
    @pytest.mark.parametrize("a", [0.5, 1, 2.5, 10, 180.5, 1957])
    @pytest.mark.parametrize("xf", [0.01, 0.5, 1, 1.5, 3])
    def test_against_scipy(self, a, xf):
        x = a * xf
        assert abs(gammaincc(a, x) - stats.gamma.sf(x, a)) < 1e-10

    @given(st.floats(0, 5000), st.integers(1, 4000))
    def test_chi2_against_scipy(self, stat, df):
        assert abs(chi2_sf(stat, df) - stats.chi2.sf(stat, df)) < 1e-10

    def test_errors(self):
        with pytest.raises(ArgumentError):
            gammaincc(0, 1)
        with pytest.raises(ArgumentError):
            chi2_sf(1, 0)


class TestG2:
    def test_tiny_corpus_by_hand(self):
        seqs = [list("ABABAB")]
        # events at positions 1..5: B A B A B; order-1 cells A->B (3), B->A (2)
        expected = 2 * (3 * math.log(3 / (3 * 3 / 5)) + 2 * math.log(2 / (2 * 2 / 5)))
        r = g2_test(fit_markov(seqs, 0, 1), fit_markov(seqs, 1, 1))
        assert abs(r.statistic - expected) < 1e-9 and r.degrees_of_freedom == 1

    @settings(max_examples=60)
    @given(corpora, st.integers(0, 1))
    def test_matches_brute_force(self, seqs, order):
        full = fit_markov(seqs, order + 1) if any(len(s) > order + 1 for s in seqs) else None
        if full is None:
            return
        expected, df = bf_g2(seqs, order)
        if df <= 0:
            with pytest.raises(ArgumentError):
                g2_test(fit_markov(seqs, order, order + 1), full)
            return
        r = g2_test(fit_markov(seqs, order, order + 1), full)
        assert abs(r.statistic - expected) < 1e-9 and r.degrees_of_freedom == df
        assert 0 <= r.p_value <= 1

    def test_exact_collapse_gives_zero(self):
        # every context sees A and B equally often
        seqs = [list("AABBA"), list("BAABB")]
        full = fit_markov(seqs, 1, 1)
        rest = fit_markov(seqs, 0, 1)
        assert all(c == {"A": 2, "B": 2} for c in full.counts.values())
        assert g2_test(rest, full).statistic == 0.0

    def test_mismatched_event_sets(self):
        seqs = [list("ABCABD")]
        with pytest.raises(ArgumentError):
            g2_test(fit_markov(seqs, 0), fit_markov(seqs, 1))

    def test_wrong_orders(self):
        seqs = [list("ABCABD")]
        with pytest.raises(ArgumentError):
            g2_test(fit_markov(seqs, 0, 2), fit_markov(seqs, 2, 2))

    def test_df_convention_matches_reported_values(self):
        # 20 tools: 20 observed contexts vs 1 gives 19*19=361; 226 vs 20 gives 206*19=3914
        assert (20 - 1) * (20 - 1) == 361 and (226 - 20) * (20 - 1) == 3914


class TestSuccessors:
    def test_distribution(self):
        m = fit_markov([["go_to", "look_around"]] * 887 + [["go_to", "other"]] * 113, 1)
        d = successor_distribution(m, "go_to")
        assert d[0][0] == "look_around" and abs(d[0][1] - 0.887) < 1e-12 and abs(d[1][1] - 0.113) < 1e-12

    def test_single(self):
        assert successor_distribution(fit_markov([list("AB")], 1), ("A",)) == [("B", 1.0)]

    def test_unseen(self):
        with pytest.raises(NotFoundError):
            successor_distribution(fit_markov([list("AB")], 1), "Q")

    def test_ties_lexicographic(self):
        assert [t for t, _ in successor_distribution(fit_markov([list("AC"), list("AB")], 1), "A")] == ["B", "C"]

    @given(corpora)
    def test_sums_to_one(self, seqs):
        m = fit_markov(seqs, 1)
        for ctx in m.contexts:
            assert abs(sum(p for _, p in successor_distribution(m, ctx)) - 1) < 1e-12


class TestTopK:
    def test_deterministic(self):
        assert top_k_mass(fit_markov([list("ABCABC")], 1), 1) == 1.0

    def test_uniform_four(self):
        seqs = [["A", x] for x in "BCDE"] + [["B", x] for x in "ACDE"]
        assert top_k_mass(fit_markov(seqs, 1), 2) == 0.5

    @given(corpora, st.integers(1, 5))
    def test_brute_force(self, seqs, k):
        assert abs(top_k_mass(fit_markov(seqs, 1), k) - bf_top_k_mass(seqs, k)) < 1e-12

    def test_bad_k(self):
        with pytest.raises(ArgumentError):
            top_k_mass(fit_markov([list("AB")], 1), 0)


def test_analyze_report_shape():
    rng = random.Random(1)
    seqs = [[rng.choice("ABCD") for _ in range(20)] for _ in range(10)]
    rep = analyze(seqs, [0, 1, 2])
    assert [e["order"] for e in rep["entropy"]] == [0, 1, 2]
    assert [(g["restricted_order"], g["full_order"]) for g in rep["g2_tests"]] == [(0, 1), (1, 2)]
    assert rep["top_k_mass"][-1]["k"] == 5
    assert set(rep["successors"]) == {"A", "B", "C", "D"}


def test_analyze_requires_orders():
    with pytest.raises(ArgumentError):
        analyze([list("AB")], [])
