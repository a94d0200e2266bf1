from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest

import oracles
from conftest import BERNOULLI, FIBONACCI_RULES, GOLDEN, GOLDEN_CF, SILVER_CF, THUE_MORSE_RULES
from spectral_shift.errors import InvariantError, PrecisionError, ValidationError
from spectral_shift.generators import (
    ContinuedFraction,
    LinearForm,
    SftGraph,
    Substitution,
    cf_convergents,
    characteristic_prefix,
    from_spec,
    lambda_sequence,
    perron,
    perron_pair,
    rotation_coding,
    standard_words,
    sft_factors,
    sturmian_arcs,
    sturmian_factors,
    substitution_factors,
    three_distance_set,
    unbounded_theta,
)

PHI = (1 + 5**0.5) / 2


# -- shifts of finite type


def test_sft_factors_golden_mean():
    g = SftGraph(GOLDEN)
    assert sft_factors(g, 1) == ["a", "b", "c"]
    assert sft_factors(g, 2) == ["aa", "ab", "bc", "ca", "cb"]
    assert sft_factors(g, 2) == oracles.sft_words(GOLDEN, 2)


def test_full_two_shift_has_eight_words_of_length_three():
    assert len(sft_factors(SftGraph(BERNOULLI), 3)) == 8


@pytest.mark.parametrize("edges", [BERNOULLI, GOLDEN])
def test_sft_count_is_sum_of_matrix_power(edges):
    g = SftGraph(edges)
    for n in range(13):
        assert g.count(n) == oracles.path_count(edges, n)
    for n in range(1, 7):
        assert sorted(sft_factors(g, n)) == oracles.sft_words(edges, n)


def test_sft_rejects_reducible_and_periodic_graphs():
    with pytest.raises(ValidationError):
        SftGraph([["a", 0, 0], ["b", 0, 1]]).require_valid()  # vertex 1 is a sink
    with pytest.raises(ValidationError):
        SftGraph([["a", 0, 1], ["b", 1, 0]]).require_valid()  # a single cycle
    with pytest.raises(ValidationError):
        SftGraph([["ab", 0, 0]])


def test_perron_golden_mean():
    pd = perron(SftGraph(GOLDEN))
    lam, u, v = oracles.perron_eig(oracles.incidence(GOLDEN))
    assert abs(pd.lam - PHI) < 1e-12
    assert np.allclose(pd.v, [0.6180340, 0.3819660], atol=1e-7)
    assert np.allclose(pd.u, [1.1708204, 0.7236068], atol=1e-7)
    assert np.allclose(pd.u, u, atol=1e-12) and np.allclose(pd.v, v, atol=1e-12)
    assert max(pd.residuals(SftGraph(GOLDEN).incidence)) <= 1e-12 * pd.lam


def test_perron_one_vertex_two_loops():
    pd = perron(SftGraph(BERNOULLI))
    assert pd.lam == pytest.approx(2.0, abs=1e-14)
    assert pd.u.tolist() == pytest.approx([1.0]) and pd.v.tolist() == pytest.approx([1.0])


def test_perron_pair_unit_sums_on_random_positive_matrix():
    A = np.random.default_rng(3).random((5, 5)) + 0.1
    lam, u, v = perron_pair(A)
    ref = max(np.linalg.eigvals(A).real)
    assert lam == pytest.approx(ref, rel=1e-12)
    assert np.max(np.abs(A @ v - lam * v)) < 1e-10


# -- substitutions


def test_fibonacci_substitution_factors():
    s = Substitution(FIBONACCI_RULES)
    assert substitution_factors(s, 2) == ["aa", "ab", "ba"]
    assert [len(substitution_factors(s, n)) for n in range(1, 16)] == list(range(2, 17))


def test_thue_morse_factors_against_iterate():
    s = Substitution(THUE_MORSE_RULES)
    it = oracles.iterate_substitution(THUE_MORSE_RULES, "a", 12)
    assert len(substitution_factors(s, 3)) == 6
    for n in range(1, 9):
        assert substitution_factors(s, n) == oracles.factors_of(it, n)


def test_fibonacci_substitution_agrees_with_golden_sturmian():
    s = Substitution(FIBONACCI_RULES)
    cf = ContinuedFraction(GOLDEN_CF)
    relabel = str.maketrans({"a": "1", "b": "0"})
    for n in range(21):
        assert sorted(w.translate(relabel) for w in substitution_factors(s, n)) == sturmian_factors(cf, n)


def test_substitution_rejects_non_primitive():
    with pytest.raises(ValidationError):
        Substitution({"a": "ab", "b": "b"}).require_valid()


def test_fixed_point_prefix():
    s = Substitution(FIBONACCI_RULES)
    assert s.fixed_point_prefix(13) == "abaababaabaab"
    assert s.abelianization.tolist() == [[1, 1], [1, 0]]


# -- continued fractions


def test_convergents_golden():
    cf = ContinuedFraction(GOLDEN_CF)
    assert [q for _, _, q in cf_convergents(cf, 8)][2:] == [1, 1, 2, 3, 5, 8, 13, 21, 34]


def test_convergent_conventions():
    cf = ContinuedFraction([3, 1, 4])
    assert (cf.p(-2), cf.p(-1), cf.q(-2), cf.q(-1)) == (0, 1, 1, 0)


def test_convergents_silver():
    cf = ContinuedFraction(SILVER_CF)
    assert [cf.q(k) for k in range(5)] == [1, 2, 5, 12, 29]


@pytest.mark.parametrize("quotients", [GOLDEN_CF, SILVER_CF, list(range(1, 16)), [7, 1, 1, 3, 250, 2, 1, 9]])
def test_continued_fraction_identities(quotients):
    cf = ContinuedFraction(quotients)
    for k in range(-1, cf.depth + 1):
        assert cf.p(k) * cf.q(k - 1) - cf.p(k - 1) * cf.q(k) == (-1) ** (k + 1)
        if k >= 1:
            assert cf.q(k) >= 2 ** ((k - 1) / 2)
    lams = lambda_sequence(cf, cf.depth - 1)
    assert all(e.lo > 0 for e in lams)
    assert all(b.hi < a.lo for a, b in zip(lams, lams[1:]))
    for k, e in enumerate(lams[:8], start=1):
        # lambda_k = |q_{k-1} theta - p_{k-1}|
        exact = oracles.lambda_value(quotients, cf.q(k - 1), cf.p(k - 1))
        assert float(e.lo) - 1e-15 <= exact <= float(e.hi) + 1e-15


def test_lambda_golden_is_power_of_theta():
    cf = ContinuedFraction(GOLDEN_CF)
    theta = 1 / PHI
    for k, e in enumerate(lambda_sequence(cf, 20), start=1):
        assert e.mid == pytest.approx(theta**k, rel=1e-12)


def test_lambda_one_is_theta_and_silver_lambda_two():
    cf = ContinuedFraction(SILVER_CF)
    lams = lambda_sequence(cf, 3)
    assert lams[0].mid == pytest.approx(2**0.5 - 1, abs=1e-15)
    assert lams[1].mid == pytest.approx(0.1715729, abs=1e-7)
    assert lams[1].mid == pytest.approx(3 - 2 * 2**0.5, abs=1e-15)


def test_lambda_sequence_precision_errors():
    with pytest.raises(PrecisionError):
        lambda_sequence(ContinuedFraction([1, 1, 1]), 3)
    with pytest.raises(PrecisionError):
        lambda_sequence(ContinuedFraction([1] * 6), 3, tol=1e-12)


def test_sturmian_factors_small():
    cf = ContinuedFraction(GOLDEN_CF)
    assert len(sturmian_factors(cf, 3)) == 4
    assert sturmian_factors(cf, 1) == ["0", "1"]


def test_sturmian_factors_match_rotation_brute_force():
    theta = oracles.theta_from_quotients(SILVER_CF)
    word = oracles.rotation_word(theta, 20_000)
    cf = ContinuedFraction(SILVER_CF)
    assert sturmian_factors(cf, 5) == oracles.factors_of(word, 5)
    assert len(sturmian_factors(cf, 5)) == 6
    assert rotation_coding(cf.theta_float(), 200) == word[:200]


def test_letter_one_has_frequency_theta():
    cf = ContinuedFraction(SILVER_CF)
    w = characteristic_prefix(cf, 100_000)
    assert w.count("1") / len(w) == pytest.approx(2**0.5 - 1, abs=1e-4)


def test_standard_words_recurrence():
    cf = ContinuedFraction([2, 3, 1])
    s = list(standard_words(cf))  # s_1, s_2, s_3
    # s_1 = 0^(a1-1) 1, s_{k+1} = s_k^{a_{k+1}} s_{k-1} with s_0 = 0
    assert s[0] == "01"
    assert s[1] == "01" * 3 + "0"
    assert s[2] == s[1] + s[0]
    assert [len(x) for x in s] == [cf.q(k) for k in range(1, 4)]


def test_sturmian_factors_need_enough_quotients():
    cf = ContinuedFraction([1, 1, 1])
    assert sturmian_factors(cf, 2) == ["01", "10", "11"]
    with pytest.raises(PrecisionError):
        sturmian_factors(cf, 6)


def test_unbounded_theta_values():
    cf = unbounded_theta(4)
    assert cf.partial_quotients[:3] == (1, 4, 72)
    assert (cf.q(0), cf.q(1), cf.q(2), cf.q(3)) == (1, 1, 5, 361)
    for n in range(1, 5):
        assert cf.a(n + 1) == n * (cf.q(n) + cf.q(n - 1)) ** 2
    assert cf.q(4) == 145074353


def test_sturmian_arcs_partition_the_circle():
    cf = ContinuedFraction(GOLDEN_CF)
    arcs = sturmian_arcs(cf, 5)
    total = LinearForm(0, 0)
    for a in arcs:
        total = total + a.length
    assert total == LinearForm(1, 0)
    assert [a.word for a in arcs] != [] and len(arcs) == 6


def test_three_distance_band_values():
    cf = ContinuedFraction(GOLDEN_CF)
    band = three_distance_set(cf, 4)  # 4 = q_3 + q_2 - 1: the boundary case
    assert band.third_absent
    th = 1 / PHI
    assert sorted(float(f.c0 + f.c1 * th) for f in band.values)[:2] == pytest.approx([th**4, th**3], abs=1e-12)


def test_linear_form_arithmetic_and_sign():
    cf = ContinuedFraction(GOLDEN_CF)
    br = cf.bracket
    x = LinearForm(0, 1)
    assert (x + x - x) == x and -x == LinearForm(0, -1) and 2 * x == LinearForm(0, 2)
    assert x.sign(br) == 1 and (x - LinearForm(1, 0)).sign(br) == -1
    assert (3 * x).floor(br) == 1
    assert float(br.width) < 1e-16


def test_from_spec_dispatch_and_errors():
    assert isinstance(from_spec({"type": "sft", "edges": GOLDEN}), SftGraph)
    assert isinstance(from_spec({"type": "substitution", "rules": FIBONACCI_RULES}), Substitution)
    assert from_spec({"type": "sturmian", "preset": "unbounded", "n_max": 2}).partial_quotients == (1, 4, 72)
    with pytest.raises(ValidationError):
        from_spec({"type": "sofic"})
    with pytest.raises(ValidationError):
        from_spec({"type": "sft"})
    with pytest.raises(ValidationError):
        from_spec({"type": "sturmian", "preset": "nope"})


def test_theta_float_matches_high_precision():
    cf = ContinuedFraction(list(range(1, 16)))
    assert cf.theta_float() == pytest.approx(float(oracles.theta_from_quotients(list(range(1, 16)))), abs=1e-15)
