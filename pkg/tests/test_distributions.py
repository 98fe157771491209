import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import comb

from explab.distributions import (
    AlphabetMismatchError,
    Distribution,
    DomainError,
    EnumerationTooLargeError,
    MixedSource,
    SequenceType,
    UnsupportedSupportError,
    divergence_variance,
    enumerate_types,
    is_typical,
    kl_divergence,
    log_multinomial,
    log_prob_counts,
    sequence_log_prob,
    type_class_log_size,
    type_counts,
)

from conftest import random_dist

# 50-digit mpmath values
KL_03_05 = 0.082282878505051846392
VAR_03_05 = 0.15076186948551396921
LOG_MIX_1_3 = -2.7441956477385633488  # ln(643/10000)


def simplex(k):
    return st.lists(st.floats(0.01, 1.0), min_size=k, max_size=k).map(
        lambda xs: Distribution(np.array(xs) / sum(xs))
    )


def test_kl_examples():
    p, q = Distribution([0.3, 0.7]), Distribution([0.5, 0.5])
    assert kl_divergence(p, q) == pytest.approx(KL_03_05, abs=1e-15)
    assert kl_divergence(p, p) == 0.0
    assert kl_divergence(Distribution([0.5, 0.5]), Distribution([1.0, 0.0])) == math.inf
    # 0 log 0 = 0 on the left
    assert kl_divergence(Distribution([1.0, 0.0]), Distribution([0.5, 0.5])) == pytest.approx(math.log(2))


def test_kl_alphabet_mismatch():
    with pytest.raises(AlphabetMismatchError):
        kl_divergence(Distribution([0.5, 0.5]), Distribution([0.2, 0.3, 0.5]))


def test_variance_examples():
    p, q = Distribution([0.3, 0.7]), Distribution([0.5, 0.5])
    assert divergence_variance(p, q) == pytest.approx(VAR_03_05, abs=1e-14)
    # two equally likely log ratios ln 2 and ln(2/3)
    v = divergence_variance(Distribution([0.5, 0.5]), Distribution([0.25, 0.75]))
    assert v == pytest.approx(math.log(3) ** 2 / 4, abs=1e-15)
    assert divergence_variance(p, p) == 0.0
    with pytest.raises(UnsupportedSupportError):
        divergence_variance(Distribution([0.5, 0.5]), Distribution([1.0, 0.0]))


def test_variance_matches_sampled_log_ratio():
    rng = np.random.default_rng(11)
    p, q = Distribution([0.2, 0.5, 0.3]), Distribution([0.4, 0.4, 0.2])
    x = rng.choice(3, size=1_000_000, p=p.probs)
    llr = p.log_probs[x] - q.log_probs[x]
    se = llr.var() * math.sqrt(2 / (x.size - 1)) * 2  # generous for a non-normal llr
    assert abs(llr.var() - divergence_variance(p, q)) < 5 * se


def test_distribution_validation():
    with pytest.raises(DomainError):
        Distribution([0.5, 0.6])
    with pytest.raises(DomainError):
        Distribution([-0.1, 1.1])
    with pytest.raises(DomainError):
        Distribution([math.nan, 1.0])
    d = Distribution([0.5, 0.5 + 5e-13])
    assert math.fsum(d.probs) == pytest.approx(1.0, abs=1e-15)
    assert Distribution.bernoulli(0.3) == Distribution([0.7, 0.3])
    with pytest.raises(ValueError):
        d.probs[0] = 1.0


def test_mixed_source_validation():
    p = Distribution.bernoulli(0.3)
    with pytest.raises(DomainError):
        MixedSource(np.array([1.0, 0.0]), (p, p))
    with pytest.raises(AlphabetMismatchError):
        MixedSource(np.array([0.5, 0.5]), (p, Distribution([0.2, 0.3, 0.5])))
    mix = MixedSource(np.array([0.25, 0.75]), (p, Distribution.bernoulli(0.7)))
    assert np.allclose(mix.marginal().probs, [0.4, 0.6])


def test_sequence_log_prob_matches_exact_rational():
    src = MixedSource(np.array([0.6, 0.4]), (Distribution([0.3, 0.7]), Distribution([0.8, 0.2])))
    t = SequenceType(4, (1, 3))
    exact = Fraction(6, 10) * Fraction(3, 10) * Fraction(7, 10) ** 3 + Fraction(4, 10) * Fraction(
        8, 10
    ) * Fraction(2, 10) ** 3
    assert exact == Fraction(643, 10000)
    assert sequence_log_prob(src, t) == pytest.approx(LOG_MIX_1_3, abs=1e-14)


def test_singleton_log_prob_is_plain_sum():
    p = Distribution([0.2, 0.8])
    counts = np.array([[3, 1]])
    got = log_prob_counts(MixedSource.singleton(p), counts)[0]
    assert got == 3 * math.log(0.2) + math.log(0.8)


def test_zero_probability_symbol():
    src = MixedSource.singleton(Distribution([1.0, 0.0]))
    assert sequence_log_prob(src, SequenceType(3, (3, 0))) == 0.0
    assert sequence_log_prob(src, SequenceType(3, (2, 1))) == -math.inf


def test_type_counts_examples():
    types = type_counts(3, 4)
    assert types.shape == (15, 3)
    assert types[0].tolist() == [0, 0, 4] and types[-1].tolist() == [4, 0, 0]
    assert [t.counts for t in enumerate_types(2, 2)] == [(0, 2), (1, 1), (2, 0)]
    assert type_class_log_size(SequenceType(2, (1, 1))) == pytest.approx(math.log(2))
    assert type_class_log_size(SequenceType(4, (2, 2))) == pytest.approx(math.log(6))


@pytest.mark.parametrize("k,n", [(k, n) for k in (2, 3, 4) for n in (1, 5, 17, 30)])
def test_type_count_is_binomial(k, n):
    types = type_counts(k, n)
    assert len(types) == comb(n + k - 1, k - 1, exact=True)
    assert np.all(types.sum(axis=1) == n)
    assert len({tuple(t) for t in types}) == len(types)


def test_enumeration_rejects_empty_length():
    with pytest.raises(DomainError):
        type_counts(2, 0)


def test_enumeration_cap(monkeypatch):
    with pytest.raises(EnumerationTooLargeError):
        type_counts(3, 10, cap=50)
    monkeypatch.setenv("EXPLAB_TYPE_CAP", "10")
    with pytest.raises(EnumerationTooLargeError):
        type_counts(2, 20)
    assert len(type_counts(2, 9)) == 10


def test_type_class_sizes_count_all_sequences():
    for k, n in [(2, 6), (3, 5), (4, 3)]:
        sizes = np.exp(log_multinomial(type_counts(k, n)))
        assert math.fsum(sizes) == pytest.approx(k**n, rel=1e-12)


def test_from_sequence_and_typicality():
    t = SequenceType.from_sequence([0, 1, 1, 2], 3)
    assert t.counts == (1, 2, 1) and t.n == 4
    assert np.allclose(t.empirical, [0.25, 0.5, 0.25])
    assert is_typical(t, Distribution([0.25, 0.5, 0.25]), 1e-9)
    with pytest.raises(DomainError):
        is_typical(t, Distribution([0.25, 0.5, 0.25]), 0.0)
    assert not is_typical(t, Distribution([0.5, 0.25, 0.25]), 0.1)


def test_total_probability_brute_force():
    # every sequence of length 5 over 3 symbols, against the type route
    src = MixedSource(np.array([0.3, 0.7]), (Distribution([0.2, 0.3, 0.5]), Distribution([0.6, 0.1, 0.3])))
    brute = 0.0
    for seq in itertools.product(range(3), repeat=5):
        brute += sum(
            w * math.prod(c.probs[s] for s in seq) for w, c in zip(src.weights, src.components)
        )
    counts = type_counts(3, 5)
    via_types = math.fsum(np.exp(log_multinomial(counts) + log_prob_counts(src, counts)))
    assert brute == pytest.approx(1.0, abs=1e-12)
    assert via_types == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(simplex(3), simplex(3))
def test_kl_nonnegative_and_zero_iff_equal(p, q):
    d = kl_divergence(p, q)
    assert d >= 0.0
    assert kl_divergence(p, p) == 0.0
    if not np.allclose(p.probs, q.probs, atol=1e-9):
        assert d > 0.0


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 4), st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_type_probabilities_sum_to_one(k, n, seed):
    rng = np.random.default_rng(seed)
    src = MixedSource(np.array([0.5, 0.5]), (random_dist(rng, k), random_dist(rng, k)))
    counts = type_counts(k, n)
    total = math.fsum(np.exp(log_multinomial(counts) + log_prob_counts(src, counts)))
    assert total == pytest.approx(1.0, abs=1e-12)
