import itertools
import math
from collections import defaultdict

import numpy as np
import pytest

from explab.distributions import Distribution, DomainError, MixedSource, divergence_variance, kl_divergence
from explab.exponents import TestingProblem
from explab.spectrum import (
    PreconditionError,
    check_decomposition,
    check_lemma1,
    check_lemma2,
    exact_spectrum,
    expurgation_bound,
    expurgation_report,
    k_of_r,
    k_of_rs,
    lemma_battery,
    read_spectrum_csv,
    spectrum_to_csv,
    type_table,
    z_grid,
)

from conftest import random_mixture


def seq_prob(src, seq):
    return sum(w * math.prod(c.probs[s] for s in seq) for w, c in zip(src.weights, src.components))


def brute_spectrum(problem, n):
    """Null law of (1/n) log ratio by listing every sequence."""
    law = defaultdict(float)
    for seq in itertools.product(range(problem.size), repeat=n):
        p, q = seq_prob(problem.null_hyp, seq), seq_prob(problem.alt_hyp, seq)
        if p > 0:
            law[round(math.log(p / q) / n, 10)] += p
    z = sorted(law)
    return np.array(z), np.cumsum([law[k] for k in z])


@pytest.mark.parametrize("which", ["ber", "mixed"])
def test_spectrum_matches_sequence_enumeration(which, ber_problem, mixed_problem):
    problem = ber_problem if which == "ber" else mixed_problem
    spec = exact_spectrum(problem, 6)
    z, cdf = brute_spectrum(problem, 6)
    assert len(spec) == 7
    assert np.allclose(spec.z, z, atol=1e-9)
    assert np.allclose(spec.cdf, cdf, atol=1e-12)


def test_ternary_spectrum_matches_enumeration():
    problem = TestingProblem.simple(Distribution([0.2, 0.5, 0.3]), Distribution([0.4, 0.4, 0.2]))
    spec = exact_spectrum(problem, 5)
    z, cdf = brute_spectrum(problem, 5)
    assert np.allclose(spec.z, z, atol=1e-9) and np.allclose(spec.cdf, cdf, atol=1e-12)


def test_spectrum_examples(ber_problem):
    same = TestingProblem.simple(Distribution.bernoulli(0.3), Distribution.bernoulli(0.3))
    one = exact_spectrum(same, 1)
    assert one.points() == [(0.0, 1.0)]
    spec = exact_spectrum(ber_problem, 10)
    assert len(spec) == 11
    assert spec.cdf[-1] == pytest.approx(1.0, abs=1e-12)
    assert np.all(spec.masses >= 0)
    assert spec.mean() == pytest.approx(kl_divergence(Distribution.bernoulli(0.3), Distribution.bernoulli(0.5)), abs=1e-12)


def test_spectrum_variance_scales_like_dispersion(ber_problem):
    p, q = Distribution.bernoulli(0.3), Distribution.bernoulli(0.5)
    v = divergence_variance(p, q)
    for n in (5, 20, 80):
        assert n * exact_spectrum(ber_problem, n).variance() == pytest.approx(v, rel=1e-9)


def test_infinite_ratio_points():
    # alternative cannot produce symbol 0, so z = +inf whenever it appears
    problem = TestingProblem.simple(Distribution([0.5, 0.5]), Distribution([0.0, 1.0]))
    spec = exact_spectrum(problem, 3)
    assert spec.z[-1] == math.inf
    assert spec.cdf[-2] == pytest.approx(0.125)


def test_k_of_r(ber_problem):
    spec = exact_spectrum(ber_problem, 10)
    z0 = float(spec.z[4])
    assert k_of_r(ber_problem, 10, z0) == spec.cdf[4]
    assert k_of_r(ber_problem, 10, z0 - 1e-6) == spec.cdf[3]
    assert k_of_rs(ber_problem, 10, z0, 0.0) == spec.cdf[4]
    assert k_of_r(ber_problem, 10, -100.0) == 0.0


def test_csv_round_trip(mixed_problem):
    spec = exact_spectrum(mixed_problem, 9)
    text = spectrum_to_csv(spec)
    assert text.splitlines()[0] == "z,mass_cdf"
    back = read_spectrum_csv(text, n=9)
    assert np.array_equal(back.z, spec.z) and np.array_equal(back.cdf, spec.cdf)


def test_lemma1_example(ber_problem):
    # oracle: alternative mass of sequences whose ratio rate is >= t
    n, t = 10, 0.05
    lam = sum(
        seq_prob(ber_problem.alt_hyp, s)
        for s in itertools.product(range(2), repeat=n)
        if math.log(seq_prob(ber_problem.null_hyp, s) / seq_prob(ber_problem.alt_hyp, s)) / n >= t
    )
    got, bound, ok = check_lemma1(ber_problem, n, t)
    assert got == pytest.approx(lam, abs=1e-12)
    assert bound == math.exp(-0.5) and ok
    with pytest.raises(DomainError):
        check_lemma1(ber_problem, n, 0.0)


def test_lemma2_regions(mixed_problem):
    table = type_table(mixed_problem, 8)
    for region in (np.ones(len(table), bool), table.z > 0.1, lambda t: t.counts[0] % 2 == 0):
        lhs, rhs, ok = check_lemma2(mixed_problem, 8, 0.1, region)
        assert ok and lhs >= rhs - 1e-12
    with pytest.raises(DomainError):
        check_lemma2(mixed_problem, 8, 0.1, np.ones(3, bool))


def test_lemma2_over_arbitrary_sequence_regions(mixed_problem):
    # regions that are not unions of type classes, evaluated sequence by sequence
    rng = np.random.default_rng(3)
    n = 6
    seqs = list(itertools.product(range(2), repeat=n))
    p = np.array([seq_prob(mixed_problem.null_hyp, s) for s in seqs])
    q = np.array([seq_prob(mixed_problem.alt_hyp, s) for s in seqs])
    z = np.log(p / q) / n
    for t in (0.02, 0.1, 0.3):
        for _ in range(50):
            inside = rng.random(len(seqs)) < 0.5
            lhs = p[~inside].sum() + math.exp(n * t) * q[inside].sum()
            assert lhs >= p[z <= t].sum() - 1e-12


def test_expurgation_examples():
    mix = MixedSource(np.array([0.6, 0.4]), (Distribution.bernoulli(0.3), Distribution.bernoulli(0.8)))
    rep = expurgation_report(mix, 16)
    # oracle: component probability never exceeds e^{n^{1/4}} times the mixture on any type
    members = []
    for c in mix.components:
        ok = all(
            c.probs[1] ** k * c.probs[0] ** (16 - k)
            <= math.exp(16**0.25) * seq_prob(mix, [1] * k + [0] * (16 - k)) * (1 + 1e-12)
            for k in range(17)
        )
        members.append(ok)
    assert rep.star_members.tolist() == members
    assert rep.star_weight == pytest.approx(sum(w for w, m in zip(mix.weights, members) if m))
    assert rep.bound == expurgation_bound(16, 2) and rep.ok
    single = expurgation_report(MixedSource.singleton(Distribution.bernoulli(0.3)), 5)
    assert single.star_weight == 1.0


def test_expurgation_can_drop_a_component():
    # a rare, very different component dominates the mixture by far on some types
    mix = MixedSource(np.array([0.999, 0.001]), (Distribution.bernoulli(0.05), Distribution.bernoulli(0.95)))
    rep = expurgation_report(mix, 40)
    assert rep.star_members.tolist() == [True, False]
    assert rep.star_weight == 0.999


def test_decomposition_examples(mixed_problem):
    table = type_table(mixed_problem, 10)
    grid = z_grid(table)
    assert grid.size == 21
    for gamma in (0.5, 1.0, 2.0):
        assert check_decomposition(mixed_problem.null_hyp, mixed_problem.alt_hyp, 10, 0, grid, gamma) == (True, True)


def test_decomposition_precondition():
    mix = MixedSource(np.array([0.999, 0.001]), (Distribution.bernoulli(0.05), Distribution.bernoulli(0.95)))
    alt = MixedSource.singleton(Distribution.bernoulli(0.5))
    with pytest.raises(PreconditionError):
        check_decomposition(mix, alt, 40, 1, 0.0, 1.0)
    with pytest.raises(DomainError):
        check_decomposition(mix, alt, 40, 0, 0.0, 0.0)


def test_lemma_battery_random_problems():
    rng = np.random.default_rng(9)
    for _ in range(3):
        problem = TestingProblem(random_mixture(rng, 3, 2), random_mixture(rng, 3, 2))
        tally = lemma_battery(problem, [3, 5], [0.05, 0.2], 10, rng)
        for name, (ok, total) in tally.items():
            assert ok == total, name
