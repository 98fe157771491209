"""First- and second-order optimum exponents for finite mixtures.

The null hypothesis is a finite mixture of memoryless sources; the
alternative is a finite mixture too.  Each null component is matched to
the alternative component closest to it in divergence, and the exponents
are functions of the resulting profile of (weight, divergence, variance)
rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp, ndtr, ndtri

from explab.distributions import (
    AlphabetMismatchError,
    DomainError,
    Distribution,
    ExplabError,
    MixedSource,
    divergence_variance,
    kl_divergence,
)

BOUNDARY_TOL = 1e-10
LAMBDA_TOL = 1e-12
MAX_BISECTION = 200


class DisjointSupportError(ExplabError, ValueError):
    """Every candidate divergence is infinite."""


def normal_cdf(x):
    return ndtr(x)


def normal_ppf(u):
    return ndtri(u)


@dataclass(frozen=True)
class TestingProblem:
    null_hyp: MixedSource
    alt_hyp: MixedSource

    __test__ = False  # keep pytest from collecting this class

    def __post_init__(self):
        if self.null_hyp.size != self.alt_hyp.size:
            raise AlphabetMismatchError(
                f"null lives on {self.null_hyp.size} symbols, alternative on {self.alt_hyp.size}"
            )

    @classmethod
    def simple(cls, p: Distribution, q: Distribution) -> "TestingProblem":
        return cls(MixedSource.singleton(p), MixedSource.singleton(q))

    @classmethod
    def mixed(
        cls,
        nulls: Sequence[Distribution],
        alts: Sequence[Distribution],
        alpha: Sequence[float] | None = None,
        beta: Sequence[float] | None = None,
    ) -> "TestingProblem":
        """Mixed problem over the given components; uniform weights by default."""
        alpha = np.full(len(nulls), 1.0 / len(nulls)) if alpha is None else np.asarray(alpha, float)
        beta = np.full(len(alts), 1.0 / len(alts)) if beta is None else np.asarray(beta, float)
        return cls(MixedSource(alpha, tuple(nulls)), MixedSource(beta, tuple(alts)))

    @property
    def size(self) -> int:
        return self.null_hyp.size


@dataclass(frozen=True, eq=False)
class ExponentProfile:
    """One row per null component: weight, effective divergence, variance,
    and the index of the alternative component that achieves the divergence."""

    weights: np.ndarray
    divergences: np.ndarray
    variances: np.ndarray
    sigma_index: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        d = np.asarray(self.divergences, dtype=float)
        v = np.asarray(self.variances, dtype=float)
        j = np.asarray(self.sigma_index, dtype=np.int64)
        if not (w.ndim == 1 and w.shape == d.shape == v.shape == j.shape) or w.size == 0:
            raise DomainError("profile columns must be nonempty and of equal length")
        if np.any(~(w > 0)) or abs(math.fsum(w) - 1.0) > 1e-12:
            raise DomainError(f"profile weights must be positive and sum to 1: {w.tolist()}")
        if np.any(~(d >= 0)) or np.any(~(v >= 0)) or np.any(np.isinf(v)):
            raise DomainError("profile divergences and variances must be nonnegative")
        for name, arr in (("weights", w), ("divergences", d), ("variances", v), ("sigma_index", j)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_rows(cls, rows: Sequence[tuple[float, float, float, int]]) -> "ExponentProfile":
        w, d, v, j = zip(*rows)
        return cls(np.array(w), np.array(d), np.array(v), np.array(j))

    def rows(self) -> list[tuple[float, float, float, int]]:
        return [
            (float(w), float(d), float(v), int(j))
            for w, d, v, j in zip(self.weights, self.divergences, self.variances, self.sigma_index)
        ]

    def __len__(self):
        return self.weights.size


def sigma_selector(p: Distribution, alt: MixedSource) -> tuple[int, float]:
    """Alternative component closest to ``p`` in divergence.

    All alternative weights are positive, so the essential infimum over the
    alternative parameter is the plain minimum.  Ties go to the lowest index.
    """
    divs = [kl_divergence(p, q) for q in alt.components]
    best = min(range(len(divs)), key=divs.__getitem__)
    if math.isinf(divs[best]):
        raise DisjointSupportError(f"{p!r} is singular to every alternative component")
    return best, divs[best]


def build_profile(problem: TestingProblem) -> ExponentProfile:
    rows = []
    for w, p in zip(problem.null_hyp.weights, problem.null_hyp.components):
        j, d = sigma_selector(p, problem.alt_hyp)
        rows.append((float(w), d, divergence_variance(p, problem.alt_hyp.components[j]), j))
    return ExponentProfile.from_rows(rows)


def _check_eps(eps: float) -> None:
    if not 0.0 <= eps < 1.0:
        raise DomainError(f"eps must lie in [0, 1), got {eps!r}")


def first_order_exponent(profile: ExponentProfile, eps: float) -> float:
    """Largest R whose strictly-below weight ``sum_{d_i < R} w_i`` is at most eps.

    The answer is always one of the divergences in the profile.
    """
    _check_eps(eps)
    d, w = profile.divergences, profile.weights
    best = None
    for u in np.unique(d):
        if math.fsum(w[d < u]) <= eps:
            best = u
        else:
            break
    return float(best)


def _boundary_mass(w: np.ndarray, v: np.ndarray, s: float) -> float:
    # v == 0 rows degenerate to a unit step at s = 0
    terms = np.empty_like(w)
    step = v == 0
    terms[step] = np.where(s >= 0, w[step], 0.0)
    smooth = ~step
    terms[smooth] = w[smooth] * normal_cdf(s / np.sqrt(v[smooth]))
    return math.fsum(terms)


def _sup_below(f, target: float) -> float:
    """sup{s : f(s) <= target} for nondecreasing, right-continuous ``f``.

    Assumes the set is nonempty and bounded above.
    """
    lo, hi = -1.0, 1.0
    while f(hi) <= target:
        lo, hi = hi, 2.0 * hi
    while f(lo) > target:
        hi, lo = lo, 2.0 * lo
    for _ in range(MAX_BISECTION):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if f(mid) <= target:
            lo = mid
        else:
            hi = mid
    return lo


def second_order_exponent(profile: ExponentProfile, eps: float, r_big: float) -> float:
    """Second-order exponent S at first-order rate ``r_big``.

    Only defined with each null component matched to a single alternative
    component (the one chosen by :func:`sigma_selector`).
    """
    _check_eps(eps)
    if not r_big >= 0:
        raise DomainError(f"r_big must be nonnegative, got {r_big!r}")
    d, w, v = profile.divergences, profile.weights, profile.variances
    on_boundary = np.abs(d - r_big) <= BOUNDARY_TOL
    below = (d < r_big) & ~on_boundary
    a = math.fsum(w[below])
    if a > eps:
        return -math.inf
    if not on_boundary.any():
        return math.inf
    target = eps - a
    wb, vb = w[on_boundary], v[on_boundary]
    if target >= math.fsum(wb):
        return math.inf
    if target <= 0 and np.any(vb > 0):
        return -math.inf
    if np.all(vb == 0):
        # pure step: the sup-set is (-inf, 0)
        return 0.0
    return _sup_below(lambda s: _boundary_mass(wb, vb, s), target)


def canonical_solve(profile: ExponentProfile, eps: float) -> tuple[float, float]:
    """Solve the canonical equation: returns ``(b, s)`` with b the first-order
    exponent at eps and s the second-order exponent at R = b."""
    if not 0.0 < eps < 1.0:
        raise DomainError(f"eps must lie in (0, 1), got {eps!r}")
    b = first_order_exponent(profile, eps)
    return b, second_order_exponent(profile, eps, b)


def canonical_residual(profile: ExponentProfile, eps: float, b: float, s: float) -> float:
    """``sum_i w_i * lim_n Phi_i(sqrt(n)(b - d_i) + s) - eps``."""
    d, w, v = profile.divergences, profile.weights, profile.variances
    on_boundary = np.abs(d - b) <= BOUNDARY_TOL
    below = (d < b) & ~on_boundary
    return math.fsum(w[below]) + _boundary_mass(w[on_boundary], v[on_boundary], s) - eps


def _pairwise(nulls, alts, fn) -> float:
    if not nulls or not alts:
        raise DomainError("need at least one null and one alternative distribution")
    values = [fn(p, q) for p in nulls for q in alts]
    return min(values)


def compound_zero_exponent(nulls: Sequence[Distribution], alts: Sequence[Distribution]) -> float:
    """min over all (null, alternative) pairs of D(P_i || Q_j)."""
    best = _pairwise(nulls, alts, kl_divergence)
    if math.isinf(best):
        raise DisjointSupportError("every null distribution is singular to every alternative")
    return best


def tilted(p: Distribution, q: Distribution, lam: float) -> np.ndarray:
    """Geometric mixture ``p^lam q^(1-lam)`` normalized on the common support."""
    common = p.support & q.support
    out = np.zeros(p.size)
    logs = lam * p.log_probs[common] + (1.0 - lam) * q.log_probs[common]
    out[common] = np.exp(logs - logsumexp(logs))
    return out


def _kl_vec(a: np.ndarray, b: Distribution) -> float:
    on = a > 0
    return max(math.fsum(a[on] * (np.log(a[on]) - b.log_probs[on])), 0.0)


def hoeffding_exponent(p: Distribution, q: Distribution, r: float) -> float:
    """inf of D(P~||q) over P~ with D(P~||p) < r.

    The minimizer lies on the geometric family between p and q restricted to
    their common support; the constraint is solved for the mixing exponent
    by bisection.
    """
    if p.size != q.size:
        raise AlphabetMismatchError(f"alphabet sizes differ: {p.size} vs {q.size}")
    if not (r > 0) or math.isnan(r):
        raise DomainError(f"r must be positive, got {r!r}")
    common = p.support & q.support
    if not common.any():
        return math.inf
    # at lam -> 1 the family tends to p restricted to the common support
    floor = -math.log(math.fsum(p.probs[common]))
    if r <= floor:
        return math.inf
    if not np.any(q.support & ~p.support):
        # q itself is feasible (in the limit) once r reaches D(q||p)
        if r >= kl_divergence(q, p):
            return 0.0
    else:
        start = tilted(p, q, 0.0)
        if r >= _kl_vec(start, p):
            return _kl_vec(start, q)
    lo, hi = 0.0, 1.0
    for _ in range(MAX_BISECTION):
        if hi - lo <= LAMBDA_TOL:
            break
        mid = 0.5 * (lo + hi)
        if _kl_vec(tilted(p, q, mid), p) > r:
            lo = mid
        else:
            hi = mid
    return _kl_vec(tilted(p, q, hi), q)


def compound_r_exponent(
    nulls: Sequence[Distribution], alts: Sequence[Distribution], r: float
) -> float:
    return _pairwise(nulls, alts, lambda p, q: hoeffding_exponent(p, q, r))
