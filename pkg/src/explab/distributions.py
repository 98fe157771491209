"""Probability objects on finite alphabets and method-of-types helpers.

Everything is in nats.  Distributions and mixtures are immutable after
construction; the array attributes are flagged read-only.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

SIMPLEX_TOL = 1e-12
DEFAULT_TYPE_CAP = 5_000_000
TYPE_CAP_ENV = "EXPLAB_TYPE_CAP"


class ExplabError(Exception):
    """Base class for library errors."""


class DomainError(ExplabError, ValueError):
    """An argument lies outside the domain of the operation."""


class AlphabetMismatchError(ExplabError, ValueError):
    pass


class UnsupportedSupportError(ExplabError, ValueError):
    """Raised when a quantity needs absolute continuity that does not hold."""


class EnumerationTooLargeError(ExplabError):
    """Type enumeration would exceed the configured cap."""


def _as_simplex_vector(values: Iterable[float], what: str) -> np.ndarray:
    arr = np.array(list(values), dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise DomainError(f"{what} must be a nonempty 1-d vector")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{what} has non-finite entries: {arr.tolist()}")
    if np.any(arr < 0):
        raise DomainError(f"{what} has negative entries: {arr.tolist()}")
    total = math.fsum(arr)
    if abs(total - 1.0) > SIMPLEX_TOL:
        raise DomainError(f"{what} sums to {total!r}, not 1 (tolerance {SIMPLEX_TOL})")
    if total != 1.0:
        arr = arr / total
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Alphabet:
    labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.labels) < 2:
            raise DomainError("an alphabet needs at least two symbols")
        if len(set(self.labels)) != len(self.labels):
            raise DomainError(f"duplicate symbol labels: {self.labels}")

    @classmethod
    def of_size(cls, size: int) -> "Alphabet":
        return cls(tuple(str(i) for i in range(size)))

    @property
    def size(self) -> int:
        return len(self.labels)


@dataclass(frozen=True, eq=False)
class Distribution:
    """A probability vector on ``{0, ..., size-1}``.

    Inputs whose sum is within ``SIMPLEX_TOL`` of one are renormalized;
    anything further off is rejected.
    """

    probs: np.ndarray

    def __post_init__(self):
        probs = _as_simplex_vector(self.probs, "distribution")
        if probs.size < 2:
            raise DomainError("a distribution needs an alphabet of size >= 2")
        object.__setattr__(self, "probs", probs)
        with np.errstate(divide="ignore"):
            logp = np.log(probs)
        logp.setflags(write=False)
        object.__setattr__(self, "_log_probs", logp)

    @classmethod
    def bernoulli(cls, p_one: float) -> "Distribution":
        """Distribution ``(1 - p_one, p_one)`` on a binary alphabet."""
        return cls(np.array([1.0 - p_one, p_one]))

    @property
    def size(self) -> int:
        return self.probs.size

    @property
    def log_probs(self) -> np.ndarray:
        """Elementwise natural log, ``-inf`` off the support."""
        return self._log_probs

    @property
    def support(self) -> np.ndarray:
        return self.probs > 0

    def __eq__(self, other):
        if not isinstance(other, Distribution):
            return NotImplemented
        return np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash(self.probs.tobytes())

    def __repr__(self):
        return f"Distribution({self.probs.tolist()})"


@dataclass(frozen=True, eq=False)
class MixedSource:
    """Finite mixture: a component is drawn once, then emits i.i.d. symbols."""

    weights: np.ndarray
    components: tuple[Distribution, ...] = field(default=())

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise DomainError("a mixed source needs at least one component")
        w = np.array(list(self.weights), dtype=float)
        if w.shape != (len(comps),):
            raise DomainError(f"{w.size} weights for {len(comps)} components")
        if np.any(~(w > 0)):
            # zero weights are rejected, not dropped
            raise DomainError(f"mixture weights must be strictly positive: {w.tolist()}")
        w = _as_simplex_vector(w, "mixture weights")
        size = comps[0].size
        for c in comps[1:]:
            if c.size != size:
                raise AlphabetMismatchError(
                    f"components live on alphabets of size {size} and {c.size}"
                )
        log_w = np.log(w)
        log_w.setflags(write=False)
        table = np.vstack([c.log_probs for c in comps])
        table.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "_log_weights", log_w)
        object.__setattr__(self, "_log_table", table)

    @classmethod
    def singleton(cls, dist: Distribution) -> "MixedSource":
        return cls(np.array([1.0]), (dist,))

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[float, Distribution]]) -> "MixedSource":
        pairs = list(pairs)
        return cls(np.array([w for w, _ in pairs], dtype=float), tuple(d for _, d in pairs))

    @property
    def size(self) -> int:
        return self.components[0].size

    @property
    def log_weights(self) -> np.ndarray:
        return self._log_weights

    @property
    def log_prob_table(self) -> np.ndarray:
        """``(K, |X|)`` array of component log-probabilities."""
        return self._log_table

    def marginal(self) -> Distribution:
        """Single-letter marginal ``sum_i w_i P_i``."""
        return Distribution(self.weights @ np.vstack([c.probs for c in self.components]))

    def __len__(self):
        return len(self.components)

    def __eq__(self, other):
        if not isinstance(other, MixedSource):
            return NotImplemented
        return np.array_equal(self.weights, other.weights) and self.components == other.components

    def __hash__(self):
        return hash((self.weights.tobytes(), self.components))

    def __repr__(self):
        parts = ", ".join(f"{w:g}: {c.probs.tolist()}" for w, c in zip(self.weights, self.components))
        return f"MixedSource({{{parts}}})"


@dataclass(frozen=True)
class SequenceType:
    n: int
    counts: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if self.n < 1:
            raise DomainError(f"sequence length must be positive, got {self.n}")
        if any(c < 0 for c in counts):
            raise DomainError(f"negative count in {counts}")
        if sum(counts) != self.n:
            raise DomainError(f"counts {counts} do not sum to n={self.n}")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_sequence(cls, seq: Sequence[int], alphabet_size: int) -> "SequenceType":
        counts = np.bincount(np.asarray(seq, dtype=np.int64), minlength=alphabet_size)
        if counts.size != alphabet_size:
            raise AlphabetMismatchError(f"symbol index out of range for alphabet size {alphabet_size}")
        return cls(len(seq), tuple(counts.tolist()))

    @property
    def empirical(self) -> np.ndarray:
        return np.array(self.counts, dtype=float) / self.n


def _check_same_alphabet(p: Distribution, q: Distribution) -> None:
    if p.size != q.size:
        raise AlphabetMismatchError(f"alphabet sizes differ: {p.size} vs {q.size}")


def kl_divergence(p: Distribution, q: Distribution) -> float:
    """D(p||q) in nats; ``inf`` when p puts mass where q does not."""
    _check_same_alphabet(p, q)
    on = p.probs > 0
    if np.any(q.probs[on] == 0):
        return math.inf
    terms = p.probs[on] * (p.log_probs[on] - q.log_probs[on])
    # clip tiny negative rounding so the result stays a divergence
    return max(math.fsum(terms), 0.0)


def divergence_variance(p: Distribution, q: Distribution) -> float:
    """Variance of ``log p(X)/q(X)`` for ``X ~ p``, in nats squared."""
    _check_same_alphabet(p, q)
    on = p.probs > 0
    if np.any(q.probs[on] == 0):
        raise UnsupportedSupportError("divergence variance needs p << q")
    ratio = p.log_probs[on] - q.log_probs[on]
    mean = math.fsum(p.probs[on] * ratio)
    return max(math.fsum(p.probs[on] * (ratio - mean) ** 2), 0.0)


def component_log_probs(src: MixedSource, counts: np.ndarray) -> np.ndarray:
    """Per-component log-probability of one sequence of each type.

    ``counts`` is ``(m, |X|)``; the result is ``(m, K)``.  Symbols with zero
    count never contribute, even when a component gives them probability 0.
    """
    counts = np.atleast_2d(np.asarray(counts))
    if counts.shape[1] != src.size:
        raise AlphabetMismatchError(f"counts of width {counts.shape[1]} for alphabet size {src.size}")
    table = src.log_prob_table
    with np.errstate(invalid="ignore"):
        terms = counts[:, None, :] * table[None, :, :]
    terms = np.where(counts[:, None, :] > 0, terms, 0.0)
    return terms.sum(axis=2)


def log_prob_counts(src: MixedSource, counts: np.ndarray) -> np.ndarray:
    """Vectorized :func:`sequence_log_prob` over rows of a count matrix."""
    per_comp = component_log_probs(src, counts)
    if len(src) == 1:
        return per_comp[:, 0]
    with np.errstate(divide="ignore"):
        return logsumexp(per_comp + src.log_weights[None, :], axis=1)


def sequence_log_prob(src: MixedSource, t: SequenceType) -> float:
    """ln of the probability of any single sequence of type ``t``.

    Returns ``-inf`` when every component excludes some observed symbol.
    """
    return float(log_prob_counts(src, np.array([t.counts]))[0])


def type_cap() -> int:
    raw = os.environ.get(TYPE_CAP_ENV)
    if raw is None:
        return DEFAULT_TYPE_CAP
    try:
        cap = int(float(raw))
    except ValueError:
        raise DomainError(f"{TYPE_CAP_ENV}={raw!r} is not a number") from None
    if cap < 1:
        raise DomainError(f"{TYPE_CAP_ENV} must be positive, got {cap}")
    return cap


def check_enumeration(alphabet_size: int, n: int, cap: int | None = None) -> None:
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if alphabet_size < 2:
        raise DomainError(f"alphabet size must be >= 2, got {alphabet_size}")
    cap = type_cap() if cap is None else cap
    if (n + 1) ** (alphabet_size - 1) > cap:
        raise EnumerationTooLargeError(
            f"(n+1)^(|X|-1) = {(n + 1) ** (alphabet_size - 1)} exceeds the type cap {cap}"
        )


def _compositions(parts: int, n: int) -> np.ndarray:
    if parts == 1:
        return np.array([[n]], dtype=np.int64)
    blocks = []
    for first in range(n + 1):
        rest = _compositions(parts - 1, n - first)
        blocks.append(np.column_stack([np.full(len(rest), first, dtype=np.int64), rest]))
    return np.vstack(blocks)


def type_counts(alphabet_size: int, n: int, cap: int | None = None) -> np.ndarray:
    """All compositions of ``n`` into ``alphabet_size`` parts, lexicographic."""
    check_enumeration(alphabet_size, n, cap)
    out = _compositions(alphabet_size, n)
    out.setflags(write=False)
    return out


def enumerate_types(alphabet_size: int, n: int, cap: int | None = None) -> list[SequenceType]:
    return [SequenceType(n, tuple(row)) for row in type_counts(alphabet_size, n, cap).tolist()]


def log_multinomial(counts: np.ndarray) -> np.ndarray:
    """ln(n! / prod counts!) for each row."""
    counts = np.atleast_2d(np.asarray(counts, dtype=float))
    n = counts.sum(axis=1)
    return gammaln(n + 1) - gammaln(counts + 1).sum(axis=1)


def type_class_log_size(t: SequenceType) -> float:
    return math.lgamma(t.n + 1) - math.fsum(math.lgamma(c + 1) for c in t.counts)


def is_typical(t: SequenceType, p: Distribution, nu: float) -> bool:
    """Diagnostic membership in the relative nu-typical set of ``p``."""
    if nu <= 0:
        raise DomainError(f"nu must be positive, got {nu}")
    if len(t.counts) != p.size:
        raise AlphabetMismatchError("type and distribution alphabets differ")
    return bool(np.all(np.abs(t.empirical - p.probs) <= nu * p.probs))
