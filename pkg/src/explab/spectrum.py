"""Exact finite-n divergence spectra by type enumeration.

Under a finite mixture of memoryless sources every sequence of a given type
has the same probability, so any event defined through the normalized
log-likelihood ratio can be evaluated exactly by summing over types,
each weighted by the size of its type class.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from explab.distributions import (
    DomainError,
    ExplabError,
    MixedSource,
    SequenceType,
    component_log_probs,
    log_multinomial,
    log_prob_counts,
    type_counts,
)
from explab.exponents import TestingProblem

MERGE_TOL = 1e-12
CHECK_SLACK = 1e-12
CSV_HEADER = ("z", "mass_cdf")


class PreconditionError(ExplabError, ValueError):
    pass


def _log_ratio_rate(lp_num: np.ndarray, lp_den: np.ndarray, n: int) -> np.ndarray:
    """(lp_num - lp_den) / n with -inf where the numerator vanishes and
    +inf where only the denominator does."""
    z = np.empty_like(lp_num)
    num_zero = np.isneginf(lp_num)
    den_zero = np.isneginf(lp_den) & ~num_zero
    ok = ~num_zero & ~den_zero
    z[ok] = (lp_num[ok] - lp_den[ok]) / n
    z[num_zero] = -math.inf
    z[den_zero] = math.inf
    return z


def _mass(log_mass: np.ndarray, mask=None) -> float:
    vals = log_mass if mask is None else log_mass[mask]
    with np.errstate(under="ignore"):
        return math.fsum(np.exp(vals[~np.isneginf(vals)]))


@dataclass(frozen=True, eq=False)
class TypeTable:
    """Per-type quantities for one problem at one blocklength.

    Rows follow the lexicographic type order of
    :func:`explab.distributions.type_counts`.
    """

    n: int
    counts: np.ndarray
    log_class_size: np.ndarray
    lp_null: np.ndarray
    lp_alt: np.ndarray
    z: np.ndarray

    @property
    def log_null_mass(self) -> np.ndarray:
        return self.log_class_size + self.lp_null

    @property
    def log_alt_mass(self) -> np.ndarray:
        return self.log_class_size + self.lp_alt

    def null_mass(self, mask=None) -> float:
        return _mass(self.log_null_mass, mask)

    def alt_mass(self, mask=None) -> float:
        return _mass(self.log_alt_mass, mask)

    def types(self) -> list[SequenceType]:
        return [SequenceType(self.n, tuple(row)) for row in self.counts.tolist()]

    def __len__(self):
        return self.counts.shape[0]


def type_table(problem: TestingProblem, n: int, cap: int | None = None) -> TypeTable:
    counts = type_counts(problem.size, n, cap)
    lp_null = log_prob_counts(problem.null_hyp, counts)
    lp_alt = log_prob_counts(problem.alt_hyp, counts)
    return TypeTable(
        n=n,
        counts=counts,
        log_class_size=log_multinomial(counts),
        lp_null=lp_null,
        lp_alt=lp_alt,
        z=_log_ratio_rate(lp_null, lp_alt, n),
    )


@dataclass(frozen=True, eq=False)
class SpectrumTable:
    """Exact CDF of the normalized log-likelihood ratio under the null,
    listed at its jump points."""

    n: int
    z: np.ndarray
    cdf: np.ndarray

    def __post_init__(self):
        if self.z.shape != self.cdf.shape or self.z.ndim != 1:
            raise DomainError("z and cdf must be 1-d arrays of equal length")
        if np.any(np.diff(self.z) <= 0):
            raise DomainError("spectrum z values must be strictly increasing")
        if np.any(np.diff(self.cdf) < 0):
            raise DomainError("spectrum cdf must be nondecreasing")

    @property
    def masses(self) -> np.ndarray:
        return np.diff(self.cdf, prepend=0.0)

    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.z.tolist(), self.cdf.tolist()))

    def cdf_at(self, z: float) -> float:
        """Right-continuous Pr{ratio rate <= z}."""
        idx = int(np.searchsorted(self.z, z + MERGE_TOL, side="right"))
        return 0.0 if idx == 0 else float(self.cdf[idx - 1])

    def mean(self) -> float:
        return math.fsum(self.masses * self.z)

    def variance(self) -> float:
        m = self.mean()
        return math.fsum(self.masses * (self.z - m) ** 2)

    def __len__(self):
        return self.z.size


def spectrum_from_table(table: TypeTable) -> SpectrumTable:
    keep = ~np.isneginf(table.lp_null)
    z = table.z[keep]
    with np.errstate(under="ignore"):
        mass = np.exp(table.log_null_mass[keep])
    order = np.lexsort((mass, z))
    z, mass = z[order], mass[order]
    jumps, groups = [], []
    for zi, mi in zip(z.tolist(), mass.tolist()):
        if jumps and (zi == jumps[-1] or zi - jumps[-1] <= MERGE_TOL):
            groups[-1].append(mi)
        else:
            jumps.append(zi)
            groups.append([mi])
    group_mass = np.array([math.fsum(g) for g in groups])
    return SpectrumTable(n=table.n, z=np.array(jumps), cdf=np.cumsum(group_mass))


def exact_spectrum(problem: TestingProblem, n: int, cap: int | None = None) -> SpectrumTable:
    return spectrum_from_table(type_table(problem, n, cap))


def k_of_r(problem: TestingProblem, n: int, r_big: float) -> float:
    """Finite-n slice of Pr{(1/n) log ratio <= R}."""
    return exact_spectrum(problem, n).cdf_at(r_big)


def k_of_rs(problem: TestingProblem, n: int, r_big: float, s: float) -> float:
    """Finite-n slice of Pr{(1/n) log ratio <= R + S/sqrt(n)}."""
    return exact_spectrum(problem, n).cdf_at(r_big + s / math.sqrt(n))


def spectrum_to_csv(spec: SpectrumTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for z, c in spec.points():
        writer.writerow((f"{z:.17g}", f"{c:.17g}"))
    return buf.getvalue()


def read_spectrum_csv(text: str, n: int = 0) -> SpectrumTable:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header) != CSV_HEADER:
        raise DomainError(f"unexpected spectrum header {header}")
    rows = [(float(a), float(b)) for a, b in reader]
    z, c = (np.array(col) for col in zip(*rows)) if rows else (np.empty(0), np.empty(0))
    return SpectrumTable(n=n, z=z, cdf=c)


# -- inequality checkers ----------------------------------------------------

def region_mask(region, table: TypeTable) -> np.ndarray:
    """Boolean mask over the rows of ``table`` for an acceptance region.

    ``region`` may be a mask already, an object with a vectorized
    ``mask(counts)`` method, or a predicate on :class:`SequenceType`.
    """
    if hasattr(region, "mask"):
        mask = np.asarray(region.mask(table.counts), dtype=bool)
    elif callable(region):
        mask = np.array([bool(region(t)) for t in table.types()], dtype=bool)
    else:
        mask = np.asarray(region, dtype=bool)
    if mask.shape != (len(table),):
        raise DomainError(f"region mask has shape {mask.shape}, expected ({len(table)},)")
    return mask


def _check_t(t: float) -> None:
    if not t > 0:
        raise DomainError(f"t must be positive, got {t!r}")


def check_lemma1(problem: TestingProblem, n: int, t: float) -> tuple[float, float, bool]:
    """Alternative mass of {ratio rate >= t} against the bound e^{-nt}."""
    _check_t(t)
    table = type_table(problem, n)
    lam = table.alt_mass(table.z >= t)
    bound = math.exp(-n * t)
    return lam, bound, lam <= bound + CHECK_SLACK


def check_lemma2(problem: TestingProblem, n: int, t: float, region) -> tuple[float, float, bool]:
    """mu_n + e^{nt} lambda_n against the null CDF of the ratio rate at t,
    for an arbitrary type-measurable acceptance region."""
    _check_t(t)
    table = type_table(problem, n)
    inside = region_mask(region, table)
    mu = table.null_mass(~inside)
    lam = table.alt_mass(inside)
    lhs = mu + math.exp(n * t) * lam
    rhs = table.null_mass(table.z <= t)
    return lhs, rhs, lhs >= rhs - CHECK_SLACK


@dataclass(frozen=True, eq=False)
class ExpurgationReport:
    n: int
    per_type_member: np.ndarray  # (K, number of types)
    star_weight: float
    bound: float

    @property
    def star_members(self) -> np.ndarray:
        return self.per_type_member.all(axis=1)

    @property
    def ok(self) -> bool:
        return 0.0 <= self.star_weight <= 1.0 and self.star_weight >= self.bound


def expurgation_bound(n: int, alphabet_size: int) -> float:
    return 1.0 - (n + 1) ** alphabet_size * math.exp(-(n ** 0.25))


def expurgation_report(null_mix: MixedSource, n: int) -> ExpurgationReport:
    """Which components never exceed the mixture by more than e^{n^{1/4}}
    on any single sequence, and how much weight they carry."""
    counts = type_counts(null_mix.size, n)
    lp_comp = component_log_probs(null_mix, counts)  # (types, K)
    lp_mix = log_prob_counts(null_mix, counts)
    member = (lp_comp <= n ** 0.25 + lp_mix[:, None]) | np.isneginf(lp_comp)
    member = member.T.copy()
    star = member.all(axis=1)
    return ExpurgationReport(
        n=n,
        per_type_member=member,
        star_weight=math.fsum(null_mix.weights[star]),
        bound=expurgation_bound(n, null_mix.size),
    )


@dataclass(frozen=True, eq=False)
class DecompositionMargins:
    """Both sides of the two decomposition inequalities on a z grid, all
    probabilities under the chosen null component."""

    z: np.ndarray
    mixture_cdf: np.ndarray
    upper_rhs: np.ndarray
    lower_rhs: np.ndarray
    in_star: bool

    @property
    def upper_ok(self) -> bool:
        return bool(np.all(self.mixture_cdf <= self.upper_rhs + CHECK_SLACK))

    @property
    def lower_ok(self) -> bool:
        return bool(np.all(self.mixture_cdf >= self.lower_rhs - CHECK_SLACK))


def _cdf_under(log_mass: np.ndarray, z_vals: np.ndarray, grid: np.ndarray) -> np.ndarray:
    return np.array([_mass(log_mass, z_vals <= g) for g in grid])


def decomposition_margins(
    null_mix: MixedSource,
    alt: MixedSource,
    n: int,
    component: int,
    z,
    gamma: float,
) -> DecompositionMargins:
    if not gamma > 0:
        raise DomainError(f"gamma must be positive, got {gamma!r}")
    if not 0 <= component < len(null_mix):
        raise DomainError(f"component {component} out of range for {len(null_mix)} components")
    if null_mix.size != alt.size:
        raise DomainError("null and alternative alphabets differ")
    grid = np.atleast_1d(np.asarray(z, dtype=float))
    counts = type_counts(null_mix.size, n)
    lp_theta = component_log_probs(null_mix, counts)[:, component]
    lp_mix = log_prob_counts(null_mix, counts)
    lp_alt = log_prob_counts(alt, counts)
    log_mass = log_multinomial(counts) + lp_theta
    z_mix = _log_ratio_rate(lp_mix, lp_alt, n)
    z_comp = _log_ratio_rate(lp_theta, lp_alt, n)
    in_star = bool(expurgation_report(null_mix, n).star_members[component])
    return DecompositionMargins(
        z=grid,
        mixture_cdf=_cdf_under(log_mass, z_mix, grid),
        upper_rhs=_cdf_under(log_mass, z_comp, grid + n ** -0.75),
        lower_rhs=_cdf_under(log_mass, z_comp, grid - gamma / math.sqrt(n)) - math.exp(-math.sqrt(n) * gamma),
        in_star=in_star,
    )


def check_upper_decomposition(null_mix, alt, n, component, z) -> bool:
    m = decomposition_margins(null_mix, alt, n, component, z, gamma=1.0)
    if not m.in_star:
        raise PreconditionError(
            f"component {component} is outside the expurgated set at n={n}; the upper bound is not guaranteed"
        )
    return m.upper_ok


def check_lower_decomposition(null_mix, alt, n, component, z, gamma: float) -> bool:
    return decomposition_margins(null_mix, alt, n, component, z, gamma).lower_ok


def check_decomposition(
    null_mix: MixedSource,
    alt: MixedSource,
    n: int,
    component: int,
    z,
    gamma: float,
) -> tuple[bool, bool]:
    """(upper_ok, lower_ok) for the two decomposition inequalities.

    ``z`` may be a scalar or a grid; a check passes only if it holds at every
    grid point.  Raises :class:`PreconditionError` when the component is not
    in the expurgated set, since only the lower bound holds there.
    """
    m = decomposition_margins(null_mix, alt, n, component, z, gamma)
    if not m.in_star:
        raise PreconditionError(
            f"component {component} is outside the expurgated set at n={n}; the upper bound is not guaranteed"
        )
    return m.upper_ok, m.lower_ok


def z_grid(table_or_spec, points: int = 21, pad: float = 0.1) -> np.ndarray:
    """Evenly spaced grid covering the finite jump points, padded each side."""
    z = table_or_spec.z
    z = z[np.isfinite(z)]
    return np.linspace(z.min() - pad, z.max() + pad, points)


def lemma_battery(
    problem: TestingProblem,
    n_values: Sequence[int],
    t_values: Sequence[float],
    regions_per_case: int,
    rng: np.random.Generator,
    gammas: Sequence[float] = (0.5, 1.0, 2.0),
) -> dict[str, tuple[int, int]]:
    """Run the lemma checks over a sweep and return ``{name: (passed, total)}``.

    Regions for :func:`check_lemma2` are the two trivial ones, the threshold regions, and
    ``regions_per_case`` uniformly random type subsets.
    """
    tally = {"lemma1": [0, 0], "lemma2": [0, 0], "lemma3": [0, 0], "lemma4": [0, 0], "lemma5": [0, 0]}

    def record(name, ok):
        tally[name][0] += bool(ok)
        tally[name][1] += 1

    for n in n_values:
        table = type_table(problem, n)
        m = len(table)
        for t in t_values:
            record("lemma1", check_lemma1(problem, n, t)[2])
            regions = [np.ones(m, bool), np.zeros(m, bool), table.z > t, table.z >= t]
            regions += [rng.random(m) < 0.5 for _ in range(regions_per_case)]
            for region in regions:
                record("lemma2", check_lemma2(problem, n, t, region)[2])
        rep = expurgation_report(problem.null_hyp, n)
        record("lemma3", rep.ok)
        for i in range(len(problem.null_hyp)):
            sub = TestingProblem(MixedSource.singleton(problem.null_hyp.components[i]), problem.alt_hyp)
            grid = z_grid(type_table(sub, n))
            for k, gamma in enumerate(gammas):
                margins = decomposition_margins(problem.null_hyp, problem.alt_hyp, n, i, grid, gamma)
                if k == 0 and margins.in_star:
                    record("lemma4", margins.upper_ok)
                record("lemma5", margins.lower_ok)
    return {k: (v[0], v[1]) for k, v in tally.items()}
