"""Monte Carlo and exact evaluation of likelihood-ratio threshold tests.

Random streams
--------------
Trials are grouped in fixed blocks of ``BLOCK_SIZE``.  The stream for block
``b`` of role ``r`` (0 = null samples, 1 = alternative samples) is a Philox
counter-based generator keyed by ``SeedSequence(seed, spawn_key=(r, b))``.
Block boundaries never depend on the worker count, so results depend only
on ``(seed, trials, n)``.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from explab.distributions import (
    DomainError,
    Distribution,
    EnumerationTooLargeError,
    ExplabError,
    MixedSource,
    check_enumeration,
    component_log_probs,
    log_multinomial,
    log_prob_counts,
    type_counts,
)
from explab.exponents import TestingProblem
from explab.spectrum import _log_ratio_rate, _mass, type_table

BLOCK_SIZE = 1024
Z95 = 1.959963984540054
SWEEP_HEADER = ("n", "trials", "mu_hat", "mu_ci95", "lambda_hat", "lambda_ci95", "rate1", "rate2")
COMPONENT_HEADER = ("component_kind", "index", "n", "trials", "error_hat", "error_ci95")


class MissingTrialsError(ExplabError, ValueError):
    """Monte Carlo is required but no trial count was given."""


@dataclass(frozen=True)
class ThresholdSchedule:
    """Threshold ``t(n) = R`` (first order) or ``R + S/sqrt(n)`` (second order)."""

    kind: str
    r_big: float
    s: float = 0.0

    def __post_init__(self):
        if self.kind not in ("first_order", "second_order"):
            raise DomainError(f"unknown schedule kind {self.kind!r}")
        if not (math.isfinite(self.r_big) and math.isfinite(self.s)):
            raise DomainError("schedule parameters must be finite")
        if self.kind == "first_order" and self.s != 0.0:
            raise DomainError("a first-order schedule has no second-order term")

    @classmethod
    def first_order(cls, r_big: float) -> "ThresholdSchedule":
        return cls("first_order", float(r_big))

    @classmethod
    def second_order(cls, r_big: float, s: float) -> "ThresholdSchedule":
        return cls("second_order", float(r_big), float(s))

    def t(self, n: int) -> float:
        if self.kind == "first_order":
            return self.r_big
        return self.r_big + self.s / math.sqrt(n)


def wilson_halfwidth(errors: int, trials: int, z: float = Z95) -> float:
    if trials <= 0:
        return 0.0
    p = errors / trials
    denom = 1.0 + z * z / trials
    return z / denom * math.sqrt(p * (1.0 - p) / trials + z * z / (4.0 * trials * trials))


def block_rng(seed: int, role: int, block: int) -> np.random.Generator:
    if seed < 0:
        raise DomainError(f"seed must be nonnegative, got {seed}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(role, block))))


def sample_sequence(
    src: MixedSource, n: int, rng: np.random.Generator, return_component: bool = False
):
    """Draw a component by weight, then ``n`` i.i.d. symbols from it."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    k = int(rng.choice(len(src), p=src.weights))
    seq = rng.choice(src.size, size=n, p=src.components[k].probs)
    return (seq, k) if return_component else seq


def _sample_counts(src: MixedSource, n: int, m: int, rng: np.random.Generator):
    comps = rng.choice(len(src), size=m, p=src.weights)
    counts = np.empty((m, src.size), dtype=np.int64)
    for k, dist in enumerate(src.components):
        idx = np.flatnonzero(comps == k)
        if idx.size:
            counts[idx] = rng.multinomial(n, dist.probs, size=idx.size)
    return comps, counts


@dataclass
class _Tally:
    trials: np.ndarray  # per component
    errors: np.ndarray

    def __add__(self, other):
        return _Tally(self.trials + other.trials, self.errors + other.errors)


def _run_block(problem, n, t, seed, role, block, m) -> _Tally:
    src = problem.null_hyp if role == 0 else problem.alt_hyp
    comps, counts = _sample_counts(src, n, m, block_rng(seed, role, block))
    z = _log_ratio_rate(
        log_prob_counts(problem.null_hyp, counts), log_prob_counts(problem.alt_hyp, counts), n
    )
    err = z <= t if role == 0 else z > t
    k = len(src)
    return _Tally(
        np.bincount(comps, minlength=k).astype(np.int64),
        np.bincount(comps[err], minlength=k).astype(np.int64),
    )


@dataclass(frozen=True)
class TrialReport:
    n: int
    trials: int
    seed: int
    mu_hat: float
    lambda_hat: float
    mu_ci95: float
    lambda_ci95: float
    per_component_mu: tuple[float, ...]
    per_component_lambda: tuple[float, ...]
    null_component_trials: tuple[int, ...] = ()
    alt_component_trials: tuple[int, ...] = ()
    per_component_mu_ci95: tuple[float, ...] = ()
    per_component_lambda_ci95: tuple[float, ...] = ()
    exact: bool = False


def _component_summary(tally: _Tally):
    hats = tuple(float(e / t) if t else math.nan for e, t in zip(tally.errors, tally.trials))
    cis = tuple(wilson_halfwidth(int(e), int(t)) for e, t in zip(tally.errors, tally.trials))
    return hats, cis


def run_trials(
    problem: TestingProblem,
    schedule: ThresholdSchedule,
    n: int,
    trials: int,
    seed: int,
    workers: int = 1,
) -> TrialReport:
    """Estimate both error probabilities of the test that accepts the null
    when ``(1/n) log ratio > t(n)``.

    Type-I errors count null samples with ratio rate ``<= t(n)``; type-II
    errors count alternative samples with ratio rate ``> t(n)``.
    """
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    t = schedule.t(n)
    jobs = []
    for role in (0, 1):
        for b, start in enumerate(range(0, trials, BLOCK_SIZE)):
            jobs.append((role, b, min(BLOCK_SIZE, trials - start)))

    def work(job):
        role, b, m = job
        return role, _run_block(problem, n, t, seed, role, b, m)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, jobs))
    else:
        results = [work(j) for j in jobs]
    null = _Tally(np.zeros(len(problem.null_hyp), np.int64), np.zeros(len(problem.null_hyp), np.int64))
    alt = _Tally(np.zeros(len(problem.alt_hyp), np.int64), np.zeros(len(problem.alt_hyp), np.int64))
    for role, tally in results:
        if role == 0:
            null = null + tally
        else:
            alt = alt + tally
    mu_err, lam_err = int(null.errors.sum()), int(alt.errors.sum())
    mu_c, mu_ci = _component_summary(null)
    lam_c, lam_ci = _component_summary(alt)
    return TrialReport(
        n=n,
        trials=trials,
        seed=seed,
        mu_hat=mu_err / trials,
        lambda_hat=lam_err / trials,
        mu_ci95=wilson_halfwidth(mu_err, trials),
        lambda_ci95=wilson_halfwidth(lam_err, trials),
        per_component_mu=mu_c,
        per_component_lambda=lam_c,
        null_component_trials=tuple(int(x) for x in null.trials),
        alt_component_trials=tuple(int(x) for x in alt.trials),
        per_component_mu_ci95=mu_ci,
        per_component_lambda_ci95=lam_ci,
    )


def exact_errors(problem: TestingProblem, n: int, t: float) -> tuple[float, float]:
    """Exact (mu_n, lambda_n) of the threshold test at ``t``."""
    table = type_table(problem, n)
    return table.null_mass(table.z <= t), table.alt_mass(table.z > t)


def exact_report(problem: TestingProblem, schedule: ThresholdSchedule, n: int) -> TrialReport:
    """Same shape as :func:`run_trials`, computed by type enumeration."""
    t = schedule.t(n)
    table = type_table(problem, n)
    reject = table.z <= t
    mu, lam = table.null_mass(reject), table.alt_mass(~reject)
    lsz = table.log_class_size[:, None]
    null_lm = lsz + component_log_probs(problem.null_hyp, table.counts)
    alt_lm = lsz + component_log_probs(problem.alt_hyp, table.counts)
    per_mu = tuple(_mass(null_lm[:, i], reject) for i in range(null_lm.shape[1]))
    per_lam = tuple(_mass(alt_lm[:, j], ~reject) for j in range(alt_lm.shape[1]))
    return TrialReport(
        n=n,
        trials=0,
        seed=0,
        mu_hat=mu,
        lambda_hat=lam,
        mu_ci95=0.0,
        lambda_ci95=0.0,
        per_component_mu=per_mu,
        per_component_lambda=per_lam,
        per_component_mu_ci95=(0.0,) * len(per_mu),
        per_component_lambda_ci95=(0.0,) * len(per_lam),
        exact=True,
    )


@dataclass(frozen=True)
class SweepRow:
    report: TrialReport
    rate1: float
    rate2: float

    @property
    def n(self) -> int:
        return self.report.n

    @property
    def mu(self) -> float:
        return self.report.mu_hat

    @property
    def lam(self) -> float:
        return self.report.lambda_hat

    @property
    def exact(self) -> bool:
        return self.report.exact


def _rates(lam: float, n: int, r_big: float) -> tuple[float, float]:
    if lam <= 0:
        return math.inf, math.inf
    log_lam = math.log(lam)
    return -log_lam / n, -(log_lam + n * r_big) / math.sqrt(n)


def enumeration_feasible(alphabet_size: int, n: int, cap: int | None = None) -> bool:
    try:
        check_enumeration(alphabet_size, n, cap)
    except EnumerationTooLargeError:
        return False
    return True


def convergence_sweep(
    problem: TestingProblem,
    schedule: ThresholdSchedule,
    n_list: Sequence[int],
    trials: int | None = None,
    seed: int = 0,
    workers: int = 1,
    cap: int | None = None,
    force_monte_carlo: bool = False,
) -> list[SweepRow]:
    """Error trajectories over ``n_list``.

    Rows are exact whenever type enumeration fits under the cap (flagged by
    ``trials == 0``), Monte Carlo otherwise.
    """
    n_list = list(n_list)
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise DomainError(f"n_list must be strictly ascending: {n_list}")
    rows = []
    for n in n_list:
        if not force_monte_carlo and enumeration_feasible(problem.size, n, cap):
            report = exact_report(problem, schedule, n)
        else:
            if trials is None:
                raise MissingTrialsError(
                    f"n={n} is beyond exact enumeration; a trial count is required"
                )
            report = run_trials(problem, schedule, n, trials, seed, workers)
        rows.append(SweepRow(report, *_rates(report.lambda_hat, n, schedule.r_big)))
    return rows


def _fmt(x) -> str:
    return str(x) if isinstance(x, (int, np.integer)) else f"{x:.17g}"


def sweep_to_csv(rows: Sequence[SweepRow], per_component: bool = False) -> str:
    """Main table; with ``per_component`` a blank line and a second table of
    per-component error estimates follow."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for row in rows:
        r = row.report
        w.writerow([_fmt(v) for v in (r.n, r.trials, r.mu_hat, r.mu_ci95, r.lambda_hat, r.lambda_ci95, row.rate1, row.rate2)])
    if per_component:
        buf.write("\n")
        w.writerow(COMPONENT_HEADER)
        for row in rows:
            r = row.report
            for kind, hats, cis in (
                ("null", r.per_component_mu, r.per_component_mu_ci95),
                ("alt", r.per_component_lambda, r.per_component_lambda_ci95),
            ):
                for i, (h, c) in enumerate(zip(hats, cis)):
                    w.writerow([kind, i, r.n, r.trials, _fmt(h), _fmt(c)])
    return buf.getvalue()


def read_sweep_csv(text: str) -> tuple[list[dict], list[dict]]:
    """Parse :func:`sweep_to_csv` output into (main rows, component rows)."""
    blocks = text.split("\n\n")
    if len(blocks) > 2:
        raise DomainError("sweep CSV has more than two blocks")

    def parse(block, header, ints):
        reader = csv.reader(io.StringIO(block))
        got = tuple(next(reader))
        if got != header:
            raise DomainError(f"unexpected header {got}, expected {header}")
        out = []
        for rec in reader:
            if len(rec) != len(header):
                raise DomainError(f"row {rec} has {len(rec)} fields, expected {len(header)}")
            out.append({k: (v if k == "component_kind" else int(v) if k in ints else float(v)) for k, v in zip(header, rec)})
        return out

    main = parse(blocks[0], SWEEP_HEADER, {"n", "trials"})
    comp = parse(blocks[1], COMPONENT_HEADER, {"n", "trials", "index"}) if len(blocks) == 2 else []
    return main, comp


# -- compound regions ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CompoundRegion:
    """Union over null components of the intersection over alternative
    components of the pairwise regions ``{(1/n) log(P_i/Q_j) > t_ij}``."""

    nulls: tuple[Distribution, ...]
    alts: tuple[Distribution, ...]
    thresholds: np.ndarray | Callable[[int], np.ndarray]

    def thresholds_at(self, n: int) -> np.ndarray:
        t = self.thresholds(n) if callable(self.thresholds) else self.thresholds
        t = np.asarray(t, dtype=float)
        if t.shape != (len(self.nulls), len(self.alts)):
            raise DomainError(f"threshold matrix has shape {t.shape}, expected ({len(self.nulls)}, {len(self.alts)})")
        return t

    def pair_masks(self, counts: np.ndarray) -> np.ndarray:
        """(types, K, L) boolean array of memberships in each pairwise region."""
        counts = np.atleast_2d(counts)
        n = int(counts[0].sum())
        t = self.thresholds_at(n)
        lp = component_log_probs(_as_mixture(self.nulls), counts)
        lq = component_log_probs(_as_mixture(self.alts), counts)
        num = np.broadcast_to(lp[:, :, None], lp.shape + (lq.shape[1],))
        den = np.broadcast_to(lq[:, None, :], num.shape)
        z = _log_ratio_rate(num.reshape(-1), den.reshape(-1), n).reshape(num.shape)
        return z > t[None, :, :]

    def mask(self, counts: np.ndarray) -> np.ndarray:
        return self.pair_masks(counts).all(axis=2).any(axis=1)

    def __call__(self, seq_type) -> bool:
        return bool(self.mask(np.array([seq_type.counts]))[0])


def _as_mixture(dists: Sequence[Distribution]) -> MixedSource:
    return MixedSource(np.full(len(dists), 1.0 / len(dists)), tuple(dists))


def compound_region(
    nulls: Sequence[Distribution],
    alts: Sequence[Distribution],
    thresholds,
) -> CompoundRegion:
    if not nulls or not alts:
        raise DomainError("need at least one null and one alternative distribution")
    return CompoundRegion(tuple(nulls), tuple(alts), thresholds)


@dataclass(frozen=True, eq=False)
class CompoundErrors:
    """Exact errors of a compound region at one blocklength.

    ``component_mu[i]`` is the type-I error under null component i and
    ``component_lambda[j]`` the type-II error under alternative j; the pair
    arrays refer to the pairwise regions the compound region is built from.
    """

    n: int
    component_mu: np.ndarray
    component_lambda: np.ndarray
    pair_mu: np.ndarray
    pair_lambda: np.ndarray

    def mixture_errors(self, alpha, beta) -> tuple[float, float]:
        return float(np.dot(alpha, self.component_mu)), float(np.dot(beta, self.component_lambda))

    def chains_hold(self, alpha, beta, slack: float = 1e-12) -> bool:
        mu, lam = self.mixture_errors(alpha, beta)
        alpha, beta = np.asarray(alpha), np.asarray(beta)
        mu_ok = mu <= float((alpha[:, None] * self.pair_mu).sum()) + slack
        lam_ok = lam <= float((beta[None, :] * self.pair_lambda).sum()) + slack
        per_alt_ok = np.all(self.component_lambda <= self.pair_lambda.sum(axis=0) + slack)
        return bool(mu_ok and lam_ok and per_alt_ok)


def compound_errors(region: CompoundRegion, n: int) -> CompoundErrors:
    counts = type_counts(region.nulls[0].size, n)
    lsz = log_multinomial(counts)
    pair = region.pair_masks(counts)
    inside = pair.all(axis=2).any(axis=1)
    lp = lsz[:, None] + component_log_probs(_as_mixture(region.nulls), counts)
    lq = lsz[:, None] + component_log_probs(_as_mixture(region.alts), counts)
    k, l = len(region.nulls), len(region.alts)
    return CompoundErrors(
        n=n,
        component_mu=np.array([_mass(lp[:, i], ~inside) for i in range(k)]),
        component_lambda=np.array([_mass(lq[:, j], inside) for j in range(l)]),
        pair_mu=np.array([[_mass(lp[:, i], ~pair[:, i, j]) for j in range(l)] for i in range(k)]),
        pair_lambda=np.array([[_mass(lq[:, j], pair[:, i, j]) for j in range(l)] for i in range(k)]),
    )
