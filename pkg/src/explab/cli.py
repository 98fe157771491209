"""Command-line front end.

Exit codes: 0 success, 1 a verification battery found violations,
2 usage or config parse error, 3 domain error, 4 enumeration cap exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys

import numpy as np

from explab.config import ConfigError, ProblemConfig, load_config
from explab.distributions import EnumerationTooLargeError, ExplabError
from explab.exponents import (
    build_profile,
    canonical_residual,
    canonical_solve,
    compound_r_exponent,
    compound_zero_exponent,
    first_order_exponent,
    second_order_exponent,
)
from explab.spectrum import exact_spectrum, lemma_battery, spectrum_to_csv
from explab.testlab import MissingTrialsError, ThresholdSchedule, convergence_sweep, sweep_to_csv

EXIT_FAILED, EXIT_USAGE, EXIT_DOMAIN, EXIT_CAP = 1, 2, 3, 4
LN2 = math.log(2.0)


class UsageError(ExplabError):
    pass


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _scale(bits: bool, power: int = 1) -> float:
    return 1.0 / LN2 ** power if bits else 1.0


def _need(value, flag: str, default=None):
    if value is not None:
        return value
    if default is not None:
        return default
    raise UsageError(f"{flag} is required (no default in the config)")


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


# -- exponent -----------------------------------------------------------------


def cmd_exponent(cfg: ProblemConfig, args, out) -> int:
    d = cfg.defaults
    unit = _scale(args.bits)
    results: list[tuple[str, float]] = []
    show_profile = args.which in ("first", "second", "canonical")
    profile = build_profile(cfg.problem()) if show_profile else None

    if args.which == "first":
        eps = _need(args.eps, "--eps", d.eps)
        results.append(("B_eps", first_order_exponent(profile, eps)))
    elif args.which == "second":
        eps = _need(args.eps, "--eps", d.eps)
        r_big = args.R if args.R is not None else d.r_big
        if r_big is None:
            r_big = first_order_exponent(profile, eps)
        results += [("R", r_big), ("S", second_order_exponent(profile, eps, r_big))]
    elif args.which == "canonical":
        eps = _need(args.eps, "--eps", d.eps)
        b, s = canonical_solve(profile, eps)
        results += [("b", b), ("s", s)]
        if math.isfinite(s):
            results.append(("residual", canonical_residual(profile, eps, b, s)))
    elif args.which == "compound0":
        results.append(("B_0", compound_zero_exponent(cfg.null_distributions(), cfg.alt_distributions())))
    elif args.which in ("hoeffding", "compound_r"):
        r = _need(args.r, "--r", d.r_hoeffding)
        nulls, alts = cfg.null_distributions(), cfg.alt_distributions()
        if args.which == "hoeffding" and (len(nulls) != 1 or len(alts) != 1):
            raise UsageError("hoeffding needs one null and one alternative component; use compound_r")
        results.append(("B_e", compound_r_exponent(nulls, alts, r)))

    def shown(name, value):
        if name == "residual":
            return value
        return value * unit

    if args.csv:
        w = csv.writer(out, lineterminator="\n")
        if profile is not None:
            w.writerow(("component", "weight", "divergence", "variance", "sigma_index"))
            for i, (wt, dv, var, j) in enumerate(profile.rows()):
                w.writerow((i, _fmt(wt), _fmt(dv * unit), _fmt(var * unit * unit), j))
            out.write("\n")
        w.writerow(("quantity", "value"))
        for name, value in results:
            w.writerow((name, _fmt(shown(name, value))))
        return 0

    units = "bits" if args.bits else "nats"
    if profile is not None:
        out.write(f"{'i':>3} {'weight':>12} {'D_i':>14} {'V_i':>14} {'j(i)':>5}   ({units})\n")
        for i, (wt, dv, var, j) in enumerate(profile.rows()):
            out.write(f"{i:>3} {wt:>12.6g} {dv * unit:>14.8g} {var * unit * unit:>14.8g} {j:>5}\n")
    for name, value in results:
        out.write(f"{name} = {shown(name, value):.12g}\n")
    return 0


# -- spectrum -----------------------------------------------------------------


def cmd_spectrum(cfg: ProblemConfig, args, out) -> int:
    problem = cfg.problem()
    n = args.n
    if n is None:
        n = _need(None, "--n", cfg.defaults.n_list[0] if cfg.defaults.n_list else None)
    try:
        spec = exact_spectrum(problem, n)
    except EnumerationTooLargeError as exc:
        raise EnumerationTooLargeError(f"{exc}; use `explab simulate` with --trials instead") from None
    text = spectrum_to_csv(spec)
    if args.bits:
        text = spectrum_to_csv(type(spec)(n=spec.n, z=spec.z / LN2, cdf=spec.cdf))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        out.write(text)
    info = sys.stderr if not args.out else out
    r_big = args.R if args.R is not None else cfg.defaults.r_big
    if r_big is not None:
        info.write(f"K(R) = {_fmt(spec.cdf_at(r_big))}  (R = {_fmt(r_big)})\n")
        s = args.S if args.S is not None else cfg.defaults.s
        if s is not None:
            info.write(f"K(R,S) = {_fmt(spec.cdf_at(r_big + s / math.sqrt(n)))}  (S = {_fmt(s)})\n")
    if args.check_lemmas:
        tally = lemma_battery(problem, [n], args.t_grid, args.regions, np.random.default_rng(args.seed))
        for name, (ok, total) in tally.items():
            info.write(f"{name}: ok {ok}/{total}, fail {total - ok}\n")
        if any(ok != total for ok, total in tally.values()):
            return EXIT_FAILED
    return 0


# -- simulate -----------------------------------------------------------------


def cmd_simulate(cfg: ProblemConfig, args, out) -> int:
    d = cfg.defaults
    r_big = _need(args.R, "--R", d.r_big)
    if args.second_order:
        schedule = ThresholdSchedule.second_order(r_big, _need(args.S, "--S", d.s))
    else:
        schedule = ThresholdSchedule.first_order(r_big)
    n_list = _need(args.n_list, "--n-list", list(d.n_list) if d.n_list else None)
    trials = args.trials if args.trials is not None else d.trials
    seed = args.seed if args.seed is not None else (d.seed if d.seed is not None else 0)
    try:
        rows = convergence_sweep(
            cfg.problem(),
            schedule,
            n_list,
            trials=trials,
            seed=seed,
            workers=args.workers,
            force_monte_carlo=args.monte_carlo,
        )
    except MissingTrialsError as exc:
        raise UsageError(f"{exc} (pass --trials)") from None
    out.write(sweep_to_csv(rows, per_component=args.per_component))
    return 0


# -- verify -------------------------------------------------------------------


def cmd_verify(cfg: ProblemConfig, args, out) -> int:
    n_list = args.n_list or (list(cfg.defaults.n_list) if cfg.defaults.n_list else list(range(4, 13)))
    seed = args.seed if args.seed is not None else (cfg.defaults.seed or 0)
    tally = lemma_battery(cfg.problem(), n_list, args.t_grid, args.regions, np.random.default_rng(seed))
    w = csv.writer(out, lineterminator="\n")
    w.writerow(("check", "passed", "total", "status"))
    for name, (ok, total) in tally.items():
        w.writerow((name, ok, total, "ok" if ok == total else "FAIL"))
    return 0 if all(ok == total for ok, total in tally.values()) else EXIT_FAILED


# -- wiring -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="explab",
        description="Optimum error exponents for hypothesis testing between mixed memoryless sources.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="problem configuration file (YAML)")
        p.add_argument("--bits", action="store_true", help="display exponents in bits instead of nats")

    p = sub.add_parser("exponent", help="first/second-order and compound exponents")
    p.add_argument("which", choices=("first", "second", "canonical", "compound0", "hoeffding", "compound_r"))
    common(p)
    p.add_argument("--eps", type=float)
    p.add_argument("--R", type=float, help="first-order rate for `second`")
    p.add_argument("--r", type=float, help="type-I exponent constraint for hoeffding/compound_r")
    p.add_argument("--csv", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_exponent)

    p = sub.add_parser("spectrum", help="exact finite-n divergence spectrum as CSV")
    common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--R", type=float)
    p.add_argument("--S", type=float)
    p.add_argument("--out", help="write the CSV here instead of stdout")
    p.add_argument("--check-lemmas", action="store_true", help="run the lemma batteries at this n")
    p.add_argument("--t-grid", type=_floats, default=[0.01, 0.05, 0.1, 0.2, 0.5])
    p.add_argument("--regions", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("simulate", help="error trajectories of a threshold test over n")
    common(p)
    order = p.add_mutually_exclusive_group()
    order.add_argument("--first-order", action="store_true", help="threshold t(n) = R (default)")
    order.add_argument("--second-order", action="store_true", help="threshold t(n) = R + S/sqrt(n)")
    p.add_argument("--R", type=float)
    p.add_argument("--S", type=float)
    p.add_argument("--n-list", type=_ints)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--monte-carlo", action="store_true", help="simulate even where exact enumeration is feasible")
    p.add_argument("--per-component", action="store_true", help="append per-component error rows")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="exact lemma batteries over a range of n")
    common(p)
    p.add_argument("--n-list", type=_ints)
    p.add_argument("--t-grid", type=_floats, default=[0.01, 0.05, 0.1, 0.2, 0.5])
    p.add_argument("--regions", type=int, default=100)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        return args.func(cfg, args, out)
    except (ConfigError, UsageError) as exc:
        print(f"explab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EnumerationTooLargeError as exc:
        print(f"explab: resource cap: {exc}", file=sys.stderr)
        return EXIT_CAP
    except ExplabError as exc:
        print(f"explab: domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


def run(argv) -> tuple[int, str]:
    """Run the CLI in-process and capture stdout (handy in tests)."""
    buf = io.StringIO()
    code = main(argv, buf)
    return code, buf.getvalue()


if __name__ == "__main__":
    sys.exit(main())
