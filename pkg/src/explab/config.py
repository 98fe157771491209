"""Problem configuration files.

Grammar (YAML subset)::

    alphabet: [a, b]                # >= 2 distinct labels
    null:                           # nonempty list of components
      - weight: 0.6                 # strictly positive, weights sum to 1
        probs: [0.7, 0.3]           # one entry per alphabet symbol
      - {weight: 0.4, probs: [0.2, 0.8]}
    alt:
      - {weight: 1.0, probs: [0.5, 0.5]}
    defaults:                       # optional; every key optional
      eps: 0.1
      r_big: 0.08
      s: -0.3
      r_hoeffding: 0.05
      n_list: [10, 20, 40]
      trials: 10000
      seed: 1

The ``null`` key may be written bare or quoted.  Numbers are read as
decimal doubles; exponent notation such as ``1e-3``
is accepted even without a decimal point.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Any

import numpy as np
import yaml

from explab.distributions import Distribution, ExplabError, MixedSource
from explab.exponents import TestingProblem


class ConfigError(ExplabError, ValueError):
    pass


@dataclass(frozen=True)
class Defaults:
    eps: float | None = None
    r_big: float | None = None
    s: float | None = None
    r_hoeffding: float | None = None
    n_list: tuple[int, ...] | None = None
    trials: int | None = None
    seed: int | None = None


@dataclass(frozen=True)
class ProblemConfig:
    alphabet: tuple[str, ...]
    null: tuple[tuple[float, tuple[float, ...]], ...]
    alt: tuple[tuple[float, tuple[float, ...]], ...]
    defaults: Defaults = field(default_factory=Defaults)

    def problem(self) -> TestingProblem:
        return TestingProblem(_mixture(self.null, "null"), _mixture(self.alt, "alt"))

    def null_distributions(self) -> list[Distribution]:
        return list(self.problem().null_hyp.components)

    def alt_distributions(self) -> list[Distribution]:
        return list(self.problem().alt_hyp.components)


def _mixture(rows, where: str) -> MixedSource:
    try:
        return MixedSource.from_pairs((w, Distribution(np.array(p))) for w, p in rows)
    except ExplabError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _number(value: Any, where: str) -> float:
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            pass
    raise ConfigError(f"{where}: expected a number, got {value!r}")


def _integer(value: Any, where: str) -> int:
    x = _number(value, where)
    if not x.is_integer():
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    return int(x)


def _components(raw: Any, where: str, size: int):
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"{where}: expected a nonempty list of components")
    out = []
    for i, item in enumerate(raw):
        at = f"{where}[{i}]"
        if not isinstance(item, dict):
            raise ConfigError(f"{at}: expected a mapping with 'weight' and 'probs'")
        extra = set(item) - {"weight", "probs"}
        if extra:
            raise ConfigError(f"{at}: unknown keys {sorted(extra)}")
        if "weight" not in item or "probs" not in item:
            raise ConfigError(f"{at}: both 'weight' and 'probs' are required")
        probs = item["probs"]
        if not isinstance(probs, list):
            raise ConfigError(f"{at}.probs: expected a list")
        if len(probs) != size:
            raise ConfigError(f"{at}.probs: {len(probs)} entries for an alphabet of {size} symbols")
        out.append(
            (
                _number(item["weight"], f"{at}.weight"),
                tuple(_number(p, f"{at}.probs[{k}]") for k, p in enumerate(probs)),
            )
        )
    return tuple(out)


def _defaults(raw: Any) -> Defaults:
    if raw is None:
        return Defaults()
    if not isinstance(raw, dict):
        raise ConfigError("defaults: expected a mapping")
    known = {f.name for f in fields(Defaults)}
    extra = set(raw) - known
    if extra:
        raise ConfigError(f"defaults: unknown keys {sorted(extra)}")
    kw: dict[str, Any] = {}
    for key in ("eps", "r_big", "s", "r_hoeffding"):
        if raw.get(key) is not None:
            kw[key] = _number(raw[key], f"defaults.{key}")
    for key in ("trials", "seed"):
        if raw.get(key) is not None:
            kw[key] = _integer(raw[key], f"defaults.{key}")
    if raw.get("n_list") is not None:
        if not isinstance(raw["n_list"], list):
            raise ConfigError("defaults.n_list: expected a list")
        kw["n_list"] = tuple(_integer(v, f"defaults.n_list[{i}]") for i, v in enumerate(raw["n_list"]))
    return Defaults(**kw)


def parse_config(text: str) -> ProblemConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}: " if mark else ""
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError(f"{where}{problem}") from None
    if not isinstance(raw, dict):
        raise ConfigError("top level: expected a mapping")
    if None in raw:
        # an unquoted `null:` key loads as None
        if "null" in raw:
            raise ConfigError("top level: 'null' given twice")
        raw["null"] = raw.pop(None)
    extra = set(raw) - {"alphabet", "null", "alt", "defaults"}
    if extra:
        raise ConfigError(f"top level: unknown keys {sorted(extra)}")
    labels = raw.get("alphabet")
    if not isinstance(labels, list) or len(labels) < 2:
        raise ConfigError("alphabet: expected a list of at least two labels")
    labels = tuple(str(x) for x in labels)
    if len(set(labels)) != len(labels):
        raise ConfigError(f"alphabet: duplicate labels {labels}")
    cfg = ProblemConfig(
        alphabet=labels,
        null=_components(raw.get("null"), "null", len(labels)),
        alt=_components(raw.get("alt"), "alt", len(labels)),
        defaults=_defaults(raw.get("defaults")),
    )
    cfg.problem()  # re-check every distribution and mixture invariant
    return cfg


def load_config(path: str) -> ProblemConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return parse_config(text)


def dump_config(cfg: ProblemConfig) -> str:
    doc: dict[str, Any] = {
        "alphabet": list(cfg.alphabet),
        "null": [{"weight": w, "probs": list(p)} for w, p in cfg.null],
        "alt": [{"weight": w, "probs": list(p)} for w, p in cfg.alt],
    }
    defaults = {}
    for f in fields(Defaults):
        value = getattr(cfg.defaults, f.name)
        if value is not None:
            defaults[f.name] = list(value) if isinstance(value, tuple) else value
    if defaults:
        doc["defaults"] = defaults
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)
