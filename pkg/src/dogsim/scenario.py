"""Scenario files: INI-style sections, strictly validated.

Example::

    [objective]
    family = coverage
    n = 30
    seed = 1
    radius = 0.05, 0.3

    [run]
    k = 3
    T = 20000
    mode = dog-broadcast

    [experiment]
    trials = 10
    output = dog.csv
"""

from __future__ import annotations

import configparser
import os
import re
from dataclasses import dataclass, field, replace

from . import objectives as obj
from .algorithms import RunConfig
from .netsim import MODES

SEED_ENV = "DOGSIM_SEED"


class ScenarioError(ValueError):
    pass


def _floats(text: str):
    parts = [p for p in re.split(r"[,\s]+", text.strip()) if p]
    vals = [float(p) for p in parts]
    return vals[0] if len(vals) == 1 else tuple(vals)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_float(text: str):
    return None if text.strip().lower() in ("", "none", "auto") else float(text)


FAMILY_KEYS = {
    "coverage": {"grid": int, "radius": _floats, "random_weights": _bool},
    "detection": {"targets": int, "radius": float, "max_prob": float},
    "emse": {"max_block": int, "max_corr": float},
}
OBJECTIVE_KEYS = {"family": str, "n": int, "seed": int, "sequence": str, "count": int,
                  "stochastic": _bool}
RUN_KEYS = {"k": int, "T": int, "alpha": _opt_float, "gamma": _opt_float, "eta": _opt_float,
            "mode": str, "seed": int, "reward_guess": _opt_float, "n_factor": float,
            "costs": _floats, "thresholds": int, "wmr_eta": float, "fixed_threshold": _opt_float}
EXPERIMENT_KEYS = {"trials": int, "output": str, "workers": int, "trace": str}


@dataclass
class ObjectiveSpec:
    family: str = "coverage"
    n: int = 30
    seed: int = 0
    sequence: str = "constant"
    count: int = 1
    stochastic: bool = False
    params: dict = field(default_factory=dict)

    def build(self) -> obj.ObjectiveSequence:
        if self.family not in obj.FAMILIES:
            raise ScenarioError(f"unknown objective family {self.family!r}")
        make = obj.FAMILIES[self.family]
        parts = [make(self.n, self.seed + j, **self.params) for j in range(self.count)]
        return obj.ObjectiveSequence(parts, mode=self.sequence, seed=self.seed,
                                     realize=self.stochastic)


@dataclass
class Scenario:
    objective: ObjectiveSpec
    run: RunConfig
    trials: int = 1
    output: str | None = None
    workers: int = 1
    trace: str | None = None


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ScenarioError(f"{SEED_ENV}={raw!r} is not an integer") from None


def _line_of(text: str, section: str, key: str | None = None) -> int:
    current = None
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[(.+)\]$", s)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return lineno
            continue
        if current == section and key is not None:
            if re.match(rf"{re.escape(key)}\s*[=:]", s, re.IGNORECASE):
                return lineno
    return 0


def parse_scenario(text: str, source: str = "<scenario>") -> Scenario:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keys are case-sensitive ("T")
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ScenarioError(f"{source}: {exc}") from None

    def where(section, key=None):
        return f"{source}:{_line_of(text, section, key)}"

    allowed = {"objective", "run", "experiment"}
    for sec in parser.sections():
        if sec not in allowed:
            raise ScenarioError(f"{where(sec)}: unknown section [{sec}]")

    def read(section, schema):
        out = {}
        if not parser.has_section(section):
            return out
        for key, raw in parser.items(section):
            if key not in schema:
                raise ScenarioError(f"{where(section, key)}: unknown key {key!r} in [{section}]")
            try:
                out[key] = schema[key](raw)
            except ValueError as exc:
                raise ScenarioError(f"{where(section, key)}: bad value for {key}: {exc}") from None
        return out

    family = parser.get("objective", "family", fallback="coverage")
    if family not in FAMILY_KEYS:
        raise ScenarioError(f"{where('objective', 'family')}: unknown family {family!r}")
    o = read("objective", {**OBJECTIVE_KEYS, **FAMILY_KEYS[family]})
    params = {key: o.pop(key) for key in list(o) if key in FAMILY_KEYS[family]}
    if "seed" not in o:
        o["seed"] = default_seed()
    ospec = ObjectiveSpec(params=params, **o)
    if ospec.sequence not in ("constant", "cyclic", "random"):
        raise ScenarioError(f"{where('objective', 'sequence')}: unknown sequence {ospec.sequence!r}")

    r = read("run", RUN_KEYS)
    r.setdefault("seed", default_seed())
    if r.get("mode", "dog-broadcast") not in MODES:
        raise ScenarioError(f"{where('run', 'mode')}: unknown mode {r['mode']!r}")
    r.setdefault("k", 1)
    r.setdefault("T", 1000)
    try:
        run = RunConfig(n=ospec.n, **r)
    except ValueError as exc:
        raise ScenarioError(f"{where('run')}: {exc}") from None

    e = read("experiment", EXPERIMENT_KEYS)
    if e.get("trials", 1) < 1 or e.get("workers", 1) < 1:
        raise ScenarioError(f"{where('experiment')}: trials and workers must be >= 1")
    return Scenario(ospec, run, **e)


def load_scenario(path: str) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc.strerror}") from None
    return parse_scenario(text, source=path)


def with_overrides(sc: Scenario, **kw) -> Scenario:
    """Apply non-None command-line overrides."""
    kw = {k: v for k, v in kw.items() if v is not None}
    ospec, run = sc.objective, sc.run
    if "n" in kw:
        ospec = replace(ospec, n=kw.pop("n"))
    if "family" in kw:
        family = kw.pop("family")
        params = ospec.params if family == ospec.family else {}
        ospec = replace(ospec, family=family, params=params)
    if "objective_seed" in kw:
        ospec = replace(ospec, seed=kw.pop("objective_seed"))
    run_keys = {k: kw.pop(k) for k in list(kw) if k in RUN_KEYS}
    try:
        run = RunConfig(**{**run.__dict__, "n": ospec.n, **run_keys})
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None
    return replace(sc, objective=ospec, run=run, **kw)
