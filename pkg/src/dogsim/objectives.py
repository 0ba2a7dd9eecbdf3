"""Synthetic monotone submodular objectives for sensor selection.

Every objective maps a set of sensor ids to a reward in [0, 1] and is
immutable after construction. Besides ``evaluate`` each family exposes a
vectorized ``gains(selected)`` returning the marginal gain of every sensor
with respect to ``selected``; the online algorithms call it once per stage.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.linalg

DEFAULT_JITTER = 1e-9
CHECK_TOL = 1e-9


class ObjectiveError(ValueError):
    """Raised for invalid sensor ids or malformed objective parameters."""


class NotPositiveDefiniteError(ArithmeticError):
    pass


@dataclass(frozen=True)
class SensorUniverse:
    n: int

    def __post_init__(self):
        if self.n < 0:
            raise ObjectiveError(f"universe size must be nonnegative, got {self.n}")

    @property
    def ids(self) -> range:
        return range(self.n)

    def check(self, sensors: Iterable[int]) -> list[int]:
        out = []
        for v in sensors:
            if isinstance(v, (bool, np.bool_)) or not isinstance(v, (int, np.integer)):
                raise ObjectiveError(f"sensor id must be an integer, got {v!r}")
            if not 0 <= v < self.n:
                raise ObjectiveError(f"unknown sensor id {v} (universe has {self.n} sensors)")
            out.append(int(v))
        return out


class SubmodularObjective:
    """Base class. Subclasses implement ``_value(mask)`` on a boolean mask."""

    universe: SensorUniverse

    @property
    def n(self) -> int:
        return self.universe.n

    def _mask(self, sensors: Iterable[int]) -> np.ndarray:
        mask = np.zeros(self.n, dtype=bool)
        idx = self.universe.check(sensors)
        if idx:
            mask[idx] = True
        return mask

    def _value(self, mask: np.ndarray) -> float:
        raise NotImplementedError

    def evaluate(self, sensors: Iterable[int]) -> float:
        mask = self._mask(sensors)
        if not mask.any():
            return 0.0
        return self._value(mask)

    def marginal_gain(self, sensors: Iterable[int], v: int) -> float:
        (v,) = self.universe.check([v])
        mask = self._mask(sensors)
        if mask[v]:
            return 0.0
        base = self._value(mask) if mask.any() else 0.0
        mask[v] = True
        return max(self._value(mask) - base, 0.0)

    def gains(self, sensors: Iterable[int]) -> np.ndarray:
        """Marginal gain of every sensor given ``sensors`` (0 for members)."""
        mask = self._mask(sensors)
        base = self._value(mask) if mask.any() else 0.0
        out = np.zeros(self.n)
        for v in np.flatnonzero(~mask):
            mask[v] = True
            out[v] = self._value(mask) - base
            mask[v] = False
        # monotone objectives: negative gains are solver roundoff
        return np.maximum(out, 0.0)


# ---------------------------------------------------------------------------
# Families
# ---------------------------------------------------------------------------


class CoverageObjective(SubmodularObjective):
    """Weighted coverage: covered cell weight over total cell weight."""

    def __init__(self, cell_weights: dict, regions: Sequence[Iterable]):
        self.universe = SensorUniverse(len(regions))
        self.cells = list(cell_weights)
        index = {c: j for j, c in enumerate(self.cells)}
        w = np.array([float(cell_weights[c]) for c in self.cells])
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ObjectiveError("cell weights must be finite and nonnegative")
        self.normalizer = float(w.sum())
        if self.normalizer <= 0:
            raise ObjectiveError("total cell weight must be positive")
        self._w = w / self.normalizer
        cover = np.zeros((len(regions), len(self.cells)), dtype=bool)
        for v, region in enumerate(regions):
            for c in region:
                if c not in index:
                    raise ObjectiveError(f"sensor {v} covers unknown cell {c!r}")
                cover[v, index[c]] = True
        self._cover = cover
        self._cover.setflags(write=False)
        self._w.setflags(write=False)

    def _value(self, mask):
        covered = self._cover[mask].any(axis=0)
        return float(self._w[covered].sum())

    def gains(self, sensors):
        mask = self._mask(sensors)
        uncovered = ~self._cover[mask].any(axis=0)
        g = (self._cover & uncovered) @ self._w
        g[mask] = 0.0
        return g


class DetectionObjective(SubmodularObjective):
    """Expected number of detected targets, normalized by f(V).

    ``probs[j, v]`` is the probability that sensor ``v`` detects target ``j``.
    """

    def __init__(self, probs, target_weights=None):
        p = np.array(probs, dtype=float, ndmin=2)
        if np.any(p < 0) or np.any(p > 1) or not np.all(np.isfinite(p)):
            raise ObjectiveError("detection probabilities must lie in [0, 1]")
        self.universe = SensorUniverse(p.shape[1])
        tw = np.ones(p.shape[0]) if target_weights is None else np.asarray(target_weights, float)
        if tw.shape != (p.shape[0],) or np.any(tw < 0):
            raise ObjectiveError("need one nonnegative weight per target")
        self.probs = p
        self.target_weights = tw
        self._log_miss = np.log1p(-np.minimum(p, 1.0 - 1e-300))
        self._log_miss[p >= 1.0] = -np.inf
        full = float(tw @ (1.0 - np.exp(self._log_miss.sum(axis=1))))
        if full <= 0:
            raise ObjectiveError("no target can be detected by any sensor")
        self.normalizer = full
        self.probs.setflags(write=False)

    def _value(self, mask):
        miss = np.exp(self._log_miss[:, mask].sum(axis=1))
        return float(self.target_weights @ (1.0 - miss) / self.normalizer)

    def gains(self, sensors):
        mask = self._mask(sensors)
        miss = np.exp(self._log_miss[:, mask].sum(axis=1))
        # gain of v: sum_j w_j * miss_j * p_jv
        g = (self.target_weights * miss) @ self.probs / self.normalizer
        g[mask] = 0.0
        return g

    def realize(self, rng: np.random.Generator) -> CoverageObjective:
        """Draw one realization: each (target, sensor) detection is Bernoulli.

        The realized objective is the fraction of targets detected, so it is
        plain coverage over the target set.
        """
        hits = rng.random(self.probs.shape) < self.probs
        weights = {j: float(self.target_weights[j]) for j in range(len(self.target_weights))}
        regions = [set(np.flatnonzero(hits[:, v]).tolist()) for v in range(self.n)]
        return CoverageObjective(weights, regions)


def emse_reduction(covariance, sensors, jitter: float = DEFAULT_JITTER) -> float:
    """Fraction of total prediction variance removed by observing ``sensors``.

    The posterior covariance of the unobserved block is the Schur complement
    ``S_UU - S_UA (S_AA + jitter I)^-1 S_AU``; observed variables contribute
    zero posterior variance.
    """
    cov = np.asarray(covariance, dtype=float)
    n = cov.shape[0]
    _validate_spd(cov)
    idx = sorted(set(int(v) for v in sensors))
    for v in idx:
        if not 0 <= v < n:
            raise ObjectiveError(f"unknown sensor id {v}")
    total = float(np.trace(cov))
    return _emse(cov, np.array(idx, dtype=int), total, jitter)


def _validate_spd(cov: np.ndarray) -> np.ndarray:
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise NotPositiveDefiniteError(f"covariance must be square, got shape {cov.shape}")
    if not np.all(np.isfinite(cov)):
        raise NotPositiveDefiniteError("covariance has non-finite entries")
    asym = float(np.max(np.abs(cov - cov.T))) if cov.size else 0.0
    if asym > 1e-9:
        raise NotPositiveDefiniteError(f"covariance not symmetric (max |S - S^T| = {asym:.3g})")
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        eig = np.linalg.eigvalsh(cov)
        raise NotPositiveDefiniteError(
            f"covariance not positive definite (min eigenvalue {eig.min():.3g})"
        ) from None


def _emse(cov, obs, total, jitter):
    n = cov.shape[0]
    if obs.size == 0:
        return 0.0
    if obs.size == n:
        return 1.0
    rest = np.setdiff1d(np.arange(n), obs)
    s_aa = cov[np.ix_(obs, obs)] + jitter * np.eye(obs.size)
    s_ua = cov[np.ix_(rest, obs)]
    c = scipy.linalg.cho_factor(s_aa)
    explained = np.einsum("ij,ji->", s_ua, scipy.linalg.cho_solve(c, s_ua.T))
    post = float(np.trace(cov[np.ix_(rest, rest)]) - explained)
    return (total - post) / total


class GaussianEmseObjective(SubmodularObjective):
    """Reduction in mean squared prediction error of a Gaussian field."""

    def __init__(self, covariance, jitter: float = DEFAULT_JITTER):
        cov = np.array(covariance, dtype=float)
        _validate_spd(cov)
        self.covariance = cov
        self.covariance.setflags(write=False)
        self.jitter = jitter
        self.universe = SensorUniverse(cov.shape[0])
        self._total = float(np.trace(cov))

    def _value(self, mask):
        return _emse(self.covariance, np.flatnonzero(mask), self._total, self.jitter)


class FunctionObjective(SubmodularObjective):
    """Wraps a plain callable ``f(frozenset) -> float``; handy for tests."""

    def __init__(self, n: int, func: Callable[[frozenset], float]):
        self.universe = SensorUniverse(n)
        self._func = func

    def _value(self, mask):
        return float(self._func(frozenset(np.flatnonzero(mask).tolist())))


# ---------------------------------------------------------------------------
# Random instance generators
# ---------------------------------------------------------------------------


def random_coverage(n: int, seed: int, grid: int = 20, radius=0.15,
                    random_weights: bool = False) -> CoverageObjective:
    """Sensors at uniform positions in the unit square covering disks over a
    ``grid x grid`` lattice of cell centers.

    ``radius`` is either one radius for all sensors or a ``(lo, hi)`` range
    from which each sensor's radius is drawn uniformly.
    """
    rng = np.random.default_rng(seed)
    pos = rng.random((n, 2))
    if np.ndim(radius) == 0:
        radii = np.full(n, float(radius))
    else:
        lo, hi = radius
        radii = rng.uniform(lo, hi, n)
    ticks = (np.arange(grid) + 0.5) / grid
    cells = np.stack(np.meshgrid(ticks, ticks, indexing="ij"), axis=-1).reshape(-1, 2)
    weights = rng.random(len(cells)) if random_weights else np.ones(len(cells))
    d2 = ((pos[:, None, :] - cells[None, :, :]) ** 2).sum(axis=-1)
    inside = d2 <= (radii * radii)[:, None]
    regions = [set(np.flatnonzero(row).tolist()) for row in inside]
    return CoverageObjective({j: float(weights[j]) for j in range(len(cells))}, regions)


def random_detection(n: int, seed: int, targets: int = 20, radius: float = 0.3,
                     max_prob: float = 0.9) -> DetectionObjective:
    """Targets and sensors placed uniformly; detection probability decays
    linearly to zero at ``radius``."""
    rng = np.random.default_rng(seed)
    pos = rng.random((n, 2))
    tgt = rng.random((targets, 2))
    d = np.sqrt(((tgt[:, None, :] - pos[None, :, :]) ** 2).sum(axis=-1))
    probs = max_prob * np.clip(1.0 - d / radius, 0.0, 1.0)
    # every target must be reachable so that f(V) > 0
    nearest = d.argmin(axis=1)
    probs[np.arange(targets), nearest] = np.maximum(probs[np.arange(targets), nearest], 0.05)
    return DetectionObjective(probs)


def random_block_covariance(n: int, seed: int, max_block: int = 4,
                            max_corr: float = 0.95) -> np.ndarray:
    """Block-diagonal covariance of unit-variance equicorrelated clusters.

    The variance reduction of such a field depends on each cluster only
    through the number of observed members and is concave in that number,
    so the EMSE objective is provably monotone submodular. General
    kernels (e.g. squared exponential) are not.
    """
    rng = np.random.default_rng(seed)
    blocks = []
    left = n
    while left > 0:
        m = int(rng.integers(1, min(left, max_block) + 1))
        r = float(rng.uniform(0.0, max_corr))
        blocks.append((1.0 - r) * np.eye(m) + r * np.ones((m, m)))
        left -= m
    cov = scipy.linalg.block_diag(*blocks) if blocks else np.zeros((0, 0))
    perm = rng.permutation(n)
    return cov[np.ix_(perm, perm)]


def random_emse(n: int, seed: int, **kw) -> GaussianEmseObjective:
    return GaussianEmseObjective(random_block_covariance(n, seed, **kw))


FAMILIES = {
    "coverage": random_coverage,
    "detection": random_detection,
    "emse": random_emse,
}


# ---------------------------------------------------------------------------
# Sequences over rounds
# ---------------------------------------------------------------------------


@dataclass
class ObjectiveSequence:
    """f_1, f_2, ... as a deterministic function of (seed, t).

    mode ``constant`` always returns the first objective, ``cyclic`` walks the
    list, ``random`` draws uniformly from the list each round. When
    ``realize`` is set, detection objectives are replaced by a per-round
    Bernoulli realization.
    """

    objectives: list
    mode: str = "constant"
    seed: int = 0
    realize: bool = False
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.objectives:
            raise ObjectiveError("need at least one objective")
        if self.mode not in ("constant", "cyclic", "random"):
            raise ObjectiveError(f"unknown sequence mode {self.mode!r}")
        sizes = {f.n for f in self.objectives}
        if len(sizes) != 1:
            raise ObjectiveError(f"objectives disagree on universe size: {sorted(sizes)}")

    @property
    def n(self) -> int:
        return self.objectives[0].n

    def at(self, t: int) -> SubmodularObjective:
        if self.mode == "constant":
            f = self.objectives[0]
        elif self.mode == "cyclic":
            f = self.objectives[(t - 1) % len(self.objectives)]
        else:
            pick = np.random.default_rng([self.seed, t, 0]).integers(len(self.objectives))
            f = self.objectives[int(pick)]
        if self.realize and isinstance(f, DetectionObjective):
            return f.realize(np.random.default_rng([self.seed, t, 1]))
        return f

    def is_constant(self) -> bool:
        return self.mode == "constant" or len(self.objectives) == 1 and not self.realize


class SumObjective(SubmodularObjective):
    """Average of a list of objectives (used as the offline benchmark)."""

    def __init__(self, parts: Sequence[SubmodularObjective]):
        self.parts = list(parts)
        self.universe = SensorUniverse(self.parts[0].n)

    def _value(self, mask):
        sensors = np.flatnonzero(mask).tolist()
        return float(np.mean([f.evaluate(sensors) for f in self.parts]))

    def gains(self, sensors):
        return np.mean([f.gains(sensors) for f in self.parts], axis=0)


# ---------------------------------------------------------------------------
# Exhaustive property check
# ---------------------------------------------------------------------------


@dataclass
class CheckReport:
    is_monotone: bool
    is_submodular: bool
    violation: dict | None = None


def subset_values(objective: SubmodularObjective) -> np.ndarray:
    """f evaluated at every subset, indexed by bitmask."""
    n = objective.n
    vals = np.empty(1 << n)
    for m in range(1 << n):
        vals[m] = objective.evaluate([v for v in range(n) if m >> v & 1])
    return vals


def check_monotone_submodular(objective: SubmodularObjective, max_n: int = 12,
                              tol: float = CHECK_TOL) -> CheckReport:
    n = objective.n
    if n > max_n:
        raise ObjectiveError(f"exhaustive check refused: n={n} exceeds max_n={max_n}")
    vals = subset_values(objective)
    masks = np.arange(1 << n)
    bits = 1 << np.arange(n)
    # gain[m, s] = f(m | s) - f(m); zero when s already in m
    gain = vals[masks[:, None] | bits[None, :]] - vals[masks][:, None]

    report = CheckReport(True, True)
    neg = np.argwhere(gain < -tol)
    if neg.size:
        m, s = (int(x) for x in neg[0])
        report.is_monotone = False
        report.violation = {"kind": "monotone", "A": _bits(m, n), "s": s,
                            "gain": float(gain[m, s])}

    for b in range(1 << n):
        outside = (b & bits) == 0
        if not outside.any():
            continue
        gb = gain[b]
        a = b
        while True:
            bad = outside & (gain[a] < gb - tol)
            if bad.any():
                s = int(np.flatnonzero(bad)[0])
                report.is_submodular = False
                if report.violation is None:
                    report.violation = {"kind": "submodular", "A": _bits(a, n), "B": _bits(b, n),
                                        "s": s, "gain_A": float(gain[a, s]),
                                        "gain_B": float(gain[b, s])}
                return report
            if a == 0:
                break
            a = (a - 1) & b
    return report


def _bits(m: int, n: int) -> list[int]:
    return [v for v in range(n) if m >> v & 1]


def all_subsets(n: int, max_size: int):
    for size in range(max_size + 1):
        yield from itertools.combinations(range(n), size)
