"""Offline baselines, the OG_unit meta-algorithm and the distributed run drivers."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import bandit
from .netsim import BroadcastNetwork, MessageStats, StarNetwork, run_stage
from .objectives import ObjectiveError, ObjectiveSequence, SubmodularObjective, SumObjective

BRUTE_FORCE_MAX_N = 15
GREEDY_FACTOR = 1.0 - 1.0 / math.e


# ---------------------------------------------------------------------------
# Offline baselines
# ---------------------------------------------------------------------------


def offline_greedy(f: SubmodularObjective, k: int, universe=None) -> list[int]:
    """Greedy sequence of up to k sensors; ties go to the smaller id."""
    allowed = np.ones(f.n, dtype=bool)
    if universe is not None:
        allowed[:] = False
        allowed[list(universe)] = True
    chosen: list[int] = []
    for _ in range(min(k, int(allowed.sum()))):
        g = np.where(allowed, f.gains(chosen), -np.inf)
        v = int(np.argmax(g))
        chosen.append(v)
        allowed[v] = False
    return chosen


def brute_force_opt(f: SubmodularObjective, k: int, max_n: int = BRUTE_FORCE_MAX_N):
    """Exact maximizer over all sets of size <= k, lexicographically first on ties."""
    if f.n > max_n:
        raise ObjectiveError(f"brute force refused: n={f.n} exceeds {max_n}")
    best, best_val = (), 0.0
    for size in range(1, min(k, f.n) + 1):
        for combo in itertools.combinations(range(f.n), size):
            val = f.evaluate(combo)
            if val > best_val:
                best, best_val = combo, val
    return list(best), best_val


# ---------------------------------------------------------------------------
# Centralized OG_unit
# ---------------------------------------------------------------------------


def og_unit_round(bandits: list, f: SubmodularObjective, rng: np.random.Generator,
                  forced=None):
    """One round of OG_unit with EXP3 stages.

    Returns (S_t, feedbacks, choices). ``forced`` overrides the sampled
    choices (the bandits are still updated as if they had picked them).
    """
    choices, probs = [], []
    for i, b in enumerate(bandits):
        p = bandit.exp3_probabilities(b)
        v = forced[i] if forced is not None else bandit.exp3_sample(b, rng)
        choices.append(int(v))
        probs.append(float(p[v]))
    feedbacks = []
    prefix_val = 0.0
    for i in range(len(choices)):
        val = f.evaluate(choices[: i + 1])
        fb = min(max(val - prefix_val, 0.0), 1.0)
        feedbacks.append(fb)
        prefix_val = val
    for b, v, fb, p in zip(bandits, choices, feedbacks, probs):
        bandit.exp3_update(b, v, fb, p)
    return set(choices), feedbacks, choices


# ---------------------------------------------------------------------------
# Distributed runs
# ---------------------------------------------------------------------------


@dataclass
class RunConfig:
    n: int
    k: int
    T: int
    alpha: float | None = None
    gamma: float | None = None
    eta: float | None = None
    mode: str = "dog-broadcast"
    seed: int = 0
    reward_guess: float | None = None
    n_factor: float = 1.0
    costs: float | list = 0.0
    thresholds: int = 16
    wmr_eta: float = 0.1
    fixed_threshold: float | None = None
    stage_count: int | None = None  # overrides k / k' (single-stage Distributed EXP3)
    trace: bool = False

    def __post_init__(self):
        if not 1 <= self.k <= self.n:
            raise ValueError(f"need 1 <= k <= n, got k={self.k}, n={self.n}")
        if self.T < 1:
            raise ValueError("T must be at least 1")
        if self.gamma is not None and not 0 < self.gamma <= 1:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.alpha is not None and not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    def resolved(self) -> "RunConfig":
        """Fill unset parameters with the documented defaults."""
        g = self.reward_guess if self.reward_guess is not None else float(self.T * self.k)
        rate = bandit.default_rate(self.n, g)
        alpha = self.alpha
        if alpha is None:
            alpha = 1.0 if self.mode == "dog-broadcast" else max(1.0, math.log(self.n))
        gamma = self.gamma if self.gamma is not None else rate
        eta = self.eta if self.eta is not None else gamma
        return replace(self, alpha=alpha, gamma=gamma, eta=eta)

    @property
    def stages(self) -> int:
        if self.stage_count is not None:
            return self.stage_count
        if self.mode == "lazydog-star-no-rerun":
            return no_rerun_stages(self.k, self.alpha)
        return self.k


def no_rerun_stages(k: int, alpha: float) -> int:
    """ceil(k / (1 - e^-alpha)); ratios within 1e-6 of an integer round down."""
    return math.ceil(k / -math.expm1(-alpha) - 1e-6)


@dataclass
class RoundRecord:
    t: int
    selected: tuple
    reward: float
    messages: int
    activations: int
    avg_reward: float
    boosted: int = 0


@dataclass
class RunResult:
    config: RunConfig
    records: list = field(default_factory=list)
    stats: MessageStats | None = None
    network: object = None

    def rewards(self) -> np.ndarray:
        return np.array([r.reward for r in self.records])


def _as_sequence(objective) -> ObjectiveSequence:
    if isinstance(objective, ObjectiveSequence):
        return objective
    return ObjectiveSequence([objective])


def _network_for(cfg: RunConfig):
    rng = np.random.default_rng(cfg.seed)
    common = dict(alpha=cfg.alpha, gamma=cfg.gamma, eta=cfg.eta, rng=rng,
                  n_factor=cfg.n_factor, trace=cfg.trace)
    if cfg.mode == "dog-broadcast":
        return BroadcastNetwork(cfg.n, cfg.stages, **common)
    grid = bandit.threshold_grid(cfg.thresholds)
    return StarNetwork(cfg.n, cfg.stages, rerun=cfg.mode != "lazydog-star-no-rerun",
                       costs=cfg.costs, wmr_eta=cfg.wmr_eta, thresholds=grid,
                       fixed_threshold=cfg.fixed_threshold, **common)


def _run(cfg: RunConfig, objective, on_round=None) -> RunResult:
    cfg = cfg.resolved()
    seq = _as_sequence(objective)
    if seq.n != cfg.n:
        raise ValueError(f"objective has {seq.n} sensors but config says n={cfg.n}")
    net = _network_for(cfg)
    result = RunResult(cfg, stats=net.stats, network=net)
    total = 0.0
    for t in range(1, cfg.T + 1):
        f = seq.at(t)
        net.begin_round()
        for i in range(cfg.stages):
            run_stage(net, i, f, cfg.mode)
        chosen = tuple(net.selected())
        reward = f.evaluate(chosen)
        b, u, a, boosted = net.end_round()
        total += reward
        rec = RoundRecord(t, chosen, reward, b + u, a, total / t, boosted)
        result.records.append(rec)
        if on_round is not None:
            on_round(rec, net)
    return result


def dog_run(cfg: RunConfig, objective, on_round=None) -> RunResult:
    return _run(replace(cfg, mode="dog-broadcast"), objective, on_round)


def lazydog_run(cfg: RunConfig, objective, rerun: bool = True, on_round=None) -> RunResult:
    mode = "lazydog-star" if rerun else "lazydog-star-no-rerun"
    return _run(replace(cfg, mode=mode), objective, on_round)


def oddog_run(cfg: RunConfig, objective, on_round=None) -> RunResult:
    return _run(replace(cfg, mode="oddog"), objective, on_round)


RUNNERS = {
    "dog-broadcast": dog_run,
    "lazydog-star": lambda c, f, **kw: lazydog_run(c, f, rerun=True, **kw),
    "lazydog-star-no-rerun": lambda c, f, **kw: lazydog_run(c, f, rerun=False, **kw),
    "oddog": oddog_run,
}


def run(cfg: RunConfig, objective, on_round=None) -> RunResult:
    return RUNNERS[cfg.mode](cfg, objective, on_round=on_round)


# ---------------------------------------------------------------------------
# Regret
# ---------------------------------------------------------------------------


@dataclass
class RegretReport:
    benchmark: float          # max_{|S|<=k} sum_t f_t(S) (or greedy proxy)
    benchmark_set: list
    greedy_total: float       # sum_t f_t(greedy on sum)
    proxy: bool               # True when the benchmark is greedy, not exact
    cumulative_reward: float
    regret: float             # (1 - 1/e) benchmark - cumulative reward
    T: int

    @property
    def average_regret(self) -> float:
        return self.regret / self.T

    @property
    def greedy_ratio(self) -> float:
        return self.cumulative_reward / self.greedy_total if self.greedy_total > 0 else 0.0


def cumulative_objective(objective, T: int) -> SubmodularObjective:
    """(1/T) sum_t f_t as a single objective, grouping repeated rounds."""
    seq = _as_sequence(objective)
    if seq.mode == "constant" and not seq.realize:
        return seq.objectives[0]
    parts = [seq.at(t) for t in range(1, T + 1)]
    if not seq.realize:
        counts: dict = {}
        for f in parts:
            counts[id(f)] = (f, counts.get(id(f), (f, 0))[1] + 1)
        return _WeightedSum([c[0] for c in counts.values()], [c[1] / T for c in counts.values()])
    return SumObjective(parts)


class _WeightedSum(SumObjective):
    def __init__(self, parts, weights):
        super().__init__(parts)
        self.weights = np.asarray(weights, dtype=float)

    def _value(self, mask):
        sensors = np.flatnonzero(mask).tolist()
        return float(self.weights @ [f.evaluate(sensors) for f in self.parts])

    def gains(self, sensors):
        return self.weights @ np.array([f.gains(sensors) for f in self.parts])


def regret_1e(records, objective, k: int, T: int | None = None) -> RegretReport:
    T = len(records) if T is None else T
    if T < 1:
        raise ValueError("need at least one round")
    avg = cumulative_objective(objective, T)
    greedy_set = offline_greedy(avg, k)
    greedy_total = T * avg.evaluate(greedy_set)
    if avg.n <= BRUTE_FORCE_MAX_N:
        best, val = brute_force_opt(avg, k)
        bench, proxy = T * val, False
    else:
        best, bench, proxy = greedy_set, greedy_total, True
    cum = float(sum(r.reward for r in records[:T]))
    return RegretReport(bench, best, greedy_total, proxy, cum, GREEDY_FACTOR * bench - cum, T)


@dataclass
class TrialSummary:
    mean_regret: float
    stderr_regret: float
    mean_ratio: float
    reports: list


def regret_over_trials(cfg: RunConfig, objective, trials: int = 10) -> TrialSummary:
    reports = []
    for j in range(trials):
        res = run(replace(cfg, seed=cfg.seed + j), objective)
        reports.append(regret_1e(res.records, objective, cfg.k))
    avg = np.array([r.average_regret for r in reports])
    err = float(avg.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return TrialSummary(float(avg.mean()), err,
                        float(np.mean([r.greedy_ratio for r in reports])), reports)
