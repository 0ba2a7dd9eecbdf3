"""Monte Carlo benchmarks for the sampling protocols and Distributed EXP3."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import bandit, sampling
from .algorithms import RunConfig, lazydog_run
from .objectives import random_detection


@dataclass
class Band:
    """Empirical mean with a normal-approximation 3-sigma half width."""

    mean: float
    sigma: float
    trials: int

    def contains(self, target: float, k: float = 3.0) -> bool:
        return abs(self.mean - target) <= k * self.sigma

    def below(self, bound: float, k: float = 3.0) -> bool:
        return self.mean <= bound + k * self.sigma


def proportion_band(hits: int, trials: int, p_expected: float) -> Band:
    """Binomial band around the expected proportion (sigma from the model)."""
    sigma = math.sqrt(p_expected * (1.0 - p_expected) / trials)
    return Band(hits / trials, sigma, trials)


def mean_band(samples) -> Band:
    x = np.asarray(samples, dtype=float)
    return Band(float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size)), int(x.size))


def chi_square_pvalue(counts, probs) -> float:
    counts = np.asarray(counts, dtype=float)
    expected = np.asarray(probs, dtype=float) * counts.sum()
    return float(stats.chisquare(counts, expected).pvalue)


def random_simplex(n: int, rng: np.random.Generator) -> np.ndarray:
    p = rng.dirichlet(np.ones(n))
    return p / p.sum()


@dataclass
class ProtocolStats:
    name: str
    p: np.ndarray
    selected: np.ndarray   # counts per sensor
    none: int
    activations: np.ndarray  # per trial
    trials: int


def run_protocol(name: str, p, trials: int, rng, alpha: float = 1.0, N: int = 100) -> ProtocolStats:
    p = sampling.check_simplex(p)
    fn = {
        "simple": lambda: sampling.simple_protocol(p, rng),
        "improved": lambda: sampling.improved_protocol(p, N, rng),
        "pms": lambda: sampling.pms_protocol(p, alpha, rng),
        "pms-rerun": lambda: sampling.pms_until_selected(p, alpha, rng),
    }[name]
    sel = np.zeros(p.size, dtype=np.int64)
    acts = np.empty(trials, dtype=np.int64)
    none = 0
    for j in range(trials):
        out = fn()
        acts[j] = out.activations
        if out.selected is None:
            none += 1
        else:
            sel[out.selected] += 1
    return ProtocolStats(name, p, sel, none, acts, trials)


def theory(name: str, p, alpha: float = 1.0):
    """Selection law and empty-selection probability where known in closed form."""
    if name == "pms":
        return (1.0 - math.exp(-alpha)) * p, math.exp(-alpha)
    if name == "pms-rerun":
        return p, 0.0
    return None, None


def distribution_equivalence(n: int = 16, trials: int = 200_000, seed: int = 0,
                             gamma: float = 0.1, alpha: float = 1.0):
    """Chi-square p-values of the broadcast and lazy star selection laws
    against EXP3's probabilities for a frozen random weight vector."""
    rng = np.random.default_rng(seed)
    weights = np.exp(rng.normal(0.0, 1.5, n))
    state = bandit.Exp3State(weights, gamma, gamma)
    p = bandit.exp3_probabilities(state)
    # stale estimates: some sensors last synced when the normalizer was smaller
    z_true = weights.sum()
    z_est = np.maximum(z_true * rng.uniform(0.3, 1.0, n), weights)
    z_est[rng.random(n) < 0.3] = z_true

    broad = np.zeros(n, dtype=np.int64)
    star = np.zeros(n, dtype=np.int64)
    star_acts = np.empty(trials)
    for j in range(trials):
        broad[sampling.pms_until_selected(p, alpha, rng).selected] += 1
        out = sampling.lazy_pms_until_selected(weights, z_est, gamma, alpha, rng)
        star[out.selected] += 1
        star_acts[j] = out.activations
    return {
        "p": p,
        "broadcast_counts": broad,
        "star_counts": star,
        "broadcast_pvalue": chi_square_pvalue(broad, p),
        "star_pvalue": chi_square_pvalue(star, p),
        "star_activations": mean_band(star_acts),
    }


def dexp3_activation_run(n: int = 32, alpha: float = 1.0, rounds: int = 20_000, seed: int = 0,
                         gamma: float = 0.1, rerun: bool = False, objective=None):
    """Full single-stage Distributed EXP3 run with eta = gamma / n.

    Returns a Band over per-round activation counts.
    """
    f = objective if objective is not None else random_detection(n, seed=seed + 1000)
    cfg = RunConfig(n=n, k=1, T=rounds, alpha=alpha, gamma=gamma, eta=gamma / n, seed=seed,
                    stage_count=1)
    res = lazydog_run(cfg, f, rerun=rerun)
    acts = [r.activations for r in res.records]
    return mean_band(acts), res
