"""Distributed one-of-n sampling protocols.

Each sensor decides on its own whether to activate; the activated set then
agrees on a single winner. All protocols return a :class:`SamplingOutcome`
whose ``messages`` field counts activation announcements only; the network
layer adds the per-model overhead (selection and update messages).

Poisson draws are made by inversion from one uniform per sensor so the
broadcast protocol and the lazily renormalized star protocol share the
same machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bandit import ContractViolation

MAX_POISSON_RATE = 64.0
SIMPLEX_TOL = 1e-9


@dataclass
class SamplingOutcome:
    selected: int | None
    activated: dict = field(default_factory=dict)  # sensor id -> count X_v (or Y_v)
    messages: int = 0
    reruns: int = 0
    activations: int = 0  # summed over reruns; equals len(activated) for one attempt


def check_simplex(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ContractViolation("probability vector must be nonempty and 1-d")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ContractViolation("probabilities must be finite and nonnegative")
    if abs(p.sum() - 1.0) > SIMPLEX_TOL:
        raise ContractViolation(f"probabilities sum to {p.sum()!r}, not 1")
    return p


def pick_proportional(ids, counts, rng: np.random.Generator) -> int:
    """Choose ``ids[j]`` with probability counts[j] / sum(counts).

    Counts are integers, so an integer draw partitions [0, total) exactly;
    ids must be in increasing order.
    """
    cum = np.cumsum(counts)
    x = rng.integers(int(cum[-1]))
    return int(ids[int(np.searchsorted(cum, x, side="right"))])


def simple_protocol(p, rng: np.random.Generator) -> SamplingOutcome:
    p = check_simplex(p)
    active = np.flatnonzero(rng.random(p.size) < p)
    out = SamplingOutcome(None, {int(v): 1 for v in active}, len(active), 0, len(active))
    if active.size:
        out.selected = int(active[rng.integers(active.size)])
    return out


def improved_protocol(p, N: int, rng: np.random.Generator) -> SamplingOutcome:
    p = check_simplex(p)
    if N < 1:
        raise ContractViolation("N must be a positive integer")
    trials = np.ceil(N * p - 1e-9).astype(np.int64)
    x = rng.binomial(trials, 1.0 / N)
    return _resolve_counts(x, rng)


def _resolve_counts(x: np.ndarray, rng) -> SamplingOutcome:
    active = np.flatnonzero(x > 0)
    out = SamplingOutcome(None, {int(v): int(x[v]) for v in active}, len(active), 0, len(active))
    if active.size:
        out.selected = pick_proportional(active, x[active], rng)
    return out


def poisson_inverse_cdf(lam: float, r: float) -> int:
    """Smallest y with P(Poisson(lam) <= y) >= r.

    The CDF is accumulated with Neumaier-compensated summation of the pmf.
    """
    if not (0.0 < lam <= MAX_POISSON_RATE) or not math.isfinite(lam):
        raise ContractViolation(f"Poisson rate must lie in (0, {MAX_POISSON_RATE}], got {lam}")
    if not 0.0 <= r < 1.0:
        raise ContractViolation(f"uniform draw must lie in [0, 1), got {r}")
    term = math.exp(-lam)
    total, comp = term, 0.0
    y = 0
    while total + comp < r:
        y += 1
        term *= lam / y
        if term == 0.0 and y > lam:
            break  # remaining mass is below double precision
        s = total + term
        if abs(total) >= abs(term):
            comp += (total - s) + term
        else:
            comp += (term - s) + total
        total = s
    return y


def poisson_counts(rates: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Vectorized front end to :func:`poisson_inverse_cdf`.

    Only draws above P(X = 0) can give a positive count, so everything else
    is screened out before the scalar inversion.
    """
    counts = np.zeros(rates.shape, dtype=np.int64)
    cand = np.flatnonzero(r > np.exp(-rates) * (1.0 - 1e-12))
    for v in cand:
        counts[v] = poisson_inverse_cdf(float(rates[v]), float(r[v]))
    return counts


def pms_protocol(p, alpha: float, rng: np.random.Generator) -> SamplingOutcome:
    """Poisson multinomial sampling: X_v ~ Poisson(alpha p_v), pick by X."""
    p = check_simplex(p)
    if not alpha > 0:
        raise ContractViolation(f"alpha must be positive, got {alpha}")
    r = rng.random(p.size)
    x = np.zeros(p.size, dtype=np.int64)
    pos = p > 0
    x[pos] = poisson_counts(alpha * p[pos], r[pos])
    return _resolve_counts(x, rng)


def pms_until_selected(p, alpha: float, rng: np.random.Generator) -> SamplingOutcome:
    """Rerun PMS with fresh draws until something is selected."""
    p = check_simplex(p)
    reruns = 0
    activations = 0
    while True:
        out = pms_protocol(p, alpha, rng)
        activations += out.activations
        if out.selected is not None:
            out.reruns = reruns
            out.activations = activations
            out.messages = activations
            return out
        reruns += 1


# ---------------------------------------------------------------------------
# Lazy renormalization
# ---------------------------------------------------------------------------


def rho(w, z, gamma: float, n: float):
    """(1 - gamma) w / z + gamma / n: EXP3's probability computed from a normalizer."""
    return (1.0 - gamma) * np.divide(w, z) + gamma / n


@dataclass
class LazySensorView:
    w: float
    z_est: float
    r: float | None = None


def activation_threshold(alpha: float, rho_est):
    return 1.0 - alpha * rho_est


def lazy_activation_decision(view: LazySensorView, gamma: float, alpha: float, r: float,
                             n: int) -> bool:
    """Activate iff r >= 1 - alpha * rho(w, z_est).

    Because z_est never exceeds the true normalizer, every draw that would
    give a positive Poisson count under the true rate also activates here.
    """
    view.r = r
    return bool(r >= activation_threshold(alpha, rho(view.w, view.z_est, gamma, n)))


def server_resolve(active, z_true: float, gamma: float, alpha: float, n: int,
                   rng: np.random.Generator):
    """Recompute each reporter's Poisson count under the true normalizer.

    ``active`` holds (sensor id, r_v, w_v) triples. Returns (selected or None,
    {id: Y_v}).
    """
    if not z_true > 0:
        raise ContractViolation(f"normalizer must be positive, got {z_true}")
    active = sorted(active)
    ids = np.array([a[0] for a in active], dtype=np.int64)
    rates = np.array([alpha * rho(a[2], z_true, gamma, n) for a in active], dtype=float)
    rs = np.array([a[1] for a in active], dtype=float)
    return resolve_rates(ids, rates, rs, rng)


def resolve_rates(ids: np.ndarray, rates: np.ndarray, rs: np.ndarray, rng):
    y = poisson_counts(rates, rs)
    counts = {int(v): int(c) for v, c in zip(ids, y)}
    hit = y > 0
    if not hit.any():
        return None, counts
    return pick_proportional(ids[hit], y[hit], rng), counts


def lazy_pms_until_selected(weights, z_est, gamma: float, alpha: float,
                            rng: np.random.Generator, n_est: float | None = None) -> SamplingOutcome:
    """One star-network selection with frozen weights and stale normalizers.

    Sensors activate against their own lower-bound estimates ``z_est``; the
    server resolves with the true normalizer sum(weights), rerunning until a
    sensor is selected. Message count: two per activation plus n per rerun.
    """
    w = np.asarray(weights, dtype=float)
    z_est = np.broadcast_to(np.asarray(z_est, dtype=float), w.shape)
    n = w.size
    n_est = n if n_est is None else n_est
    z_true = float(w.sum())
    if np.any(z_est > z_true * (1 + 1e-12)):
        raise ContractViolation("normalizer estimates must not exceed the true normalizer")
    thresh = activation_threshold(alpha, rho(w, z_est, gamma, n_est))
    true_rates = alpha * rho(w, z_true, gamma, n_est)
    messages = activations = reruns = 0
    while True:
        r = rng.random(n)
        active = np.flatnonzero(r >= thresh)
        activations += active.size
        messages += 2 * active.size
        if active.size:
            sel, counts = resolve_rates(active, true_rates[active], r[active], rng)
            if sel is not None:
                return SamplingOutcome(sel, counts, messages, reruns, activations)
        messages += n
        reruns += 1
