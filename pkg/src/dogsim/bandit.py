"""Centralized bandit primitives: EXP3 and the threshold-selecting WMR learner."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

OVERFLOW_GUARD = 1e100
LOG_FLOOR_SPAN = 700.0


class ContractViolation(ValueError):
    """An argument broke a documented precondition."""


def default_rate(n: int, reward_guess: float) -> float:
    """min(1, sqrt(n ln n / g)), used for both exploration and learning rate."""
    if n <= 1:
        return 1.0
    return min(1.0, math.sqrt(n * math.log(n) / reward_guess))


@dataclass
class Exp3State:
    """Weights of one EXP3 instance.

    Weights are rescaled by a common factor whenever their sum passes
    ``rescale_floor``; the induced probabilities do not change.
    """

    weights: np.ndarray
    gamma: float
    eta: float
    rescale_floor: float = OVERFLOW_GUARD

    def __post_init__(self):
        self.weights = np.array(self.weights, dtype=float)
        if self.weights.ndim != 1 or self.weights.size == 0:
            raise ContractViolation("need a nonempty 1-d weight vector")
        if not (0.0 < self.gamma <= 1.0):
            raise ContractViolation(f"gamma must lie in (0, 1], got {self.gamma}")
        if not self.eta > 0:
            raise ContractViolation(f"eta must be positive, got {self.eta}")
        if np.any(self.weights <= 0) or not np.all(np.isfinite(self.weights)):
            raise ContractViolation("weights must be positive and finite")

    @classmethod
    def uniform(cls, n: int, gamma: float, eta: float | None = None) -> "Exp3State":
        return cls(np.ones(n), gamma, gamma if eta is None else eta)

    @property
    def n(self) -> int:
        return self.weights.size


def exp3_probabilities(state: Exp3State) -> np.ndarray:
    w = state.weights
    p = (1.0 - state.gamma) * (w / w.sum()) + state.gamma / state.n
    return p


def exp3_sample(state: Exp3State, rng: np.random.Generator) -> int:
    if state.n == 1:
        return 0
    p = exp3_probabilities(state)
    cdf = np.cumsum(p)
    u = rng.random() * cdf[-1]
    return int(min(np.searchsorted(cdf, u, side="right"), state.n - 1))


def exp3_update(state: Exp3State, arm: int, reward: float, p_used: float) -> Exp3State:
    """Importance-weighted update of the pulled arm, in place."""
    if not 0.0 <= reward <= 1.0:
        raise ContractViolation(f"reward must lie in [0, 1], got {reward}")
    if not p_used > 0.0:
        raise ContractViolation(f"sampling probability must be positive, got {p_used}")
    if not 0 <= arm < state.n:
        raise ContractViolation(f"arm {arm} out of range")
    if reward == 0.0:
        return state
    state.weights[arm] *= math.exp(state.eta * reward / p_used)
    total = state.weights.sum()
    if total > state.rescale_floor or not np.isfinite(total):
        _rescale(state, arm)
    return state


def _rescale(state: Exp3State, arm: int) -> None:
    w = state.weights
    if np.isfinite(w[arm]):
        w /= w.max()
    else:  # single overflowing update: the pulled arm takes all the mass
        w[:] = np.where(np.arange(w.size) == arm, 1.0, 0.0)
    np.maximum(w, np.finfo(float).tiny, out=w)


# ---------------------------------------------------------------------------
# Modified weighted majority over activation thresholds
# ---------------------------------------------------------------------------


def threshold_grid(m: int = 16) -> np.ndarray:
    if m < 1:
        raise ContractViolation("threshold grid needs at least one value")
    return np.linspace(0.0, 1.0, m) if m > 1 else np.zeros(1)


@dataclass
class WmrState:
    """Weights over a discrete threshold grid, stored as logs.

    ``weights`` returns them scaled so the largest is 1.
    """

    thresholds: np.ndarray
    eta: float = 0.1
    log_weights: np.ndarray = field(default=None)
    current_choice: int = 0

    def __post_init__(self):
        self.thresholds = np.asarray(self.thresholds, dtype=float)
        if self.log_weights is None:
            self.log_weights = np.zeros(self.thresholds.size)
        else:
            self.log_weights = np.asarray(self.log_weights, dtype=float)
        if self.log_weights.shape != self.thresholds.shape:
            raise ContractViolation("one weight per threshold")
        if not self.eta > 0:
            raise ContractViolation("eta must be positive")

    @property
    def m(self) -> int:
        return self.thresholds.size

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights - self.log_weights.max())

    @property
    def probabilities(self) -> np.ndarray:
        w = self.weights
        return w / w.sum()

    @property
    def threshold(self) -> float:
        return float(self.thresholds[self.current_choice])


def wmr_select_threshold(state: WmrState, rng: np.random.Generator) -> int:
    if state.m == 1:
        state.current_choice = 0
        return 0
    cdf = np.cumsum(state.weights)
    u = rng.random() * cdf[-1]
    state.current_choice = int(min(np.searchsorted(cdf, u, side="right"), state.m - 1))
    return state.current_choice


def wmr_update(state: WmrState, rewards, q, did_activate: bool = True) -> WmrState:
    """w(tau_i) <- w(tau_i) * exp(eta * psi(tau_i) / q(tau_i)) if the sensor activated.

    Full-information (broadcast) play passes ``q`` of all ones.
    """
    if not did_activate:
        return state
    psi = np.broadcast_to(np.asarray(rewards, dtype=float), state.thresholds.shape)
    q = np.broadcast_to(np.asarray(q, dtype=float), state.thresholds.shape)
    if np.any(q <= 0):
        raise ContractViolation("activation probabilities q must be positive")
    step = np.nan_to_num(state.eta * psi / q, posinf=LOG_FLOOR_SPAN, neginf=-LOG_FLOOR_SPAN)
    logw = state.log_weights + step
    logw -= logw.max()
    # keep every weight a positive normal float
    state.log_weights = np.maximum(logw, -LOG_FLOOR_SPAN)
    return state


def threshold_reward(own_gain: float, best_other: float, cost: float,
                     estimate: float, threshold: float) -> float:
    """Payoff of playing ``threshold`` in the activation game.

    Activating (estimate >= threshold) earns the improvement over the best
    other activated sensor minus the cost; staying silent earns the negation.
    """
    improvement = max(own_gain - best_other, 0.0)
    if estimate >= threshold:
        return improvement - cost
    return cost - improvement


def activation_probabilities(thresholds: np.ndarray, estimate: float, base: float) -> np.ndarray:
    """q(tau_i): 1 where the estimate clears tau_i, the baseline lazy probability elsewhere."""
    base = min(max(base, 0.0), 1.0)
    return np.where(estimate >= np.asarray(thresholds), 1.0, base)
