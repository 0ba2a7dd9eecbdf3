"""Simulated broadcast and star networks with exact message accounting.

Unit-cost model: every ``Broadcast`` / ``Send`` line of the distributed
pseudocode costs one message; clock-driven timeouts cost nothing.

Per-sensor weights and normalizers are kept as natural logs. Weight
updates are multiplicative and unbounded, and in the star model the
sensors cannot agree on a common rescaling, so a linear representation
would overflow on long runs. All nodes apply identical floating point
operations, so broadcast-mode copies of a normalizer stay bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import bandit
from .bandit import WmrState
from .sampling import activation_threshold, pick_proportional, poisson_counts, resolve_rates

SERVER = -1
MODES = ("dog-broadcast", "lazydog-star", "lazydog-star-no-rerun", "oddog")


class ModelViolation(RuntimeError):
    """A message was sent that the communication model does not allow."""


@dataclass
class MessageStats:
    broadcasts: int = 0
    unicasts: int = 0
    activations: int = 0
    boosted: int = 0
    history: list = field(default_factory=list)  # per round: (broadcasts, unicasts, activations, boosted)
    _mark: tuple = (0, 0, 0, 0)

    @property
    def messages(self) -> int:
        return self.broadcasts + self.unicasts

    def totals(self) -> tuple:
        return (self.broadcasts, self.unicasts, self.activations, self.boosted)

    def begin_round(self):
        self._mark = self.totals()

    def end_round(self) -> tuple:
        row = tuple(a - b for a, b in zip(self.totals(), self._mark))
        self.history.append(row)
        self._mark = self.totals()
        return row


@dataclass
class SensorNode:
    """Snapshot of one sensor's local state (linear scale)."""

    id: int
    weights: np.ndarray
    normalizers: np.ndarray
    selected: list
    cost: float = 0.0
    wmr: list | None = None


@dataclass
class StageOutcome:
    selected: int | None
    gain: float = 0.0
    messages: int = 0
    activations: int = 0
    boosted: int = 0
    reruns: int = 0


class Network:
    def __init__(self, n: int, stages: int, *, alpha: float, gamma: float, eta: float,
                 rng: np.random.Generator, n_factor: float = 1.0, trace: bool = False):
        if n < 1 or stages < 1:
            raise ValueError("need at least one sensor and one stage")
        if not alpha > 0 or not 0 < gamma <= 1 or not eta > 0 or not n_factor > 0:
            raise ValueError("alpha, eta, n_factor must be positive and gamma in (0, 1]")
        self.n = n
        self.stages = stages
        self.alpha = alpha
        self.gamma = gamma
        self.eta = eta
        self.rng = rng
        self.n_est = n_factor * n  # every sensor's belief about |V|
        self.stats = MessageStats()
        self.trace = [] if trace else None
        self.t = 0
        self.stage = 0
        self.logw = np.zeros((n, stages))

    # -- bookkeeping -------------------------------------------------------
    def _log(self, kind: str, src, dst):
        if self.trace is not None:
            self.trace.append((self.t, self.stage, kind, src, dst))

    def begin_round(self):
        self.t += 1
        self.stats.begin_round()

    def end_round(self) -> tuple:
        return self.stats.end_round()

    def _rho(self, logw, logz):
        return (1.0 - self.gamma) * np.exp(logw - logz) + self.gamma / self.n_est

    def _raise_weight(self, v: int, i: int, x: float) -> float:
        """w <- w exp(x); returns log of the increment Delta (or -inf)."""
        old = self.logw[v, i]
        self.logw[v, i] = old + x
        return old + math.log(math.expm1(x)) if x > 0 else -math.inf

    def broadcast(self, kind: str, src: int):
        raise ModelViolation(f"{type(self).__name__} cannot broadcast")

    def unicast(self, kind: str, src: int, dst: int):
        raise ModelViolation(f"{type(self).__name__} cannot unicast")


class BroadcastNetwork(Network):
    """Every sensor hears every broadcast at unit cost; no base station."""

    def __init__(self, n, stages, **kw):
        super().__init__(n, stages, **kw)
        self.logz = np.full((n, stages), math.log(n))  # row v: node v's copies
        self.view = np.zeros((n, n), dtype=bool)        # row v: node v's S_{v,t}

    def begin_round(self):
        super().begin_round()
        self.view[:] = False

    def broadcast(self, kind, src):
        self.stats.broadcasts += 1
        self._log(kind, src, "*")

    def node(self, v: int) -> SensorNode:
        return SensorNode(v, np.exp(self.logw[v]), np.exp(self.logz[v]),
                          np.flatnonzero(self.view[v]).tolist())

    def selected(self) -> list:
        return np.flatnonzero(self.view[0]).tolist()

    def run_stage(self, i: int, f) -> StageOutcome:
        self.stage = i
        out = StageOutcome(None)
        start = self.stats.messages
        rates = self.alpha * self._rho(self.logw[:, i], self.logz[:, i])
        while True:
            r = self.rng.random(self.n)
            x = poisson_counts(rates, r)
            active = np.flatnonzero(x)
            for v in active:
                self.broadcast("sampled", int(v))
            out.activations += active.size
            if active.size:
                break
            out.reruns += 1  # timeout: resample on the common clock
        self.stats.activations += out.activations
        coordinator = int(active[0])
        v = pick_proportional(active, x[active], self.rng)
        self.broadcast("select", coordinator)
        local = np.flatnonzero(self.view[v]).tolist()
        gain = f.marginal_gain(local, v)
        p = float(rates[v]) / self.alpha
        log_delta = self._raise_weight(v, i, self.eta * gain / p)
        self.broadcast("weight-update", v)
        # every node folds the same Delta into its own copy
        if log_delta > -math.inf:
            self.logz[:, i] = np.logaddexp(self.logz[:, i], log_delta)
        self.view[:, v] = True
        out.selected, out.gain = v, gain
        out.messages = self.stats.messages - start
        return out


class StarNetwork(Network):
    """Sensors talk only to the base station, which holds one normalizer per stage."""

    def __init__(self, n, stages, *, rerun: bool = True, costs=None, wmr_eta: float = 0.1,
                 thresholds=None, fixed_threshold: float | None = None, **kw):
        super().__init__(n, stages, **kw)
        self.rerun = rerun
        self.logz_est = np.full((n, stages), math.log(n))
        self.server_logz = np.full(stages, math.log(n))
        self.server_selected: list = []
        self.costs = np.zeros(n) if costs is None else np.broadcast_to(
            np.asarray(costs, dtype=float), (n,)).copy()
        self.fixed_threshold = fixed_threshold
        grid = bandit.threshold_grid() if thresholds is None else np.asarray(thresholds, float)
        self.wmr = [[WmrState(grid, wmr_eta) for _ in range(stages)] for _ in range(n)]

    def begin_round(self):
        super().begin_round()
        self.server_selected = []

    def unicast(self, kind, src, dst):
        if (src == SERVER) == (dst == SERVER):
            raise ModelViolation(f"star network message must involve the server ({src} -> {dst})")
        self.stats.unicasts += 1
        self._log(kind, "server" if src == SERVER else src, "server" if dst == SERVER else dst)

    def server_footprint(self) -> int:
        """Floats the base station keeps between rounds."""
        return int(self.server_logz.size)

    def node(self, v: int) -> SensorNode:
        return SensorNode(v, np.exp(self.logw[v]), np.exp(self.logz_est[v]),
                          list(self.server_selected), float(self.costs[v]), self.wmr[v])

    def selected(self) -> list:
        return sorted(set(self.server_selected))

    def _trigger_rerun(self):
        for v in range(self.n):
            self.unicast("rerun", SERVER, v)

    def _serve(self, i, active, r, f, boosted_pick=None):
        """Server side of one attempt. Returns (selected, gain)."""
        true_rates = self.alpha * self._rho(self.logw[active, i], self.server_logz[i])
        if boosted_pick is not None:
            sel, p_used = boosted_pick, 1.0
        else:
            sel, _ = resolve_rates(active, true_rates, r[active], self.rng)
            p_used = float(true_rates[np.searchsorted(active, sel)]) / self.alpha if sel is not None else 0.0
        gain = 0.0
        if sel is not None:
            gain = f.marginal_gain(self.server_selected, sel)
            log_delta = self._raise_weight(sel, i, self.eta * gain / p_used)
            if log_delta > -math.inf:
                self.server_logz[i] = np.logaddexp(self.server_logz[i], log_delta)
            self.server_selected.append(sel)
        for v in active:
            self.unicast("update", SERVER, int(v))
        self.logz_est[active, i] = self.server_logz[i]
        return sel, gain

    def run_stage(self, i: int, f, observe: bool = False) -> StageOutcome:
        self.stage = i
        out = StageOutcome(None)
        start = self.stats.messages
        gains = f.gains(self.server_selected) if observe else None
        boosted = np.zeros(self.n, dtype=bool)
        if observe:
            for v in range(self.n):
                tau = self._threshold(v, i)
                boosted[v] = gains[v] >= tau
        ever = np.zeros(self.n, dtype=bool)
        base_prob = None
        while True:
            rho_est = self._rho(self.logw[:, i], self.logz_est[:, i])
            if base_prob is None:
                base_prob = np.minimum(self.alpha * rho_est, 1.0)
            r = self.rng.random(self.n)
            lazy = r >= activation_threshold(self.alpha, rho_est)
            act = lazy | boosted
            active = np.flatnonzero(act)
            for v in active:
                self.unicast("report", int(v), SERVER)
            out.activations += active.size
            out.boosted += int(boosted.sum())
            ever |= act
            sel = None
            if active.size:
                pick = None
                fresh = active[~np.isin(active, self.server_selected)]
                if boosted.any() and fresh.size:
                    pick = int(fresh[np.argmax(gains[fresh])])
                sel, out.gain = self._serve(i, active, r, f, pick)
            boosted[:] = False  # boosting is decided once per stage
            if sel is not None or not self.rerun:
                break
            self._trigger_rerun()
            out.reruns += 1
        if observe and self.fixed_threshold is None:
            self._play_threshold_game(i, gains, ever, base_prob)
        self.stats.activations += out.activations
        self.stats.boosted += out.boosted
        out.selected = sel
        out.messages = self.stats.messages - start
        return out

    def _threshold(self, v, i) -> float:
        if self.fixed_threshold is not None:
            return self.fixed_threshold
        state = self.wmr[v][i]
        bandit.wmr_select_threshold(state, self.rng)
        return state.threshold

    def _play_threshold_game(self, i, gains, activated, base_prob):
        ids = np.flatnonzero(activated)
        if ids.size == 0:
            return
        g = gains[ids]
        order = np.argsort(-g, kind="stable")
        best, second = g[order[0]], (g[order[1]] if ids.size > 1 else 0.0)
        for j, v in enumerate(ids):
            other = second if j == order[0] else best
            state = self.wmr[v][i]
            psi = [bandit.threshold_reward(gains[v], other, self.costs[v], gains[v], tau)
                   for tau in state.thresholds]
            q = bandit.activation_probabilities(state.thresholds, gains[v], base_prob[v])
            bandit.wmr_update(state, psi, q, did_activate=True)


def run_stage(network: Network, stage: int, f, mode: str) -> StageOutcome:
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "dog-broadcast":
        if not isinstance(network, BroadcastNetwork):
            raise ModelViolation("dog-broadcast needs a broadcast network")
        return network.run_stage(stage, f)
    if not isinstance(network, StarNetwork):
        raise ModelViolation(f"{mode} needs a star network")
    network.rerun = mode != "lazydog-star-no-rerun"
    return network.run_stage(stage, f, observe=(mode == "oddog"))
