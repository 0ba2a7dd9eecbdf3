"""Invariant suite behind ``dogsim verify``.

Each check returns (ok, detail). Budgets are small enough that the whole
suite finishes in well under a minute; ``quick`` shrinks them further.
"""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import replace

import numpy as np

from . import bandit, bench, sampling
from .algorithms import GREEDY_FACTOR, RunConfig, brute_force_opt, offline_greedy, oddog_run, run
from .experiment import benchmark, metrics_rows, read_csv, write_csv
from .netsim import ModelViolation, StarNetwork, SERVER
from .objectives import (CoverageObjective, FAMILIES, FunctionObjective, GaussianEmseObjective,
                         check_monotone_submodular)

CHECKS = []


def check(module: str):
    def deco(fn):
        CHECKS.append((module, fn.__name__, fn))
        return fn
    return deco


def _toy_coverage():
    return CoverageObjective({c: 1.0 for c in (1, 2, 3, 4)}, [{1, 2}, {2, 3}, {3, 4}])


# -- objectives --------------------------------------------------------------

@check("objectives")
def coverage_example(seed, quick):
    f = _toy_coverage()
    ok = f.evaluate([0, 2]) == 1.0 and f.marginal_gain([0], 1) == 0.25 and f.evaluate([]) == 0.0
    return ok, "coverage {A,C}=1, gain(B|A)=0.25"


@check("objectives")
def emse_closed_form(seed, quick):
    f = GaussianEmseObjective(np.array([[1.0, 0.8], [0.8, 1.0]]))
    val = f.evaluate([0])
    return abs(val - 0.82) < 1e-9, f"2x2 rho=0.8 -> {val:.12f}"


@check("objectives")
def families_submodular(seed, quick):
    bad = []
    for name, make in FAMILIES.items():
        for s in range(2 if quick else 5):
            rep = check_monotone_submodular(make(8, seed + s))
            if not (rep.is_monotone and rep.is_submodular):
                bad.append((name, seed + s, rep.violation))
    return not bad, f"violations: {bad}" if bad else "all families monotone submodular at n=8"


@check("objectives")
def supermodular_detected(seed, quick):
    rep = check_monotone_submodular(FunctionObjective(3, lambda s: len(s) ** 2 / 9))
    return not rep.is_submodular and rep.violation is not None, "|S|^2 flagged"


# -- bandit ------------------------------------------------------------------

@check("bandit")
def exp3_formula(seed, quick):
    p = bandit.exp3_probabilities(bandit.Exp3State(np.array([1.0, 3.0]), 0.1, 0.1))
    st = bandit.Exp3State(np.array([1.0, 1.0]), 0.1, 0.1)
    bandit.exp3_update(st, 0, 1.0, 0.5)
    ok = np.allclose(p, [0.275, 0.725], atol=1e-12) and abs(st.weights[0] - math.exp(0.2)) < 1e-12
    return ok, f"p={p}, w'={st.weights[0]:.9f}"


@check("bandit")
def exp3_sampling_law(seed, quick):
    rng = np.random.default_rng(seed)
    st = bandit.Exp3State(np.array([1.0, 3.0]), 0.1, 0.1)
    m = 20_000 if quick else 100_000
    hits = sum(bandit.exp3_sample(st, rng) == 0 for _ in range(m))
    band = bench.proportion_band(hits, m, 0.275)
    return band.contains(0.275), f"arm 0 freq {band.mean:.4f} vs 0.275"


@check("bandit")
def wmr_update_formula(seed, quick):
    st = bandit.WmrState(bandit.threshold_grid(2), eta=1.0)
    bandit.wmr_update(st, [1.0, -1.0], [1.0, 1.0])
    ratio = st.weights[1] / st.weights[0]
    return abs(ratio - math.exp(-2)) < 1e-12, f"weight ratio {ratio:.6g}"


# -- sampling ----------------------------------------------------------------

@check("sampling")
def poisson_inversion(seed, quick):
    ok = sampling.poisson_inverse_cdf(1.0, 0.3) == 0 and sampling.poisson_inverse_cdf(1.0, 0.5) == 1
    return ok, "Poisson(1): r=0.3 -> 0, r=0.5 -> 1"


@check("sampling")
def pms_law(seed, quick):
    rng = np.random.default_rng(seed)
    p = bench.random_simplex(8, rng)
    m = 40_000 if quick else 200_000
    st = bench.run_protocol("pms", p, m, rng)
    law, none = bench.theory("pms", p)
    ok = bench.proportion_band(st.none, m, none).contains(none)
    ok &= all(bench.proportion_band(st.selected[v], m, law[v]).contains(law[v]) for v in range(8))
    ok &= bench.mean_band(st.activations).below(1.0)
    return ok, f"P(none)={st.none / m:.4f} vs {none:.4f}"


@check("sampling")
def lazy_threshold(seed, quick):
    th = sampling.activation_threshold(1.0, sampling.rho(2.0, 10.0, 0.1, 20))
    return abs(th - 0.815) < 1e-12, f"threshold {th}"


# -- netsim ------------------------------------------------------------------

@check("netsim")
def star_rejects_peer_messages(seed, quick):
    net = StarNetwork(3, 1, alpha=1.0, gamma=0.1, eta=0.1, rng=np.random.default_rng(seed))
    try:
        net.unicast("x", 0, 1)
    except ModelViolation:
        pass
    else:
        return False, "sensor-to-sensor message accepted"
    try:
        net.broadcast("x", SERVER)
    except ModelViolation:
        return True, "peer unicast and broadcast refused"
    return False, "broadcast accepted"


@check("netsim")
def broadcast_coherence(seed, quick):
    f = FAMILIES["coverage"](12, seed)
    res = run(RunConfig(n=12, k=3, T=200, seed=seed), f)
    z = res.network.logz
    ok = bool(np.all(z == z[0]))
    ok &= all(rec.messages == rec.activations + 2 * 3 for rec in res.records)
    return ok, "normalizer copies bit-identical, messages = activations + 2k"


@check("netsim")
def star_estimates_lower_bound(seed, quick):
    f = FAMILIES["detection"](12, seed)
    res = run(RunConfig(n=12, k=2, T=300, seed=seed, mode="lazydog-star"), f)
    net = res.network
    ok = bool(np.all(net.logz_est <= net.server_logz[None, :]))
    return ok, "every sensor's normalizer estimate <= server normalizer"


# -- algorithms --------------------------------------------------------------

@check("algorithms")
def greedy_guarantee(seed, quick):
    rng = np.random.default_rng(seed)
    worst = math.inf
    for j in range(20 if quick else 60):
        fam = ("coverage", "detection")[j % 2]
        n, k = int(rng.integers(3, 11)), int(rng.integers(1, 4))
        f = FAMILIES[fam](n, int(rng.integers(1 << 30)))
        g = f.evaluate(offline_greedy(f, k))
        opt = brute_force_opt(f, k)[1]
        worst = min(worst, g - GREEDY_FACTOR * opt)
    return worst >= -1e-9, f"min f(greedy) - (1-1/e) OPT = {worst:.4g}"


@check("algorithms")
def oddog_zero_threshold_is_greedy(seed, quick):
    f = FAMILIES["coverage"](15, seed)
    greedy = tuple(sorted(offline_greedy(f, 3)))
    res = oddog_run(RunConfig(n=15, k=3, T=100, seed=seed, fixed_threshold=0.0), f)
    bad = [r.t for r in res.records if r.selected != greedy]
    return not bad, f"rounds differing from greedy: {bad[:5]}"


# -- harness -----------------------------------------------------------------

@check("harness")
def csv_round_trip_and_determinism(seed, quick):
    f = FAMILIES["coverage"](10, seed)
    cfg = RunConfig(n=10, k=2, T=50, seed=seed)
    bench_vals = benchmark(f, 2, 50)
    with tempfile.TemporaryDirectory() as d:
        paths = [os.path.join(d, f"{j}.csv") for j in range(2)]
        for path in paths:
            rows = metrics_rows(0, run(replace(cfg), f).records, bench_vals)
            write_csv(rows, path)
        blobs = [open(p, "rb").read() for p in paths]
        back = read_csv(paths[0])
    return blobs[0] == blobs[1] and back == rows, "byte-identical reruns, exact CSV round trip"


def run_all(seed: int = 0, quick: bool = False, out=print) -> bool:
    all_ok = True
    for module, name, fn in CHECKS:
        try:
            ok, detail = fn(seed, quick)
        except Exception as exc:  # a crash is a failure, not an abort
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        all_ok &= bool(ok)
        out(f"[{'PASS' if ok else 'FAIL'}] {module}.{name}: {detail}")
    out("verify: all invariants hold" if all_ok else "verify: FAILURES above")
    return all_ok
