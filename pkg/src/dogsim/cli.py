"""Command line entry point: ``dogsim <subcommand> [flags]``."""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import bench
from .algorithms import brute_force_opt, offline_greedy, BRUTE_FORCE_MAX_N
from .experiment import benchmark, metrics_rows, run_trials, write_csv, write_trace
from .objectives import FAMILIES, ObjectiveError
from .scenario import Scenario, ScenarioError, ObjectiveSpec, default_seed, load_scenario
from .scenario import with_overrides
from .algorithms import RunConfig

RUN_MODES = {"dog-run": "dog-broadcast", "lazydog-run": "lazydog-star", "oddog-run": "oddog"}


def _common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=None, help="RNG seed (default: $DOGSIM_SEED or 0)")
    p.add_argument("--scenario", help="scenario file ([objective] / [run] / [experiment])")
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--family", choices=sorted(FAMILIES))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dogsim", description="Distributed online greedy sensor selection simulator")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("sample-bench", help="Monte Carlo of the single-sensor sampling protocols")
    _common(p)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--trials", type=int, default=200_000)
    p.add_argument("--N", type=int, default=100, help="urn size for the improved protocol")

    p = sub.add_parser("dexp3-bench", help="distribution equivalence and activation bounds")
    _common(p)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--trials", type=int, default=200_000)
    p.add_argument("--rounds", type=int, default=20_000)
    p.add_argument("--gamma", type=float, default=0.1)

    for name in RUN_MODES:
        p = sub.add_parser(name, help=f"run {RUN_MODES[name]} and write per-round CSV metrics")
        _common(p)
        p.add_argument("--rounds", type=int, dest="T")
        p.add_argument("--trials", type=int)
        p.add_argument("--alpha", type=float)
        p.add_argument("--gamma", type=float)
        p.add_argument("--eta", type=float)
        p.add_argument("--output", "-o")
        p.add_argument("--workers", type=int)
        p.add_argument("--trace", help="write a message trace CSV here")
        if name == "lazydog-run":
            p.add_argument("--no-rerun", action="store_true")
        if name == "oddog-run":
            p.add_argument("--cost", type=float, help="activation cost c_v for every sensor")
            p.add_argument("--threshold", type=float, help="fix every threshold instead of learning")

    p = sub.add_parser("greedy", help="print offline greedy and brute-force selections")
    _common(p)

    p = sub.add_parser("verify", help="run the invariant suite of every module")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--quick", action="store_true", help="smaller Monte Carlo budgets")
    return ap


def _scenario(args) -> Scenario:
    seed = args.seed if args.seed is not None else default_seed()
    if args.scenario:
        sc = load_scenario(args.scenario)
        if args.seed is not None:
            sc = with_overrides(sc, seed=seed)
    else:
        ospec = ObjectiveSpec(seed=seed)
        if args.family is None:
            ospec.params = {"radius": (0.05, 0.3)}
        sc = Scenario(ospec, RunConfig(n=ospec.n, k=min(3, ospec.n), T=1000, seed=seed))
    kw = {"n": args.n, "k": args.k, "family": args.family}
    for key in ("T", "alpha", "gamma", "eta", "trials", "output", "workers", "trace"):
        kw[key] = getattr(args, key, None)
    if getattr(args, "cost", None) is not None:
        kw["costs"] = args.cost
    if getattr(args, "threshold", None) is not None:
        kw["fixed_threshold"] = args.threshold
    return with_overrides(sc, **kw)


def cmd_sample_bench(args) -> int:
    rng = np.random.default_rng(args.seed if args.seed is not None else default_seed())
    n = args.n or 3
    p = bench.random_simplex(n, rng)
    print(f"n={n} alpha={args.alpha} trials={args.trials}")
    print(f"{'protocol':<10} {'sensor':>6} {'p':>9} {'empirical':>10} {'theory':>9}")
    for name in ("simple", "improved", "pms", "pms-rerun"):
        st = bench.run_protocol(name, p, args.trials, rng, alpha=args.alpha, N=args.N)
        law, none = bench.theory(name, p, args.alpha)
        for v in range(n):
            th = f"{law[v]:9.5f}" if law is not None else f"{'-':>9}"
            print(f"{name:<10} {v:>6} {p[v]:9.5f} {st.selected[v] / args.trials:10.5f} {th}")
        th = f"{none:9.5f}" if none is not None else f"{'-':>9}"
        print(f"{name:<10} {'none':>6} {'':>9} {st.none / args.trials:10.5f} {th}")
        print(f"{name:<10} {'acts':>6} {'':>9} {st.activations.mean():10.5f}")
    return 0


def cmd_dexp3_bench(args) -> int:
    seed = args.seed if args.seed is not None else default_seed()
    n = args.n or 16
    eq = bench.distribution_equivalence(n=n, trials=args.trials, seed=seed,
                                        gamma=args.gamma, alpha=args.alpha)
    ok = True
    for path in ("broadcast", "star"):
        pv = eq[f"{path}_pvalue"]
        ok &= pv >= 1e-3
        print(f"equivalence {path:<9} chi2 p-value {pv:.4f} {'ok' if pv >= 1e-3 else 'FAIL'}")
    n_run = args.n or 32
    for alpha, rerun in ((args.alpha, False), (math.log(n_run), True)):
        band, _ = bench.dexp3_activation_run(n=n_run, alpha=alpha, rounds=args.rounds, seed=seed,
                                             gamma=args.gamma, rerun=rerun)
        bound = alpha + math.e - 1
        good = band.below(bound)
        ok &= good
        print(f"activations alpha={alpha:.4f} rerun={rerun}: {band.mean:.4f} +- {band.sigma:.4f}"
              f" (bound {bound:.4f}) {'ok' if good else 'FAIL'}")
    return 0 if ok else 1


def cmd_run(args) -> int:
    sc = _scenario(args)
    mode = RUN_MODES[args.cmd]
    if getattr(args, "no_rerun", False):
        mode = "lazydog-star-no-rerun"
    cfg = sc.run.__class__(**{**sc.run.__dict__, "mode": mode, "trace": bool(sc.trace)})
    seq = sc.objective.build()
    results = run_trials(cfg, seq, sc.trials, sc.workers)
    bench_vals = benchmark(seq, cfg.k, cfg.T)
    rows = []
    for trial, records, _ in results:
        rows.extend(metrics_rows(trial, records, bench_vals))
    output = sc.output or f"{args.cmd.removesuffix('-run')}.csv"
    write_csv(rows, output)
    if sc.trace:
        write_trace(results, sc.trace)
    last = [r for r in rows if r.round == cfg.T]
    ratio = sum(r.greedy_ratio for r in last) / len(last)
    msgs = sum(r.messages_cum for r in last) / len(last) / cfg.T
    print(f"{mode}: n={cfg.n} k={cfg.k} T={cfg.T} trials={sc.trials} -> {output}")
    print(f"final avg reward / greedy = {ratio:.4f}; messages per round = {msgs:.3f}"
          f"{' (greedy proxy benchmark)' if bench_vals.proxy else ''}")
    return 0


def cmd_greedy(args) -> int:
    sc = _scenario(args)
    f = sc.objective.build().at(1)
    k = sc.run.k
    g = offline_greedy(f, k)
    print(f"family={sc.objective.family} n={f.n} k={k} seed={sc.objective.seed}")
    print(f"greedy      {g} value {f.evaluate(g):.10f}")
    if f.n <= BRUTE_FORCE_MAX_N:
        best, val = brute_force_opt(f, k)
        print(f"brute-force {best} value {val:.10f}")
    else:
        print(f"brute-force skipped (n > {BRUTE_FORCE_MAX_N})")
    return 0


def cmd_verify(args) -> int:
    from .verify import run_all

    seed = args.seed if args.seed is not None else default_seed()
    return 0 if run_all(seed=seed, quick=args.quick) else 1


COMMANDS = {"sample-bench": cmd_sample_bench, "dexp3-bench": cmd_dexp3_bench,
            "greedy": cmd_greedy, "verify": cmd_verify,
            **{name: cmd_run for name in RUN_MODES}}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.cmd](args)
    except (ScenarioError, ObjectiveError, ValueError, OSError) as exc:
        print(f"dogsim: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
