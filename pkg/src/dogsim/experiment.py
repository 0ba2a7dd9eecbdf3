"""Trial driver and CSV metrics output."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from .algorithms import GREEDY_FACTOR, RunConfig, brute_force_opt, cumulative_objective
from .algorithms import BRUTE_FORCE_MAX_N, offline_greedy, run

CSV_HEADER = ("trial", "round", "avg_reward", "greedy_ratio", "messages_cum",
              "activations_cum", "regret_avg")


@dataclass(frozen=True)
class MetricsRow:
    trial: int
    round: int
    avg_reward: float
    greedy_ratio: float
    messages_cum: int
    activations_cum: int
    regret_avg: float


@dataclass
class Benchmark:
    """Per-round values of the offline comparators over the whole horizon."""

    greedy: float
    best: float
    proxy: bool


def benchmark(sequence, k: int, T: int) -> Benchmark:
    avg = cumulative_objective(sequence, T)
    greedy = avg.evaluate(offline_greedy(avg, k))
    if avg.n <= BRUTE_FORCE_MAX_N:
        return Benchmark(greedy, brute_force_opt(avg, k)[1], False)
    return Benchmark(greedy, greedy, True)


def metrics_rows(trial: int, records, bench: Benchmark) -> list[MetricsRow]:
    rows = []
    msgs = acts = 0
    for rec in records:
        msgs += rec.messages
        acts += rec.activations
        ratio = rec.avg_reward / bench.greedy if bench.greedy > 0 else 0.0
        rows.append(MetricsRow(trial, rec.t, rec.avg_reward, ratio, msgs, acts,
                               GREEDY_FACTOR * bench.best - rec.avg_reward))
    return rows


def _fmt(x) -> str:
    if isinstance(x, int):
        return str(x)
    if not math.isfinite(x):
        raise ValueError(f"non-finite metric {x!r}")
    return format(x, ".17g")


def write_csv(rows, path: str) -> None:
    rows = list(rows)
    if not rows:
        raise ValueError("refusing to write an empty metrics file")
    lines = [",".join(CSV_HEADER)]
    for r in rows:
        lines.append(",".join(_fmt(getattr(r, c)) for c in CSV_HEADER))
    data = "\n".join(lines) + "\n"
    try:
        with open(path, "w", encoding="ascii", newline="") as fh:
            fh.write(data)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write metrics to {path}: {exc.strerror}") from None


def read_csv(path: str) -> list[MetricsRow]:
    with open(path, encoding="ascii") as fh:
        header = fh.readline().rstrip("\n").split(",")
        if tuple(header) != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        rows = []
        for line in fh:
            f = line.rstrip("\n").split(",")
            rows.append(MetricsRow(int(f[0]), int(f[1]), float(f[2]), float(f[3]),
                                   int(f[4]), int(f[5]), float(f[6])))
    return rows


def _trial(args):
    cfg, sequence, trial = args
    res = run(replace(cfg, seed=cfg.seed + trial), sequence)
    trace = res.network.trace
    return trial, res.records, trace


def run_trials(cfg: RunConfig, sequence, trials: int, workers: int = 1):
    """Run independent seeded trials; results come back in trial order."""
    jobs = [(cfg, sequence, j) for j in range(trials)]
    if workers <= 1 or trials == 1:
        results = [_trial(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_trial, jobs))
    return sorted(results, key=lambda r: r[0])


def write_trace(results, path: str) -> None:
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write("trial,round,stage,type,src,dst\n")
        for trial, _, trace in results:
            for t, stage, kind, src, dst in trace or ():
                fh.write(f"{trial},{t},{stage},{kind},{src},{dst}\n")
