import math

import numpy as np
import pytest

from dogsim.algorithms import RunConfig, dog_run, lazydog_run
from dogsim.bench import mean_band
from dogsim.netsim import (BroadcastNetwork, MessageStats, ModelViolation, SERVER, StarNetwork,
                           run_stage)
from dogsim.objectives import CoverageObjective, random_coverage, random_detection


class Scripted:
    """Random source replaying fixed uniform vectors; integer draws return 0."""

    def __init__(self, *draws):
        self.draws = [np.asarray(d, dtype=float) for d in draws]

    def random(self, size=None):
        return self.draws.pop(0)

    def integers(self, hi):
        return 0


def toy():
    return CoverageObjective({1: 1, 2: 1, 3: 1, 4: 1}, [{1, 2}, {2, 3}, {3, 4}])


def params(rng, **kw):
    return dict(alpha=1.0, gamma=0.1, eta=0.1, rng=rng, **kw)


def test_broadcast_single_activator_costs_three():
    net = BroadcastNetwork(3, 1, **params(Scripted([0.0, 0.99, 0.0]), trace=True))
    net.begin_round()
    out = net.run_stage(0, toy())
    assert out.selected == 1 and out.activations == 1
    assert net.stats.broadcasts == 3 and net.stats.unicasts == 0
    assert [m[2] for m in net.trace] == ["sampled", "select", "weight-update"]
    assert out.gain == 0.5


def test_broadcast_rerun_is_free_and_coherent():
    # first attempt: nobody; second: sensors 0 and 2
    net = BroadcastNetwork(3, 1, **params(Scripted([0.0, 0.0, 0.0], [0.99, 0.0, 0.99])))
    net.begin_round()
    out = net.run_stage(0, toy())
    assert out.reruns == 1 and out.activations == 2
    assert net.stats.broadcasts == 4
    assert np.all(net.logz == net.logz[0])


def test_star_no_rerun_silent_stage():
    net = StarNetwork(4, 1, rerun=False, **params(Scripted(np.zeros(4))))
    net.begin_round()
    out = net.run_stage(0, random_coverage(4, 0))
    assert out.selected is None and out.messages == 0 and net.stats.messages == 0


def test_star_rerun_costs_n():
    n = 4
    net = StarNetwork(n, 1, rerun=True, **params(Scripted(np.zeros(n), [0.0, 0.0, 0.999, 0.0]),
                                                 trace=True))
    net.begin_round()
    out = net.run_stage(0, random_coverage(n, 0))
    kinds = [m[2] for m in net.trace]
    assert kinds.count("rerun") == n
    assert out.selected == 2 and out.reruns == 1
    assert out.messages == n + 2  # n reruns, one report, one update


def test_unicast_report_and_reply():
    net = StarNetwork(3, 1, **params(np.random.default_rng(0)))
    net.unicast("report", 0, SERVER)
    assert net.stats.unicasts == 1
    net.unicast("update", SERVER, 0)
    assert net.stats.unicasts == 2


def test_model_violations():
    star = StarNetwork(3, 1, **params(np.random.default_rng(0)))
    bcast = BroadcastNetwork(3, 1, **params(np.random.default_rng(0)))
    with pytest.raises(ModelViolation):
        star.unicast("x", 0, 1)
    with pytest.raises(ModelViolation):
        star.unicast("x", SERVER, SERVER)
    with pytest.raises(ModelViolation):
        star.broadcast("x", 0)
    with pytest.raises(ModelViolation):
        bcast.unicast("x", 0, SERVER)
    with pytest.raises(ModelViolation):
        run_stage(star, 0, toy(), "dog-broadcast")
    with pytest.raises(ModelViolation):
        run_stage(bcast, 0, toy(), "lazydog-star")
    with pytest.raises(ValueError):
        run_stage(bcast, 0, toy(), "gossip")


def test_one_broadcast_is_unit_cost():
    for n in (2, 50):
        net = BroadcastNetwork(n, 1, **params(np.random.default_rng(0)))
        net.broadcast("x", 0)
        assert net.stats.broadcasts == 1


def test_message_stats_history():
    s = MessageStats()
    s.begin_round()
    assert s.end_round() == (0, 0, 0, 0)
    s.broadcasts += 3
    s.activations += 1
    assert s.end_round() == (3, 0, 1, 0)
    assert tuple(map(sum, zip(*s.history))) == s.totals()


def test_broadcast_coherence_every_stage():
    f = random_detection(15, 2)
    seen = []

    def on_round(rec, net):
        seen.append(float(np.ptp(net.logz, axis=0).max()))
        assert rec.messages == rec.activations + 2 * 3
    res = dog_run(RunConfig(n=15, k=3, T=400, seed=1), f, on_round=on_round)
    assert max(seen) == 0.0
    hist = np.array(res.stats.history)
    assert tuple(hist.sum(axis=0)) == res.stats.totals()


def test_dog_messages_per_round_bound():
    k = 3
    res = dog_run(RunConfig(n=20, k=k, T=3000, alpha=1.0, seed=5), random_coverage(20, 5))
    band = mean_band([r.messages for r in res.records])
    assert band.below(k * (math.e / (math.e - 1) + 2))


def test_lazy_estimates_never_exceed_server():
    f = random_coverage(12, 3, radius=(0.05, 0.3))

    def on_round(rec, net):
        assert np.all(net.logz_est <= net.server_logz[None, :])
    lazydog_run(RunConfig(n=12, k=2, T=500, seed=4), f, on_round=on_round)


def test_lazydog_activation_bound():
    n, k = 24, 2
    res = lazydog_run(RunConfig(n=n, k=k, T=3000, alpha=math.log(n), seed=6), random_coverage(n, 6))
    band = mean_band([r.activations for r in res.records])
    assert band.below(k * (math.log(n) + math.e - 1))


def test_star_reports_match_updates():
    res = lazydog_run(RunConfig(n=10, k=2, T=300, seed=2, trace=True), random_coverage(10, 2))
    kinds = [m[2] for m in res.network.trace]
    assert kinds.count("report") == kinds.count("update") == res.stats.activations
    assert res.stats.unicasts == len(kinds)


def test_server_footprint_independent_of_n():
    sizes = {StarNetwork(n, 3, **params(np.random.default_rng(0))).server_footprint()
             for n in (5, 50, 500)}
    assert sizes == {3}


def test_network_rejects_bad_parameters():
    with pytest.raises(ValueError):
        BroadcastNetwork(0, 1, **params(np.random.default_rng(0)))
    with pytest.raises(ValueError):
        BroadcastNetwork(3, 1, alpha=1.0, gamma=1.5, eta=0.1, rng=np.random.default_rng(0))


def test_node_snapshot():
    net = BroadcastNetwork(3, 2, **params(np.random.default_rng(0)))
    node = net.node(1)
    np.testing.assert_array_equal(node.weights, [1.0, 1.0])
    np.testing.assert_allclose(node.normalizers, [3.0, 3.0])
    assert node.selected == []
