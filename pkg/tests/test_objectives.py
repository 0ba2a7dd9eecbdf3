import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dogsim.objectives import (
    CoverageObjective, DetectionObjective, FAMILIES, FunctionObjective, GaussianEmseObjective,
    NotPositiveDefiniteError, ObjectiveError, ObjectiveSequence, check_monotone_submodular,
    emse_reduction, random_coverage, random_detection,
)


@pytest.fixture
def toy():
    # A covers {1,2}, B covers {2,3}, C covers {3,4}
    return CoverageObjective({1: 1.0, 2: 1.0, 3: 1.0, 4: 1.0}, [{1, 2}, {2, 3}, {3, 4}])


A, B, C = 0, 1, 2


def test_coverage_hand_examples(toy):
    assert toy.evaluate([A, C]) == 1.0
    assert toy.evaluate([]) == 0.0
    assert toy.marginal_gain([A], B) == 0.25
    assert toy.marginal_gain([A], A) == 0.0


def test_unknown_sensor_rejected(toy):
    with pytest.raises(ObjectiveError):
        toy.evaluate([3])
    with pytest.raises(ObjectiveError):
        toy.marginal_gain([], -1)


def test_gains_vector_matches_marginals(toy):
    for S in ([], [A], [A, B]):
        np.testing.assert_allclose(toy.gains(S), [toy.marginal_gain(S, v) for v in range(3)])


def test_emse_identity():
    f = GaussianEmseObjective(np.eye(4))
    assert f.evaluate([1, 3]) == pytest.approx(0.5, abs=1e-8)
    assert f.evaluate([2]) == pytest.approx(0.25, abs=1e-8)
    assert f.marginal_gain([0, 1], 3) == pytest.approx(0.25, abs=1e-8)
    assert f.evaluate(range(4)) == 1.0


def test_emse_two_by_two_schur():
    # posterior variance of x1 given x0 is 1 - 0.8^2, so (2 - 0.36) / 2 removed
    cov = np.array([[1.0, 0.8], [0.8, 1.0]])
    assert emse_reduction(cov, [0]) == pytest.approx(0.82, abs=1e-8)


def test_emse_rejects_non_spd():
    with pytest.raises(NotPositiveDefiniteError, match="eigenvalue"):
        GaussianEmseObjective(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(NotPositiveDefiniteError, match="symmetric"):
        GaussianEmseObjective(np.array([[1.0, 0.1], [0.0, 1.0]]))


def test_checker_on_toy(toy):
    rep = check_monotone_submodular(toy)
    assert rep.is_monotone and rep.is_submodular


def test_checker_finds_supermodular_witness():
    f = FunctionObjective(3, lambda s: len(s) ** 2 / 9)
    rep = check_monotone_submodular(f)
    assert rep.is_monotone and not rep.is_submodular
    w = rep.violation
    assert set(w["A"]) <= set(w["B"]) and w["s"] not in w["B"]
    gain_a = f.marginal_gain(w["A"], w["s"])
    gain_b = f.marginal_gain(w["B"], w["s"])
    assert gain_a < gain_b


def test_checker_budget_saturation():
    rep = check_monotone_submodular(FunctionObjective(5, lambda s: min(len(s), 2) / 2))
    assert rep.is_monotone and rep.is_submodular


def test_checker_refuses_large_universe():
    with pytest.raises(ObjectiveError, match="refused"):
        check_monotone_submodular(random_coverage(13, 0), max_n=12)


@pytest.mark.parametrize("family", sorted(FAMILIES))
@pytest.mark.parametrize("seed", range(4))
def test_families_exhaustively_submodular(family, seed):
    rep = check_monotone_submodular(FAMILIES[family](10, seed))
    assert rep.is_monotone and rep.is_submodular, rep.violation


@pytest.mark.parametrize("family", sorted(FAMILIES))
def test_range_and_permutation_invariance(family):
    f = FAMILIES[family](9, 7)
    rng = np.random.default_rng(1)
    for _ in range(50):
        S = rng.choice(9, size=rng.integers(0, 10), replace=False).tolist()
        val = f.evaluate(S)
        assert 0.0 <= val <= 1.0 + 1e-12
        assert f.evaluate(S[::-1]) == val
    if family != "coverage":  # coverage normalizes by all cells, not by f(V)
        assert f.evaluate(range(9)) == pytest.approx(1.0)


def test_random_triples_diminishing_returns():
    # A subset of B, s outside B: gain on A >= gain on B
    rng = np.random.default_rng(5)
    for j in range(1000):
        f = FAMILIES[("coverage", "detection", "emse")[j % 3]](12, j % 17)
        B = rng.choice(12, size=rng.integers(1, 11), replace=False)
        A = B[: rng.integers(0, B.size + 1)]
        s = int(rng.choice(np.setdiff1d(np.arange(12), B)))
        assert f.marginal_gain(A.tolist(), s) >= f.marginal_gain(B.tolist(), s) - 1e-9


def test_detection_closed_form():
    # two sensors detect one target with probabilities 0.5 and 0.5
    f = DetectionObjective([[0.5, 0.5]])
    assert f.evaluate([0]) == pytest.approx(0.5 / 0.75)
    assert f.evaluate([0, 1]) == pytest.approx(1.0)


def test_detection_realization_is_coverage():
    f = random_detection(6, seed=2)
    g = f.realize(np.random.default_rng(0))
    assert isinstance(g, CoverageObjective)
    assert check_monotone_submodular(g).is_submodular


def test_sequence_modes_are_deterministic():
    fs = [random_coverage(5, s) for s in range(3)]
    cyc = ObjectiveSequence(fs, mode="cyclic")
    assert [cyc.at(t) for t in (1, 2, 3, 4)] == [fs[0], fs[1], fs[2], fs[0]]
    r1 = ObjectiveSequence(fs, mode="random", seed=9)
    r2 = ObjectiveSequence(fs, mode="random", seed=9)
    assert [r1.at(t) for t in range(1, 50)] == [r2.at(t) for t in range(1, 50)]
    with pytest.raises(ObjectiveError):
        ObjectiveSequence([random_coverage(5, 0), random_coverage(6, 0)])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.lists(st.integers(0, 7), max_size=8))
def test_monotone_under_random_additions(seed, extra):
    f = random_coverage(8, seed, radius=(0.05, 0.4))
    S = []
    prev = 0.0
    for v in extra:
        S.append(v)
        val = f.evaluate(S)
        assert val >= prev - 1e-12
        prev = val
