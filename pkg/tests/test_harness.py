import math
import warnings
from fractions import Fraction as F

import pytest

from subtest import harness
from subtest.core import EdgeDistribution, RngSeed
from subtest.errors import SkippedWithReason, Unresolved
from subtest.generators import TestInstance, family_instance, triangle_hardness_pair
from subtest.graphs import single_edge, triangle
from subtest.harness import (ExperimentPlan, estimate_rejection, lemma_check, rows_to_csv, run_plan,
                             scaling_fit, threshold_search)
from subtest.testers import PropertySpec, subgraph_sample_budget


@pytest.mark.parametrize("family", ["triangle", "square", "bipartite", "tree", "clique"])
def test_yes_instances_never_reject(family):
    n = 5 if family == "square" else 3
    inst = family_instance(family, n, "yes", RngSeed(1))
    for m in (1, 10, 200):
        est = estimate_rejection(inst, None, m, 200, RngSeed(2).spawn(m))
        assert est.rejections == 0 and est.rate == 0


def test_zero_samples_never_reject():
    _, no = triangle_hardness_pair(3, RngSeed(0))
    assert estimate_rejection(no, None, 0, 100, RngSeed(0)).rate == 0


def test_triangle_budget_reaches_two_thirds():
    _, no = triangle_hardness_pair(5, RngSeed(0))
    m = subgraph_sample_budget(triangle(), no.n, no.certified_distance)
    rate, se = estimate_rejection(no, None, m, 300, RngSeed(0))
    assert rate >= 2 / 3 - 3 * se


def test_estimate_is_deterministic():
    _, no = triangle_hardness_pair(4, RngSeed(0))
    a = estimate_rejection(no, None, 40, 200, RngSeed(5))
    b = estimate_rejection(no, None, 40, 200, RngSeed(5))
    assert a == b
    assert a.std_error == pytest.approx(math.sqrt(a.rate * (1 - a.rate) / 200))


def _single_edge_family(fraction):
    """No-instances whose positive edges carry the given share of mu."""
    def make(n, seed):
        pos = [(1, k) for k in range(2, n + 2)]
        neg = [(2, k) for k in range(3, n + 3)]
        weights = {e: F(fraction) / len(pos) for e in pos}
        weights.update({e: (1 - F(fraction)) / len(neg) for e in neg})
        return TestInstance(n + 3, frozenset(pos), EdgeDistribution(n + 3, weights), "no",
                            F(fraction), PropertySpec.free(single_edge()), {})
    return make


def test_single_edge_threshold_shrinks_with_distance():
    stars = [threshold_search(_single_edge_family(d), 10, trials=400, seed=RngSeed(3)).m_star
             for d in ("1/10", "1/4", "1/2", "1")]
    assert stars == sorted(stars, reverse=True)
    assert stars[-1] == 1


def test_threshold_schedule_invariants():
    res = threshold_search("triangle", 4, trials=300, seed=RngSeed(0))
    v = list(res.visited)
    k = 0
    while k + 1 < len(v) and v[k + 1] == 2 * v[k]:
        k += 1
    assert v[:k + 1] == [2 ** i for i in range(k + 1)]
    assert res.m_star in v and res.estimate.rate >= 2 / 3 + 2 * res.estimate.std_error
    # m_star - 1 was either visited and failed, or lies below the doubling start
    if res.m_star > 1:
        assert res.m_star - 1 in v
    again = threshold_search("triangle", 4, trials=300, seed=RngSeed(0))
    assert again == res


def test_threshold_cap_is_unresolved():
    yes_family = lambda n, seed: family_instance("triangle", n, "yes", seed)
    with pytest.raises(Unresolved):
        threshold_search(yes_family, 2, trials=50, m_cap=16)


def test_triangle_threshold_nondecreasing_in_n():
    stars = [threshold_search("triangle", n, trials=1000, seed=RngSeed(0).spawn(n)).m_star
             for n in range(4, 9)]
    assert all(a <= b for a, b in zip(stars, stars[1:])), stars


def test_scaling_fit_synthetic():
    ns = [4, 8, 16, 32, 64]
    lin = scaling_fit([(n, 7 * n) for n in ns], bootstrap=200)
    assert lin.slope == pytest.approx(1.0, abs=0.01)
    four_thirds = scaling_fit([(n, 3 * n ** (4 / 3)) for n in ns], bootstrap=200)
    assert four_thirds.slope == pytest.approx(4 / 3, abs=0.01)
    assert four_thirds.ci_low <= four_thirds.slope <= four_thirds.ci_high


def test_scaling_fit_excludes_unresolved():
    with pytest.warns(UserWarning):
        fit = scaling_fit([(2, 4), (4, 8), (8, None), (16, 32)], bootstrap=100)
    assert fit.slope == pytest.approx(1.0)
    with pytest.raises(ValueError):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            scaling_fit([(2, 4), (4, None), (8, 16)])


def test_birthday_minus_max_single_column_skips():
    with pytest.raises(SkippedWithReason):
        lemma_check("birthday_minus_max", {"r": 1}, trials=50)


def test_classical_birthday_bound():
    res = lemma_check("classical_birthday", trials=400, seed=0)
    assert res.bound == 0.8 and res.passed
    assert res.frequency >= 0.8 - 3 * res.std_error


def test_sample_number_control_bound():
    res = lemma_check("sample_number_control", trials=1000, seed=0)
    assert res.bound == pytest.approx(0.5) and res.passed


def test_unknown_lemma():
    with pytest.raises(KeyError):
        lemma_check("no_such_lemma")


def test_plan_validation():
    with pytest.raises(ValueError):
        ExperimentPlan("triangle", (2, 3), trials=10)
    plan = ExperimentPlan.from_json({"family": "triangle", "n": [2, 3], "trials": 30})
    assert plan.n_values == (2, 3)


def test_csv_replay_is_byte_identical(monkeypatch):
    plan = ExperimentPlan.from_json({"family": "triangle", "n": [2, 3, 4], "trials": 60, "master_seed": 5})
    monkeypatch.setenv("SUBTEST_THREADS", "1")
    first = rows_to_csv(run_plan(plan))
    second = rows_to_csv(run_plan(plan))
    monkeypatch.setenv("SUBTEST_THREADS", "3")
    parallel = rows_to_csv(run_plan(plan))
    assert first == second == parallel
    lines = first.splitlines()
    assert lines[0] == "schema=1"
    assert lines[1].split(",") == list(harness.CSV_COLUMNS)
    assert lines[-1].startswith("fit,triangle")


def test_budget_and_list_schedules():
    plan = ExperimentPlan.from_json({"family": "bipartite", "n": [1], "sides": ["yes", "no"],
                                     "m_schedule": [1, 5, 20], "trials": 40})
    rows = run_plan(plan)
    assert [r["m"] for r in rows] == [1, 5, 20, 1, 5, 20]
    assert all(r["rejections"] == 0 for r in rows if r["side"] == "yes")
    budget = run_plan(ExperimentPlan.from_json({"family": "bipartite", "n": [1], "m_schedule": "budget",
                                                "trials": 40}))
    row = budget[0]
    assert row["m"] > 0 and row["rejection_rate"] >= 2 / 3 - 3 * row["std_error"]


def _exact_tree_rejection(copies, m):
    """P(both edges of some 2-edge gadget appear in m uniform draws over 2 * copies edges)."""
    N = 2 * copies
    total = F(0)
    for j in range(1, copies + 1):
        hit_all = sum((-1) ** i * math.comb(2 * j, i) * F(N - i, N) ** m for i in range(2 * j + 1))
        total += (-1) ** (j + 1) * math.comb(copies, j) * hit_all
    return float(total)


def test_tree_rejection_matches_exact_probability():
    for copies, m in ((4, 5), (12, 8)):
        inst = family_instance("tree", copies, "no", RngSeed(0))
        est = estimate_rejection(inst, None, m, 3000, RngSeed(1).spawn(copies))
        exact = _exact_tree_rejection(copies, m)
        sigma = math.sqrt(exact * (1 - exact) / 3000)
        assert abs(est.rate - exact) <= 4 * sigma, (copies, m, est.rate, exact)
