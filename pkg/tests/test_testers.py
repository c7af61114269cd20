import itertools
import math
import random

import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from subtest.core import NIL
from subtest.errors import BudgetError, RangeError
from subtest.graphs import path, single_edge, square, triangle
from subtest.oracles import enumerate_violations
from subtest.testers import (LabeledSample, PropertySpec, Verdict, canonical_subgraph_tester,
                             clique_tester, hom_sample_budget, hom_tester, make_tester,
                             subgraph_sample_budget, support_to_labeled_reduction)


def pos(*edges):
    return [LabeledSample(e, 1) for e in edges]


def test_square_copy_rejects():
    v = canonical_subgraph_tester(square(), pos((1, 2), (2, 3), (3, 4), (1, 4)))
    assert v.rejected
    assert {s.edge for s in v.witness} == {(1, 2), (2, 3), (3, 4), (1, 4)}


def test_path_has_no_triangle():
    assert not canonical_subgraph_tester(triangle(), pos((1, 2), (2, 3), (3, 4))).rejected


def test_two_edge_path_pattern():
    P3 = path(2)
    assert not canonical_subgraph_tester(P3, pos((1, 2), (3, 4))).rejected
    v = canonical_subgraph_tester(P3, pos((1, 2), (3, 4), (2, 3)))
    assert v.rejected and len(v.witness) == 2


def test_empty_samples_accept():
    assert not canonical_subgraph_tester(triangle(), []).rejected
    assert not canonical_subgraph_tester(triangle(), [LabeledSample(NIL, 0)]).rejected


def test_negative_samples_are_ignored_by_subgraph_tester():
    samples = [LabeledSample(e, 0) for e in [(1, 2), (2, 3), (1, 3)]]
    assert not canonical_subgraph_tester(triangle(), samples).rejected


def test_hom_tester_examples():
    assert hom_tester(single_edge(), pos((1, 2), (2, 3), (1, 3))).rejected
    assert not hom_tester(single_edge(), pos((1, 2), (2, 3), (3, 4))).rejected
    K4 = list(itertools.combinations(range(1, 5), 2))
    v = hom_tester(triangle(), pos(*K4))
    assert v.rejected
    assert not hom_tester(triangle(), pos(*K4[:-1])).rejected


def test_hom_budget_examples():
    assert hom_sample_budget(10, 2, 0.5) == 18
    assert math.ceil(2 * (2 + 10 * math.log(2))) == 18
    assert hom_sample_budget(1, 2, 1) == 3
    with pytest.raises(RangeError):
        hom_sample_budget(10, 2, 0)
    with pytest.raises(RangeError):
        hom_sample_budget(10, 2, 1.5)


def test_hom_budget_monotone():
    for n, k in itertools.product(range(1, 20), range(2, 6)):
        for eps in (0.1, 0.3, 0.7):
            b = hom_sample_budget(n, k, eps)
            assert hom_sample_budget(n + 1, k, eps) >= b
            assert hom_sample_budget(n, k + 1, eps) >= b
            assert hom_sample_budget(n, k, eps / 2) >= b


def test_clique_tester_examples():
    assert clique_tester([LabeledSample((1, 2), 1), LabeledSample((2, 3), 0),
                          LabeledSample((3, 4), 1)]).rejected
    assert not clique_tester(pos((1, 2), (2, 3), (5, 6))).rejected
    v = clique_tester([LabeledSample((1, 2), 1), LabeledSample((2, 3), 0), LabeledSample((1, 3), 1)])
    assert v.rejected
    assert {(s.edge, s.label) for s in v.witness} == {((1, 2), 1), ((2, 3), 0), ((1, 3), 1)}


def test_subgraph_budget_triangle():
    # 162 * 45^(2/3) = 2049.46..., so the ceiling is 2050
    exact = 162 * 45 ** (2 / 3)
    assert 2049 < exact < 2050
    assert subgraph_sample_budget(triangle(), 10, 1) == 2050


def test_subgraph_budget_single_edge():
    for eps in (1, 0.5, 0.3, 0.01):
        assert subgraph_sample_budget(single_edge(), 50, eps) == math.ceil(18 / eps - 1e-9)


def test_subgraph_budget_tree_constant():
    # star with 2 edges: t * ceil(288 t^4 n^(1/2) / eps)
    assert subgraph_sample_budget(path(2), 16, 1) == 2 * 288 * 16 * 4


def test_subgraph_budget_exponents():
    for H, t in ((triangle(), 3), (square(), 4)):
        lo = subgraph_sample_budget(H, 200, 0.5)
        hi = subgraph_sample_budget(H, 400, 0.5)
        ratio = (400 * 399 / 2) / (200 * 199 / 2)
        expect = math.log(ratio) * (t - 1) / t
        assert abs(math.log(hi / lo) - expect) < 1e-3
    lo = subgraph_sample_budget(path(3), 1000, 0.5)
    hi = subgraph_sample_budget(path(3), 8000, 0.5)
    assert abs(math.log(hi / lo) - math.log(8) * 2 / 3) < 1e-3


def _always(decision):
    return lambda edges: Verdict.reject(set()) if decision else Verdict.accept()


def test_reduction_all_zero_accepts():
    m, eps = 3, 0.5
    need = math.ceil(18 * m / eps)
    samples = [LabeledSample((1, 2), 0)] * need
    assert not support_to_labeled_reduction(_always(True), m, eps, samples).rejected


def test_reduction_threshold_is_at_most_9m():
    m, eps = 3, 0.5
    need = math.ceil(18 * m / eps)
    samples = [LabeledSample((1, 2), 1)] * (9 * m) + [LabeledSample((1, 3), 0)] * (need - 9 * m)
    assert not support_to_labeled_reduction(_always(True), m, eps, samples).rejected
    samples[9 * m] = LabeledSample((1, 2), 1)
    assert support_to_labeled_reduction(_always(True), m, eps, samples).rejected
    assert not support_to_labeled_reduction(_always(False), m, eps, samples).rejected


def test_reduction_majority_vote():
    m, eps = 2, 1
    need = 18 * m
    samples = [LabeledSample((i, i + 1), 1) for i in range(1, need + 1)]
    calls = []

    def tester(edges):
        calls.append(list(edges))
        return len(calls) <= 5
    assert support_to_labeled_reduction(tester, m, eps, samples).rejected
    assert len(calls) == 9 and all(len(c) == m for c in calls)
    assert calls[0] == [(1, 2), (2, 3)]
    calls.clear()
    assert not support_to_labeled_reduction(lambda e: (calls.append(e), len(calls) <= 4)[1],
                                            m, eps, samples).rejected


def test_reduction_needs_enough_samples():
    with pytest.raises(BudgetError):
        support_to_labeled_reduction(_always(True), 3, 0.5, [LabeledSample((1, 2), 1)] * 10)


# ---------------------------------------------------------------- properties

edge_sets = st.sets(st.tuples(st.integers(1, 7), st.integers(1, 7)).filter(lambda e: e[0] < e[1]),
                    max_size=14)
PROPS = [PropertySpec.bipartite(), PropertySpec.triangle_free(), PropertySpec.square_free(),
         PropertySpec.free(path(2)), PropertySpec.hom(triangle())]


@settings(max_examples=80, deadline=None)
@given(edge_sets, st.sampled_from(range(len(PROPS))))
def test_one_sided_on_members(edges, which):
    prop = PROPS[which]
    if not prop.contains(edges):
        return
    assert not make_tester(prop)(pos(*edges)).rejected


@settings(max_examples=80, deadline=None)
@given(edge_sets, edge_sets, st.sampled_from(range(len(PROPS))))
def test_adding_positives_keeps_reject(edges, extra, which):
    tester = make_tester(PROPS[which])
    if tester(pos(*edges)).rejected:
        assert tester(pos(*(edges | extra))).rejected


@settings(max_examples=80, deadline=None)
@given(edge_sets, st.sampled_from(range(len(PROPS))))
def test_witness_is_an_enumerated_violation(edges, which):
    prop = PROPS[which]
    v = make_tester(prop)(pos(*edges))
    if not v.rejected:
        return
    w = frozenset(s.edge for s in v.witness)
    hyper = enumerate_violations(edges, prop, 7).hyperedges
    assert w in hyper


def _union_find_bipartite(edges):
    parent = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x
    # vertex v in colour class c is node (v, c); an edge joins opposite classes
    for a, b in edges:
        parent.setdefault((a, 0), (a, 0))
        for c in (0, 1):
            ra, rb = find((a, c)), find((b, 1 - c))
            parent[ra] = rb
    return all(find((v, 0)) != find((v, 1)) for e in edges for v in e)


def test_bipartite_agrees_with_union_find():
    rng = random.Random(5)
    pairs = list(itertools.combinations(range(1, 11), 2))
    for _ in range(1000):
        edges = rng.sample(pairs, rng.randint(0, 14))
        expect = _union_find_bipartite(edges)
        assert expect == nx.is_bipartite(nx.Graph(edges)) if edges else True
        assert hom_tester(single_edge(), pos(*edges)).rejected == (not expect)


def _brute_clique_reject(labeled):
    """A labeled sample set is a violation iff no clique agrees with it."""
    positives = {e for e, lab in labeled if lab}
    negatives = {e for e, lab in labeled if not lab}
    verts = sorted({v for e in positives for v in e})
    # the smallest clique covering the positives spans exactly their vertices
    needed = set(itertools.combinations(verts, 2))
    return bool(needed & negatives)


def test_clique_tester_matches_brute_force():
    for n in range(2, 6):
        pairs = list(itertools.combinations(range(1, n + 1), 2))
        for labels in itertools.product((None, 0, 1), repeat=len(pairs)):
            labeled = [(e, lab) for e, lab in zip(pairs, labels) if lab is not None]
            samples = [LabeledSample(e, lab) for e, lab in labeled]
            v = clique_tester(samples)
            assert v.rejected == _brute_clique_reject(labeled)
            if v.rejected:
                w = {(s.edge, s.label) for s in v.witness}
                assert w <= set(labeled)
                assert _brute_clique_reject(w)
