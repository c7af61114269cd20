import itertools
import math
import random
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from subtest.core import EdgeDistribution, degree_mass
from subtest.errors import NotFarEnough, PreconditionWarning, RangeError
from subtest.graphs import all_squares, iter_squares
from subtest.witness import (Hypergraph, SquareWitness, classify,
                             concentrated_budget, descendant, dilute_budget, hop_tables,
                             representatives, solve_fractional_matching, square_witness)

SQUARE = [(1, 2), (2, 3), (3, 4), (1, 4)]
K4 = list(itertools.combinations(range(1, 5), 2))


def uniform(n, edges):
    return EdgeDistribution(n, {e: F(1, len(edges)) for e in edges})


def test_single_square_lp():
    G = Hypergraph(SQUARE, (frozenset(SQUARE),), 4)
    fm = solve_fractional_matching(G, {e: F(1, 4) for e in SQUARE}, F(1, 4))
    assert fm.weights == {frozenset(SQUARE): F(1, 4)}
    assert fm.conditions({e: F(1, 4) for e in SQUARE}) == {
        "independent": True, "dominated": True, "mass_in_range": True}


def test_zero_mass_is_not_far():
    G = Hypergraph(SQUARE, (frozenset(SQUARE),), 4)
    with pytest.raises(NotFarEnough) as info:
        solve_fractional_matching(G, {e: 0 for e in SQUARE}, F(1, 4))
    assert info.value.optimum == 0


def test_two_disjoint_triangles():
    G = Hypergraph(range(1, 7), ({1, 2, 3}, {4, 5, 6}), 3)
    fm = solve_fractional_matching(G, {v: F(1, 6) for v in range(1, 7)}, F(1, 2))
    assert fm.weights == {frozenset({1, 2, 3}): F(1, 6), frozenset({4, 5, 6}): F(1, 6)}
    assert fm.total() == F(1, 3)


def test_square_witness_single_square():
    q = square_witness(uniform(4, SQUARE), F(1, 4))
    assert dict(q.weights) == {frozenset(SQUARE): F(1, 4)}
    assert concentrated_budget(q) == 288


def test_square_witness_rejects_square_free():
    with pytest.raises(NotFarEnough):
        square_witness(uniform(4, [(1, 2), (2, 3), (1, 3)]), F(1, 6))


def test_square_witness_on_k4():
    p = uniform(4, K4)
    q = square_witness(p, F(1, 6))
    assert q.total() >= F(1, 24)
    q.verify(dict(p.items()))
    phi = representatives(q)
    assert len(set(phi.values())) == len(phi)
    assert all(phi[z] in z for z in phi)


def test_k4_three_squares_have_distinct_representatives():
    squares = list(all_squares(range(1, 5)))
    assert len(squares) == 3
    q = SquareWitness({z: F(1, 12) for z in squares}, 4, F(1, 6), n=4)
    phi = representatives(q)
    assert len(set(phi.values())) == 3
    # exhaustive check: some system of distinct representatives exists
    assert any(len(set(c)) == 3 for c in itertools.product(*[sorted(z) for z in squares]))
    p_prime = descendant(q)
    assert p_prime.total() == F(1, 4)


def test_descendant_examples():
    q = SquareWitness({frozenset(SQUARE): F(1, 4)}, 4, F(1, 4), n=4)
    p_prime = descendant(q)
    assert len(p_prime.support()) == 1 and p_prime.support()[0] in SQUARE
    assert p_prime.total() == F(1, 4)
    empty = descendant(SquareWitness({}, 4, F(1, 4), n=4))
    assert empty.total() == 0


def test_hop_tables_path():
    t = hop_tables(EdgeDistribution(3, {(1, 2): F(1, 2), (2, 3): F(1, 2)}))
    assert dict(t.walk.weights) == {((1, 3), 2): F(1, 4)}
    assert t.hop == {(1, 3): F(1, 4)}
    assert t.hopd == {(1, 3): 0}
    assert t.argmax_mid == {(1, 3): 2}


def test_hop_tables_single_edge_empty():
    t = hop_tables(EdgeDistribution(2, {(1, 2): 1}))
    assert t.walk.total() == 0 and not t.hop and not t.hopd


def test_hop_tables_square():
    t = hop_tables(uniform(4, SQUARE))
    assert t.walk.weights[((1, 3), 2)] == F(1, 8)
    assert t.walk.weights[((1, 3), 4)] == F(1, 8)
    assert t.hop[(1, 3)] == F(1, 4)
    assert t.hopd[(1, 3)] == F(1, 8)
    assert t.argmax_mid[(1, 3)] == 2


def test_classify_examples():
    eps = F(1, 4)
    single = EdgeDistribution(4, {(1, 2): eps / 4})
    label = classify(single, eps)
    assert label.label == "concentrated" and label.slacks == (0, eps / 4)
    # both opposite pairs of this 4-cycle have two equal middles, so hopd is 1/16 per pair
    many = EdgeDistribution(6, {(1, 3): F(1, 8), (3, 2): F(1, 8), (1, 4): F(1, 8), (4, 2): F(1, 8)})
    label = classify(many, F(1, 2))
    assert label.dilute_slack == F(1, 8) and label.label == "dilute"


def test_classify_warns_below_precondition():
    with pytest.warns(PreconditionWarning):
        classify(EdgeDistribution(4, {(1, 2): F(1, 100)}), F(1, 2))


def test_classify_k4_descendant_dichotomy():
    eps = F(1, 6)
    q = square_witness(uniform(4, K4), eps)
    label = classify(descendant(q), eps)
    assert max(label.slacks) >= eps / 8


def test_budgets():
    assert 12 * math.log(144) > 59
    assert dilute_budget(12, 1) == 60000
    with pytest.raises(RangeError):
        dilute_budget(12, 0)
    for n in (5, 12, 30):
        for eps in (0.8, 0.4, 0.1):
            full, half = dilute_budget(n, eps), dilute_budget(n, eps / 2)
            assert abs(half - 2 * full) <= 1000
    with pytest.raises(NotFarEnough):
        concentrated_budget(SquareWitness({}, 4, F(1, 4), n=4))


def _random_subgraph_mass(rng, n, m_edges):
    pairs = list(itertools.combinations(range(1, n + 1), 2))
    edges = rng.sample(pairs, m_edges)
    raw = [rng.randint(1, 5) for _ in edges]
    total = sum(raw) + rng.randint(0, 3)
    return EdgeDistribution(n, {e: F(r, total) for e, r in zip(edges, raw)})


def test_lp_optimum_matches_scipy():
    rng = random.Random(8)
    checked = 0
    for trial in range(40):
        n = rng.randint(4, 6)
        p = _random_subgraph_mass(rng, n, rng.randint(4, min(10, n * (n - 1) // 2)))
        support = p.support()
        squares = list(iter_squares(support))
        if not squares:
            continue
        A = np.array([[1.0 if e in z else 0.0 for z in squares] for e in support])
        b = np.array([float(p[e]) for e in support])
        res = linprog(-np.ones(len(squares)), A_ub=A, b_ub=b, bounds=(0, None), method="highs")
        optimum = -res.fun
        try:
            q = square_witness(p, F(1, 10 ** 6))
        except NotFarEnough:
            assert optimum < 1e-6 / 4 + 1e-12
            continue
        assert abs(float(q.total()) - optimum) < 1e-9
        q.verify(dict(p.items()))
        checked += 1
    assert checked >= 10


# ---------------------------------------------------------------- invariants

def _random_mass(rng, n, density=0.6, slack=True):
    pairs = [e for e in itertools.combinations(range(1, n + 1), 2) if rng.random() < density]
    raw = [rng.random() for _ in pairs]
    total = sum(raw) * (1 + (rng.random() if slack else 0)) or 1.0
    return EdgeDistribution(n, {e: r / total for e, r in zip(pairs, raw)})


def test_walk_mass_bound():
    rng = random.Random(1)
    for _ in range(200):
        p = _random_mass(rng, rng.randint(3, 9))
        B = {v for v in range(1, p.n + 1) if rng.random() < 0.7}
        t = hop_tables(p, B)
        deg = degree_mass(p)
        bound = sum(float(deg[b]) for b in B)
        assert float(t.walk_total()) <= bound + 1e-12 <= 1 + 1e-12
        assert all(v >= -1e-15 for v in t.hopd.values())


def test_markov_pruning_loss():
    rng = random.Random(2)
    for _ in range(200):
        p = _random_mass(rng, rng.randint(3, 10))
        eps = rng.uniform(0.05, 1)
        deg = degree_mass(p)
        B = {b for b in range(1, p.n + 1) if deg[b] >= eps / (2 * p.n)}
        gap = hop_tables(p).hopd_total() - hop_tables(p, B).hopd_total()
        assert gap <= eps / 2 + 1e-12


def test_concentrated_case_law():
    rng = random.Random(3)
    for _ in range(1000):
        n = rng.randint(2, 12)
        p = _random_mass(rng, n, density=rng.uniform(0.1, 1))
        L = p.total() - hop_tables(p).hopd_total()
        if L > 0:
            s4 = sum(w ** 4 for _, w in p.items())
            assert s4 >= 2 * L ** 4 / n ** 4.5 - 1e-15


def test_spectral_bound():
    gen = np.random.default_rng(4)
    for _ in range(100):
        n = int(gen.integers(2, 12))
        S = np.triu(gen.random((n, n)) < gen.random())
        S = S | S.T
        x = gen.normal(size=n)
        lhs = float(x @ S.astype(float) @ x)
        assert lhs <= math.sqrt(S.sum()) * float(x @ x) + 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32))
def test_descendant_round_trip(seed):
    rng = random.Random(seed)
    n = rng.randint(4, 6)
    p = _random_subgraph_mass(rng, n, rng.randint(4, min(10, n * (n - 1) // 2)))
    try:
        q = square_witness(p, F(1, 1000))
    except NotFarEnough:
        return
    p_prime = descendant(q)
    assert p_prime.total() == q.total()
    load = q.load()
    assert all(w <= load[e] <= p[e] for e, w in p_prime.items())
    assert all(load[e] <= p[e] for e in load)
