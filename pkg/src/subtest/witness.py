"""Fractional matchings, square witnesses, descendants and the Walk/Hop tables
behind the dilute/concentrated case split of the square-freeness tester."""

from __future__ import annotations

import itertools
import math
import warnings
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Hashable, Iterable, Mapping

from .core import EdgeDistribution, MassFunction, ceil_snap, degree_mass, TOL
from .errors import IndependenceViolated, NotFarEnough, PreconditionWarning, RangeError
from .graphs import all_squares, iter_squares
from . import lp


@dataclass(frozen=True)
class Hypergraph:
    vertices: tuple
    edges: tuple
    k: int

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(sorted(self.vertices)))
        edges = tuple(frozenset(e) for e in self.edges)
        vs = set(self.vertices)
        for e in edges:
            if len(e) != self.k:
                raise ValueError(f"hyperedge {sorted(e)} does not have {self.k} vertices")
            if not e <= vs:
                raise ValueError(f"hyperedge {sorted(e)} uses unknown vertices")
        object.__setattr__(self, "edges", edges)


def _sorted_edge_key(e: frozenset) -> tuple:
    return tuple(sorted(e))


@dataclass(frozen=True)
class FractionalMatching:
    """Nonnegative weights on hyperedges; ``epsilon`` and ``k`` fix condition (3)."""

    weights: Mapping[frozenset, Fraction]
    k: int
    epsilon: Fraction

    def __post_init__(self):
        clean = {frozenset(e): Fraction(w) for e, w in self.weights.items() if w != 0}
        if any(w < 0 for w in clean.values()):
            raise ValueError("matching weights must be nonnegative")
        ordered = dict(sorted(clean.items(), key=lambda kv: _sorted_edge_key(kv[0])))
        object.__setattr__(self, "weights", ordered)

    def total(self) -> Fraction:
        return sum(self.weights.values(), Fraction(0))

    def load(self) -> dict:
        """``sum_e lambda_e 1_e`` as a vertex map."""
        out: dict = defaultdict(Fraction)
        for e, w in self.weights.items():
            for v in e:
                out[v] += w
        return dict(out)

    def conditions(self, p: Mapping) -> dict:
        """Exact truth of independence, domination by p, and the mass range."""
        support = list(self.weights)
        verts = sorted({v for e in support for v in e})
        M = [[1 if v in e else 0 for e in support] for v in verts]
        independent = lp.rank(M) == len(support) if support else True
        load = self.load()
        dominated = all(w <= p.get(v, 0) for v, w in load.items())
        total = self.total()
        in_range = Fraction(self.epsilon) / self.k <= total <= Fraction(1, self.k)
        return {"independent": independent, "dominated": dominated, "mass_in_range": in_range}

    def verify(self, p: Mapping) -> None:
        bad = [name for name, ok in self.conditions(p).items() if not ok]
        if bad:
            raise AssertionError(f"matching conditions failed: {bad}")


@dataclass(frozen=True)
class SquareWitness(FractionalMatching):
    """A fractional matching over squares of K_n whose vertices are edges."""

    n: int = 0


def reduce_support(edges: Iterable[frozenset], weights: Mapping) -> dict:
    """Walk along the kernel of the support columns until they are independent.

    With a null vector c of the support indicators, ``sum c = 0`` forces a
    negative entry; moving by ``d = min(-lambda_e / c_e)`` over ``c_e < 0``
    keeps the load unchanged and zeroes at least one weight.
    """
    lam = {frozenset(e): Fraction(w) for e, w in weights.items() if w != 0}
    while True:
        support = sorted(lam, key=_sorted_edge_key)
        if not support:
            return lam
        verts = sorted({v for e in support for v in e})
        M = [[1 if v in e else 0 for e in support] for v in verts]
        c = lp.null_vector(M)
        if c is None:
            return lam
        d = min(-lam[e] / ce for e, ce in zip(support, c) if ce < 0)
        new = {}
        for e, ce in zip(support, c):
            w = lam[e] + d * ce
            if w < 0:
                raise ArithmeticError("kernel step left the nonnegative orthant")
            if w != 0:
                new[e] = w
        lam = new


def solve_fractional_matching(G: Hypergraph, p: Mapping[Hashable, Fraction], eps) -> FractionalMatching:
    """Maximum fractional matching dominated by ``p`` with independent support.

    Hyperedges touching a zero-mass vertex are forced to weight zero and are
    dropped before the simplex runs.
    """
    eps = Fraction(eps)
    mass = {v: Fraction(p.get(v, 0)) for v in G.vertices}
    cols = [e for e in G.edges if all(mass[v] > 0 for v in e)]
    rows = sorted({v for e in cols for v in e})
    if cols:
        A = [[1 if v in e else 0 for e in cols] for v in rows]
        x, _ = lp.maximize([1] * len(cols), A, [mass[v] for v in rows])
        lam = {e: xe for e, xe in zip(cols, x) if xe}
    else:
        lam = {}
    lam = reduce_support(lam.keys(), lam)
    fm = FractionalMatching(lam, G.k, eps)
    total = fm.total()
    if total < eps / G.k:
        load = fm.load()
        cover = sorted(v for v in G.vertices if load.get(v, 0) == mass[v])
        cover_mass = sum((mass[v] for v in cover), Fraction(0))
        raise NotFarEnough(f"maximum matching mass {total} < eps/k = {eps / G.k}",
                           optimum=total, cover=cover, cover_mass=cover_mass)
    fm.verify(mass)
    return fm


def square_hypergraph(n: int) -> Hypergraph:
    """Vertices: the pairs of [n]; hyperedges: the squares of K_n."""
    pairs = list(itertools.combinations(range(1, n + 1), 2))
    return Hypergraph(pairs, tuple(all_squares(range(1, n + 1))), 4)


def square_witness(p: EdgeDistribution, eps) -> SquareWitness:
    eps = Fraction(eps)
    mass = {e: Fraction(w) for e, w in p.items()}
    support = sorted(mass)
    # squares inside the support are the only ones that can carry weight
    G = Hypergraph(support, tuple(iter_squares(support)), 4)
    fm = solve_fractional_matching(G, mass, eps)
    return SquareWitness(fm.weights, 4, eps, n=p.n)


def representatives(q: FractionalMatching) -> dict:
    """Injective choice of one vertex per supported hyperedge (augmenting paths)."""
    support = list(q.weights)
    owner: dict = {}

    def augment(i, seen):
        for v in sorted(support[i]):
            if v in seen:
                continue
            seen.add(v)
            if v not in owner or augment(owner[v], seen):
                owner[v] = i
                return True
        return False

    for i in range(len(support)):
        if not augment(i, set()):
            raise IndependenceViolated(
                f"no distinct representative for {sorted(support[i])}: Hall's condition fails")
    return {support[i]: v for v, i in owner.items()}


def descendant(q: SquareWitness) -> EdgeDistribution:
    """Move each square's weight onto one of its own edges, injectively."""
    phi = representatives(q)
    return EdgeDistribution(q.n, {phi[z]: w for z, w in q.weights.items()})


# ---------------------------------------------------------------- Walk / Hop

@dataclass(frozen=True)
class HopTables:
    walk: MassFunction
    hop: Mapping[tuple, object]
    hopd: Mapping[tuple, object]
    argmax_mid: Mapping[tuple, int]
    restricted_to: frozenset

    def walk_total(self):
        return self.walk.total()

    def hop_total(self):
        return _sum(self.hop.values())

    def hopd_total(self):
        return _sum(self.hopd.values())


def _sum(values):
    values = list(values)
    if not values:
        return Fraction(0)
    if all(isinstance(v, Fraction) for v in values):
        return sum(values, Fraction(0))
    return math.fsum(float(v) for v in values)


def hop_tables(p: EdgeDistribution, B: Iterable[int] | None = None) -> HopTables:
    """Walk, Hop and HopD of ``p`` with middles restricted to ``B`` (default all)."""
    deg = degree_mass(p)
    B = frozenset(range(1, p.n + 1)) if B is None else frozenset(B)
    nbrs = defaultdict(dict)
    for (a, b), w in p.items():
        nbrs[a][b] = w
        nbrs[b][a] = w
    walk = {}
    for b in sorted(nbrs):
        if b not in B:
            continue
        d2 = 2 * deg[b]
        for a, c in itertools.combinations(sorted(nbrs[b]), 2):
            walk[((a, c), b)] = nbrs[b][a] * nbrs[b][c] / d2
    hop: dict = {}
    best: dict = {}
    for ((a, c), b), w in walk.items():
        key = (a, c)
        hop[key] = hop.get(key, 0) + w
        # walks are visited with ascending middle, so strict > keeps the smallest id
        if key not in best or w > best[key][0]:
            best[key] = (w, b)
    hopd = {key: hop[key] - best[key][0] for key in hop}
    return HopTables(MassFunction(walk, kind="wedge"), hop, hopd,
                     {key: best[key][1] for key in best}, B)


@dataclass(frozen=True)
class CaseLabel:
    label: str
    dilute_slack: object
    concentrated_slack: object

    @property
    def slacks(self) -> tuple:
        return (self.dilute_slack, self.concentrated_slack)


def classify(p_prime: EdgeDistribution, eps) -> CaseLabel:
    """Dilute when the HopD total reaches eps/8, otherwise concentrated."""
    tables = hop_tables(p_prime)
    dilute = tables.hopd_total()
    total = p_prime.total()
    if total < eps / 4 - TOL:
        warnings.warn(f"total mass {total} is below eps/4; not a witness descendant",
                      PreconditionWarning, stacklevel=2)
    label = "dilute" if dilute >= eps / 8 else "concentrated"
    return CaseLabel(label, dilute, total - dilute)


def dilute_budget(n: int, eps) -> int:
    """``1000 * ceil(n ln(12 n) / eps)``."""
    if not 0 < eps <= 1:
        raise RangeError("epsilon must lie in (0, 1]")
    return 1000 * ceil_snap(n * math.log(12 * n) / float(eps))


def concentrated_budget(q: FractionalMatching) -> int:
    """``ceil(72 (sum q^4)^(-1/4))``."""
    s4 = sum((w ** 4 for w in q.weights.values()), Fraction(0))
    if s4 == 0:
        raise NotFarEnough("zero witness has no concentrated budget", optimum=Fraction(0))
    root = _exact_fourth_root(s4)
    if root is not None:
        return ceil_snap(Fraction(72) / root)
    return ceil_snap(72 * float(s4) ** -0.25)


def _exact_fourth_root(x: Fraction):
    num = _iroot4(x.numerator)
    den = _iroot4(x.denominator)
    if num is None or den is None:
        return None
    return Fraction(num, den)


def _iroot4(v: int):
    r = math.isqrt(math.isqrt(v))
    for c in (r, r + 1):
        if c ** 4 == v:
            return c
    return None
