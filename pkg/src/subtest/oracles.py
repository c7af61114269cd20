"""Exact ground truth at desk scale.

Violation hypergraphs, distances via minimum-weight vertex cover, exact total
variation between sample-sequence ensembles, domination couplings, and the
structure verifiers used by the generators.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict, deque
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Sequence

from .core import CountVector, EdgeDistribution, RngSeed, as_seed
from .errors import Infeasible, OracleTooBig, TooLarge
from .graphs import Graph, adjacency, is_hom, iter_copies, norm_edge
from .testers import CLIQUE, FREE, HOM, PropertySpec


@dataclass(frozen=True)
class OracleLimits:
    """Vertex-count ceilings for exhaustive work, plus a subset-search cap."""

    general: int = 8
    free: int = 12
    max_subset_edges: int = 18

    def for_property(self, prop: PropertySpec) -> int:
        return self.free if prop.kind == FREE else self.general


DEFAULT_LIMITS = OracleLimits()
UNLIMITED = OracleLimits(general=10 ** 9, free=10 ** 9, max_subset_edges=24)


@dataclass(frozen=True)
class ViolationHypergraph:
    domain: tuple
    hyperedges: tuple

    def __len__(self):
        return len(self.hyperedges)


def _check_limit(n, prop, limits):
    cap = limits.for_property(prop)
    if n > cap:
        raise OracleTooBig(f"n={n} exceeds the oracle limit {cap} for {prop.name}")


def _domain(n, domain):
    if domain is None:
        return tuple(itertools.combinations(range(1, n + 1), 2))
    return tuple(sorted({norm_edge(*e) for e in domain}))


def enumerate_violations(E: Iterable[tuple], prop: PropertySpec, n: int,
                         domain: Iterable[tuple] | None = None,
                         limits: OracleLimits = DEFAULT_LIMITS) -> ViolationHypergraph:
    """All minimal violations of the labeling ``1 on E`` restricted to ``domain``.

    H-freeness: copies of H inside E.  Bipartite patterns: odd cycles of E.
    Other homomorphism targets: exhaustive subset search up to the minimality
    frontier.  Clique: alternating paths {a,b},{b,c},{c,d} with a negative
    middle pair (a = d allowed).
    """
    _check_limit(n, prop, limits)
    dom = _domain(n, domain)
    domset = set(dom)
    pos = sorted({norm_edge(*e) for e in E} & domset)
    if prop.kind == FREE:
        hyper = list(iter_copies(prop.H, pos))
    elif prop.kind == HOM and prop.is_bipartite_hom:
        hyper = odd_cycles(pos)
    elif prop.kind == HOM:
        hyper = _minimal_non_hom_sets(pos, prop.H, limits)
    else:
        hyper = _alternating_paths(pos, [e for e in dom if e not in set(pos)])
    hyper = sorted(set(hyper), key=lambda h: (len(h), sorted(h)))
    return ViolationHypergraph(dom, tuple(hyper))


def odd_cycles(edges: Sequence[tuple]) -> list:
    """Every simple cycle of odd length, as an edge set."""
    adj = adjacency(edges)
    found = set()
    for s in sorted(adj):
        stack = [(s, [s])]
        while stack:
            v, path = stack.pop()
            for w in sorted(adj[v]):
                if w == s and len(path) >= 3:
                    if len(path) % 2 == 1:
                        cyc = frozenset(norm_edge(path[i], path[(i + 1) % len(path)])
                                        for i in range(len(path)))
                        found.add(cyc)
                elif w > s and w not in path:
                    stack.append((w, path + [w]))
    return list(found)


def _minimal_non_hom_sets(pos, H, limits) -> list:
    if len(pos) > limits.max_subset_edges:
        raise OracleTooBig(f"{len(pos)} positive edges exceed the subset-search cap")
    found = []
    for size in range(1, len(pos) + 1):
        for S in itertools.combinations(pos, size):
            fs = frozenset(S)
            if any(v <= fs for v in found):
                continue
            if not is_hom(S, H):
                # every smaller subset was explored and is not a superset of a
                # violation, so fs is minimal
                found.append(fs)
    return found


def _alternating_paths(pos, neg) -> list:
    at = defaultdict(list)
    for e in pos:
        for v in e:
            at[v].append(e)
    out = []
    for b, c in neg:
        for e1 in at.get(b, ()):
            for e2 in at.get(c, ()):
                if e1 != e2:
                    out.append(frozenset({e1, (b, c), e2}))
    return out


def consistent_completion(S: Iterable[tuple], E: Iterable[tuple], prop: PropertySpec):
    """A member of the property agreeing with the labels on ``S``, or ``None``."""
    E = {norm_edge(*e) for e in E}
    S = {norm_edge(*e) for e in S}
    positives = S & E
    negatives = S - E
    if prop.kind != CLIQUE:
        return positives if prop.contains(positives) else None
    verts = sorted({v for e in positives for v in e})
    h = set(itertools.combinations(verts, 2))
    return None if h & negatives else h


def is_violation(S, E, prop) -> bool:
    return consistent_completion(S, E, prop) is None


# ---------------------------------------------------------------- vertex cover

def min_weight_cover(hyperedges: Iterable[frozenset], weight: Mapping) -> tuple:
    """Minimum-weight hitting set by branch and bound; returns ``(value, cover)``.

    Zero-weight elements are taken for free, independent components are solved
    separately, and each branch point picks the smallest unhit hyperedge and
    tries its elements heaviest first, excluding those already tried.
    """
    edges = [frozenset(h) for h in hyperedges]
    free = {v for h in edges for v in h if weight.get(v, 0) == 0}
    edges = [h for h in edges if not (h & free)]
    total = Fraction(0) if all(isinstance(weight.get(v, 0), (int, Fraction)) for h in edges for v in h) else 0.0
    cover = set()
    chosen_free = set()
    for comp in _components(edges):
        value, part = _cover_component(comp, weight)
        total += value
        cover |= part
    # zero-weight elements only matter when they hit something
    for h in hyperedges:
        h = frozenset(h)
        if not (h & cover) and not (h & chosen_free):
            v = min(x for x in h if weight.get(x, 0) == 0)
            chosen_free.add(v)
    return total, frozenset(cover | chosen_free)


def _components(edges):
    parent = {}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for h in edges:
        for v in h:
            parent.setdefault(v, v)
        vs = list(h)
        for v in vs[1:]:
            ra, rb = find(vs[0]), find(v)
            if ra != rb:
                parent[ra] = rb
    groups = defaultdict(list)
    for h in edges:
        groups[find(next(iter(h)))].append(h)
    return [groups[k] for k in sorted(groups, key=lambda r: sorted(map(str, groups[r][0])))]


def _cover_component(edges, weight):
    edges = sorted(set(edges), key=lambda h: (len(h), sorted(h)))
    w = {v: weight[v] for h in edges for v in h}
    # greedy upper bound: repeatedly take the element with best weight per hit
    rem = list(edges)
    ub_cover = set()
    while rem:
        hits = defaultdict(int)
        for h in rem:
            for v in h:
                hits[v] += 1
        v = min(hits, key=lambda x: (w[x] / hits[x], str(x)))
        ub_cover.add(v)
        rem = [h for h in rem if v not in h]
    best = [sum(w[v] for v in ub_cover), frozenset(ub_cover)]

    def lower_bound(open_edges, excluded):
        used = set()
        lb = 0
        for h in open_edges:
            allowed = h - excluded
            if not (allowed & used):
                used |= allowed
                lb += min(w[v] for v in allowed)
        return lb

    def rec(open_edges, excluded, cost, chosen):
        if not open_edges:
            if cost < best[0]:
                best[0], best[1] = cost, frozenset(chosen)
            return
        if cost + lower_bound(open_edges, excluded) >= best[0]:
            return
        h = min(open_edges, key=lambda e: (len(e - excluded), sorted(e)))
        cands = sorted(h - excluded, key=lambda v: (-w[v], str(v)))
        tried = set()
        for v in cands:
            nxt = [e for e in open_edges if v not in e]
            ex = excluded | tried
            if all(e - ex for e in nxt):
                rec(nxt, ex, cost + w[v], chosen | {v})
            tried.add(v)

    if any(len(h) == 0 for h in edges):
        raise ValueError("empty hyperedge cannot be covered")
    rec(edges, frozenset(), 0, frozenset())
    return best[0], set(best[1])


def exact_distance(E: Iterable[tuple], mu: EdgeDistribution, prop: PropertySpec, n: int | None = None,
                   limits: OracleLimits = DEFAULT_LIMITS):
    """mu-mass of a minimum vertex cover of the violation hypergraph.

    Only minimal violations inside the support of mu can cost anything, so the
    hypergraph is built on that support.
    """
    n = mu.n if n is None else n
    support = mu.support()
    H = enumerate_violations(E, prop, n, domain=support, limits=limits)
    if not H.hyperedges:
        return Fraction(0) if mu.is_exact else 0.0
    value, _ = min_weight_cover(H.hyperedges, dict(mu.items()))
    return value


def distance_by_enumeration(E: Iterable[tuple], mu: EdgeDistribution, prop: PropertySpec, n: int):
    """``min over h in the property of mu(f != h)``, enumerating every edge set."""
    pairs = list(itertools.combinations(range(1, n + 1), 2))
    if len(pairs) > 15:
        raise OracleTooBig("direct enumeration is limited to n <= 6")
    E = {norm_edge(*e) for e in E}
    best = None
    for mask in range(1 << len(pairs)):
        h = {pairs[i] for i in range(len(pairs)) if mask >> i & 1}
        if not prop.contains(h):
            continue
        cost = sum((w for e, w in mu.items() if (e in E) != (e in h)), Fraction(0) if mu.is_exact else 0.0)
        if best is None or cost < best:
            best = cost
    return best


# ---------------------------------------------------------------- total variation

@dataclass(frozen=True)
class RandomizedFamily:
    """A mixture of edge distributions indexed by a randomizer.

    ``members()`` yields ``(weight, EdgeDistribution)`` pairs with weights
    summing to one; ``sample(gen)`` draws a single member for Monte Carlo use.
    """

    size: int
    members: Callable[[], Iterable]
    sample: Callable | None = None
    name: str = ""


@dataclass(frozen=True)
class TVResult:
    value: object
    mode: str
    std_error: float = 0.0


def exact_tv_sample_distributions(family_yes: RandomizedFamily, family_no: RandomizedFamily, m: int,
                                  max_sequences: int = 10 ** 7, max_randomizer: int = 1 << 20,
                                  mc_randomizers: int = 4096, seed: RngSeed | int = 0) -> TVResult:
    """Total variation between the laws of m-sample sequences under two mixtures.

    The randomizer is enumerated exactly when it has at most ``max_randomizer``
    outcomes; otherwise sampled members approximate each mixture and the
    result is labeled ``"estimate"``.
    """
    if m == 0:
        return TVResult(Fraction(0), "exact")
    exact = family_yes.size <= max_randomizer and family_no.size <= max_randomizer
    seed = as_seed(seed)
    if exact:
        mix_yes = list(family_yes.members())
        mix_no = list(family_no.members())
    else:
        mix_yes = _sampled_mixture(family_yes, mc_randomizers, seed.spawn(0))
        mix_no = _sampled_mixture(family_no, mc_randomizers, seed.spawn(1))
    atoms = sorted({e for _, mu in mix_yes + mix_no for e in mu.support()})
    leftovers = any(mu.total() < 1 for _, mu in mix_yes + mix_no)
    outcomes = atoms + (["nil"] if leftovers else [])
    if len(outcomes) ** m > max_sequences:
        raise TooLarge(f"{len(outcomes)}^{m} sequences exceed {max_sequences}")

    def table(mix):
        rows = []
        for w, mu in mix:
            rows.append((w, [mu[e] if e != "nil" else 1 - mu.total() for e in outcomes]))
        return rows

    ty, tn = table(mix_yes), table(mix_no)
    tv = Fraction(0) if exact else 0.0
    for seq in itertools.product(range(len(outcomes)), repeat=m):
        py = sum((w * math.prod(probs[i] for i in seq) for w, probs in ty), Fraction(0) if exact else 0.0)
        pn = sum((w * math.prod(probs[i] for i in seq) for w, probs in tn), Fraction(0) if exact else 0.0)
        tv += abs(py - pn)
    tv = tv / 2
    if exact:
        return TVResult(tv, "exact")
    return TVResult(float(tv), "estimate", std_error=float(1 / math.sqrt(mc_randomizers)))


def _sampled_mixture(fam: RandomizedFamily, count: int, seed: RngSeed) -> list:
    if fam.sample is None:
        raise TooLarge("randomizer too large and family has no sampler")
    gen = seed.generator()
    w = 1.0 / count
    return [(w, fam.sample(gen)) for _ in range(count)]


# ---------------------------------------------------------------- domination

@dataclass(frozen=True)
class CouplingCertificate:
    """A coupling of mu (exact first marginal) with a lambda2-compatible second marginal."""

    coupling: Mapping[tuple, Fraction]
    lambda1: Fraction
    lambda2: Fraction

    def verify(self, mu: Mapping, nu: Mapping) -> bool:
        first = defaultdict(Fraction)
        second = defaultdict(Fraction)
        dominated = Fraction(0)
        for (w, z), r in self.coupling.items():
            if r < 0:
                return False
            first[w] += r
            second[z] += r
            if _vec(w).dominates(_vec(z)):
                dominated += r
        if any(first[w] != Fraction(mu.get(w, 0)) for w in set(first) | set(mu)):
            return False
        if any(self.lambda2 * second[z] > Fraction(nu.get(z, 0)) for z in second):
            return False
        return dominated >= self.lambda1


def _vec(x) -> CountVector:
    if isinstance(x, CountVector):
        return x
    if isinstance(x, Mapping):
        return CountVector(x)
    return CountVector(dict(enumerate(x)))


def check_domination(mu: Mapping, nu: Mapping, lambda1, lambda2, max_pairs: int = 10 ** 5) -> CouplingCertificate:
    """Decide (lambda1, lambda2)-domination of mu over nu.

    The coupling LP is a transportation problem: route mu's mass to nu's atoms
    (capacity nu / lambda2) maximizing the mass sent along dominating pairs.
    That maximum is a max-flow, solved exactly by shortest augmenting paths;
    the remaining mass is then placed on any atoms with spare capacity.
    """
    lambda1, lambda2 = Fraction(lambda1), Fraction(lambda2)
    if not (0 < lambda2 <= 1) or not (0 <= lambda1 <= 1):
        raise ValueError("lambda parameters must lie in [0, 1] (lambda2 > 0)")
    ws = sorted(mu, key=repr)
    zs = sorted(nu, key=repr)
    if len(ws) * len(zs) > max_pairs:
        raise TooLarge("coupling table exceeds the pair cap")
    supply = {w: Fraction(mu[w]) for w in ws}
    cap = {z: Fraction(nu[z]) / lambda2 for z in zs}
    arcs = {w: [z for z in zs if _vec(w).dominates(_vec(z))] for w in ws}
    flow = _max_flow(ws, zs, supply, cap, arcs)
    achieved = sum(flow.values(), Fraction(0))
    if achieved < lambda1:
        raise Infeasible(f"best achievable Pr[w >= z] is {achieved} < {lambda1}", optimum=achieved)
    coupling = {k: v for k, v in flow.items() if v}
    left_w = {w: supply[w] - sum(flow.get((w, z), 0) for z in zs) for w in ws}
    left_z = {z: cap[z] - sum(flow.get((w, z), 0) for w in ws) for z in zs}
    for w in ws:
        for z in zs:
            if left_w[w] == 0:
                break
            amount = min(left_w[w], left_z[z])
            if amount > 0:
                coupling[(w, z)] = coupling.get((w, z), 0) + amount
                left_w[w] -= amount
                left_z[z] -= amount
    return CouplingCertificate(coupling, achieved, lambda2)


def _max_flow(ws, zs, supply, cap, arcs) -> dict:
    S, T = ("s",), ("t",)
    wid = {w: ("w", i) for i, w in enumerate(ws)}
    zid = {z: ("z", j) for j, z in enumerate(zs)}
    residual = defaultdict(dict)
    big = sum(supply.values(), Fraction(0)) + 1

    def add(u, v, c):
        residual[u][v] = residual[u].get(v, 0) + c
        residual[v].setdefault(u, Fraction(0))

    for w in ws:
        add(S, wid[w], supply[w])
        for z in arcs[w]:
            add(wid[w], zid[z], big)
    for z in zs:
        add(zid[z], T, cap[z])
    while True:
        prev = {S: None}
        queue = deque([S])
        while queue and T not in prev:
            u = queue.popleft()
            for v, c in residual[u].items():
                if c > 0 and v not in prev:
                    prev[v] = u
                    queue.append(v)
        if T not in prev:
            break
        path = []
        v = T
        while prev[v] is not None:
            path.append((prev[v], v))
            v = prev[v]
        push = min(residual[u][v] for u, v in path)
        for u, v in path:
            residual[u][v] -= push
            residual[v][u] += push
    flow = {}
    for w in ws:
        for z in arcs[w]:
            f = residual[zid[z]].get(wid[w], 0)
            if f:
                flow[(w, z)] = f
    return flow


def downward_closed_sets(d: int, cap: int = 2) -> list:
    """Every down-set of the grid ``{0..cap}^d`` as a frozenset of points (d <= 3)."""
    if d > 3:
        raise TooLarge("down-set enumeration is limited to 3 coordinates")
    points = sorted(itertools.product(range(cap + 1), repeat=d), key=lambda p: (sum(p), p))
    out = []

    def rec(i, chosen):
        if i == len(points):
            out.append(frozenset(chosen))
            return
        p = points[i]
        preds = [p[:j] + (p[j] - 1,) + p[j + 1:] for j in range(d) if p[j] > 0]
        rec(i + 1, chosen)
        if all(q in chosen for q in preds):
            chosen.add(p)
            rec(i + 1, chosen)
            chosen.discard(p)

    rec(0, set())
    return out


def domination_consequence_violations(cert: CouplingCertificate, mu: Mapping, nu: Mapping,
                                      cap: int = 2) -> list:
    """Down-sets S with ``mu(S) > nu(S) / lambda2 + (1 - lambda1)``; empty when the law holds."""
    coords = sorted({k for x in list(mu) + list(nu) for k in _vec(x).support()}, key=repr)
    if len(coords) > 3:
        raise TooLarge("vectors span more than 3 coordinates")
    bad = []

    def point(x):
        v = _vec(x)
        return tuple(v[c] for c in coords)

    for S in downward_closed_sets(len(coords), cap):
        def inside(x):
            p = point(x)
            return all(c <= cap for c in p) and p in S
        mu_s = sum((Fraction(w) for x, w in mu.items() if inside(x)), Fraction(0))
        nu_s = sum((Fraction(w) for x, w in nu.items() if inside(x)), Fraction(0))
        if mu_s > nu_s / cert.lambda2 + (1 - cert.lambda1):
            bad.append(S)
    return bad


# ---------------------------------------------------------------- structure verifiers

def verify_3ap_free(A: Iterable[int]) -> bool:
    """No ``x < y < z`` in A with ``x + z = 2y``."""
    A = sorted(set(A))
    s = set(A)
    for i, x in enumerate(A):
        for y in A[i + 1:]:
            if 2 * y - x in s:
                return False
    return True


@lru_cache(maxsize=None)
def _set_partitions(r: int) -> tuple:
    def rec(items):
        if not items:
            yield []
            return
        first, rest = items[0], items[1:]
        for part in rec(rest):
            yield [[first]] + part
            for i in range(len(part)):
                yield part[:i] + [[first] + part[i]] + part[i + 1:]
    return tuple(tuple(tuple(b) for b in p) for p in rec(list(range(r))))


@lru_cache(maxsize=None)
def is_trivial_pattern(coeffs: tuple, pattern: tuple) -> bool:
    """Whether a solution with equality pattern ``pattern`` is trivial.

    ``pattern[i] == pattern[j]`` iff the i-th and j-th values coincide.  A
    solution is trivial when some set partition has zero coefficient sum on
    every block and constant values within each block.
    """
    for part in _set_partitions(len(coeffs)):
        if all(sum(coeffs[i] for i in block) == 0 and len({pattern[i] for i in block}) == 1
               for block in part):
            return True
    return False


def _coefficient_tuples(k: int, r: int = 4) -> list:
    seen = set()
    out = []
    for c in itertools.product(range(-k, k + 1), repeat=r):
        if sum(c) != 0 or not any(c):
            continue
        key = min(tuple(sorted(c)), tuple(sorted(-x for x in c)))
        if key in seen:
            continue
        seen.add(key)
        out.append(tuple(sorted(c, reverse=True)))
    return out


def nontrivial_solution(elements: Sequence[tuple], moduli: tuple, k: int = 3):
    """A nontrivial solution ``(coeffs, indices)`` of some bounded zero-sum relation, or ``None``."""
    elems = [tuple(e) for e in elements]
    if len(elems) > 200:
        raise TooLarge("exhaustive Sidon verification is limited to 200 elements")

    def comb(c1, x, c2, y):
        return tuple((c1 * a + c2 * b) % q for a, b, q in zip(x, y, moduli))

    for c in _coefficient_tuples(k):
        left = defaultdict(list)
        for i, x in enumerate(elems):
            for j, y in enumerate(elems):
                left[comb(c[0], x, c[1], y)].append((i, j))
        for u, x in enumerate(elems):
            for v, y in enumerate(elems):
                target = tuple((-s) % q for s, q in zip(comb(c[2], x, c[3], y), moduli))
                for i, j in left.get(target, ()):
                    idx = (i, j, u, v)
                    relabel = {}
                    pattern = tuple(relabel.setdefault(t, len(relabel)) for t in idx)
                    if not is_trivial_pattern(c, pattern):
                        return c, idx
    return None


def verify_kfold_sidon(A) -> bool:
    """Every zero-sum relation with coefficients in [-k, k] has only trivial solutions in A."""
    return nontrivial_solution(A.elements, A.group, A.fold) is None


def verify_exactly_one_copy(E: Iterable[tuple], H: Graph) -> bool:
    """Every edge of E lies in exactly one copy of H."""
    E = sorted({norm_edge(*e) for e in E})
    count = defaultdict(int)
    for copy in iter_copies(H, E):
        for e in copy:
            count[e] += 1
    return all(count[e] == 1 for e in E)
