"""Hard-instance families: progression-free and Sidon sets, packings of
triangles and squares, two-fold blow-ups with parity selectors, and the yes/no
gadget distributions for every property."""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping

from .core import EdgeDistribution, as_seed
from .errors import ConstructionBug, GenerationFailed, NotAPacking, NotSidonEnough, RangeError
from .graphs import (Graph, iter_squares, iter_triangles, norm_edge,
                     square, triangle)
from .oracles import (DEFAULT_LIMITS, RandomizedFamily, exact_distance, nontrivial_solution,
                      verify_3ap_free, verify_exactly_one_copy)
from .testers import PropertySpec

EXHAUSTIVE_BEHREND_MAX = 30


# ---------------------------------------------------------------- instances

@dataclass(frozen=True)
class TestInstance:
    """A labeled edge distribution: f is 1 exactly on ``edges``."""

    __test__ = False  # keep pytest from collecting this class

    n: int
    edges: frozenset
    mu: EdgeDistribution
    ground_truth: str
    certified_distance: Fraction | None
    property: PropertySpec
    provenance: Mapping = field(default_factory=dict)

    def label(self, e) -> int:
        return int(norm_edge(*e) in self.edges)

    def labeled_support(self) -> tuple:
        """Support of mu in canonical order with the matching labels."""
        support = self.mu.support()
        return support, tuple(self.label(e) for e in support)

    def exact_distance(self, limits=DEFAULT_LIMITS):
        return exact_distance(self.edges, self.mu, self.property, self.n, limits=limits)


def _verify_member(inst: TestInstance) -> None:
    if not inst.property.contains(inst.edges):
        raise ConstructionBug(f"{inst.provenance.get('generator')} yes-instance is not in the property")


def _maybe_check_distance(inst: TestInstance) -> str:
    cap = DEFAULT_LIMITS.for_property(inst.property)
    if inst.n > cap:
        return "structural"
    if inst.exact_distance() < inst.certified_distance:
        raise ConstructionBug("no-instance is closer than its certified distance")
    return "exact"


# ---------------------------------------------------------------- 3-AP-free sets

@lru_cache(maxsize=None)
def _max_3ap_free(n: int) -> tuple:
    best: list = []
    chosen: list = []
    members: set = set()

    def rec(x):
        nonlocal best
        if len(chosen) + (n - x + 1) <= len(best):
            return
        if x > n:
            best = list(chosen)
            return
        # x closes a progression y, (x + y) / 2, x only if 2m - y = x for members m, y
        if not any((x + y) % 2 == 0 and (x + y) // 2 in members for y in chosen):
            chosen.append(x)
            members.add(x)
            rec(x + 1)
            chosen.pop()
            members.discard(x)
        rec(x + 1)

    rec(1)
    return tuple(best)


def _sphere_digit_set(n: int) -> tuple:
    best: tuple = ()
    for d in range(3, n + 2):
        k = 1
        while d ** k < n:
            k += 1
        top = (d - 1) // 2
        classes = defaultdict(list)
        for digits in itertools.product(range(top + 1), repeat=k):
            x = sum(v * d ** i for i, v in enumerate(digits))
            if x + 1 <= n:
                classes[sum(v * v for v in digits)].append(x + 1)
        for members in classes.values():
            if len(members) > len(best):
                best = tuple(sorted(members))
    return best


def _greedy_extend(A: Iterable[int], n: int) -> tuple:
    members = set(A)
    for x in range(1, n + 1):
        if x in members:
            continue
        # x would be an endpoint (x, m, 2m - x) or the midpoint of (a, x, 2x - a)
        if any(2 * m - x in members for m in members) or any(2 * x - a in members for a in members):
            continue
        if any((x + a) % 2 == 0 and (x + a) // 2 in members for a in members):
            continue
        members.add(x)
    return tuple(sorted(members))


def behrend_set(n: int) -> tuple:
    """A large subset of [n] with no 3-term arithmetic progression.

    Exhaustive maximum for ``n <= 30``; beyond that the digit-sphere
    construction (base-d digits below d/2 on a common sphere), best over d,
    then greedily extended by every integer that keeps it progression-free.
    """
    if n < 1:
        raise RangeError("n must be positive")
    A = _max_3ap_free(n) if n <= EXHAUSTIVE_BEHREND_MAX else _greedy_extend(_sphere_digit_set(n), n)
    if not verify_3ap_free(A):
        raise ConstructionBug("progression-free set verification failed")
    return A


# ---------------------------------------------------------------- packings

def ruzsa_szemeredi_graph(n: int, B: Iterable[int]) -> tuple:
    """Triangles ``{x, x+a, x+2a}`` across classes X=[n], Y=[2n], Z=[3n].

    Vertex ids: X -> 1..n, Y -> n+1..3n, Z -> 3n+1..6n.
    """
    B = sorted(set(B))
    if any(not 1 <= a <= n for a in B):
        raise RangeError("B must be a subset of [n]")
    if not verify_3ap_free(B):
        raise RangeError("B must be free of 3-term progressions")
    edges = set()
    for x in range(1, n + 1):
        for a in B:
            X, Y, Z = x, n + x + a, 3 * n + x + 2 * a
            edges.update({(X, Y), (Y, Z), (X, Z)})
    edges = tuple(sorted(edges))
    if len(edges) != 3 * n * len(B) or not verify_exactly_one_copy(edges, triangle()):
        raise ConstructionBug("triangle packing verification failed")
    return edges


def blowup_vertex(a: int, t: int) -> int:
    """Id of ``(a, t)`` in ``[n] x F2``: ``2a - 1 + t``."""
    return 2 * a - 1 + t


def blowup(E: Iterable[tuple], y: "F2Selector | Mapping") -> tuple:
    """``{(a, t), (b, y_ab + t)}`` for every edge ab of E and t in F2."""
    values = y.values if isinstance(y, F2Selector) else y
    out = []
    for a, b in sorted(norm_edge(*e) for e in E):
        bit = values[(a, b)]
        for t in (0, 1):
            out.append(norm_edge(blowup_vertex(a, t), blowup_vertex(b, (bit + t) % 2)))
    return tuple(sorted(out))


@dataclass(frozen=True)
class F2Selector:
    values: Mapping[tuple, int]
    pattern: str
    parity: str

    @property
    def target(self) -> int:
        """Required F2 sum per copy: 1 on the yes side, 0 on the no side."""
        return 1 if self.parity == "yes" else 0

    def check(self, E: Iterable[tuple]) -> bool:
        copies = _pattern_copies(E, self.pattern)
        return all(sum(self.values[e] for e in c) % 2 == self.target for c in copies)


def _pattern_copies(E, pattern) -> list:
    E = sorted(norm_edge(*e) for e in E)
    if pattern == "triangle":
        return list(iter_triangles(E))
    if pattern == "square":
        return list(iter_squares(E))
    raise ValueError(f"unknown pattern {pattern!r}")


def selector_solve(E: Iterable[tuple], pattern: str, parity: str, seed) -> F2Selector:
    """Uniform bits on E meeting the parity on every copy of the pattern.

    Within each copy all edges but the largest get fair coins and the last
    edge fixes the sum.
    """
    if parity not in ("yes", "no"):
        raise ValueError("parity is 'yes' or 'no'")
    E = sorted({norm_edge(*e) for e in E})
    copies = _pattern_copies(E, pattern)
    count = defaultdict(int)
    for c in copies:
        for e in c:
            count[e] += 1
    bad = [e for e in E if count[e] != 1]
    if bad:
        raise NotAPacking(f"edge {bad[0]} lies in {count[bad[0]]} copies")
    target = 1 if parity == "yes" else 0
    gen = as_seed(seed).generator()
    values = {}
    for c in sorted(copies, key=sorted):
        es = sorted(c)
        bits = [int(b) for b in gen.integers(0, 2, size=len(es) - 1)]
        for e, b in zip(es, bits):
            values[e] = b
        values[es[-1]] = (target - sum(bits)) % 2
    sel = F2Selector(values, pattern, parity)
    if not sel.check(E):
        raise ConstructionBug("selector constraints not met")
    return sel


def _blowup_pair(E, base_n, pattern, prop, seed, certified, generator, params):
    seed = as_seed(seed)
    out = []
    for side, idx in (("yes", 0), ("no", 1)):
        y = selector_solve(E, pattern, side, seed.spawn(idx))
        R = blowup(E, y)
        inst = TestInstance(2 * base_n, frozenset(R), EdgeDistribution.uniform(2 * base_n, R), side,
                            None if side == "yes" else certified, prop,
                            {"generator": generator, **params, "seed": seed.master_seed,
                             "stream": seed.stream_index, "side": side})
        out.append(inst)
    yes, no = out
    _verify_member(yes)
    copies = _pattern_copies(no.edges, pattern)
    if len(copies) * len(prop.H.edges) != len(no.edges) or not verify_exactly_one_copy(no.edges, prop.H):
        raise ConstructionBug("no-instance is not an edge-disjoint union of copies")
    no.provenance["distance_check"] = _maybe_check_distance(no)
    return yes, no


def triangle_hardness_pair(n: int, seed) -> tuple:
    """Blow-ups of the triangle packing on ``12 n`` vertices (yes, no)."""
    if n < 1:
        raise RangeError("n must be positive")
    B = behrend_set(n)
    E = ruzsa_szemeredi_graph(n, B)
    return _blowup_pair(E, 6 * n, "triangle", PropertySpec.triangle_free(), seed, Fraction(1, 3),
                        "triangle", {"n": n, "behrend": list(B)})


# ---------------------------------------------------------------- Sidon sets

@dataclass(frozen=True)
class SidonSet:
    group: tuple
    elements: tuple
    fold: int = 3

    def __len__(self):
        return len(self.elements)


def _is_prime(p: int) -> bool:
    return p >= 2 and all(p % d for d in range(2, math.isqrt(p) + 1))


def _sidon_equations() -> list:
    """Coefficient vectors of x1+x2+x3 = 3x4 and d1 x1 + d2 x2 = (d1+d2) x3."""
    eqs = {(1, 1, 1, -3)}
    for d1 in range(1, 21):
        for d2 in range(d1, 21):
            g = math.gcd(d1, d2)
            eqs.add((d1 // g, d2 // g, -(d1 + d2) // g))
    return sorted(eqs)


def _creates_solution(S: list, x: int, p: int, coeffs: tuple) -> bool:
    """Whether adding x to S creates a nontrivial solution mod p involving x."""
    from .oracles import is_trivial_pattern
    pool = S + [x]
    r = len(coeffs)
    for idx in itertools.product(range(len(pool)), repeat=r):
        if len(pool) - 1 not in idx:
            continue
        if sum(c * pool[i] for c, i in zip(coeffs, idx)) % p:
            continue
        relabel = {}
        pattern = tuple(relabel.setdefault(i, len(relabel)) for i in idx)
        if not is_trivial_pattern(coeffs, pattern):
            return True
    return False


def _solution_free_set(p: int, coeffs: tuple, gen) -> list:
    S: list = []
    for x in (int(v) for v in gen.permutation(p)):
        if not _creates_solution(S, x, p, coeffs):
            S.append(x)
    return S


def _parabola(A0: Iterable[int], p: int) -> tuple:
    return tuple(sorted((a % p, (a * a) % p) for a in A0))


def threefold_sidon_set(p: int, seed, retries: int = 32, augment: bool = True) -> SidonSet:
    """A 3-fold Sidon set ``{(a, a^2)}`` in F_p^2 for ``p = +-5 mod 12``.

    Each attempt intersects random translates of greedy solution-free sets,
    one per linear relation, then (``augment``) greedily adds elements of F_p
    while the parabola image still verifies.  The first nonempty verified
    set is returned.
    """
    if not _is_prime(p) or p % 12 not in (5, 7):
        raise RangeError("p must be a prime congruent to 5 or 7 mod 12")
    seed = as_seed(seed)
    eqs = _sidon_equations()
    for attempt in range(retries):
        gen = seed.spawn(attempt).generator()
        A0 = set(range(p))
        for coeffs in eqs:
            S = _solution_free_set(p, coeffs, gen)
            t = int(gen.integers(0, p))
            A0 &= {(s + t) % p for s in S}
            if not A0:
                break
        if not A0:
            A0 = {int(gen.integers(0, p))}
        A0 = sorted(A0)
        if nontrivial_solution(_parabola(A0, p), (p, p), 3) is not None:
            continue
        if augment:
            for x in (int(v) for v in gen.permutation(p)):
                if x in A0:
                    continue
                trial = A0 + [x]
                if nontrivial_solution(_parabola(trial, p), (p, p), 3) is None:
                    A0 = trial
        return SidonSet((p, p), _parabola(A0, p), 3)
    raise GenerationFailed(f"no verified 3-fold Sidon set after {retries} attempts")


def cyclic_sidon_set(n: int, seed) -> SidonSet:
    """Greedy 3-fold Sidon subset of Z_n in seeded random order (verified)."""
    gen = as_seed(seed).generator()
    A: list = []
    for x in (int(v) for v in gen.permutation(n)):
        trial = A + [(x,)]
        if nontrivial_solution(trial, (n,), 3) is None:
            A = trial
    return SidonSet((n,), tuple(sorted(A)), 3)


def _group_elements(moduli: tuple) -> list:
    return list(itertools.product(*(range(q) for q in moduli)))


C4_PART_PAIRS = ((1, 3), (1, 4), (2, 3), (2, 4))


def tv_c4_graph(A: SidonSet) -> tuple:
    """Square packing on ``Gamma x [4]``: (x, i) ~ (y, j) iff y - x = (j - i) a.

    Vertex ``(x, i)`` gets id ``4 * rank(x) + i`` where ``rank`` is the
    position of x in the lexicographic element order.
    """
    moduli = A.group
    order = len(_group_elements(moduli))
    if any(math.gcd(q, 6) != 1 for q in moduli):
        raise RangeError("group moduli must be coprime to 6")
    elems = _group_elements(moduli)
    rank = {x: r for r, x in enumerate(elems)}
    edges = set()
    for x in elems:
        for a in A.elements:
            for i, j in C4_PART_PAIRS:
                y = tuple((xi + (j - i) * ai) % q for xi, ai, q in zip(x, a, moduli))
                edges.add(norm_edge(4 * rank[x] + i, 4 * rank[y] + j))
    edges = tuple(sorted(edges))
    if len(edges) != 4 * order * len(A) or not verify_exactly_one_copy(edges, square()):
        raise NotSidonEnough("square packing verification failed")
    return edges


def square_hardness_pair(n: int, seed) -> tuple:
    """Blow-ups of the square packing over Z_n on ``8 n`` vertices (yes, no)."""
    if n < 1 or math.gcd(n, 6) != 1:
        raise RangeError("n must be coprime to 6")
    seed = as_seed(seed)
    A = cyclic_sidon_set(n, seed.spawn(2))
    E = tv_c4_graph(A)
    return _blowup_pair(E, 4 * n, "square", PropertySpec.square_free(), seed, Fraction(1, 4),
                        "square", {"n": n, "sidon": [list(a) for a in A.elements]})


# ---------------------------------------------------------------- bipartite pair

def bipartite_vertex(a: int, i: int, t: int, k: int) -> int:
    """Id of ``(a, i, t)`` in ``[n] x [k] x F2``."""
    return ((a - 1) * k + (i - 1)) * 2 + t + 1


def bipartite_edges(x: Mapping[tuple, int], n: int, k: int, side: str) -> tuple:
    shift = 1 if side == "yes" else 0
    out = set()
    for a in range(1, n + 1):
        for b in range(1, n + 1):
            for i, j in itertools.combinations(range(1, k + 1), 2):
                for t in (0, 1):
                    u = bipartite_vertex(a, i, (t + x[(a, i)]) % 2, k)
                    v = bipartite_vertex(b, j, (t + x[(b, j)] + shift) % 2, k)
                    out.add(norm_edge(u, v))
    return tuple(sorted(out))


def bipartite_hardness_pair(n: int, k: int, seed) -> tuple:
    """Two complete regular k-partite graphs (no) versus a bipartite twin (yes)."""
    if k < 3 or n < 1:
        raise RangeError("need k >= 3 and n >= 1")
    seed = as_seed(seed)
    gen = seed.generator()
    bits = gen.integers(0, 2, size=n * k)
    x = {(a, i): int(bits[(a - 1) * k + (i - 1)]) for a in range(1, n + 1) for i in range(1, k + 1)}
    N = 2 * k * n
    prop = PropertySpec.bipartite()
    out = []
    for side in ("yes", "no"):
        E = bipartite_edges(x, n, k, side)
        if len(E) != (k - 1) * k * n * n:
            raise ConstructionBug("unexpected edge count")
        out.append(TestInstance(N, frozenset(E), EdgeDistribution.uniform(N, E), side,
                                None if side == "yes" else Fraction(1, k * k), prop,
                                {"generator": "bipartite", "n": n, "k": k, "seed": seed.master_seed,
                                 "stream": seed.stream_index, "side": side,
                                 "x": [x[(a, i)] for a in range(1, n + 1) for i in range(1, k + 1)]}))
    yes, no = out
    _verify_member(yes)
    no.provenance["distance_check"] = _maybe_check_distance(no)
    return yes, no


def bipartite_family(n: int, k: int, side: str) -> RandomizedFamily:
    """The yes or no mixture over every randomizer x in F2^(n x k)."""
    N = 2 * k * n
    keys = [(a, i) for a in range(1, n + 1) for i in range(1, k + 1)]

    def member(bits):
        x = dict(zip(keys, bits))
        return EdgeDistribution.uniform(N, bipartite_edges(x, n, k, side))

    def members():
        w = Fraction(1, 2 ** len(keys))
        for bits in itertools.product((0, 1), repeat=len(keys)):
            yield w, member(bits)

    def sample(gen):
        return member(tuple(int(b) for b in gen.integers(0, 2, size=len(keys))))

    return RandomizedFamily(2 ** len(keys), members, sample, f"bipartite-{side}")


def selector_family(E: Iterable[tuple], pattern: str, side: str, n: int) -> RandomizedFamily:
    """The mixture over all selectors meeting the parity on every copy."""
    E = sorted({norm_edge(*e) for e in E})
    copies = [sorted(c) for c in sorted(_pattern_copies(E, pattern), key=sorted)]
    target = 1 if side == "yes" else 0
    free_bits = sum(len(c) - 1 for c in copies)

    def member(bits):
        it = iter(bits)
        values = {}
        for c in copies:
            head = [next(it) for _ in c[:-1]]
            values.update(zip(c[:-1], head))
            values[c[-1]] = (target - sum(head)) % 2
        R = blowup(E, values)
        return EdgeDistribution.uniform(2 * n, R)

    def members():
        w = Fraction(1, 2 ** free_bits)
        for bits in itertools.product((0, 1), repeat=free_bits):
            yield w, member(bits)

    def sample(gen):
        return member([int(b) for b in gen.integers(0, 2, size=free_bits)])

    return RandomizedFamily(2 ** free_bits, members, sample, f"{pattern}-{side}")


# ---------------------------------------------------------------- tree gadgets

def tree_gadget(H: Graph, side: int) -> Graph:
    """Disjoint copies of (V, T') over subsets T' of H's edges with
    ``|T| - |T'|`` even (side 0) or odd (side 1), on ``2^(t-1) (t+1)`` vertices."""
    H = H.non_isolated()
    verts = list(H.vertices)
    pos = {v: i for i, v in enumerate(verts)}
    size = len(verts)
    edges = []
    copies = 0
    t = H.t
    for r in range(t + 1):
        for sub in itertools.combinations(H.edges, r):
            if (t - r) % 2 != side:
                continue
            off = copies * size
            edges.extend(norm_edge(off + pos[a] + 1, off + pos[b] + 1) for a, b in sub)
            copies += 1
    return Graph.from_edges(edges, range(1, copies * size + 1))


def tree_hardness_instance(H: Graph, n: int, side: int, seed) -> TestInstance:
    """n randomly relabeled copies of the side-0 or side-1 gadget of tree H."""
    H = H.non_isolated()
    t = H.t
    if t < 2 or not H.is_tree():
        raise RangeError("H must be a tree with at least two edges")
    if side not in (0, 1):
        raise RangeError("side is 0 (far) or 1 (free)")
    gadget = tree_gadget(H, side)
    r = len(gadget.vertices)
    if r != 2 ** (t - 1) * (t + 1) or len(gadget.edges) != 2 ** (t - 2) * t:
        raise ConstructionBug("gadget size mismatch")
    seed = as_seed(seed)
    gen = seed.generator()
    perms = []
    edges = set()
    for i in range(n):
        perm = [int(v) for v in gen.permutation(r)]
        perms.append(perm)
        for a, b in gadget.edges:
            edges.add(norm_edge(i * r + perm[a - 1] + 1, i * r + perm[b - 1] + 1))
    N = r * n
    truth = "yes" if side == 1 else "no"
    certified = None if side == 1 else Fraction(1, 2 ** (t - 2) * t)
    inst = TestInstance(N, frozenset(edges), EdgeDistribution.uniform(N, edges), truth, certified,
                        PropertySpec.free(H),
                        {"generator": "tree", "n": n, "side": side, "H": [list(e) for e in H.edges],
                         "seed": seed.master_seed, "stream": seed.stream_index, "permutations": perms})
    if side == 1:
        _verify_member(inst)
    else:
        inst.provenance["distance_check"] = _maybe_check_distance(inst)
    return inst


# ---------------------------------------------------------------- clique gadgets

CLIQUE_GADGET = {"yes": ((1, 2), (2, 3), (4, 5), (5, 6)), "no": ((1, 2), (2, 3), (3, 4), (5, 6))}


def clique_hardness_instance(n: int, side: str, seed) -> TestInstance:
    """n gadgets on 6 vertices each, labeled through random bijections.

    Yes: f is the clique on the vertices labeled 1, 2, 4, 5 across all gadgets.
    No: f is 1 exactly on the pairs labeled 12 and 34.  In both, mu is uniform
    on the four listed gadget pairs.
    """
    if n < 1:
        raise RangeError("n must be positive")
    if side not in ("yes", "no"):
        raise RangeError("side is 'yes' or 'no'")
    seed = as_seed(seed)
    gen = seed.generator()
    perms = []
    support = []
    chosen = []
    positives = set()
    for i in range(n):
        perm = [int(v) for v in gen.permutation(6)]
        perms.append(perm)
        vertex = {lab: 6 * i + perm[lab - 1] + 1 for lab in range(1, 7)}
        support.extend(norm_edge(vertex[a], vertex[b]) for a, b in CLIQUE_GADGET[side])
        if side == "yes":
            chosen.extend(vertex[lab] for lab in (1, 2, 4, 5))
        else:
            positives.add(norm_edge(vertex[1], vertex[2]))
            positives.add(norm_edge(vertex[3], vertex[4]))
    if side == "yes":
        positives = set(itertools.combinations(sorted(chosen), 2))
    N = 6 * n
    inst = TestInstance(N, frozenset(positives), EdgeDistribution.uniform(N, support), side,
                        None if side == "yes" else Fraction(1, 4), PropertySpec.clique(),
                        {"generator": "clique", "n": n, "side": side, "seed": seed.master_seed,
                         "stream": seed.stream_index, "permutations": perms})
    if side == "yes":
        _verify_member(inst)
    else:
        inst.provenance["distance_check"] = _maybe_check_distance(inst)
    return inst


# ---------------------------------------------------------------- registry

def family_instance(family: str, n: int, side: str, seed, **params) -> TestInstance:
    """Uniform entry point: one instance of a named family."""
    want = 0 if side == "yes" else 1
    if family == "triangle":
        return triangle_hardness_pair(n, seed)[want]
    if family == "square":
        return square_hardness_pair(n, seed)[want]
    if family == "bipartite":
        return bipartite_hardness_pair(n, params.get("k", 3), seed)[want]
    if family == "tree":
        H = params.get("H") or Graph.from_edges([(1, 2), (2, 3)])
        return tree_hardness_instance(H, n, 1 if side == "yes" else 0, seed)
    if family == "clique":
        return clique_hardness_instance(n, side, seed)
    raise ValueError(f"unknown family {family!r}")


FAMILIES = ("triangle", "square", "bipartite", "tree", "clique")
