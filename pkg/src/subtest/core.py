"""Edge distributions, seeded sampling and the sampling processes built on them.

Masses may be ``fractions.Fraction`` (exact, as produced by the generators) or
``float`` (as read from user JSON).  Every tolerance check uses ``TOL``.
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from types import MappingProxyType
from typing import Any, Callable, Hashable, Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import InvalidMass, ShapeError, TreeError, RangeError
from .graphs import norm_edge

TOL = 1e-12
MASK64 = (1 << 64) - 1

Number = Union[int, float, Fraction]


class _Nil:
    """The outside element drawn with the leftover mass of a sub-probability."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "nil"

    def __reduce__(self):
        return (_Nil, ())


NIL = _Nil()


# ---------------------------------------------------------------- seeding

def splitmix64(x: int) -> int:
    """One step of the SplitMix64 output function applied to state ``x``."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix_seed(master_seed: int, stream_index: int) -> int:
    """Derive the 64-bit seed of one stream.

    ``mix_seed(s, i) = splitmix64(splitmix64(s) XOR splitmix64(i))`` with all
    values reduced mod 2**64.
    """
    return splitmix64(splitmix64(master_seed & MASK64) ^ splitmix64(stream_index & MASK64))


@dataclass(frozen=True)
class RngSeed:
    """A stream of randomness identified by ``(master_seed, stream_index)``."""

    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if self.stream_index < 0:
            raise RangeError("stream_index must be nonnegative")

    @property
    def derived(self) -> int:
        return mix_seed(self.master_seed, self.stream_index)

    def spawn(self, index: int) -> "RngSeed":
        """Child stream; children of distinct indices are independent."""
        return RngSeed(self.derived, index)

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.derived))


def as_seed(seed: Union[RngSeed, int]) -> RngSeed:
    return seed if isinstance(seed, RngSeed) else RngSeed(int(seed), 0)


# ---------------------------------------------------------------- masses

def to_number(x: Any) -> Number:
    """Parse ``"num/den"`` strings to Fraction; keep ints/Fractions exact."""
    if isinstance(x, (Fraction, int)) and not isinstance(x, bool):
        return Fraction(x)
    if isinstance(x, float):
        return x
    if isinstance(x, str):
        if "/" in x or x.strip().lstrip("-").isdigit():
            return Fraction(x)
        return float(x)
    raise InvalidMass(f"unsupported mass value {x!r}")


def _check_masses(weights: Mapping) -> None:
    total = 0
    for key, w in weights.items():
        if w < 0:
            raise InvalidMass(f"negative mass {w} at {key!r}")
        total += w
    if total > 1 + TOL:
        raise InvalidMass(f"total mass {float(total)} exceeds 1")


def _check_kind(kind: str | None, key: Any) -> None:
    if kind is None:
        return
    if kind == "pair":
        ok = isinstance(key, tuple) and len(key) == 2 and key[0] < key[1]
    elif kind == "wedge":
        ok = (isinstance(key, tuple) and len(key) == 2 and isinstance(key[0], tuple)
              and len(key[0]) == 2 and key[0][0] < key[0][1] and key[1] not in key[0])
    elif kind == "grid":
        ok = isinstance(key, tuple) and len(key) == 2
    elif kind == "vertex":
        ok = isinstance(key, int)
    elif kind == "tuple":
        ok = isinstance(key, tuple)
    else:
        raise ValueError(f"unknown kind {kind!r}")
    if not ok:
        raise InvalidMass(f"index {key!r} is not a well-formed {kind}")


class MassFunction:
    """A sub-probability mass function on a finite, canonically ordered domain.

    Only positive masses are stored.  ``axes`` names the coordinates when the
    indices are tuples over ``[n]^V``.
    """

    __slots__ = ("_weights", "_domain", "_axes", "_kind", "_cdf")

    def __init__(self, weights: Mapping[Hashable, Number], domain: Iterable | None = None,
                 axes: Sequence | None = None, kind: str | None = None):
        clean = {}
        for key, w in weights.items():
            if not isinstance(w, (Fraction, float)):
                w = to_number(w)
            _check_kind(kind, key)
            if w != 0:
                clean[key] = w
        _check_masses(clean)
        if domain is not None:
            domain = tuple(sorted(domain))
            missing = set(clean) - set(domain)
            if missing:
                raise InvalidMass(f"indices outside domain: {sorted(missing)[:3]}")
        self._weights = MappingProxyType(dict(sorted(clean.items())))
        self._domain = domain
        self._axes = tuple(axes) if axes is not None else None
        self._kind = kind
        self._cdf = None

    @property
    def weights(self) -> Mapping:
        return self._weights

    @property
    def domain(self) -> tuple:
        return self._domain if self._domain is not None else tuple(self._weights)

    @property
    def axes(self):
        return self._axes

    @property
    def kind(self):
        return self._kind

    def __getitem__(self, key):
        return self._weights.get(key, 0)

    def __iter__(self):
        return iter(self._weights)

    def __len__(self):
        return len(self._weights)

    def items(self):
        return self._weights.items()

    def support(self) -> tuple:
        return tuple(self._weights)

    def total(self) -> Number:
        return sum(self._weights.values(), Fraction(0)) if self.is_exact else float(
            np.sum(list(self._weights.values()), dtype=float))

    @property
    def is_exact(self) -> bool:
        return all(isinstance(w, Fraction) for w in self._weights.values())

    @property
    def is_proper(self) -> bool:
        return abs(self.total() - 1) <= TOL

    def __eq__(self, other):
        if not isinstance(other, MassFunction):
            return NotImplemented
        return dict(self._weights) == dict(other._weights)

    def __hash__(self):
        return hash(tuple(self._weights.items()))

    def __repr__(self):
        body = ", ".join(f"{k!r}: {v}" for k, v in list(self._weights.items())[:6])
        more = ", ..." if len(self._weights) > 6 else ""
        return f"{type(self).__name__}({{{body}{more}}})"

    def cdf(self) -> np.ndarray:
        """Cumulative masses in canonical order, accumulated exactly when possible."""
        if self._cdf is None:
            if self.is_exact:
                acc = Fraction(0)
                cum = []
                for w in self._weights.values():
                    acc += w
                    cum.append(float(acc))
            else:
                cum = list(np.cumsum(np.array(list(self._weights.values()), dtype=float)))
            arr = np.array(cum, dtype=float)
            if len(arr) and abs(self.total() - 1) <= TOL:
                arr[-1] = 1.0  # proper distributions never emit nil
            self._cdf = arr
        return self._cdf


class EdgeDistribution(MassFunction):
    """Sub-probability weights over the 2-subsets ``(a, b)``, ``1 <= a < b <= n``."""

    __slots__ = ("_n",)

    def __init__(self, n: int, weights: Mapping[tuple, Number]):
        if n < 0:
            raise RangeError("n must be nonnegative")
        norm = {}
        for (a, b), w in weights.items():
            if a == b or not (1 <= a <= n and 1 <= b <= n):
                raise InvalidMass(f"pair {(a, b)} is not a 2-subset of [{n}]")
            key = (a, b) if a < b else (b, a)
            if key in norm:
                raise InvalidMass(f"duplicate pair {key}")
            norm[key] = w
        super().__init__(norm, kind="pair")
        self._n = n

    @property
    def n(self) -> int:
        return self._n

    @property
    def domain(self) -> tuple:
        return tuple(itertools.combinations(range(1, self._n + 1), 2))

    @classmethod
    def uniform(cls, n: int, edges: Iterable[tuple]) -> "EdgeDistribution":
        edges = sorted({norm_edge(*e) for e in edges})
        if not edges:
            return cls(n, {})
        w = Fraction(1, len(edges))
        return cls(n, {e: w for e in edges})


# ---------------------------------------------------------------- sampling

def draw_indices(f: MassFunction, m: int, seed: RngSeed) -> np.ndarray:
    """Positions into ``f.support()`` of ``m`` draws; ``-1`` encodes nil."""
    if m < 0:
        raise RangeError("m must be nonnegative")
    cdf = f.cdf()
    u = as_seed(seed).generator().random(m)
    idx = np.searchsorted(cdf, u, side="right")
    idx[idx >= len(cdf)] = -1
    return idx


def draw_samples(f: MassFunction, m: int, seed: RngSeed) -> tuple:
    """``m`` independent draws from ``f``; leftover mass yields ``NIL``."""
    support = f.support()
    return tuple(NIL if i < 0 else support[i] for i in draw_indices(f, m, seed))


class CountVector:
    """Nonnegative integer vector over a domain, stored sparsely."""

    __slots__ = ("_domain", "_counts", "_key")

    def __init__(self, counts: Mapping[Hashable, int], domain: Iterable | None = None):
        clean = {k: int(v) for k, v in counts.items() if v}
        if any(v < 0 for v in clean.values()):
            raise ValueError("counts must be nonnegative")
        self._domain = tuple(sorted(domain)) if domain is not None else None
        if self._domain is not None:
            extra = set(clean) - set(self._domain)
            if extra:
                raise ShapeError(f"indices outside domain: {sorted(extra)[:3]}")
        self._counts = MappingProxyType(dict(sorted(clean.items())))
        self._key = tuple(self._counts.items())

    @property
    def domain(self):
        return self._domain

    @property
    def counts(self) -> Mapping:
        return self._counts

    def __getitem__(self, key) -> int:
        return self._counts.get(key, 0)

    def support(self) -> tuple:
        return tuple(self._counts)

    def total(self) -> int:
        return sum(self._counts.values())

    def indicator(self) -> "IndicatorVector":
        return IndicatorVector({k: 1 for k in self._counts}, self._domain)

    def dominates(self, other: "CountVector") -> bool:
        """``self >= other`` coordinatewise."""
        return all(self[k] >= v for k, v in other._counts.items())

    def __eq__(self, other):
        if not isinstance(other, CountVector):
            return NotImplemented
        return self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __repr__(self):
        return f"{type(self).__name__}({dict(self._counts)})"


class IndicatorVector(CountVector):
    """A CountVector whose entries are bits."""

    __slots__ = ()

    def __init__(self, bits: Mapping[Hashable, int] | Iterable, domain: Iterable | None = None):
        if not isinstance(bits, Mapping):
            bits = {k: 1 for k in bits}
        if any(v not in (0, 1) for v in bits.values()):
            raise ValueError("indicator entries must be 0 or 1")
        super().__init__(bits, domain)


def process_S(f: MassFunction, m: int, seed: RngSeed, indicator: bool = False) -> CountVector:
    """Empirical count vector of ``m`` draws (indicator variant on request)."""
    idx = draw_indices(f, m, seed)
    support = f.support()
    counts = np.bincount(idx[idx >= 0], minlength=len(support)) if len(support) else []
    vec = {support[i]: int(c) for i, c in enumerate(counts) if c}
    if indicator:
        return IndicatorVector({k: 1 for k in vec}, f.domain)
    return CountVector(vec, f.domain)


VectorSource = Union[CountVector, Callable[[RngSeed], CountVector]]


def _realize(source: VectorSource, seed: RngSeed) -> CountVector:
    return source(seed) if callable(source) else source


def product_indicator(w1: CountVector, w2: CountVector) -> IndicatorVector:
    if w1.domain is not None and w2.domain is not None and w1.domain != w2.domain:
        raise ShapeError("indicator vectors live on different index sets")
    keys = set(w1.support()) & set(w2.support())
    return IndicatorVector({k: 1 for k in keys}, w1.domain or w2.domain)


def process_P(mu: VectorSource, nu: VectorSource, seed: RngSeed) -> IndicatorVector:
    """Entrywise product of two independently drawn indicator vectors.

    ``mu`` and ``nu`` are either fixed vectors or samplers ``seed -> vector``.
    """
    seed = as_seed(seed)
    return product_indicator(_realize(mu, seed.spawn(0)).indicator(),
                             _realize(nu, seed.spawn(1)).indicator())


def matrix_vector_indicator(w1: CountVector, w2: CountVector) -> IndicatorVector:
    if w1.domain is not None and w2.domain is not None:
        expected = tuple(itertools.product(w1.domain, repeat=2))
        if tuple(w2.domain) != expected:
            raise ShapeError("second vector must be indexed by pairs over the first's domain")
    active = set(w1.support())
    for key in w2.support():
        if not (isinstance(key, tuple) and len(key) == 2):
            raise ShapeError(f"index {key!r} is not a pair")
    out = {b: 1 for (a, b) in w2.support() if a in active}
    return IndicatorVector(out, w1.domain)


def process_J(mu: VectorSource, nu: VectorSource, seed: RngSeed) -> IndicatorVector:
    """Bit b is set iff some a has ``w1[a] = 1`` and ``w2[a, b] = 1``."""
    seed = as_seed(seed)
    return matrix_vector_indicator(_realize(mu, seed.spawn(0)).indicator(),
                                   _realize(nu, seed.spawn(1)).indicator())


@dataclass(frozen=True)
class DirectedRootedTree:
    """Edges point from child to parent; every vertex reaches ``root``."""

    vertices: tuple
    edges: tuple
    root: Hashable
    parent: Mapping = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        verts = tuple(self.vertices)
        edges = tuple(tuple(e) for e in self.edges)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "edges", edges)
        vset = set(verts)
        if len(vset) != len(verts):
            raise TreeError("duplicate vertex labels")
        if self.root not in vset:
            raise TreeError("root is not a vertex")
        if len(edges) != len(verts) - 1:
            raise TreeError("a rooted tree on |V| vertices has |V| - 1 edges")
        parent = {}
        for u, v in edges:
            if u not in vset or v not in vset or u == v:
                raise TreeError(f"bad edge {(u, v)}")
            if u in parent:
                raise TreeError(f"vertex {u!r} has two outgoing edges")
            parent[u] = v
        if self.root in parent:
            raise TreeError("the root has an outgoing edge")
        for v in verts:
            seen = set()
            while v != self.root:
                if v in seen:
                    raise TreeError("cycle: some vertex does not reach the root")
                seen.add(v)
                v = parent[v]
        object.__setattr__(self, "parent", MappingProxyType(parent))

    def children(self, v) -> list:
        return [u for u, w in self.edges if w == v]

    def postorder(self) -> list:
        """Vertices with every child listed before its parent."""
        out = []

        def visit(v):
            for c in self.children(v):
                visit(c)
            out.append(v)
        visit(self.root)
        return out


def process_J_tree(T: DirectedRootedTree, f: MassFunction, m: int, seed: RngSeed,
                   n: int | None = None) -> IndicatorVector:
    """Root labels b admitting an assignment y with y_root = b whose every
    tree edge (u, v) has (y_u, y_v) among the samples drawn for that edge.

    ``f`` is indexed by tuples aligned with ``f.axes`` (which must list the
    tree's vertices).  Each tree edge gets ``m`` draws from the pairwise
    marginal; realizable label sets are propagated from leaves to the root.
    """
    if f.axes is None or set(f.axes) != set(T.vertices) or len(f.axes) != len(T.vertices):
        raise TreeError("mass function axes must match the tree's vertices")
    seed = as_seed(seed)
    seen: dict = {}
    for i, (u, v) in enumerate(T.edges):
        g = marginal(f, (u, v))
        pos = g.axes.index(u), g.axes.index(v)
        pairs = set()
        for x in draw_samples(g, m, seed.spawn(i)):
            if x is not NIL:
                pairs.add((x[pos[0]], x[pos[1]]))
        seen[(u, v)] = pairs
    realizable: dict = {}
    for v in T.postorder():
        labels = None
        for c in T.children(v):
            reach = {b for (a, b) in seen[(c, v)] if realizable[c] is None or a in realizable[c]}
            labels = reach if labels is None else labels & reach
        realizable[v] = labels  # None: leaf, every label realizable
    root_labels = realizable[T.root] or set()
    domain = range(1, n + 1) if n is not None else None
    return IndicatorVector({b: 1 for b in root_labels}, domain)


def process_W(p: EdgeDistribution, m: int, seed: RngSeed) -> CountVector:
    """Wedge counts ``w[({a,c}), b] = x_ab * x_bc`` from the edge counts x."""
    x = process_S(p, m, seed)
    return wedge_counts(x)


def wedge_counts(x: CountVector) -> CountVector:
    nbrs = defaultdict(dict)
    for (a, b), c in x.counts.items():
        nbrs[a][b] = c
        nbrs[b][a] = c
    out = {}
    for b, nb in nbrs.items():
        for a, c in itertools.combinations(sorted(nb), 2):
            out[((a, c), b)] = nb[a] * nb[c]
    return CountVector(out)


# ---------------------------------------------------------------- transforms

def epsilon_prune(f: MassFunction, eps: Number, n: int | None = None) -> MassFunction:
    """Zero every atom below ``eps / n``; removes less than ``eps`` mass."""
    if n is None:
        n = len(f.domain)
    if n == 0:
        return f
    thr = eps / n if isinstance(eps, float) else Fraction(eps) / n
    kept = {k: w for k, w in f.items() if w >= thr}
    return MassFunction(kept, domain=f._domain, axes=f.axes, kind=f.kind)


def marginal(f: MassFunction, U: Iterable) -> MassFunction:
    """Sum ``f`` over the coordinates outside ``U``; keys stay tuples ordered by ``f.axes``."""
    if f.axes is None:
        raise KeyError("mass function has no named axes")
    U = set(U)
    if not U:
        raise KeyError("U must be nonempty")
    missing = U - set(f.axes)
    if missing:
        raise KeyError(f"coordinates {sorted(map(str, missing))} not in axes")
    keep = [i for i, a in enumerate(f.axes) if a in U]
    out: dict = defaultdict(int)
    for y, w in f.items():
        out[tuple(y[i] for i in keep)] += w
    return MassFunction(dict(out), axes=[f.axes[i] for i in keep], kind="tuple")


def degree_mass(p: EdgeDistribution) -> MassFunction:
    """``deg(a) = 1/2 * sum_b p_ab``; sums to the total edge mass."""
    deg: dict = defaultdict(int)
    for (a, b), w in p.items():
        half = w / 2
        deg[a] += half
        deg[b] += half
    return MassFunction(dict(deg), domain=range(1, p.n + 1), kind="vertex")


# ---------------------------------------------------------------- parameters

@dataclass(frozen=True)
class BirthdayParams:
    epsilon: float
    delta: float
    C: float = 1.0
    beta: float = 0.5
    gamma: float = 0.5
    k: int = 1
    t: int = 1

    def __post_init__(self):
        for name in ("epsilon", "delta", "beta", "gamma"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise RangeError(f"{name} must lie in (0, 1)")
        if self.C <= 0 or self.k < 1 or self.t < 1:
            raise RangeError("C must be positive and k, t at least 1")

    def tree_bipartite_ok(self) -> list:
        """Violated hypotheses of the two-process birthday bound (empty if none)."""
        bad = []
        if self.beta + self.gamma > 1:
            bad.append("beta + gamma > 1")
        if self.gamma * self.delta * self.epsilon * self.C < 16:
            bad.append("gamma * delta * epsilon * C < 16")
        return bad

    def tree_birthday_ok(self) -> list:
        bad = []
        if self.delta * self.epsilon * self.C < 16 * self.k:
            bad.append("delta * epsilon * C < 16k")
        if self.k < self.t:
            bad.append("k < t")
        return bad

    def sample_sizes(self, n: int) -> tuple:
        """``(m1, m2, m3) = ceil(C n^(1-beta)), ceil(C n^(1-gamma)), ceil(C n^(1-beta-gamma))``."""
        c = self.C
        return (ceil_snap(c * n ** (1 - self.beta)), ceil_snap(c * n ** (1 - self.gamma)),
                ceil_snap(c * n ** (1 - self.beta - self.gamma)))


def ceil_snap(x: float, rel: float = 1e-9) -> int:
    """``ceil`` that treats values within ``rel`` of an integer as that integer."""
    if isinstance(x, Fraction):
        return -((-x.numerator) // x.denominator)
    r = round(x)
    if abs(x - r) <= rel * max(1.0, abs(x)):
        return int(r)
    return int(np.ceil(x))
