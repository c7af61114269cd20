"""One-sided testers for homomorphism, subgraph-freeness and clique properties."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .core import NIL, ceil_snap
from .errors import BudgetError, RangeError
from .graphs import (Graph, find_copy, find_hom, is_bipartite, is_hom, minimal_non_hom,
                     norm_edge, odd_cycle, single_edge, square, triangle)

HOM, FREE, CLIQUE = "hom", "free", "clique"


@dataclass(frozen=True)
class LabeledSample:
    edge: object
    label: int

    def __post_init__(self):
        if self.edge is NIL:
            if self.label != 0:
                raise ValueError("nil carries label 0")
        else:
            a, b = self.edge
            object.__setattr__(self, "edge", norm_edge(a, b))
        if self.label not in (0, 1):
            raise ValueError("labels are bits")


def _labeled(samples: Iterable) -> list:
    out = []
    for s in samples:
        out.append(s if isinstance(s, LabeledSample) else LabeledSample(*s))
    return out


def split_samples(samples: Iterable) -> tuple:
    """Distinct positive and negative edges (nil samples dropped)."""
    pos, neg = set(), set()
    for s in _labeled(samples):
        if s.edge is NIL:
            continue
        (pos if s.label else neg).add(s.edge)
    return pos, neg


@dataclass(frozen=True)
class PropertySpec:
    """A graph property: homomorphism into H, H-freeness, or being a clique."""

    kind: str
    H: Graph | None = None

    def __post_init__(self):
        if self.kind not in (HOM, FREE, CLIQUE):
            raise ValueError(f"unknown property kind {self.kind!r}")
        if self.kind != CLIQUE:
            if self.H is None or self.H.t < 1:
                raise ValueError("pattern graph needs at least one edge")

    @classmethod
    def bipartite(cls) -> "PropertySpec":
        return cls(HOM, single_edge())

    @classmethod
    def hom(cls, H: Graph) -> "PropertySpec":
        return cls(HOM, H)

    @classmethod
    def free(cls, H: Graph) -> "PropertySpec":
        return cls(FREE, H)

    @classmethod
    def triangle_free(cls) -> "PropertySpec":
        return cls(FREE, triangle())

    @classmethod
    def square_free(cls) -> "PropertySpec":
        return cls(FREE, square())

    @classmethod
    def clique(cls) -> "PropertySpec":
        return cls(CLIQUE)

    @property
    def is_bipartite_hom(self) -> bool:
        return self.kind == HOM and is_bipartite(self.H.edges)

    @property
    def downward_closed(self) -> bool:
        return self.kind != CLIQUE

    def contains(self, edges: Iterable[tuple]) -> bool:
        """Exact membership of the edge set (isolated vertices are irrelevant)."""
        edges = {norm_edge(a, b) for a, b in edges}
        if self.kind == HOM:
            return is_hom(edges, self.H)
        if self.kind == FREE:
            return find_copy(self.H, edges) is None
        return is_clique(edges)

    @property
    def name(self) -> str:
        if self.kind == CLIQUE:
            return "clique"
        if self.kind == HOM and self.H.non_isolated() == single_edge():
            return "bip"
        if self.kind == FREE and self.H.non_isolated() == triangle():
            return "free:triangle"
        if self.kind == FREE and self.H.non_isolated() == square():
            return "free:square"
        return f"{self.kind}:{list(map(list, self.H.edges))}"


def is_clique(edges: Iterable[tuple]) -> bool:
    edges = {norm_edge(a, b) for a, b in edges}
    verts = {v for e in edges for v in e}
    return len(edges) == len(verts) * (len(verts) - 1) // 2


@dataclass(frozen=True)
class Verdict:
    decision: str
    witness: frozenset | None = None

    @property
    def rejected(self) -> bool:
        return self.decision == "reject"

    @classmethod
    def accept(cls) -> "Verdict":
        return cls("accept")

    @classmethod
    def reject(cls, witness) -> "Verdict":
        return cls("reject", frozenset(witness))


def _positive_witness(edges) -> frozenset:
    return frozenset(LabeledSample(e, 1) for e in edges)


def canonical_subgraph_tester(H: Graph, samples: Sequence) -> Verdict:
    """Reject iff the distinct positive samples contain a copy of H."""
    pos, _ = split_samples(samples)
    copy = find_copy(H, pos)
    return Verdict.accept() if copy is None else Verdict.reject(_positive_witness(copy))


def hom_tester(H: Graph, samples: Sequence) -> Verdict:
    """Reject iff the positive-sample graph has no homomorphism into H.

    Bipartite patterns reduce to a 2-coloring check whose witness is an odd
    cycle; other patterns use backtracking and a greedily minimized witness.
    """
    pos, _ = split_samples(samples)
    if is_bipartite(H.edges):
        cyc = odd_cycle(pos)
        return Verdict.accept() if cyc is None else Verdict.reject(_positive_witness(cyc))
    if find_hom(pos, H) is not None:
        return Verdict.accept()
    return Verdict.reject(_positive_witness(minimal_non_hom(pos, H)))


def clique_tester(samples: Sequence) -> Verdict:
    """Reject iff some negative edge {b, c} has positive edges at both ends.

    Together these form an alternating path {a,b},{b,c},{c,d} (a = d allowed).
    """
    pos, neg = split_samples(samples)
    at = {}
    for e in sorted(pos):
        for v in e:
            at.setdefault(v, e)
    for b, c in sorted(neg):
        if b in at and c in at:
            return Verdict.reject({LabeledSample(at[b], 1), LabeledSample((b, c), 0),
                                   LabeledSample(at[c], 1)})
    return Verdict.accept()


def make_tester(prop: PropertySpec) -> Callable[[Sequence], Verdict]:
    """The canonical tester of a property as a one-argument callable."""
    if prop.kind == HOM:
        return lambda samples: hom_tester(prop.H, samples)
    if prop.kind == FREE:
        return lambda samples: canonical_subgraph_tester(prop.H, samples)
    return clique_tester


# ---------------------------------------------------------------- budgets

def _check_eps(eps) -> None:
    if not 0 < eps < 1 and eps != 1:
        raise RangeError("epsilon must lie in (0, 1]")


def hom_sample_budget(n: int, k: int, eps) -> int:
    """``ceil((2 + n ln k) / eps)`` samples for the homomorphism tester."""
    _check_eps(eps)
    return ceil_snap((2 + n * math.log(k)) / float(eps))


def subgraph_sample_budget(H: Graph, n: int, eps) -> int:
    """Sample count for the canonical H-freeness tester.

    Trees with at least two edges use ``t * ceil(288 t^4 n^((t-1)/t) / eps)``;
    every other pattern uses ``ceil(18 t^2 C(n,2)^((t-1)/t) / eps)``.
    """
    _check_eps(eps)
    H = H.non_isolated()
    t = H.t
    if t < 1:
        raise RangeError("pattern needs at least one edge")
    if t >= 2 and H.is_tree():
        return t * ceil_snap(288 * t ** 4 * n ** ((t - 1) / t) / float(eps))
    pairs = n * (n - 1) // 2
    return ceil_snap(18 * t * t * pairs ** ((t - 1) / t) / float(eps))


def support_to_labeled_reduction(support_tester: Callable, m: int, eps,
                                 labeled_samples: Sequence) -> Verdict:
    """Run an m-sample support tester from ``ceil(18 m / eps)`` labeled samples.

    Accept outright when at most 9m labels are positive; otherwise split the
    first 9m positive edges into 9 batches of m and take the majority vote.
    ``support_tester`` takes a list of edges and returns a Verdict or a bool
    meaning reject.
    """
    _check_eps(eps)
    need = ceil_snap(18 * m / float(eps))
    samples = _labeled(labeled_samples)
    if len(samples) < need:
        raise BudgetError(f"need {need} labeled samples, got {len(samples)}")
    positives = [s.edge for s in samples[:need] if s.label == 1]
    if len(positives) <= 9 * m:
        return Verdict.accept()
    votes = 0
    witness = None
    for i in range(9):
        out = support_tester(positives[i * m:(i + 1) * m])
        rejected = out.rejected if isinstance(out, Verdict) else bool(out)
        votes += rejected
        if rejected and witness is None and isinstance(out, Verdict):
            witness = out.witness
    if votes >= 5:
        return Verdict("reject", witness)
    return Verdict.accept()
