"""Small-graph combinatorics shared by testers, generators and oracles.

Graphs are edge collections of normalized pairs ``(a, b)`` with ``a < b``.
Every search visits candidate vertices in ascending order, so the first copy
or cycle found is deterministic.
"""

from __future__ import annotations

import itertools
from collections import defaultdict, deque
from dataclasses import dataclass
from typing import Iterable, Iterator


def norm_edge(a, b) -> tuple:
    return (a, b) if a < b else (b, a)


def adjacency(edges: Iterable[tuple]) -> dict:
    adj = defaultdict(set)
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    return adj


@dataclass(frozen=True)
class Graph:
    """A simple graph on explicit vertex labels (isolated vertices allowed)."""

    vertices: tuple
    edges: tuple

    @classmethod
    def from_edges(cls, edges: Iterable[tuple], vertices: Iterable = ()) -> "Graph":
        es = sorted({norm_edge(a, b) for a, b in edges})
        if any(a == b for a, b in es):
            raise ValueError("self-loops are not allowed")
        vs = set(vertices)
        for a, b in es:
            vs.update((a, b))
        return cls(tuple(sorted(vs)), tuple(es))

    @property
    def t(self) -> int:
        return len(self.edges)

    def adjacency(self) -> dict:
        adj = {v: set() for v in self.vertices}
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        return adj

    def is_connected(self) -> bool:
        if not self.vertices:
            return True
        adj = self.adjacency()
        seen = {self.vertices[0]}
        stack = [self.vertices[0]]
        while stack:
            for w in adj[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == len(self.vertices)

    def is_tree(self) -> bool:
        return self.t == len(self.vertices) - 1 and self.is_connected()

    def non_isolated(self) -> "Graph":
        return Graph.from_edges(self.edges)


def triangle() -> Graph:
    return Graph.from_edges([(1, 2), (2, 3), (1, 3)])


def square() -> Graph:
    return Graph.from_edges([(1, 2), (2, 3), (3, 4), (1, 4)])


def single_edge() -> Graph:
    return Graph.from_edges([(1, 2)])


def path(t: int) -> Graph:
    return Graph.from_edges([(i, i + 1) for i in range(1, t + 1)])


def complete(k: int) -> Graph:
    return Graph.from_edges(itertools.combinations(range(1, k + 1), 2))


def star(t: int) -> Graph:
    return Graph.from_edges([(1, i) for i in range(2, t + 2)])


def is_triangle(H: Graph) -> bool:
    return len(H.vertices) == 3 and H.t == 3


def is_square(H: Graph) -> bool:
    if len(H.vertices) != 4 or H.t != 4:
        return False
    return all(len(nb) == 2 for nb in H.adjacency().values()) and H.is_connected()


# ---------------------------------------------------------------- copies

def iter_triangles(edges: Iterable[tuple]) -> Iterator[frozenset]:
    """Triangles as edge sets, ordered by their sorted vertex triples."""
    adj = adjacency(edges)
    for a in sorted(adj):
        for b in sorted(x for x in adj[a] if x > a):
            for c in sorted(x for x in adj[a] & adj[b] if x > b):
                yield frozenset({(a, b), (b, c), (a, c)})


def iter_squares(edges: Iterable[tuple]) -> Iterator[frozenset]:
    """4-cycles as edge sets; each cycle once, smallest vertex first."""
    adj = adjacency(edges)
    for a in sorted(adj):
        for b, d in itertools.combinations(sorted(x for x in adj[a] if x > a), 2):
            for c in sorted(x for x in adj[b] & adj[d] if x > a and x != a):
                yield frozenset({norm_edge(a, b), norm_edge(b, c), norm_edge(c, d), norm_edge(a, d)})


def all_squares(vertices: Iterable) -> Iterator[frozenset]:
    """Every square on the vertex set, i.e. the complete-graph 4-cycles."""
    vs = sorted(vertices)
    return iter_squares(itertools.combinations(vs, 2))


def iter_copies(H: Graph, edges: Iterable[tuple]) -> Iterator[frozenset]:
    """Distinct edge sets of (not necessarily induced) copies of H in ``edges``.

    Triangles and squares use dedicated enumeration; other patterns use a
    backtracking embedding search with candidates in ascending id order.
    Isolated vertices of H are ignored.
    """
    if H.t == 0:
        return iter(())
    H = H.non_isolated()
    if is_triangle(H):
        return iter_triangles(edges)
    if is_square(H):
        return iter_squares(edges)
    return _iter_copies_generic(H, edges)


def _pattern_order(H: Graph) -> list:
    # each vertex after the first is adjacent to an earlier one when possible
    adj = H.adjacency()
    order = []
    remaining = set(H.vertices)
    while remaining:
        start = max(sorted(remaining), key=lambda v: len(adj[v]))
        queue = deque([start])
        remaining.discard(start)
        while queue:
            v = queue.popleft()
            order.append(v)
            for w in sorted(adj[v], key=lambda x: (-len(adj[x]), x)):
                if w in remaining:
                    remaining.discard(w)
                    queue.append(w)
    return order


def _iter_copies_generic(H: Graph, edges: Iterable[tuple]) -> Iterator[frozenset]:
    edges = {norm_edge(a, b) for a, b in edges}
    adj = adjacency(edges)
    host = sorted(adj)
    hadj = H.adjacency()
    order = _pattern_order(H)
    back = [[w for w in hadj[v] if w in order[:i]] for i, v in enumerate(order)]
    seen = set()
    phi: dict = {}
    used: set = set()

    def extend(i):
        if i == len(order):
            copy = frozenset(norm_edge(phi[a], phi[b]) for a, b in H.edges)
            if copy not in seen:
                seen.add(copy)
                yield copy
            return
        v = order[i]
        if back[i]:
            anchors = [phi[w] for w in back[i]]
            cands = set(adj[anchors[0]])
            for a in anchors[1:]:
                cands &= adj[a]
            cands = sorted(cands - used)
        else:
            cands = [x for x in host if x not in used]
        need = len(hadj[v])
        for x in cands:
            if len(adj[x]) < need:
                continue
            phi[v] = x
            used.add(x)
            yield from extend(i + 1)
            used.discard(x)
            del phi[v]

    return extend(0)


def find_copy(H: Graph, edges: Iterable[tuple]):
    return next(iter_copies(H, edges), None)


# ---------------------------------------------------------------- colorings

def odd_cycle(edges: Iterable[tuple]):
    """A simple odd cycle (as an edge set) or ``None`` if the graph is bipartite.

    Breadth-first 2-coloring; a monochromatic edge closes an odd cycle through
    the lowest common ancestor in the BFS tree.
    """
    adj = adjacency(edges)
    depth: dict = {}
    parent: dict = {}
    for s in sorted(adj):
        if s in depth:
            continue
        depth[s] = 0
        parent[s] = None
        queue = deque([s])
        while queue:
            v = queue.popleft()
            for w in sorted(adj[v]):
                if w not in depth:
                    depth[w] = depth[v] + 1
                    parent[w] = v
                    queue.append(w)
                elif depth[w] % 2 == depth[v] % 2:
                    return _close_cycle(v, w, parent, depth)
    return None


def _close_cycle(u, v, parent, depth) -> frozenset:
    cyc = {norm_edge(u, v)}
    while u != v:
        if depth[u] >= depth[v]:
            cyc.add(norm_edge(u, parent[u]))
            u = parent[u]
        else:
            cyc.add(norm_edge(v, parent[v]))
            v = parent[v]
    return frozenset(cyc)


def is_bipartite(edges: Iterable[tuple]) -> bool:
    return odd_cycle(edges) is None


def find_hom(edges: Iterable[tuple], H: Graph):
    """A homomorphism from the graph spanned by ``edges`` into H, or ``None``.

    Backtracking over the graph's own (non-isolated) vertices only.
    """
    edges = {norm_edge(a, b) for a, b in edges}
    if not edges:
        return {}
    if H.t == 0:
        return None
    adj = adjacency(edges)
    hadj = H.adjacency()
    targets = sorted(v for v in H.vertices if hadj[v])
    order = _pattern_order(Graph.from_edges(edges))
    tau: dict = {}

    def extend(i):
        if i == len(order):
            return True
        v = order[i]
        placed = [tau[w] for w in adj[v] if w in tau]
        for x in targets:
            if all(y in hadj[x] for y in placed):
                tau[v] = x
                if extend(i + 1):
                    return True
                del tau[v]
        return False

    return dict(tau) if extend(0) else None


def is_hom(edges: Iterable[tuple], H: Graph) -> bool:
    if H.t > 0 and is_bipartite(H.edges):
        return is_bipartite(edges)
    return find_hom(edges, H) is not None


def minimal_non_hom(edges: Iterable[tuple], H: Graph) -> frozenset:
    """Greedily shrink a non-H-colorable edge set to a minimal one."""
    current = sorted({norm_edge(a, b) for a, b in edges})
    if is_hom(current, H):
        raise ValueError("edge set admits a homomorphism")
    i = 0
    while i < len(current):
        trial = current[:i] + current[i + 1:]
        if not is_hom(trial, H):
            current = trial
        else:
            i += 1
    return frozenset(current)


def connected_components(edges: Iterable[tuple]) -> list:
    """Edge lists of connected components, each sorted, components by first edge."""
    edges = sorted({norm_edge(a, b) for a, b in edges})
    adj = adjacency(edges)
    comp_of: dict = {}
    for s in sorted(adj):
        if s in comp_of:
            continue
        comp_of[s] = s
        stack = [s]
        while stack:
            v = stack.pop()
            for w in adj[v]:
                if w not in comp_of:
                    comp_of[w] = s
                    stack.append(w)
    groups = defaultdict(list)
    for e in edges:
        groups[comp_of[e[0]]].append(e)
    return [groups[k] for k in sorted(groups)]
