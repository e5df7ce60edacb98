"""Undirected graphs with implicit self-loops.

Everything downstream (simulation, lemma checking, experiment setup) runs on
the same small graph toolkit: shortest-path distances, graph powers, strong
products, independence numbers with certificates, and the handful of
generators the experiments need.

Conventions used throughout:

* Vertices are ``0 .. vertex_count-1``.
* Every vertex is adjacent to itself.  Adjacency storage holds only proper
  edges; neighborhood, power, product and independence logic all add the
  self-loop semantically, so it can never be double counted.
* Strong-product vertices are ordered pairs flattened row-major:
  ``(v1, v2) <-> v1 * g2.vertex_count + v2`` (see :func:`product_index`).
"""

from __future__ import annotations

import dataclasses
import io
import os
from typing import Iterable, Iterator

import numpy as np

__all__ = [
    "Graph",
    "AlphaResult",
    "all_pairs_distances",
    "power",
    "neighborhood",
    "strong_product",
    "product_index",
    "product_pair",
    "independence_number",
    "is_independent_set",
    "gen_cycle",
    "gen_clique",
    "gen_edgeless",
    "gen_erdos_renyi",
    "gen_iterated_c5",
    "iterated_c5_witness",
    "load_graph",
    "save_graph",
]

#: Hard ceiling on product/generator sizes unless the caller raises it.
DEFAULT_MAX_VERTICES = 4096

#: Largest graph the exact independence-number search accepts by default.
DEFAULT_EXACT_LIMIT = 64


class Graph:
    """Immutable undirected graph on ``0..n-1`` with all self-loops.

    ``adjacency`` is the proper-edge relation: a symmetric boolean matrix
    with a zero diagonal.  The implicit self-loops mean the *closed*
    neighborhood is the natural one; use :meth:`closed_adjacency` when a
    matrix including the diagonal is needed.
    """

    __slots__ = ("_adj",)

    def __init__(self, adjacency: np.ndarray):
        adj = np.asarray(adjacency, dtype=bool)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {adj.shape}")
        if adj.shape[0] < 1:
            raise ValueError("a graph needs at least one vertex")
        if adj.diagonal().any():
            raise ValueError("self-loops are implicit; adjacency stores proper edges only")
        if not np.array_equal(adj, adj.T):
            raise ValueError("adjacency must be symmetric")
        adj = adj.copy()
        adj.setflags(write=False)
        self._adj = adj

    @classmethod
    def from_edges(cls, vertex_count: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        """Build a graph from proper edges; rejects self-loops and bad indices."""
        if vertex_count < 1:
            raise ValueError("a graph needs at least one vertex")
        adj = np.zeros((vertex_count, vertex_count), dtype=bool)
        for u, v in edges:
            if not (0 <= u < vertex_count and 0 <= v < vertex_count):
                raise ValueError(f"edge ({u}, {v}) out of range for {vertex_count} vertices")
            if u == v:
                raise ValueError(f"self-loop ({u}, {u}) is implicit and may not be listed")
            adj[u, v] = adj[v, u] = True
        return cls(adj)

    @property
    def vertex_count(self) -> int:
        return self._adj.shape[0]

    @property
    def adjacency(self) -> np.ndarray:
        """Read-only proper-edge matrix (symmetric bool, zero diagonal)."""
        return self._adj

    def closed_adjacency(self) -> np.ndarray:
        """Adjacency with the self-loops made explicit (writable copy)."""
        out = self._adj.copy()
        np.fill_diagonal(out, True)
        return out

    def neighbors(self, v: int) -> np.ndarray:
        """Properly adjacent vertices of ``v`` (excludes ``v`` itself)."""
        self._check_vertex(v)
        return np.flatnonzero(self._adj[v])

    def edges(self) -> Iterator[tuple[int, int]]:
        """Proper edges as ``(u, v)`` with ``u < v``, lexicographic."""
        us, vs = np.nonzero(np.triu(self._adj, k=1))
        return zip(us.tolist(), vs.tolist())

    @property
    def edge_count(self) -> int:
        return int(np.count_nonzero(self._adj)) // 2

    def has_edge(self, u: int, v: int) -> bool:
        """True for proper edges and (by the self-loop convention) for u == v."""
        self._check_vertex(u)
        self._check_vertex(v)
        return u == v or bool(self._adj[u, v])

    def _check_vertex(self, v: int) -> None:
        if not (0 <= v < self.vertex_count):
            raise ValueError(f"vertex {v} out of range for {self.vertex_count} vertices")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self._adj.shape == other._adj.shape and np.array_equal(self._adj, other._adj)

    def __repr__(self) -> str:
        return f"Graph(vertices={self.vertex_count}, edges={self.edge_count})"


@dataclasses.dataclass(frozen=True)
class AlphaResult:
    """Independence-number answer with a certificate.

    ``witness`` is always an independent set of size ``lower``; when
    ``exact`` is true, ``lower == upper`` is the independence number.
    """

    lower: int
    upper: int
    exact: bool
    witness: tuple[int, ...]


# ---------------------------------------------------------------------------
# distances, powers, neighborhoods


def all_pairs_distances(g: Graph) -> np.ndarray:
    """Shortest-path distance matrix; ``inf`` for disconnected pairs.

    Plain breadth-first search from every source over the boolean adjacency;
    unweighted graphs only, which is all this package ever needs.
    """
    n = g.vertex_count
    adj = g.adjacency
    dist = np.full((n, n), np.inf)
    for s in range(n):
        row = dist[s]
        frontier = np.zeros(n, dtype=bool)
        frontier[s] = True
        seen = frontier.copy()
        level = 0
        while frontier.any():
            row[frontier] = level
            frontier = adj[frontier].any(axis=0) & ~seen
            seen |= frontier
            level += 1
    return dist


def power(g: Graph, m: int) -> Graph:
    """``m``-th graph power: edges between all pairs at distance <= m.

    ``power(g, 0)`` is the edgeless graph on the same vertices (only the
    implicit self-loops survive) and ``power(g, 1)`` equals ``g``.
    """
    if m < 0:
        raise ValueError(f"power must be nonnegative, got {m}")
    if m == 0:
        return gen_edgeless(g.vertex_count)
    if m == 1:
        return Graph(g.adjacency)
    dist = all_pairs_distances(g)
    adj = dist <= m
    np.fill_diagonal(adj, False)
    return Graph(adj)


def neighborhood(g: Graph, v: int, m: int) -> set[int]:
    """``{u : dist(u, v) <= m}`` — always contains ``v`` itself."""
    g._check_vertex(v)
    if m < 0:
        raise ValueError(f"radius must be nonnegative, got {m}")
    adj = g.adjacency
    reached = np.zeros(g.vertex_count, dtype=bool)
    reached[v] = True
    frontier = reached.copy()
    for _ in range(m):
        frontier = adj[frontier].any(axis=0) & ~reached
        if not frontier.any():
            break
        reached |= frontier
    return set(np.flatnonzero(reached).tolist())


# ---------------------------------------------------------------------------
# strong product


def product_index(v1: int, v2: int, n2: int) -> int:
    """Flat index of the product vertex ``(v1, v2)`` (row-major in ``v2``)."""
    return v1 * n2 + v2


def product_pair(idx: int, n2: int) -> tuple[int, int]:
    """Inverse of :func:`product_index`."""
    return divmod(idx, n2)


def strong_product(g1: Graph, g2: Graph, max_vertices: int = DEFAULT_MAX_VERTICES) -> Graph:
    """Strong product: ``(v1,v2) ~ (u1,u2)`` iff both coordinates are in
    closed neighborhoods of each other.

    Vertex ``(v1, v2)`` sits at flat index ``v1 * g2.vertex_count + v2``.
    Refuses products larger than ``max_vertices``.
    """
    n = g1.vertex_count * g2.vertex_count
    if n > max_vertices:
        raise ValueError(
            f"strong product would have {n} vertices, above the limit {max_vertices}"
        )
    closed = np.kron(g1.closed_adjacency(), g2.closed_adjacency()).astype(bool)
    np.fill_diagonal(closed, False)
    return Graph(closed)


# ---------------------------------------------------------------------------
# independence numbers


def is_independent_set(g: Graph, s: Iterable[int]) -> bool:
    """True iff no two distinct members of ``s`` are properly adjacent."""
    idx = sorted(set(int(v) for v in s))
    for v in idx:
        g._check_vertex(v)
    if len(idx) < 2:
        return True
    sub = g.adjacency[np.ix_(idx, idx)]
    return not sub.any()


def _adjacency_masks(adj: np.ndarray) -> list[int]:
    """Per-vertex neighbor bitmasks (self excluded) as Python ints."""
    n = adj.shape[0]
    masks = []
    for v in range(n):
        m = 0
        for u in np.flatnonzero(adj[v]).tolist():
            m |= 1 << u
        masks.append(m)
    return masks


def _greedy_clique(masks: list[int], cand: int) -> int:
    """Warm-start clique: repeatedly take the candidate with most candidate-neighbors."""
    clique = 0
    while cand:
        best_v = -1
        best_deg = -1
        m = cand
        while m:
            v = (m & -m).bit_length() - 1
            m &= m - 1
            deg = (masks[v] & cand).bit_count()
            if deg > best_deg:
                best_v, best_deg = v, deg
        clique |= 1 << best_v
        cand &= masks[best_v]
    return clique


def _max_clique(masks: list[int], n: int) -> int:
    """Exact maximum clique (bitmask) via branch and bound.

    Branching order and pruning come from a greedy sequential coloring of the
    candidate set: a vertex colored ``c`` cannot extend the current clique to
    more than ``size + c``, and colors are produced in nondecreasing order so
    one failed bound prunes the whole rest of the loop.
    """
    full = (1 << n) - 1
    best_mask = _greedy_clique(masks, full)
    best_size = best_mask.bit_count()

    def expand(cand: int, size: int, cur: int) -> None:
        nonlocal best_mask, best_size
        order: list[int] = []
        bound: list[int] = []
        uncolored = cand
        color = 0
        while uncolored:
            color += 1
            avail = uncolored
            while avail:
                v = (avail & -avail).bit_length() - 1
                avail &= ~(masks[v] | (1 << v))
                uncolored &= ~(1 << v)
                order.append(v)
                bound.append(size + color)
        remaining = cand
        for i in range(len(order) - 1, -1, -1):
            if bound[i] <= best_size:
                return
            v = order[i]
            remaining &= ~(1 << v)
            sub = remaining & masks[v]
            if sub:
                expand(sub, size + 1, cur | (1 << v))
            elif size + 1 > best_size:
                best_size = size + 1
                best_mask = cur | (1 << v)

    expand(full, 0, 0)
    return best_mask


def _greedy_independent(adj: np.ndarray) -> list[int]:
    """Min-degree peeling: decent independent-set lower bound for big graphs."""
    n = adj.shape[0]
    alive = np.ones(n, dtype=bool)
    degrees = adj.sum(axis=1).astype(int)
    chosen: list[int] = []
    while alive.any():
        masked = np.where(alive, degrees, n + 1)
        v = int(masked.argmin())
        chosen.append(v)
        drop = adj[v] | (np.arange(n) == v)
        drop &= alive
        alive &= ~drop
        degrees -= adj[drop].sum(axis=0).astype(int)
    return sorted(chosen)


def _greedy_clique_cover(adj: np.ndarray) -> int:
    """Number of classes in a greedy clique cover (independence upper bound).

    Sequentially colors the complement graph; each color class is a clique of
    the original graph, and any independent set picks at most one vertex per
    clique.
    """
    n = adj.shape[0]
    comp = ~adj
    np.fill_diagonal(comp, False)
    classes: list[np.ndarray] = []  # boolean masks of clique members
    for v in range(n):
        placed = False
        for cls in classes:
            # v joins a clique class only if adjacent (in g) to all members
            if not comp[v][cls].any():
                cls[v] = True
                placed = True
                break
        if not placed:
            fresh = np.zeros(n, dtype=bool)
            fresh[v] = True
            classes.append(fresh)
    return len(classes)


def independence_number(g: Graph, exact_limit: int = DEFAULT_EXACT_LIMIT) -> AlphaResult:
    """Independence number with certificate.

    Up to ``exact_limit`` vertices the answer is exact: a maximum independent
    set of ``g`` is a maximum clique of the complement, found by bitmask
    branch and bound.  Above the limit a greedy lower bound (with witness)
    and a greedy clique-cover upper bound are returned with ``exact=False``.
    """
    n = g.vertex_count
    adj = g.adjacency
    if n <= exact_limit:
        comp = ~adj
        np.fill_diagonal(comp, False)
        best = _max_clique(_adjacency_masks(comp), n)
        witness = tuple(v for v in range(n) if best >> v & 1)
        size = len(witness)
        return AlphaResult(lower=size, upper=size, exact=True, witness=witness)
    witness = tuple(_greedy_independent(adj))
    upper = _greedy_clique_cover(adj)
    return AlphaResult(lower=len(witness), upper=upper, exact=False, witness=witness)


# ---------------------------------------------------------------------------
# generators


def gen_edgeless(nv: int) -> Graph:
    """Graph with no proper edges (self-loops only)."""
    if nv < 1:
        raise ValueError("a graph needs at least one vertex")
    return Graph(np.zeros((nv, nv), dtype=bool))


def gen_clique(nv: int) -> Graph:
    """Complete graph on ``nv`` vertices."""
    if nv < 1:
        raise ValueError("a graph needs at least one vertex")
    adj = np.ones((nv, nv), dtype=bool)
    np.fill_diagonal(adj, False)
    return Graph(adj)


def gen_cycle(nv: int) -> Graph:
    """Cycle ``0-1-...-(nv-1)-0``; small cases degrade to path/clique sensibly."""
    if nv < 1:
        raise ValueError("a graph needs at least one vertex")
    adj = np.zeros((nv, nv), dtype=bool)
    if nv > 1:
        for v in range(nv):
            u = (v + 1) % nv
            if u != v:
                adj[v, u] = adj[u, v] = True
    return Graph(adj)


def gen_erdos_renyi(nv: int, p: float, rng: np.random.Generator) -> Graph:
    """G(nv, p): each unordered pair is an edge independently with probability p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"edge probability must be in [0, 1], got {p}")
    if nv < 1:
        raise ValueError("a graph needs at least one vertex")
    draws = rng.random((nv, nv))
    upper = np.triu(draws < p, k=1)
    return Graph(upper | upper.T)


def gen_iterated_c5(k: int, max_vertices: int = DEFAULT_MAX_VERTICES) -> Graph:
    """Blow-up hierarchy over the 5-cycle.

    Level 1 is C5.  Each next level replaces every vertex by a fresh copy of
    C5 and every edge by a complete bipartite join between the two copies
    (equivalently, the lexicographic product of the previous level with C5).
    Level ``k`` has ``5**k`` vertices; vertex ``x`` of level ``k-1`` owns the
    block ``5x .. 5x+4``.
    """
    if k < 1:
        raise ValueError(f"level must be >= 1, got {k}")
    if 5**k > max_vertices:
        raise ValueError(f"level {k} needs {5**k} vertices, above the limit {max_vertices}")
    c5 = gen_cycle(5).adjacency
    adj = c5
    for _ in range(k - 1):
        m = adj.shape[0]
        adj = np.kron(adj, np.ones((5, 5), dtype=bool)) | np.kron(np.eye(m, dtype=bool), c5)
    return Graph(adj)


#: Optimal independent set of C5 x C5 (strong product), as (row, col) pairs.
_C5_BOX_C5_WITNESS = ((0, 0), (1, 2), (2, 4), (3, 1), (4, 3))


def iterated_c5_witness(k: int) -> set[int]:
    """Independent set of size ``5**k`` in ``G_k x G_k`` (strong product).

    Starts from the size-5 optimum of C5 x C5 and lifts it level by level:
    a pair of level-``k`` blocks indexed by a lower-level witness pair gets
    the base witness placed inside it.  Returned as flat product indices with
    the second factor minor (matching :func:`strong_product` on
    ``gen_iterated_c5(k)`` with itself).
    """
    if k < 1:
        raise ValueError(f"level must be >= 1, got {k}")
    pairs = set(_C5_BOX_C5_WITNESS)
    for _ in range(k - 1):
        pairs = {
            (5 * x + a, 5 * y + b) for (x, y) in pairs for (a, b) in _C5_BOX_C5_WITNESS
        }
    n2 = 5**k
    return {product_index(x, y, n2) for (x, y) in pairs}


# ---------------------------------------------------------------------------
# text format


def load_graph(source: str | os.PathLike | io.TextIOBase) -> Graph:
    """Read the plain edge-list format.

    First line: vertex count.  Every following non-blank line: one proper
    edge ``u v`` (0-indexed, whitespace separated).  Self-loops are implicit
    and may not appear; duplicate edges (in either order) are rejected.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8") as fh:
            return load_graph(fh)
    lines = source.read().splitlines()
    if not lines or not lines[0].strip():
        raise ValueError("line 1: expected the vertex count")
    try:
        nv = int(lines[0].strip())
    except ValueError:
        raise ValueError(f"line 1: vertex count is not an integer: {lines[0].strip()!r}") from None
    if nv < 1:
        raise ValueError(f"line 1: vertex count must be positive, got {nv}")
    adj = np.zeros((nv, nv), dtype=bool)
    seen: set[tuple[int, int]] = set()
    for lineno, raw in enumerate(lines[1:], start=2):
        text = raw.strip()
        if not text:
            continue
        parts = text.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'u v', got {raw!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise ValueError(f"line {lineno}: non-integer vertex in {raw!r}") from None
        if not (0 <= u < nv and 0 <= v < nv):
            raise ValueError(f"line {lineno}: edge ({u}, {v}) out of range for {nv} vertices")
        if u == v:
            raise ValueError(f"line {lineno}: self-loop ({u}, {u}) may not be listed")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise ValueError(f"line {lineno}: duplicate edge ({u}, {v})")
        seen.add(key)
        adj[u, v] = adj[v, u] = True
    return Graph(adj)


def save_graph(g: Graph, target: str | os.PathLike | io.TextIOBase) -> None:
    """Write the edge-list format read by :func:`load_graph`."""
    if isinstance(target, (str, os.PathLike)):
        with open(target, "w", encoding="utf-8") as fh:
            save_graph(g, fh)
            return
    target.write(f"{g.vertex_count}\n")
    for u, v in g.edges():
        target.write(f"{u} {v}\n")
