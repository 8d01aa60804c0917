"""Immutable undirected topologies and the generators used by the experiments."""

from __future__ import annotations

import random
from collections import deque
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import (
    DisconnectedAfterRetries,
    DuplicateEdge,
    InvalidAlpha,
    OutOfRange,
    SelfLoop,
)


class Graph:
    """Undirected simple graph over the dense node ids ``0..n-1``.

    Neighbor lists are sorted ascending so every traversal order is fixed.
    ``meta`` carries the generator name and parameters (for example the
    clique size ``q`` of a star-clique graph); it never affects topology.
    """

    __slots__ = ("n", "edges", "adj", "masks", "meta")

    def __init__(self, n: int, edges: Iterable[tuple[int, int]], meta: dict | None = None):
        nbrs: list[list[int]] = [[] for _ in range(n)]
        norm = []
        for u, v in edges:
            nbrs[u].append(v)
            nbrs[v].append(u)
            norm.append((u, v) if u < v else (v, u))
        self.n = n
        self.edges = tuple(sorted(norm))
        self.adj = tuple(tuple(sorted(x)) for x in nbrs)
        self.masks = tuple(sum(1 << v for v in x) for x in self.adj)
        self.meta = dict(meta or {})

    def __setattr__(self, name, value):
        if hasattr(self, name):
            raise AttributeError("Graph is immutable")
        object.__setattr__(self, name, value)

    def __repr__(self):
        kind = self.meta.get("kind", "graph")
        return f"<Graph {kind} n={self.n} m={len(self.edges)}>"

    def __eq__(self, other):
        return isinstance(other, Graph) and self.n == other.n and self.edges == other.edges

    def __hash__(self):
        return hash((self.n, self.edges))

    @property
    def m(self) -> int:
        return len(self.edges)

    def neighbors(self, u: int) -> tuple[int, ...]:
        return self.adj[u]

    def degree(self, u: int) -> int:
        return len(self.adj[u])

    @property
    def max_degree(self) -> int:
        return max((len(a) for a in self.adj), default=0)

    def has_edge(self, u: int, v: int) -> bool:
        return (self.masks[u] >> v) & 1 == 1

    def is_connected(self) -> bool:
        if self.n <= 1:
            return True
        seen = {0}
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for v in self.adj[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return len(seen) == self.n


def from_edge_list(n: int, edges: Sequence[tuple[int, int]], meta: dict | None = None) -> Graph:
    """Validate ``edges`` and build a Graph.

    Raises OutOfRange, SelfLoop or DuplicateEdge on malformed input.
    """
    if n < 1:
        raise OutOfRange(f"node count must be positive, got {n}")
    seen = set()
    for u, v in edges:
        if not (0 <= u < n and 0 <= v < n):
            raise OutOfRange(f"edge ({u}, {v}) has an endpoint outside [0, {n})")
        if u == v:
            raise SelfLoop(f"self-loop at node {u}")
        key = (u, v) if u < v else (v, u)
        if key in seen:
            raise DuplicateEdge(f"duplicate edge {key}")
        seen.add(key)
    return Graph(n, edges, meta)


def read_edge_list(path) -> Graph:
    """Parse the ``n m`` header plus ``m`` lines of ``u v``."""
    with open(path) as fh:
        rows = [line.split() for line in fh if line.strip() and not line.lstrip().startswith("#")]
    if not rows or len(rows[0]) != 2:
        raise OutOfRange(f"{path}: first line must be 'n m'")
    n, m = int(rows[0][0]), int(rows[0][1])
    body = rows[1:]
    if len(body) != m:
        raise OutOfRange(f"{path}: header announces {m} edges, found {len(body)}")
    edges = [(int(a), int(b)) for a, b in body]
    return from_edge_list(n, edges, {"kind": "edges", "path": str(path)})


def write_edge_list(g: Graph, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{g.n} {g.m}\n")
        for u, v in g.edges:
            fh.write(f"{u} {v}\n")


# generators


def gen_ring(n: int) -> Graph:
    if n < 3:
        # a 2-ring collapses to a single edge
        return from_edge_list(n, [(0, 1)] if n == 2 else [], {"kind": "ring", "n": n})
    return from_edge_list(n, [(i, (i + 1) % n) for i in range(n)], {"kind": "ring", "n": n})


def gen_path(n: int) -> Graph:
    return from_edge_list(n, [(i, i + 1) for i in range(n - 1)], {"kind": "path", "n": n})


def gen_complete(n: int) -> Graph:
    edges = [(u, v) for u in range(n) for v in range(u + 1, n)]
    return from_edge_list(n, edges, {"kind": "complete", "n": n})


def gen_star(leaves: int) -> Graph:
    """Center 0 with leaves ``1..leaves``."""
    return from_edge_list(leaves + 1, [(0, i) for i in range(1, leaves + 1)],
                          {"kind": "star", "n": leaves + 1})


def star_clique_q(n: int, alpha) -> int:
    """Clique size ``round(n * alpha)`` with halves rounded up."""
    x = Fraction(alpha) * n
    return int(x + Fraction(1, 2)) if x.denominator != 1 else int(x)


def gen_star_clique(n: int, alpha) -> Graph:
    """Lower-bound instance: a q-clique whose members are all joined to the n-q outer nodes.

    ``alpha`` may be a float, a Fraction or a ``"p/q"`` string. Outer nodes
    are not adjacent to each other.
    """
    a = Fraction(alpha).limit_denominator(10**6) if isinstance(alpha, float) else Fraction(alpha)
    if n < 2 or not (Fraction(1, n) <= a <= Fraction(1, 2)):
        raise InvalidAlpha(f"alpha={alpha} outside [1/n, 1/2] for n={n}")
    q = star_clique_q(n, a)
    if not 1 <= q <= n:
        raise InvalidAlpha(f"q={q} outside [1, n]")
    edges = [(u, v) for u in range(q) for v in range(u + 1, q)]
    edges += [(c, x) for x in range(q, n) for c in range(q)]
    return from_edge_list(n, edges, {"kind": "star_clique", "n": n, "alpha": str(a), "q": q})


def gen_random_connected(n: int, p: float, seed: int, max_retries: int = 1000) -> Graph:
    """Erdős–Rényi G(n, p) redrawn until connected."""
    if n < 2:
        raise OutOfRange("random graphs need n >= 2")
    if not 0 < p <= 1:
        raise OutOfRange(f"edge probability {p} outside (0, 1]")
    rng = random.Random(seed)
    for _ in range(max_retries):
        edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]
        g = Graph(n, edges, {"kind": "random", "n": n, "p": p, "seed": seed})
        if g.is_connected():
            return g
    raise DisconnectedAfterRetries(f"G({n}, {p}) stayed disconnected after {max_retries} draws")
