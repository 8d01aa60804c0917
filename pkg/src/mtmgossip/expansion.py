"""Boundaries, vertex expansion, bipartite matchings and the matching/expansion bound.

Cuts range over ``1 <= |S| <= ceil(n/2)`` (the integer range 1..ceil(n/2));
``ceil_half=False`` restricts them to ``floor(n/2)``. The two readings only
differ for odd n.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Iterable

import numpy as np

from .errors import InvalidCut, OverlappingSides, TooLarge
from .graph import Graph

EXACT_EXPANSION_LIMIT = 24
GAMMA_CHECK_LIMIT = 16
DEFAULT_EXPANSION_SAMPLES = 20000


def max_cut_size(n: int, ceil_half: bool = True) -> int:
    return (n + 1) // 2 if ceil_half else n // 2


def validate_cut(g: Graph, s: Iterable[int], ceil_half: bool = True) -> frozenset:
    s = frozenset(s)
    if not s:
        raise InvalidCut("cut must be nonempty")
    if any(not 0 <= v < g.n for v in s):
        raise InvalidCut("cut contains nodes outside the graph")
    if len(s) > max_cut_size(g.n, ceil_half) or len(s) >= g.n:
        raise InvalidCut(f"|S|={len(s)} exceeds the half-size bound for n={g.n}")
    return s


def boundary(g: Graph, s: Iterable[int]) -> set[int]:
    """Outside boundary: nodes not in ``s`` with at least one neighbor in ``s``."""
    s = validate_cut(g, s)
    return {v for u in s for v in g.adj[u] if v not in s}


def expansion_ratio(g: Graph, s: Iterable[int]) -> Fraction:
    s = frozenset(s)
    out = {v for u in s for v in g.adj[u] if v not in s}
    return Fraction(len(out), len(s))


@dataclass(frozen=True)
class Expansion:
    alpha: Fraction
    cut: frozenset
    exact: bool
    samples: int = 0


def _popcount(a: np.ndarray) -> np.ndarray:
    return np.bitwise_count(a)


def vertex_expansion_exact(g: Graph, ceil_half: bool = True) -> Expansion:
    """Minimum of |∂S|/|S| over every admissible cut, by full enumeration.

    Neighborhood masks for all 2^n subsets are built by doubling in numpy;
    the minimizing cut returned is the lowest mask of the best size class.
    """
    n = g.n
    if n > EXACT_EXPANSION_LIMIT:
        raise TooLarge(f"exact expansion enumerates 2^n cuts; n={n} > {EXACT_EXPANSION_LIMIT}")
    if n < 2:
        raise TooLarge("expansion needs at least two nodes")
    dtype = np.uint32
    nb = np.zeros(1 << n, dtype=dtype)
    for i in range(n):
        lo = 1 << i
        nb[lo:2 * lo] = nb[:lo] | dtype(g.masks[i])
    masks = np.arange(1 << n, dtype=dtype)
    sizes = _popcount(masks)
    bnd = _popcount(nb & ~masks)
    best = None
    for s in range(1, max_cut_size(n, ceil_half) + 1):
        idx = np.flatnonzero(sizes == s)
        j = int(np.argmin(bnd[idx]))
        ratio = Fraction(int(bnd[idx[j]]), s)
        if best is None or ratio < best[0]:
            best = (ratio, int(idx[j]))
    ratio, mask = best
    cut = frozenset(v for v in range(n) if (mask >> v) & 1)
    return Expansion(ratio, cut, exact=True)


def vertex_expansion_sampled(g: Graph, samples: int = DEFAULT_EXPANSION_SAMPLES, seed: int = 0,
                             ceil_half: bool = True) -> Expansion:
    """Minimum ratio over structured plus random cuts.

    Any cut's ratio is >= the true expansion, so the result is an upper
    estimate. Structured candidates are BFS balls of every size around every
    node; the remaining budget goes to uniform random subsets.
    """
    n = g.n
    limit = max_cut_size(n, ceil_half)
    rng = random.Random(seed)
    best_ratio, best_cut = None, None

    def consider(cut):
        nonlocal best_ratio, best_cut
        r = expansion_ratio(g, cut)
        if best_ratio is None or r < best_ratio:
            best_ratio, best_cut = r, frozenset(cut)

    count = 0
    for root in range(n):
        order = _bfs_order(g, root)
        for size in range(1, min(limit, len(order)) + 1):
            consider(order[:size])
            count += 1
    nodes = list(range(n))
    while count < samples:
        size = rng.randint(1, limit)
        consider(rng.sample(nodes, size))
        count += 1
    return Expansion(best_ratio, best_cut, exact=False, samples=count)


def _bfs_order(g: Graph, root: int) -> list[int]:
    order = [root]
    seen = {root}
    i = 0
    while i < len(order):
        for v in g.adj[order[i]]:
            if v not in seen:
                seen.add(v)
                order.append(v)
        i += 1
    return order


def known_expansion(g: Graph, ceil_half: bool = True) -> Fraction | None:
    """Closed-form expansion for generator families, or None.

    ring: an arc of size h has boundary 2. complete: boundary n-h.
    star_clique (h <= n-q): h outer nodes have boundary q; any cut touching
    the clique has boundary n-h >= h. star is star_clique with q = 1.
    """
    kind = g.meta.get("kind")
    n = g.n
    h = max_cut_size(n, ceil_half)
    if kind == "ring" and n >= 4:
        return Fraction(2, h)
    if kind == "complete" and n >= 2:
        return Fraction(n - h, h)
    q = g.meta.get("q") if kind == "star_clique" else (1 if kind == "star" else None)
    if q is not None and n - q >= h:
        return min(Fraction(q, h), Fraction(n - h, h))
    return None


def vertex_expansion(g: Graph, ceil_half: bool = True) -> Expansion:
    """Exact when enumerable, closed form for known families, otherwise sampled."""
    if g.n <= EXACT_EXPANSION_LIMIT:
        return vertex_expansion_exact(g, ceil_half)
    k = known_expansion(g, ceil_half)
    if k is not None:
        return Expansion(k, frozenset(), exact=True)
    return vertex_expansion_sampled(g, ceil_half=ceil_half)


# matchings


def max_bipartite_matching(g: Graph, left: Iterable[int], right: Iterable[int]) -> list[tuple[int, int]]:
    """Maximum-cardinality matching between ``left`` and ``right`` using edges of ``g``.

    A greedy ascending pass is followed by augmenting-path search from the
    still-unmatched left nodes, neighbors tried in ascending order, so the
    result is a pure function of the input. Returned pairs are ``(left_node, right_node)`` sorted by left node.
    """
    left = sorted(set(left))
    right_set = set(right)
    if right_set.intersection(left):
        raise OverlappingSides("left and right sides share nodes")
    cand = {u: [v for v in g.adj[u] if v in right_set] for u in left}
    return _kuhn(left, cand)


def bipartite_matching_from_edges(edges: Iterable[tuple[int, int]]) -> list[tuple[int, int]]:
    """Same search as max_bipartite_matching, over an explicit (left, right) edge list."""
    cand: dict[int, list[int]] = {}
    for u, v in edges:
        cand.setdefault(u, []).append(v)
    for u in cand:
        cand[u].sort()
    return _kuhn(sorted(cand), cand)


def _kuhn(left: list[int], cand: dict[int, list[int]]) -> list[tuple[int, int]]:
    match_r: dict[int, int] = {}

    def augment(u, visited):
        for v in cand[u]:
            if v in visited:
                continue
            visited.add(v)
            if v not in match_r or augment(match_r[v], visited):
                match_r[v] = u
                return True
        return False

    # greedy pass first so uncontested nodes keep their lowest free neighbor
    pending = []
    for u in left:
        v = next((v for v in cand[u] if v not in match_r), None)
        if v is None:
            pending.append(u)
        else:
            match_r[v] = u
    for u in pending:
        augment(u, set())
    return sorted((u, v) for v, u in match_r.items())


def matching_size_mask(masks: tuple[int, ...], left_mask: int, right_mask: int) -> int:
    """Matching size between two disjoint node sets given as bitmasks."""
    match_r: dict[int, int] = {}

    def augment(u, visited):
        avail = masks[u] & right_mask & ~visited[0]
        while avail:
            low = avail & -avail
            v = low.bit_length() - 1
            visited[0] |= low
            if v not in match_r or augment(match_r[v], visited):
                match_r[v] = u
                return True
            avail = masks[u] & right_mask & ~visited[0]
        return False

    size = 0
    lm = left_mask
    while lm:
        low = lm & -lm
        if augment(low.bit_length() - 1, [0]):
            size += 1
        lm ^= low
    return size


@dataclass(frozen=True)
class GammaReport:
    alpha: Fraction
    gamma: Fraction
    gamma_cut: frozenset
    holds: bool
    cuts_checked: int
    failures: tuple = ()


def check_gamma_bound(g: Graph, ceil_half: bool = True) -> GammaReport:
    """Check max-matching(B(S)) >= (alpha/4)|S| on every admissible cut.

    gamma is the minimum of matching(B(S))/|S|; failures lists every cut that
    breaks the bound (expected empty).
    """
    n = g.n
    if n > GAMMA_CHECK_LIMIT:
        raise TooLarge(f"exhaustive cut check limited to n <= {GAMMA_CHECK_LIMIT}")
    alpha = vertex_expansion_exact(g, ceil_half).alpha
    full = (1 << n) - 1
    gamma, gamma_cut = None, None
    failures = []
    checked = 0
    for size in range(1, max_cut_size(n, ceil_half) + 1):
        for cut in combinations(range(n), size):
            sm = sum(1 << v for v in cut)
            m = matching_size_mask(g.masks, sm, full & ~sm)
            ratio = Fraction(m, size)
            checked += 1
            if gamma is None or ratio < gamma:
                gamma, gamma_cut = ratio, frozenset(cut)
            if ratio < alpha / 4:
                failures.append(frozenset(cut))
    return GammaReport(alpha, gamma, gamma_cut, gamma >= alpha / 4, checked, tuple(failures))
