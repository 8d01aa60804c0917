"""Post-hoc analysis of traces: size profiles, productive subgraphs and invariant checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .amtm import AsyncTrace, snapshot_at
from .errors import CutMissing, NotMinEdge
from .expansion import bipartite_matching_from_edges
from .gossip import fingerprint
from .graph import Graph, star_clique_q
from .sync import SyncTrace, replay

DEFAULT_AUDIT_WINDOW = 3


@dataclass(frozen=True)
class Snapshot:
    marker: int
    sets: tuple


def sync_snapshots(trace: SyncTrace) -> list[Snapshot]:
    """Token sets at the start of every round, then the final sets."""
    return [Snapshot(r, tuple(frozenset(s) for s in sets))
            for r, sets in enumerate(replay(trace), start=1)]


def _sets(x) -> Sequence[frozenset]:
    return x.sets if isinstance(x, Snapshot) else x


@dataclass(frozen=True)
class SizeProfile:
    i_min: int
    c: int
    n_min: int
    n_star_min: int
    counts: dict


def size_profile(snapshot) -> SizeProfile:
    sizes = [len(s) for s in _sets(snapshot)]
    return _profile_from_sizes(sizes)


def _profile_from_sizes(sizes: Sequence[int]) -> SizeProfile:
    n = len(sizes)
    counts: dict[int, int] = {}
    for x in sizes:
        counts[x] = counts.get(x, 0) + 1
    i_min = min(counts)
    n_min = counts[i_min]
    return SizeProfile(i_min, len(counts), n_min, min(n_min, n - n_min), dict(sorted(counts.items())))


@dataclass(frozen=True)
class ProductiveSubgraph:
    edges: frozenset            # E(r): undirected pairs (low, high)
    left: frozenset             # L_min
    right: frozenset            # R_min
    min_edges: tuple            # E_min as (left node, right node), sorted

    def min_degree(self, u: int) -> int:
        return sum(1 for a, b in self.min_edges if a == u or b == u)

    def min_neighbors(self, u: int) -> list[int]:
        return sorted({b for a, b in self.min_edges if a == u} | {a for a, b in self.min_edges if b == u})


def productive_subgraph(g: Graph, snapshot) -> ProductiveSubgraph:
    """E(r) from the productive neighbor sets, and its bipartite restriction to the minimum-size cut.

    s_u is the smallest set size among all of u's neighbors; v is a
    productive neighbor of u when |T_v| = s_u and the fingerprints differ.
    """
    sets = _sets(snapshot)
    fps = [fingerprint(s) for s in sets]
    sizes = [len(s) for s in sets]
    edges = set()
    for u in range(g.n):
        if not g.adj[u]:
            continue
        s_u = min(sizes[v] for v in g.adj[u])
        for v in g.adj[u]:
            if sizes[v] == s_u and fps[u] != fps[v]:
                edges.add((u, v) if u < v else (v, u))
    i_min = min(sizes)
    in_min = [x == i_min for x in sizes]
    left = frozenset(u for u in range(g.n) if not in_min[u] and any(in_min[v] for v in g.adj[u]))
    right = frozenset(u for u in range(g.n) if in_min[u] and any(not in_min[v] for v in g.adj[u]))
    min_edges = []
    for a, b in edges:
        if a in left and b in right:
            min_edges.append((a, b))
        elif b in left and a in right:
            min_edges.append((b, a))
    return ProductiveSubgraph(frozenset(edges), left, right, tuple(sorted(min_edges)))


@dataclass(frozen=True)
class MinMatchingReport:
    m: int
    n_star_min: int
    bound: Fraction
    holds: bool
    matching: tuple


def check_min_matching(g: Graph, snapshot, alpha) -> MinMatchingReport:
    """Maximum matching over the minimum productive subgraph against (alpha/4)·n*_min."""
    prof = size_profile(snapshot)
    if prof.c == 1:
        raise CutMissing("all nodes hold the same number of tokens")
    ps = productive_subgraph(g, snapshot)
    matching = bipartite_matching_from_edges(ps.min_edges)
    bound = Fraction(alpha) / 4 * prof.n_star_min
    return MinMatchingReport(len(matching), prof.n_star_min, bound, len(matching) >= bound,
                             tuple(matching))


# sync trace invariants


@dataclass
class InvariantReport:
    violations: list = field(default_factory=list)
    rounds_checked: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, kind, where, detail):
        self.violations.append((kind, where, detail))

    def kinds(self) -> set:
        return {v[0] for v in self.violations}


def check_trace_invariants(trace: SyncTrace) -> InvariantReport:
    """Replay a round trace and check the per-round model and progress invariants.

    Recorded state (the ads at each round start and the final sets) is
    compared with the replayed state; size-based invariants use the recorded
    state so a tampered trace is caught by both. Violation kinds: ad_state,
    final_state, proposal, accept, double_incoming, forced_acceptance,
    outcomes, transfer, noop, monotone, samesize, completion.
    """
    g = trace.graph
    rep = InvariantReport()
    sets = [set(s) for s in trace.initial]
    union = frozenset().union(*trace.initial) if trace.initial else frozenset()
    k = len(union)
    connected = g.is_connected()

    def recorded_sizes(idx):
        if idx < len(trace.rounds):
            return [a.size for a in trace.rounds[idx].ads]
        return [len(s) for s in trace.final] if trace.final else [len(s) for s in sets]

    for idx, rec in enumerate(trace.rounds):
        r = rec.round
        if r != idx + 1:
            rep.add("outcomes", r, f"round numbered {r} at position {idx + 1}")
        for u, a in enumerate(rec.ads):
            if a.size != len(sets[u]) or a.fingerprint != fingerprint(sets[u]):
                rep.add("ad_state", r, f"node {u} advertised size {a.size}, replay has {len(sets[u])}")
        for p, t in rec.proposals.items():
            if not g.has_edge(p, t):
                rep.add("proposal", r, f"{p} proposed to non-neighbor {t}")
        acceptors: dict[int, int] = {}
        proposers = set()
        for p, a in rec.accepted:
            if rec.proposals.get(p) != a:
                rep.add("accept", r, f"{a} accepted {p} without a proposal")
            if a in acceptors:
                rep.add("double_incoming", r, f"{a} accepted both {acceptors[a]} and {p}")
            if p in proposers:
                rep.add("accept", r, f"{p} holds two outgoing connections")
            acceptors[a] = p
            proposers.add(p)
        for t in set(rec.proposals.values()):
            if t not in acceptors:
                rep.add("forced_acceptance", r, f"{t} received proposals but accepted none")
        if len(rec.outcomes) != len(rec.accepted):
            rep.add("outcomes", r, "outcome count differs from connection count")
        start = [frozenset(s) for s in sets]
        for (p, a), out in zip(rec.accepted, rec.outcomes):
            if out is None:
                if (start[p] - sets[a]) or (start[a] - sets[p]):
                    rep.add("noop", r, f"connection {p}->{a} moved nothing though a token could move")
                continue
            if {out.giver, out.receiver} != {p, a}:
                rep.add("transfer", r, f"transfer {out} is not on connection {p}->{a}")
                continue
            if out.token not in start[out.giver] or out.token in sets[out.receiver]:
                rep.add("transfer", r, f"token {out.token} not in the difference {out.giver}->{out.receiver}")
            sets[out.receiver].add(out.token)

        before = recorded_sizes(idx)
        after = recorded_sizes(idx + 1)
        for u in range(g.n):
            if after[u] < before[u]:
                rep.add("monotone", r, f"node {u} shrank from {before[u]} to {after[u]}")
        pb, pa = _profile_from_sizes(before), _profile_from_sizes(after)
        if pa.i_min < pb.i_min:
            rep.add("monotone", r, f"i_min fell from {pb.i_min} to {pa.i_min}")
        if connected and pb.c == 1 and pb.i_min < k and not (pa.c > 1 or pa.i_min > pb.i_min):
            rep.add("samesize", r, f"C=1 at size {pb.i_min} and no progress")
        rep.rounds_checked += 1

    if trace.final and [set(s) for s in trace.final] != sets:
        rep.add("final_state", len(trace.rounds), "recorded final sets differ from replay")
    solved = all(len(s) == k for s in sets)
    if trace.completion_round is not None:
        if not solved or trace.completion_round != len(trace.rounds):
            rep.add("completion", trace.completion_round, "completion claimed but not reached")
    elif solved and trace.rounds:
        rep.add("completion", len(trace.rounds), "solved but completion not recorded")
    return rep


# async instrumentation


def check_async_invariants(trace: AsyncTrace) -> InvariantReport:
    """Token monotonicity and provenance plus the per-node loop-span bound."""
    g = trace.graph
    rep = InvariantReport()
    sets = [set(s) for s in trace.initial]
    dmax = trace.bounds.delta_max_ticks
    last_update: dict[int, int] = {}
    in_flight: dict[int, int] = {}
    for rec in trace.records:
        kind, t = rec["kind"], rec["t"]
        if kind == "update":
            u = rec["node"]
            if u in last_update and t - last_update[u] > dmax:
                rep.add("loop_span", t, f"node {u} loop iteration took {t - last_update[u]} ticks")
            last_update[u] = t
        elif kind == "propose":
            if rec["src"] in in_flight:
                rep.add("outgoing", t, f"node {rec['src']} opened a second attempt")
            in_flight[rec["src"]] = rec["aid"]
        elif kind == "response" and not rec["accepted"]:
            in_flight.pop(rec["src"], None)
        elif kind == "transfer":
            in_flight.pop(rec["src"], None)
            u, v = rec["src"], rec["dst"]
            if rec["token"] is None:
                if sets[u] != sets[v]:
                    rep.add("noop", t, f"connection {u}->{v} moved nothing though sets differ")
                continue
            gv, rc, tok = rec["giver"], rec["receiver"], rec["token"]
            if {gv, rc} != {u, v} or not g.has_edge(u, v):
                rep.add("transfer", t, f"transfer {gv}->{rc} is not on connection {u}->{v}")
            if tok not in sets[gv] or tok in sets[rc]:
                rep.add("transfer", t, f"token {tok} not in the difference {gv}->{rc}")
            sets[rc].add(tok)
    k = trace.k
    if trace.completion_time is not None and not all(len(s) == k for s in sets):
        rep.add("completion", trace.completion_time, "completion claimed but not reached")
    return rep


def _min_edge_context(trace: AsyncTrace, t1: int):
    sets = snapshot_at(trace, t1)
    return sets, productive_subgraph(trace.graph, sets)


def properly_considers(trace: AsyncTrace, t1: int, u: int, v: int, t2: Optional[int] = None,
                       window: float = DEFAULT_AUDIT_WINDOW) -> bool:
    """Did u, in some Select call within [t1, t2], see v among at most deg_min(u) candidates?

    ``t1``/``t2`` are ticks; ``t2`` defaults to ``t1 + window * delta_max``.
    Raises NotMinEdge unless (u, v) is an edge of the minimum productive
    subgraph at ``t1`` with u on the better-informed side.
    """
    _, ps = _min_edge_context(trace, t1)
    return _considers(trace, ps, t1, u, v, _window_end(trace, t1, t2, window))


def _window_end(trace, t1, t2, window):
    return t2 if t2 is not None else t1 + int(window * trace.bounds.delta_max_ticks)


def _considers(trace, ps, t1, u, v, t2) -> bool:
    if (u, v) not in ps.min_edges:
        raise NotMinEdge(f"({u}, {v}) is not a minimum productive edge at t={t1}")
    deg = ps.min_degree(u)
    for rec in trace.records:
        if rec["t"] > t2:
            break
        if (rec["kind"] == "select" and rec["node"] == u and rec["t"] >= t1
                and v in rec["cands"] and len(rec["cands"]) <= deg):
            return True
    return False


@dataclass
class AsyncRandomAudit:
    t1: int
    t2: int
    right_nodes: int = 0
    all_considered: int = 0
    progressed: int = 0
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def audit_async_random(trace: AsyncTrace, t1: int, window: float = DEFAULT_AUDIT_WINDOW) -> AsyncRandomAudit:
    """For each v in R_min(t1): properly considered by all its G_min neighbors, or it gained a token in the window."""
    t2 = _window_end(trace, t1, None, window)
    _, ps = _min_edge_context(trace, t1)
    gained = {rec["receiver"] for rec in trace.records
              if rec["kind"] == "transfer" and rec["token"] is not None and t1 <= rec["t"] <= t2}
    audit = AsyncRandomAudit(t1, t2)
    for v in sorted(ps.right):
        nbrs = ps.min_neighbors(v)
        if not nbrs:
            continue
        audit.right_nodes += 1
        if all(_considers(trace, ps, t1, u, v, t2) for u in nbrs):
            audit.all_considered += 1
        elif v in gained:
            audit.progressed += 1
        else:
            audit.failures.append(v)
    return audit


# reference budgets


def _log2_floor1(x: float) -> float:
    return max(1.0, math.log2(x)) if x > 0 else 1.0


def theoretical_budget(k: int, alpha, n: int, delta_graph: int, q: Optional[int] = None) -> dict:
    """Unit-constant reference quantities used as comparison axes.

    ``sync_rounds`` = (k/alpha)·log2(n)·log2(max(Δ, 2))², logs floored at 1;
    ``lb_rounds`` = k(n-q)/(2q) with q the clique size (defaults to
    round(n·alpha)); ``crude_async`` = n·k in units of delta_max.
    """
    alpha = Fraction(alpha)
    if q is None:
        q = star_clique_q(n, alpha)
    sync_rounds = float(k / alpha) * _log2_floor1(n) * _log2_floor1(max(delta_graph, 2)) ** 2
    return {
        "sync_rounds": sync_rounds,
        "lb_rounds": Fraction(k * (n - q), 2 * q),
        "crude_async": n * k,
    }
