"""Round-based Mobile Telephone Model engine.

One round: every node advertises to all neighbors, each node proposes to at
most one neighbor, every proposal target accepts exactly one proposer (the
policy decides which), then each accepted connection communicates once.
Connections are processed in ascending (proposer, acceptor) order; a node
only hands over tokens it held when the round began, so nothing travels two
hops in one round.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .errors import BehaviorViolation
from .gossip import (
    FingerprintRegistry,
    NodeState,
    RandomDiffusion,
    Tag,
    Transfer,
    make_states,
)
from .graph import Graph, from_edge_list
from .streams import ACCEPT, SELECT, LazyStream


# acceptance policies


class FirstById:
    name = "first_by_id"

    def choose(self, target, proposers, rng, states):
        return proposers[0]


class UniformRandom:
    name = "uniform_random"

    def choose(self, target, proposers, rng, states):
        if len(proposers) == 1:
            return proposers[0]
        return proposers[rng.randrange(len(proposers))]


class AdversarialMinProgress:
    """Accept the proposer whose transfer helps the least-informed nodes least.

    Each candidate connection is evaluated in isolation against the current
    sets: prefer the lowest resulting minimum size, then the most nodes left
    at that size, then the smallest id.
    """

    name = "adversarial_min_progress"

    def choose(self, target, proposers, rng, states):
        if len(proposers) == 1:
            return proposers[0]
        sizes = [len(s.tokens) for s in states]

        def progress(p):
            a, b = states[p].tokens, states[target].tokens
            after = list(sizes)
            if a.fingerprint != b.fingerprint:
                after[p if len(a) < len(b) else target] += 1
            low = min(after)
            return (low, -after.count(low), p)

        return min(proposers, key=progress)


POLICIES = {cls.name: cls for cls in (FirstById, UniformRandom, AdversarialMinProgress)}


def make_policy(name: str):
    return POLICIES[name]()


# records


@dataclass
class RoundRecord:
    round: int
    ads: list[Tag]
    proposals: dict[int, int]
    accepted: list[tuple[int, int]]
    outcomes: list[Optional[Transfer]]

    @property
    def transfers(self) -> list[Transfer]:
        return [t for t in self.outcomes if t is not None]

    def to_json(self) -> dict:
        return {
            "type": "round",
            "round": self.round,
            "ads": [[a.fingerprint, a.size] for a in self.ads],
            "proposals": sorted([p, t] for p, t in self.proposals.items()),
            "accepted": [list(x) for x in self.accepted],
            "outcomes": [None if o is None else list(o) for o in self.outcomes],
        }

    @classmethod
    def from_json(cls, d: dict) -> "RoundRecord":
        return cls(
            round=d["round"],
            ads=[Tag(fp, size, u) for u, (fp, size) in enumerate(d["ads"])],
            proposals={p: t for p, t in d["proposals"]},
            accepted=[tuple(x) for x in d["accepted"]],
            outcomes=[None if o is None else Transfer(*o) for o in d["outcomes"]],
        )


@dataclass
class SyncTrace:
    graph: Graph
    initial: list[frozenset]
    rounds: list[RoundRecord] = field(default_factory=list)
    completion_round: Optional[int] = None
    final: list[frozenset] = field(default_factory=list)
    seed: int = 0
    policy: str = ""
    max_rounds: int = 0

    @property
    def k(self) -> int:
        return len(frozenset().union(*self.initial)) if self.initial else 0

    def dumps(self) -> str:
        """JSON lines: a header, one record per round, then an end record."""
        head = {
            "type": "header", "engine": "sync", "n": self.graph.n,
            "edges": [list(e) for e in self.graph.edges],
            "initial": [sorted(s) for s in self.initial],
            "seed": self.seed, "policy": self.policy, "max_rounds": self.max_rounds,
        }
        lines = [head] + [r.to_json() for r in self.rounds]
        lines.append({"type": "end", "completion_round": self.completion_round,
                      "final": [sorted(s) for s in self.final]})
        return "".join(json.dumps(x, sort_keys=True, separators=(",", ":")) + "\n" for x in lines)

    @classmethod
    def loads(cls, text: str) -> "SyncTrace":
        recs = [json.loads(line) for line in text.splitlines() if line.strip()]
        head, end = recs[0], recs[-1]
        g = from_edge_list(head["n"], [tuple(e) for e in head["edges"]])
        return cls(
            graph=g,
            initial=[frozenset(s) for s in head["initial"]],
            rounds=[RoundRecord.from_json(r) for r in recs[1:-1]],
            completion_round=end["completion_round"],
            final=[frozenset(s) for s in end["final"]],
            seed=head["seed"], policy=head["policy"], max_rounds=head["max_rounds"],
        )


def run_round(g: Graph, states: list[NodeState], behavior, policy, seed: int, round_no: int) -> RoundRecord:
    """Execute one synchronous round in place and return its record."""
    ads = [behavior.advertise(s) for s in states]
    proposals: dict[int, int] = {}
    for u in range(g.n):
        received = [ads[v] for v in g.adj[u]]
        target = behavior.select(states[u], received, LazyStream(seed, SELECT, u, round_no))
        if target is None:
            continue
        if not g.has_edge(u, target):
            raise BehaviorViolation(f"round {round_no}: node {u} proposed to non-neighbor {target}")
        proposals[u] = target

    by_target: dict[int, list[int]] = {}
    for p, t in proposals.items():
        by_target.setdefault(t, []).append(p)
    accepted = []
    for t in sorted(by_target):
        cands = sorted(by_target[t])
        chosen = policy.choose(t, cands, LazyStream(seed, ACCEPT, t, round_no), states)
        if chosen not in cands:
            raise BehaviorViolation(f"round {round_no}: policy accepted non-proposer {chosen} at {t}")
        accepted.append((chosen, t))
    accepted.sort()

    held = {u: states[u].tokens.frozen() for pair in accepted for u in pair}
    outcomes = [behavior.communicate(states[p], states[a], held) for p, a in accepted]
    return RoundRecord(round_no, ads, proposals, accepted, outcomes)


def _complete(states, k) -> bool:
    return all(len(s.tokens) == k for s in states)


def run_until_complete(g: Graph, initial_tokens, behavior=None, policy=None, seed: int = 0,
                       max_rounds: int = 100000, registry: FingerprintRegistry | None = None) -> SyncTrace:
    """Run rounds until every node holds every token or ``max_rounds`` elapse.

    ``initial_tokens`` maps node -> iterable of token ids (or is a per-node
    sequence). Completion round 0 means the initial state was already solved.
    """
    behavior = behavior or RandomDiffusion()
    policy = policy or FirstById()
    if isinstance(policy, str):
        policy = make_policy(policy)
    registry = registry if registry is not None else FingerprintRegistry()
    states = make_states(g.n, initial_tokens, registry)
    initial = [s.tokens.frozen() for s in states]
    k = len(frozenset().union(*initial))
    trace = SyncTrace(g, initial, seed=seed, policy=policy.name, max_rounds=max_rounds)
    if _complete(states, k):
        trace.completion_round = 0
    else:
        for r in range(1, max_rounds + 1):
            trace.rounds.append(run_round(g, states, behavior, policy, seed, r))
            if _complete(states, k):
                trace.completion_round = r
                break
    trace.final = [s.tokens.frozen() for s in states]
    return trace


def replay(trace: SyncTrace) -> Iterable[list[set]]:
    """Yield the token sets at the start of each round, then the final sets."""
    sets = [set(s) for s in trace.initial]
    for rec in trace.rounds:
        yield [set(s) for s in sets]
        for t in rec.transfers:
            sets[t.receiver].add(t.token)
    yield sets
