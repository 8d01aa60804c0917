"""Discrete-event asynchronous Mobile Telephone Model.

Every node runs the scan-and-connect loop: update its tag, take the ads
collected since the previous pass, select, block for a connection, communicate.
Time is an integer tick count (``TICKS_PER_UNIT`` ticks per time unit); the
queue pops in ``(time, seq)`` order.

Advertising is a beacon per directed edge: each delivery carries the
sender's current tag and schedules the next one at most ``delta_update``
later. So a neighbor hears from a node at least once per ``delta_update``,
and what it hears is never older than one ``delta_update``.
"""

from __future__ import annotations

import heapq
import json
import math
from bisect import bisect_left
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .errors import BehaviorViolation, GuaranteeViolation
from .gossip import FingerprintRegistry, RandomDiffusion, make_states
from .graph import Graph, from_edge_list
from .streams import ADVERSARY, SELECT, LazyStream, stream

TICKS_PER_UNIT = 1_000_000


def to_ticks(x) -> int:
    return round(Fraction(str(x)) * TICKS_PER_UNIT)


def to_units(ticks: int) -> float:
    return ticks / TICKS_PER_UNIT


@dataclass(frozen=True)
class DelayBounds:
    """Model delay parameters in time units; tick equivalents are derived."""

    delta_update: float = 1.0
    delta_conn: float = 1.0
    rate_bits: float = 1.0
    token_bits: float = 1.0

    def __post_init__(self):
        for name in ("delta_update", "delta_conn", "rate_bits", "token_bits"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.update_ticks < 1 or self.conn_ticks < 1 or self.transfer_ticks() < 1:
            raise ValueError("bounds are below one tick")

    @property
    def update_ticks(self) -> int:
        return to_ticks(self.delta_update)

    @property
    def conn_ticks(self) -> int:
        return to_ticks(self.delta_conn)

    def transfer_ticks(self, bits=None) -> int:
        """Longest transfer of ``bits`` (default one token) allowed at rate ``rate_bits``."""
        bits = self.token_bits if bits is None else bits
        return int(Fraction(str(bits)) * TICKS_PER_UNIT / Fraction(str(self.rate_bits)))

    @property
    def delta_max_ticks(self) -> int:
        return self.update_ticks + self.conn_ticks + self.transfer_ticks()

    @property
    def delta_max(self) -> float:
        return to_units(self.delta_max_ticks)

    def scaled(self, factor) -> "DelayBounds":
        """All time bounds multiplied by ``factor`` (token size scales, rate stays)."""
        return DelayBounds(self.delta_update * factor, self.delta_conn * factor,
                           self.rate_bits, self.token_bits * factor)

    def as_dict(self) -> dict:
        return {"delta_update": self.delta_update, "delta_conn": self.delta_conn,
                "rate_bits": self.rate_bits, "token_bits": self.token_bits}


# delay adversaries


class DelayAdversary:
    """Chooses every delay as a fraction in (0, 1] of the relevant bound.

    Subclasses override ``fraction``; the contract methods below turn it into
    ticks. ``kind`` is one of ``ad``, ``conn``, ``transfer``, ``wake``.
    """

    name = "base"

    def bind(self, sim) -> None:
        self.sim = sim
        self.bounds: DelayBounds = sim.bounds

    def fraction(self, kind, src, dst, now, rng) -> float:
        raise NotImplementedError

    @staticmethod
    def _ticks(frac, bound) -> int:
        return max(1, math.ceil(frac * bound))

    def ad_delay(self, src, dst, now, rng) -> int:
        return self._ticks(self.fraction("ad", src, dst, now, rng), self.bounds.update_ticks)

    def conn_roundtrip(self, src, dst, now, rng) -> int:
        return self._ticks(self.fraction("conn", src, dst, now, rng), self.bounds.conn_ticks)

    def transfer_time(self, bits, rng, src=None, dst=None, now=0) -> int:
        return self._ticks(self.fraction("transfer", src, dst, now, rng),
                           self.bounds.transfer_ticks(bits))

    def wake_delay(self, node, now, rng) -> int:
        return self._ticks(self.fraction("wake", node, None, now, rng), self.bounds.update_ticks)


class ConstantMax(DelayAdversary):
    name = "constant_max"

    def fraction(self, kind, src, dst, now, rng):
        return 1.0


class UniformDelays(DelayAdversary):
    name = "uniform_random"

    def fraction(self, kind, src, dst, now, rng):
        return 1.0 - rng.random()


class Bursty(DelayAdversary):
    """Alternates phases of near-zero and near-bound delays.

    A phase lasts ``phase_factor * delta_max``.
    """

    name = "bursty"

    def __init__(self, phase_factor: float = 4.0):
        self.phase_factor = phase_factor

    def fraction(self, kind, src, dst, now, rng):
        phase = int(now // (self.phase_factor * self.bounds.delta_max_ticks)) % 2
        if phase == 0:
            return 0.01 + 0.04 * rng.random()
        return 1.0 - 0.05 * rng.random()


class TargetedStaller(DelayAdversary):
    """Maximal delay on anything touching the currently least-informed node."""

    name = "targeted_staller"

    def fraction(self, kind, src, dst, now, rng):
        victim = self.sim.least_informed()
        if src == victim or dst == victim:
            return 1.0
        return 1.0 - rng.random()


ADVERSARIES = {cls.name: cls for cls in (ConstantMax, UniformDelays, Bursty, TargetedStaller)}


def make_adversary(name: str, **params) -> DelayAdversary:
    return ADVERSARIES[name](**params)


# trace


@dataclass
class AsyncTrace:
    """Timestamped records in processing order.

    Record schema (``t`` in ticks, ``kind`` selects the remaining keys):
    ``update``: node, idx, size, fp; ``ad``: src, dst, upd;
    ``select``: node, nads, shat, cands, choice; ``propose``: src, dst, aid;
    ``proposal``: src, dst, aid, accepted; ``response``: src, dst, aid, accepted;
    ``transfer``: src, dst, aid, start, bits, giver, receiver, token.
    """

    graph: Graph
    initial: list[frozenset]
    bounds: DelayBounds
    records: list[dict] = field(default_factory=list)
    completion_time: Optional[int] = None
    end_time: int = 0
    seed: int = 0
    adversary: str = ""

    @property
    def k(self) -> int:
        return len(frozenset().union(*self.initial)) if self.initial else 0

    def dumps(self) -> str:
        head = {
            "type": "header", "engine": "async", "n": self.graph.n,
            "edges": [list(e) for e in self.graph.edges],
            "initial": [sorted(s) for s in self.initial],
            "bounds": self.bounds.as_dict(), "ticks_per_unit": TICKS_PER_UNIT,
            "seed": self.seed, "adversary": self.adversary,
        }
        end = {"type": "end", "completion_time": self.completion_time, "end_time": self.end_time}
        out = [head] + self.records + [end]
        return "".join(json.dumps(x, sort_keys=True, separators=(",", ":")) + "\n" for x in out)

    @classmethod
    def loads(cls, text: str) -> "AsyncTrace":
        recs = [json.loads(line) for line in text.splitlines() if line.strip()]
        head, end = recs[0], recs[-1]
        g = from_edge_list(head["n"], [tuple(e) for e in head["edges"]])
        return cls(g, [frozenset(s) for s in head["initial"]], DelayBounds(**head["bounds"]),
                   recs[1:-1], end["completion_time"], end["end_time"],
                   head["seed"], head["adversary"])


# engine

_WAKE, _AD, _PROPOSAL, _RESPONSE, _TRANSFER = range(5)


class _Simulation:
    def __init__(self, g, initial_tokens, behavior, bounds, adversary, seed, max_time, registry):
        self.g = g
        self.behavior = behavior
        self.bounds = bounds
        self.adversary = adversary
        self.seed = seed
        self.max_ticks = to_ticks(max_time)
        self.states = make_states(g.n, initial_tokens, registry)
        self.initial = [s.tokens.frozen() for s in self.states]
        self.k = len(frozenset().union(*self.initial))
        self.rng = stream(seed, ADVERSARY)
        self.queue: list = []
        self.seq = 0
        self.records: list[dict] = []
        n = g.n
        self.tag = [None] * n
        self.update_idx = [0] * n
        self.iteration = [0] * n
        self.pending: list[dict] = [{} for _ in range(n)]
        self.busy = [False] * n
        self.attempts: dict[int, bool] = {}
        self.next_aid = 0
        self.done = sum(1 for s in self.states if len(s.tokens) == self.k)
        self._least = None
        adversary.bind(self)

    def least_informed(self) -> int:
        if self._least is None:
            self._least = min(range(self.g.n), key=lambda u: (len(self.states[u].tokens), u))
        return self._least

    def schedule(self, t, kind, *payload):
        heapq.heappush(self.queue, (t, self.seq, kind, payload))
        self.seq += 1

    def _bounded(self, value, upper, what):
        if not 0 < value <= upper:
            raise GuaranteeViolation(f"{what} delay {value} ticks outside (0, {upper}]")
        return value

    def run(self) -> AsyncTrace:
        g = self.g
        trace = AsyncTrace(g, self.initial, self.bounds, self.records, seed=self.seed,
                           adversary=self.adversary.name)
        if self.done == g.n:
            trace.completion_time = 0
            return trace
        for u in range(g.n):
            self.schedule(0, _WAKE, u)
        for u in range(g.n):
            for v in g.adj[u]:
                d = self._bounded(self.adversary.ad_delay(u, v, 0, self.rng),
                                  self.bounds.update_ticks, "advertisement")
                self.schedule(d, _AD, u, v)
        handlers = (self._wake, self._ad, self._proposal, self._response, self._transfer)
        now = 0
        while self.queue:
            t, _, kind, payload = heapq.heappop(self.queue)
            if t > self.max_ticks:
                break
            now = t
            handlers[kind](t, *payload)
            if self.done == g.n:
                trace.completion_time = t
                break
        trace.end_time = trace.completion_time if trace.completion_time is not None else self.max_ticks
        if trace.completion_time is None and not self.queue:
            trace.end_time = now
        return trace

    def _wake(self, t, u):
        st = self.states[u]
        self.iteration[u] += 1
        tag = self.behavior.advertise(st)
        self.tag[u] = tag
        self.update_idx[u] += 1
        self.records.append({"t": t, "kind": "update", "node": u, "idx": self.update_idx[u],
                             "size": tag.size, "fp": tag.fingerprint})
        ads = [self.pending[u][v] for v in sorted(self.pending[u])]
        self.pending[u].clear()
        target = None
        if ads:
            s_hat, cands = self.behavior.candidates(st, ads)
            target = self.behavior.select(st, ads, LazyStream(self.seed, SELECT, u, self.iteration[u]))
            self.records.append({"t": t, "kind": "select", "node": u, "nads": len(ads),
                                 "shat": s_hat, "cands": cands, "choice": target})
        if target is None:
            d = self._bounded(self.adversary.wake_delay(u, t, self.rng),
                              self.bounds.update_ticks, "wake")
            self.schedule(t + d, _WAKE, u)
            return
        if not self.g.has_edge(u, target):
            raise BehaviorViolation(f"node {u} proposed to non-neighbor {target}")
        aid = self.next_aid
        self.next_aid += 1
        self.records.append({"t": t, "kind": "propose", "src": u, "dst": target, "aid": aid})
        d = self._bounded(self.adversary.conn_roundtrip(u, target, t, self.rng),
                          self.bounds.conn_ticks, "connection")
        self.schedule(t + (d + 1) // 2, _PROPOSAL, u, target, aid)
        self.schedule(t + d, _RESPONSE, u, target, aid)

    def _ad(self, t, src, dst):
        self.pending[dst][src] = self.tag[src]
        self.records.append({"t": t, "kind": "ad", "src": src, "dst": dst,
                             "upd": self.update_idx[src]})
        d = self._bounded(self.adversary.ad_delay(src, dst, t, self.rng),
                          self.bounds.update_ticks, "advertisement")
        self.schedule(t + d, _AD, src, dst)

    def _proposal(self, t, u, v, aid):
        accepted = not self.busy[v]
        if accepted:
            self.busy[v] = True
        self.attempts[aid] = accepted
        self.records.append({"t": t, "kind": "proposal", "src": u, "dst": v, "aid": aid,
                             "accepted": accepted})

    def _response(self, t, u, v, aid):
        accepted = self.attempts.pop(aid)
        self.records.append({"t": t, "kind": "response", "src": u, "dst": v, "aid": aid,
                             "accepted": accepted})
        if not accepted:
            self.schedule(t, _WAKE, u)
            return
        bits = self.bounds.token_bits
        d = self._bounded(self.adversary.transfer_time(bits, self.rng, u, v, t),
                          self.bounds.transfer_ticks(bits), "transfer")
        self.schedule(t + d, _TRANSFER, u, v, aid, t, bits)

    def _transfer(self, t, u, v, aid, start, bits):
        out = self.behavior.communicate(self.states[u], self.states[v])
        self.busy[v] = False
        rec = {"t": t, "kind": "transfer", "src": u, "dst": v, "aid": aid, "start": start,
               "bits": bits, "giver": None, "receiver": None, "token": None}
        if out is not None:
            rec.update(giver=out.giver, receiver=out.receiver, token=out.token)
            if len(self.states[out.receiver].tokens) == self.k:
                self.done += 1
            self._least = None
        self.records.append(rec)
        self.schedule(t, _WAKE, u)


def run_async(g: Graph, initial_tokens, behavior=None, bounds: DelayBounds | None = None,
              adversary: DelayAdversary | str = "uniform_random", seed: int = 0,
              max_time: float = 1e6, registry: FingerprintRegistry | None = None) -> AsyncTrace:
    """Simulate asynchronous random diffusion gossip until completion or ``max_time``.

    Raises GuaranteeViolation as soon as the adversary returns a delay outside
    its bound.
    """
    behavior = behavior or RandomDiffusion()
    bounds = bounds or DelayBounds()
    if isinstance(adversary, str):
        adversary = make_adversary(adversary)
    registry = registry if registry is not None else FingerprintRegistry()
    sim = _Simulation(g, initial_tokens, behavior, bounds, adversary, seed, max_time, registry)
    return sim.run()


# guarantee audit


@dataclass(frozen=True)
class Violation:
    kind: str
    time: int
    detail: str


def check_guarantees(trace: AsyncTrace, bounds: DelayBounds | None = None) -> list[Violation]:
    """Audit a trace against the model's delay and connection guarantees.

    Kinds: ``a`` ad carrying a tag superseded at least delta_update earlier,
    or an update some neighbor did not hear within delta_update; ``b`` delivered ad not the sender's latest;
    ``c`` gap over delta_update between deliveries on an edge; ``d``
    connection attempt unresolved within delta_conn; ``e`` incoming connection
    rule broken (double accept, or reject while free); ``f`` transfer slower
    than rate_bits.
    """
    bounds = bounds or trace.bounds
    du, dc = bounds.update_ticks, bounds.conn_ticks
    end = trace.end_time
    out: list[Violation] = []
    seen_a = set()

    def flag_a(key, t, detail):
        if key not in seen_a:
            seen_a.add(key)
            out.append(Violation("a", t, detail))

    upd_times: dict[int, list[int]] = {}
    upd_idx: dict[int, list[int]] = {}
    deliveries: dict[tuple, list[int]] = {}
    for r in trace.records:
        if r["kind"] == "update":
            upd_times.setdefault(r["node"], []).append(r["t"])
            upd_idx.setdefault(r["node"], []).append(r["idx"])
    idx_time = {(u, i): t for u in upd_times for i, t in zip(upd_idx[u], upd_times[u])}

    attempts: dict[int, dict] = {}
    busy: dict[int, int] = {}
    current: dict[int, int] = {}
    for r in trace.records:
        kind, t = r["kind"], r["t"]
        if kind == "update":
            current[r["node"]] = r["idx"]
        elif kind == "ad":
            src, dst, upd = r["src"], r["dst"], r["upd"]
            deliveries.setdefault((src, dst), []).append(t)
            t_upd = idx_time.get((src, upd))
            if t_upd is None or t_upd > t:
                out.append(Violation("b", t, f"ad {src}->{dst} carries unknown or future update {upd}"))
                continue
            t_next = idx_time.get((src, upd + 1))
            if t_next is not None and t - t_next >= du:
                flag_a((src, dst, upd), t,
                       f"ad {src}->{dst} carries update {upd}, superseded {t - t_next} ticks earlier")
            latest = current.get(src)
            if upd != latest:
                out.append(Violation("b", t, f"ad {src}->{dst} carries update {upd}, newest is {latest}"))
        elif kind == "propose":
            attempts[r["aid"]] = {"start": t, "delivered": None}
        elif kind == "proposal":
            v, aid = r["dst"], r["aid"]
            a = attempts.get(aid)
            if a is not None:
                a["delivered"] = t
            if r["accepted"]:
                if v in busy:
                    out.append(Violation("e", t, f"node {v} accepted attempt {aid} while serving {busy[v]}"))
                busy[v] = aid
            elif v not in busy:
                out.append(Violation("e", t, f"node {v} rejected attempt {aid} while free"))
        elif kind == "response":
            a = attempts.pop(r["aid"], None)
            if a is None:
                out.append(Violation("d", t, f"response to unknown attempt {r['aid']}"))
            elif t - a["start"] > dc or a["delivered"] is None or not a["start"] <= a["delivered"] <= t:
                out.append(Violation("d", t, f"attempt {r['aid']} resolved after {t - a['start']} ticks"))
        elif kind == "transfer":
            v = r["dst"]
            if busy.get(v) == r["aid"]:
                del busy[v]
            if t - r["start"] > bounds.transfer_ticks(r["bits"]):
                out.append(Violation("f", t, f"transfer {r['src']}->{v} took {t - r['start']} ticks"))
    for aid, a in attempts.items():
        if end - a["start"] > dc:
            out.append(Violation("d", end, f"attempt {aid} never resolved"))

    g = trace.graph
    for u, times in upd_times.items():
        for v in g.adj[u]:
            dl = deliveries.get((u, v), [])
            for i, t0 in zip(upd_idx[u], times):
                if t0 + du > end:
                    break
                j = bisect_left(dl, t0)
                if j == len(dl) or dl[j] > t0 + du:
                    flag_a((u, v, i), t0, f"no ad {u}->{v} within delta_update of update {i}")
    for (u, v), dl in deliveries.items():
        for a, b in zip(dl, dl[1:]):
            if b - a > du:
                out.append(Violation("c", b, f"edge {u}->{v} silent for {b - a} ticks"))
        if end - dl[-1] > du:
            out.append(Violation("c", end, f"edge {u}->{v} silent for {end - dl[-1]} ticks at end"))
    return out


def snapshot_at(trace: AsyncTrace, t: int) -> list[frozenset]:
    """Token sets after every event with time <= ``t``."""
    sets = [set(s) for s in trace.initial]
    for r in trace.records:
        if r["t"] > t:
            break
        if r["kind"] == "transfer" and r["token"] is not None:
            sets[r["receiver"]].add(r["token"])
    return [frozenset(s) for s in sets]
