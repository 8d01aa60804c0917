"""Random diffusion gossip: token sets, advertisement tags, selection and transfer.

The same behavior object drives both the round-based engine and the
event-driven engine.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, Sequence

from .errors import FingerprintCollision

MASK64 = 0xFFFFFFFFFFFFFFFF


def mix64(x: int) -> int:
    """splitmix64 finalizer."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def fingerprint(tokens: Iterable[int]) -> int:
    """Order-independent 64-bit digest: sum of per-token mixes mod 2^64."""
    return sum(mix64(t) for t in tokens) & MASK64


class FingerprintRegistry:
    """Records every token set materialized in a run and rejects digest reuse."""

    def __init__(self):
        self._seen: dict[int, frozenset] = {}

    def __len__(self):
        return len(self._seen)

    def observe(self, fp: int, tokens: frozenset) -> None:
        prev = self._seen.setdefault(fp, tokens)
        if prev != tokens:
            raise FingerprintCollision(
                f"fingerprint {fp:016x} shared by {sorted(prev)} and {sorted(tokens)}")


class TokenSet:
    """Mutable grow-only set of token ids with an incrementally maintained fingerprint."""

    __slots__ = ("_tokens", "fingerprint", "registry")

    def __init__(self, tokens: Iterable[int] = (), registry: FingerprintRegistry | None = None):
        self._tokens = set(tokens)
        self.fingerprint = fingerprint(self._tokens)
        self.registry = registry
        if registry is not None:
            registry.observe(self.fingerprint, frozenset(self._tokens))

    def __len__(self):
        return len(self._tokens)

    def __contains__(self, token):
        return token in self._tokens

    def __iter__(self):
        return iter(sorted(self._tokens))

    def __repr__(self):
        return f"TokenSet({sorted(self._tokens)})"

    def frozen(self) -> frozenset:
        return frozenset(self._tokens)

    def add(self, token: int) -> bool:
        if token in self._tokens:
            return False
        self._tokens.add(token)
        self.fingerprint = (self.fingerprint + mix64(token)) & MASK64
        if self.registry is not None:
            self.registry.observe(self.fingerprint, frozenset(self._tokens))
        return True

    def missing_from(self, other: "TokenSet") -> set:
        """Tokens held here that ``other`` lacks."""
        return self._tokens - other._tokens


class Tag(NamedTuple):
    fingerprint: int
    size: int
    uid: int


@dataclass
class NodeState:
    uid: int
    tokens: TokenSet


class Transfer(NamedTuple):
    giver: int
    receiver: int
    token: int


def get_tag(state: NodeState) -> Tag:
    return Tag(state.tokens.fingerprint, len(state.tokens), state.uid)


def productive_candidates(own_fp: int, ads: Sequence[Tag]) -> tuple[Optional[int], list[int]]:
    """Minimum size among ads with a differing fingerprint, and the advertisers at that size.

    Returns ``(None, [])`` when no ad differs from the own fingerprint.
    """
    s_hat = None
    for a in ads:
        if a.fingerprint != own_fp and (s_hat is None or a.size < s_hat):
            s_hat = a.size
    if s_hat is None:
        return None, []
    return s_hat, sorted({a.uid for a in ads if a.fingerprint != own_fp and a.size == s_hat})


def select(state: NodeState, ads: Sequence[Tag], rng) -> Optional[int]:
    """Uniform choice among minimum-size advertisers whose fingerprint differs from ours."""
    _, cands = productive_candidates(state.tokens.fingerprint, ads)
    if not cands:
        return None
    if len(cands) == 1:
        return cands[0]
    return cands[rng.randrange(len(cands))]


def communicate(proposer: NodeState, acceptor: NodeState, held=None) -> Optional[Transfer]:
    """Move one token across a connection; None when nothing can move.

    The smaller set receives (the acceptor on equal sizes) the smallest token
    id it is missing from the other side. ``held`` optionally maps uid to the
    tokens each side may hand over (the round-start sets in the synchronous
    engine); if the preferred direction has nothing left, the other is tried.
    """
    if held is None and proposer.tokens.fingerprint == acceptor.tokens.fingerprint:
        return None
    src_p = held[proposer.uid] if held is not None else proposer.tokens.frozen()
    src_a = held[acceptor.uid] if held is not None else acceptor.tokens.frozen()
    if len(src_p) < len(src_a):
        order = ((acceptor, src_a, proposer), (proposer, src_p, acceptor))
    else:
        order = ((proposer, src_p, acceptor), (acceptor, src_a, proposer))
    for giver, pool, receiver in order:
        diff = [t for t in pool if t not in receiver.tokens]
        if diff:
            token = min(diff)
            receiver.tokens.add(token)
            return Transfer(giver.uid, receiver.uid, token)
    return None


class RandomDiffusion:
    """Algorithm behavior plugged into both engines."""

    name = "random_diffusion"

    def advertise(self, state: NodeState) -> Tag:
        return get_tag(state)

    def select(self, state: NodeState, ads: Sequence[Tag], rng) -> Optional[int]:
        return select(state, ads, rng)

    def candidates(self, state: NodeState, ads: Sequence[Tag]) -> tuple[Optional[int], list[int]]:
        return productive_candidates(state.tokens.fingerprint, ads)

    def communicate(self, proposer: NodeState, acceptor: NodeState, held=None) -> Optional[Transfer]:
        return communicate(proposer, acceptor, held)


def make_states(n: int, initial: dict[int, Iterable[int]] | Sequence[Iterable[int]],
                registry: FingerprintRegistry | None = None) -> list[NodeState]:
    if isinstance(initial, dict):
        sets = [initial.get(u, ()) for u in range(n)]
    else:
        sets = list(initial)
    return [NodeState(u, TokenSet(sets[u], registry)) for u in range(n)]


def read_token_file(path) -> dict[int, set[int]]:
    """Lines of ``node token_id``; a node may appear any number of times."""
    out: dict[int, set[int]] = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            node, tok = line.split()
            out.setdefault(int(node), set()).add(int(tok))
    return out


def write_token_file(initial: dict[int, Iterable[int]], path) -> None:
    with open(path, "w") as fh:
        for node in sorted(initial):
            for tok in sorted(initial[node]):
                fh.write(f"{node} {tok}\n")
