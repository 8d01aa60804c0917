"""Flat ``key = value`` experiment configuration with dotted keys.

Blank lines and ``#`` comments are ignored. Keys::

    graph.kind      ring | path | complete | star | star_clique | random | file
    graph.n         node count (star: n-1 leaves)
    graph.alpha     star_clique target expansion, e.g. 1/8 or 0.125
    graph.p         random: edge probability
    graph.seed      random: generator seed (default: the run seed)
    graph.path      file: edge list
    tokens.kind     uniform | clique | at | file
    tokens.k        number of distinct tokens
    tokens.seed     uniform: placement seed (default: the run seed)
    tokens.node     at: node that starts with all k tokens
    tokens.path     file: "node token" lines
    engine          sync | async
    policy.kind     sync acceptance policy
    adversary.kind  async delay adversary
    adversary.phase_factor   bursty phase length in multiples of delta_max
    delta_update, delta_conn, rate_bits, token_bits   async bounds
    seeds           comma list and/or a..b inclusive ranges
    max_rounds, max_time, output, trace_dir, workers
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields, replace
from fractions import Fraction
from typing import Optional

from ..amtm import ADVERSARIES
from ..errors import ConfigError
from ..sync import POLICIES

GRAPH_KINDS = ("ring", "path", "complete", "star", "star_clique", "random", "file")
TOKEN_KINDS = ("uniform", "clique", "at", "file")
ENGINES = ("sync", "async")


def parse_seeds(text: str) -> tuple[int, ...]:
    out = []
    for part in text.replace(" ", "").split(","):
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return tuple(out)


def _alpha(text: str) -> Fraction:
    return Fraction(text) if "/" in text else Fraction(str(float(text)))


# dotted key -> (attribute, parser)
KEYS = {
    "graph.kind": ("graph_kind", str),
    "graph.n": ("graph_n", int),
    "graph.alpha": ("graph_alpha", _alpha),
    "graph.p": ("graph_p", float),
    "graph.seed": ("graph_seed", int),
    "graph.path": ("graph_path", str),
    "tokens.kind": ("tokens_kind", str),
    "tokens.k": ("tokens_k", int),
    "tokens.seed": ("tokens_seed", int),
    "tokens.node": ("tokens_node", int),
    "tokens.path": ("tokens_path", str),
    "engine": ("engine", str),
    "policy.kind": ("policy", str),
    "adversary.kind": ("adversary", str),
    "adversary.phase_factor": ("phase_factor", float),
    "delta_update": ("delta_update", float),
    "delta_conn": ("delta_conn", float),
    "rate_bits": ("rate_bits", float),
    "token_bits": ("token_bits", float),
    "seeds": ("seeds", parse_seeds),
    "max_rounds": ("max_rounds", int),
    "max_time": ("max_time", float),
    "output": ("output", str),
    "trace_dir": ("trace_dir", str),
    "workers": ("workers", int),
}
ATTR_TO_KEY = {attr: key for key, (attr, _) in KEYS.items()}


@dataclass(frozen=True)
class ExperimentConfig:
    graph_kind: str = "ring"
    graph_n: int = 16
    graph_alpha: Optional[Fraction] = None
    graph_p: Optional[float] = None
    graph_seed: Optional[int] = None
    graph_path: Optional[str] = None
    tokens_kind: str = "uniform"
    tokens_k: int = 1
    tokens_seed: Optional[int] = None
    tokens_node: int = 0
    tokens_path: Optional[str] = None
    engine: str = "sync"
    policy: str = "first_by_id"
    adversary: str = "uniform_random"
    phase_factor: Optional[float] = None
    delta_update: float = 1.0
    delta_conn: float = 1.0
    rate_bits: float = 1.0
    token_bits: float = 1.0
    seeds: tuple = (0,)
    max_rounds: int = 100000
    max_time: float = 1e7
    output: Optional[str] = None
    trace_dir: Optional[str] = None
    workers: int = 1

    def with_values(self, **kw) -> "ExperimentConfig":
        return validate(replace(self, **kw))

    def set(self, key: str, value) -> "ExperimentConfig":
        """Copy with one dotted key changed; strings are parsed like config text."""
        return self.update({key: value})

    def update(self, values: dict) -> "ExperimentConfig":
        """Copy with several dotted keys changed, validated once at the end."""
        return validate(replace(self, **{KEYS[key][0]: _parse_key(key, v) for key, v in values.items()}))

    def canonical(self) -> dict:
        """Result-affecting fields only; output locations and worker count are excluded."""
        d = asdict(self)
        for name in ("output", "trace_dir", "workers", "seeds"):
            d.pop(name)
        if d["graph_alpha"] is not None:
            d["graph_alpha"] = str(d["graph_alpha"])
        return d

    def digest(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.blake2b(blob.encode(), digest_size=8).hexdigest()

    def dumps(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if f.name == "seeds":
                v = ",".join(map(str, v))
            lines.append(f"{ATTR_TO_KEY[f.name]} = {v}")
        return "\n".join(lines) + "\n"


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    if cfg.graph_kind not in GRAPH_KINDS:
        raise ConfigError("graph.kind", f"unknown graph kind {cfg.graph_kind!r}; expected one of {GRAPH_KINDS}")
    if cfg.graph_kind == "file":
        if not cfg.graph_path:
            raise ConfigError("graph.path", "required when graph.kind = file")
    elif cfg.graph_n < 2:
        raise ConfigError("graph.n", "need at least two nodes")
    if cfg.graph_kind == "star_clique" and cfg.graph_alpha is None:
        raise ConfigError("graph.alpha", "required when graph.kind = star_clique")
    if cfg.graph_kind == "random":
        if cfg.graph_p is None or not 0 < cfg.graph_p <= 1:
            raise ConfigError("graph.p", "random graphs need 0 < p <= 1")
    if cfg.tokens_kind not in TOKEN_KINDS:
        raise ConfigError("tokens.kind", f"unknown seeding {cfg.tokens_kind!r}; expected one of {TOKEN_KINDS}")
    if cfg.tokens_kind == "file" and not cfg.tokens_path:
        raise ConfigError("tokens.path", "required when tokens.kind = file")
    if cfg.tokens_kind == "clique" and cfg.graph_kind != "star_clique":
        raise ConfigError("tokens.kind", "clique seeding needs graph.kind = star_clique")
    if cfg.tokens_kind != "file" and cfg.tokens_k < 1:
        raise ConfigError("tokens.k", "need at least one token")
    if cfg.engine not in ENGINES:
        raise ConfigError("engine", f"unknown engine {cfg.engine!r}; expected one of {ENGINES}")
    if cfg.policy not in POLICIES:
        raise ConfigError("policy.kind", f"unknown policy {cfg.policy!r}; expected one of {sorted(POLICIES)}")
    if cfg.adversary not in ADVERSARIES:
        raise ConfigError("adversary.kind",
                          f"unknown adversary {cfg.adversary!r}; expected one of {sorted(ADVERSARIES)}")
    if cfg.phase_factor is not None and cfg.adversary != "bursty":
        raise ConfigError("adversary.phase_factor", "only the bursty adversary takes a phase factor")
    for attr in ("delta_update", "delta_conn", "rate_bits", "token_bits", "max_time"):
        if getattr(cfg, attr) <= 0:
            raise ConfigError(ATTR_TO_KEY[attr], "must be positive")
    if not cfg.seeds:
        raise ConfigError("seeds", "at least one seed is required")
    if cfg.max_rounds < 1:
        raise ConfigError("max_rounds", "must be positive")
    if cfg.workers < 1:
        raise ConfigError("workers", "must be positive")
    return cfg


def _parse_key(key: str, value):
    if key not in KEYS:
        raise ConfigError(key, "unknown key")
    if not isinstance(value, str):
        return value
    try:
        return KEYS[key][1](value)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(key, f"cannot parse {value!r}: {exc}") from None


def parse_config(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw.strip()!r}")
        key, value = (x.strip() for x in line.split("=", 1))
        values[key] = _parse_key(key, value)
    return (base or ExperimentConfig()).update(values)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())


__all__ = ["ExperimentConfig", "KEYS", "parse_config", "load_config", "parse_seeds", "validate",
           "ConfigError"]
