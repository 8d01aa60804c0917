"""Execute configured runs, sweep one axis, and render CSV summaries."""

from __future__ import annotations

import csv
import io
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Optional, Sequence

from ..amtm import DelayBounds, check_guarantees, make_adversary, run_async, to_units
from ..analysis import check_async_invariants, check_trace_invariants, theoretical_budget
from ..errors import ConfigError
from ..expansion import vertex_expansion
from ..gossip import read_token_file
from ..graph import (
    Graph,
    gen_complete,
    gen_path,
    gen_random_connected,
    gen_ring,
    gen_star,
    gen_star_clique,
    read_edge_list,
)
from ..streams import SEEDING, stream
from ..sync import run_until_complete
from .config import KEYS, ExperimentConfig


def build_graph(cfg: ExperimentConfig, seed: int = 0) -> Graph:
    kind, n = cfg.graph_kind, cfg.graph_n
    if kind == "ring":
        return gen_ring(n)
    if kind == "path":
        return gen_path(n)
    if kind == "complete":
        return gen_complete(n)
    if kind == "star":
        return gen_star(n - 1)
    if kind == "star_clique":
        return gen_star_clique(n, cfg.graph_alpha)
    if kind == "random":
        return gen_random_connected(n, cfg.graph_p, seed if cfg.graph_seed is None else cfg.graph_seed)
    return read_edge_list(cfg.graph_path)


def build_tokens(cfg: ExperimentConfig, g: Graph, seed: int = 0) -> dict[int, set[int]]:
    """Initial token placement; tokens are ids 0..k-1 except for file seeding."""
    kind, k = cfg.tokens_kind, cfg.tokens_k
    if kind == "uniform":
        rng = stream(seed if cfg.tokens_seed is None else cfg.tokens_seed, SEEDING)
        out: dict[int, set[int]] = {}
        for t in range(k):
            out.setdefault(rng.randrange(g.n), set()).add(t)
        return out
    if kind == "clique":
        return {u: set(range(k)) for u in range(g.meta["q"])}
    if kind == "at":
        if not 0 <= cfg.tokens_node < g.n:
            raise ConfigError("tokens.node", f"node {cfg.tokens_node} is outside the graph")
        return {cfg.tokens_node: set(range(k))}
    placed = read_token_file(cfg.tokens_path)
    if any(not 0 <= u < g.n for u in placed):
        raise ConfigError("tokens.path", "token file names nodes outside the graph")
    return placed


@lru_cache(maxsize=256)
def graph_alpha(g: Graph):
    return vertex_expansion(g)


def bounds_of(cfg: ExperimentConfig) -> DelayBounds:
    return DelayBounds(cfg.delta_update, cfg.delta_conn, cfg.rate_bits, cfg.token_bits)


@dataclass
class RunResult:
    digest: str
    seed: int
    config: ExperimentConfig
    n: int
    m: int
    max_degree: int
    alpha: str
    alpha_exact: bool
    k: int
    completed: bool
    completion: Optional[float]     # rounds (sync) or time units (async)
    connections: int
    transfers: int
    noops: int
    invariants_ok: bool
    violations: int
    violation_kinds: str
    sync_budget: float
    crude_async: Optional[float] = None
    trace_path: Optional[str] = None
    extra: dict = field(default_factory=dict)

    def axis_value(self, axis: str):
        return getattr(self.config, KEYS[axis][0])


RUN_COLUMNS = ("digest", "seed", "engine", "graph", "n", "m", "max_degree", "alpha", "alpha_exact", "k",
               "mode", "completed", "completion", "connections", "transfers", "noops",
               "invariants_ok", "violations", "violation_kinds", "sync_budget", "crude_async")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(round(x, 9))
    return str(x)


def run_one(cfg: ExperimentConfig, seed: int) -> RunResult:
    """One run of ``cfg`` with ``seed``; the trace is checked before returning."""
    g = build_graph(cfg, seed)
    initial = build_tokens(cfg, g, seed)
    k = len(set().union(*initial.values())) if initial else 0
    exp = graph_alpha(g)
    budget = theoretical_budget(max(k, 1), exp.alpha, g.n, g.max_degree,
                                q=g.meta.get("q", 1))["sync_rounds"]
    if cfg.engine == "sync":
        trace = run_until_complete(g, initial, policy=cfg.policy, seed=seed, max_rounds=cfg.max_rounds)
        rep = check_trace_invariants(trace)
        kinds = set(rep.kinds())
        completed = trace.completion_round is not None
        completion = trace.completion_round
        connections = sum(len(r.accepted) for r in trace.rounds)
        transfers = sum(len(r.transfers) for r in trace.rounds)
        crude = None
        final = trace.final
        violations = len(rep.violations)
    else:
        bounds = bounds_of(cfg)
        params = {} if cfg.phase_factor is None else {"phase_factor": cfg.phase_factor}
        trace = run_async(g, initial, bounds=bounds, adversary=make_adversary(cfg.adversary, **params),
                          seed=seed, max_time=cfg.max_time)
        rep = check_async_invariants(trace)
        guar = check_guarantees(trace)
        kinds = set(rep.kinds()) | {f"guarantee_{v.kind}" for v in guar}
        completed = trace.completion_time is not None
        completion = to_units(trace.completion_time) if completed else None
        connections = sum(1 for r in trace.records if r["kind"] == "transfer")
        transfers = sum(1 for r in trace.records if r["kind"] == "transfer" and r["token"] is not None)
        crude = g.n * k * bounds.delta_max
        final = _async_final(trace)
        violations = len(rep.violations) + len(guar)
    if completed and not all(len(s) == k for s in final):
        kinds.add("completion_unverified")
        violations += 1
    path = None
    if cfg.trace_dir:
        os.makedirs(cfg.trace_dir, exist_ok=True)
        path = os.path.join(cfg.trace_dir, f"{cfg.digest()}_{seed}.jsonl")
        with open(path, "w") as fh:
            fh.write(trace.dumps())
    return RunResult(
        digest=cfg.digest(), seed=seed, config=cfg, n=g.n, m=g.m, max_degree=g.max_degree,
        alpha=str(exp.alpha), alpha_exact=exp.exact, k=k, completed=completed, completion=completion,
        connections=connections, transfers=transfers, noops=connections - transfers,
        invariants_ok=violations == 0, violations=violations, violation_kinds=";".join(sorted(kinds)),
        sync_budget=budget, crude_async=crude, trace_path=path,
    )


def _async_final(trace) -> list[set]:
    sets = [set(s) for s in trace.initial]
    for r in trace.records:
        if r["kind"] == "transfer" and r["token"] is not None:
            sets[r["receiver"]].add(r["token"])
    return sets


def _task(args):
    cfg, seed = args
    return run_one(cfg, seed)


def run_many(tasks: Sequence[tuple[ExperimentConfig, int]], workers: int = 1) -> list[RunResult]:
    """Run (config, seed) pairs; results come back in task order whatever the finish order."""
    tasks = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        return [_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def run(cfg: ExperimentConfig, seed: Optional[int] = None) -> RunResult:
    """Single run; ``seed`` defaults to the first configured seed."""
    return run_one(cfg, cfg.seeds[0] if seed is None else seed)


def run_seeds(cfg: ExperimentConfig) -> list[RunResult]:
    return run_many([(cfg, s) for s in cfg.seeds], cfg.workers)


def sweep(cfg: ExperimentConfig, axis: str, values: Iterable) -> list[RunResult]:
    """Vary exactly one dotted key over ``values``; every value runs every configured seed."""
    if axis not in KEYS:
        raise ConfigError(axis, "unknown sweep axis")
    if axis == "seeds":
        raise ConfigError(axis, "seeds are swept by every run; pick a parameter axis")
    cfgs = [cfg.set(axis, v) for v in values]
    return run_many([(c, s) for c in cfgs for s in c.seeds], cfg.workers)


def runs_csv(results: Sequence[RunResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RUN_COLUMNS)
    for r in results:
        c = r.config
        row = dict(r.__dict__)
        row.update(engine=c.engine, graph=c.graph_kind,
                   mode=c.policy if c.engine == "sync" else c.adversary)
        w.writerow([_fmt(row[col]) for col in RUN_COLUMNS])
    return buf.getvalue()


SUMMARY_COLUMNS = ("axis", "value", "runs", "completed", "median", "q1", "q3", "min", "max",
                   "invariant_failures")


def quartiles(xs: Sequence[float]) -> tuple[float, float, float]:
    """(q1, median, q3) with linear interpolation between order statistics."""
    xs = sorted(xs)
    if len(xs) == 1:
        return xs[0], xs[0], xs[0]
    q1, med, q3 = statistics.quantiles(xs, n=4, method="inclusive")
    return q1, med, q3


def report(results: Sequence[RunResult], axis: str = "graph.kind") -> str:
    """Median and quartiles of completion per value of ``axis``, in first-seen order."""
    groups: dict = {}
    for r in results:
        groups.setdefault(r.axis_value(axis), []).append(r)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for value, rs in groups.items():
        done = [float(r.completion) for r in rs if r.completed]
        q1 = med = q3 = lo = hi = None
        if done:
            q1, med, q3 = quartiles(done)
            lo, hi = min(done), max(done)
        failures = sum(1 for r in rs if not r.invariants_ok)
        if isinstance(value, tuple):
            value = ",".join(map(str, value))
        w.writerow([axis, _fmt(value), len(rs), len(done), _fmt(med), _fmt(q1), _fmt(q3),
                    _fmt(lo), _fmt(hi), failures])
    return buf.getvalue()


def median_completion(results: Sequence[RunResult]) -> float:
    return statistics.median(float(r.completion) for r in results if r.completed)
