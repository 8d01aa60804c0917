"""The standard synchronous experiment corpus and the committed budget constants."""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Sequence

from .config import ExperimentConfig, validate
from .runner import RunResult, run_many

# Fitted once on the ring(64) runs of the corpus: the largest observed
# rounds / ((k/alpha) log2 n log2^2 Δ), times BUDGET_HEADROOM, rounded up to
# the next 0.05. Raw maximum on ring(64) is 1/3.
BUDGET_CONSTANT = 0.7
BUDGET_HEADROOM = 2
BUDGET_FIT_GRAPH = ("ring", 64)

# Completion-time multiplier on the crude n*k*delta_max bound for async runs.
ASYNC_CONSTANT = 1.0

_POLICIES = ("first_by_id", "uniform_random", "adversarial_min_progress")


def _family(kind, n, ks, seeds, policies=_POLICIES, **kw) -> list[ExperimentConfig]:
    out = []
    for k in ks:
        for pol in policies:
            out.append(validate(ExperimentConfig(graph_kind=kind, graph_n=n, tokens_k=k, policy=pol,
                                                 seeds=tuple(seeds), **kw)))
    return out


def standard_corpus() -> list[ExperimentConfig]:
    """Configs covering every generator family, seeding mode and acceptance policy.

    Each config carries its own seeds; ``corpus_tasks`` expands them.
    """
    seeds8 = range(8)
    cfgs: list[ExperimentConfig] = []
    cfgs += _family("ring", 64, (1, 2, 4, 8), seeds8)
    cfgs += _family("ring", 16, (1, 4), seeds8)
    cfgs += _family("path", 12, (1, 4), seeds8)
    cfgs += _family("complete", 12, (1, 4, 8), seeds8)
    cfgs += _family("star", 10, (1, 3), seeds8)
    cfgs += _family("star_clique", 64, (1, 4), seeds8, graph_alpha=Fraction(1, 8))
    cfgs += _family("star_clique", 20, (2, 5), seeds8, graph_alpha=Fraction(1, 4), tokens_kind="clique")
    cfgs += _family("random", 14, (1, 4), seeds8, graph_p=0.3)
    cfgs += _family("random", 20, (2, 6), seeds8, graph_p=0.2)
    cfgs += _family("ring", 24, (3,), seeds8, tokens_kind="at", tokens_node=5)
    return cfgs


def corpus_tasks(cfgs: Sequence[ExperimentConfig] | None = None) -> list[tuple[ExperimentConfig, int]]:
    cfgs = standard_corpus() if cfgs is None else cfgs
    return [(c, s) for c in cfgs for s in c.seeds]


def run_corpus(workers: int = 1) -> list[RunResult]:
    return run_many(corpus_tasks(), workers)


def budget_ratio(r: RunResult) -> float:
    return float(r.completion) / r.sync_budget


def fit_budget_constant(results: Sequence[RunResult]) -> float:
    """Largest completion/budget ratio over the fit graph's runs, with headroom, rounded up to 0.05."""
    kind, n = BUDGET_FIT_GRAPH
    ratios = [budget_ratio(r) for r in results
              if r.config.graph_kind == kind and r.n == n and r.completed]
    if not ratios:
        raise ValueError("no completed runs on the fit graph")
    return math.ceil(max(ratios) * BUDGET_HEADROOM * 20 - 1e-9) / 20


def budget_excursions(results: Sequence[RunResult], constant: float = BUDGET_CONSTANT) -> list[RunResult]:
    """Runs that failed to complete or needed more than constant * budget rounds."""
    return [r for r in results if not r.completed or float(r.completion) > constant * r.sync_budget]


def async_excursions(results: Sequence[RunResult], constant: float = ASYNC_CONSTANT) -> list[RunResult]:
    return [r for r in results if not r.completed or r.completion > constant * r.crude_async]
