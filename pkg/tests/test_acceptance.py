"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the lines are written past
pytest's capture so they show up without ``-s``.
"""

import random
import statistics
import time
from fractions import Fraction

import pytest
from scipy.stats import chisquare

from mtmgossip.analysis import check_min_matching, size_profile, sync_snapshots, theoretical_budget
from mtmgossip.expansion import check_gamma_bound, vertex_expansion_exact
from mtmgossip.gossip import NodeState, Tag, TokenSet, fingerprint, select
from mtmgossip.graph import gen_complete, gen_path, gen_random_connected, gen_ring, gen_star, gen_star_clique
from mtmgossip.harness.config import ExperimentConfig
from mtmgossip.harness.corpus import (
    ASYNC_CONSTANT,
    BUDGET_CONSTANT,
    async_excursions,
    budget_excursions,
    budget_ratio,
    corpus_tasks,
    fit_budget_constant,
    run_corpus,
)
from mtmgossip.harness.runner import bounds_of, report, run_many, runs_csv
from mtmgossip.streams import SELECT, stream
from mtmgossip.sync import run_until_complete

WORKERS = 4
SEEDS20 = tuple(range(20))


@pytest.fixture
def verdict(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok
    return emit


@pytest.fixture(scope="module")
def corpus():
    return run_corpus(workers=WORKERS)


def median_of(results):
    return statistics.median(r.completion for r in results)


def test_criterion_01_gamma_bound(verdict):
    t0 = time.perf_counter()
    rng = random.Random(20240101)
    graphs = [gen_random_connected(rng.randint(4, 14), rng.uniform(0.15, 0.7), seed) for seed in range(200)]
    graphs += [gen_ring(n) for n in (4, 7, 10, 14)]
    graphs += [gen_star(leaves) for leaves in (3, 6, 11, 15)]
    graphs += [gen_complete(n) for n in (4, 9, 14)]
    graphs += [gen_path(n) for n in (5, 12)]
    graphs += [gen_star_clique(12, Fraction(1, 4)), gen_star_clique(16, Fraction(1, 4)),
               gen_star_clique(15, Fraction(1, 5))]
    failed = [g for g in graphs if not check_gamma_bound(g).holds]
    elapsed = time.perf_counter() - t0
    ok = verdict(1, not failed and elapsed <= 120,
                 f"{len(graphs)} graphs, {len(failed)} below alpha/4, {elapsed:.1f}s")
    assert ok


def test_criterion_02_min_matching_per_round(verdict):
    t0 = time.perf_counter()
    policies = ("first_by_id", "uniform_random", "adversarial_min_progress")
    snapshots = failures = 0
    for i in range(50):
        n = 8 + (i % 17)                                   # 8..24
        if i % 5 == 0:
            g = gen_ring(n)
        elif i % 5 == 1:
            g = gen_star_clique(n, Fraction(1, 4))
        else:
            g = gen_random_connected(n, 0.2 + 0.05 * (i % 4), 1000 + i)
        alpha = vertex_expansion_exact(g).alpha
        rng = random.Random(i)
        k = rng.randint(1, 6)
        seeding = {}
        for t in range(k):
            seeding.setdefault(rng.randrange(n), []).append(t)
        tr = run_until_complete(g, seeding, policy=policies[i % 3], seed=i)
        assert tr.completion_round is not None
        for snap in sync_snapshots(tr):
            if size_profile(snap).c > 1:
                snapshots += 1
                failures += not check_min_matching(g, snap, alpha).holds
    elapsed = time.perf_counter() - t0
    ok = verdict(2, failures == 0 and elapsed <= 300,
                 f"50 runs, {snapshots} snapshots with C>1, {failures} below (alpha/4)n*_min, {elapsed:.1f}s")
    assert ok


def test_criterion_03_star_clique_lower_bound(verdict):
    t0 = time.perf_counter()
    base = ExperimentConfig(graph_kind="star_clique", graph_n=100, graph_alpha=Fraction(1, 10),
                            tokens_kind="clique", policy="uniform_random", seeds=tuple(range(10)))
    lows, worst = {}, {}
    for k in (1, 5, 10):
        results = run_many([(base.set("tokens.k", k), s) for s in base.seeds], WORKERS)
        lb = theoretical_budget(k, Fraction(1, 10), 100, 99, q=10)["lb_rounds"]
        lows[k] = float(lb)
        worst[k] = min(r.completion for r in results if r.completed)
        assert all(r.completed for r in results)
    elapsed = time.perf_counter() - t0
    ok = all(worst[k] >= lows[k] for k in lows) and elapsed <= 60
    verdict(3, ok, f"lower bounds {lows}, fastest runs {worst}, {elapsed:.1f}s")
    assert lows == {1: 4.5, 5: 22.5, 10: 45.0}
    assert ok


def test_criterion_04_trace_invariants(verdict, corpus):
    bad = [r for r in corpus if not r.invariants_ok]
    ok = verdict(4, len(corpus) >= 500 and not bad,
                 f"{len(corpus)} corpus runs, {len(bad)} with invariant violations")
    assert ok


def test_criterion_05_sync_scaling_in_k(verdict):
    t0 = time.perf_counter()
    graphs = {
        "ring(64)": ExperimentConfig(graph_kind="ring", graph_n=64, seeds=SEEDS20),
        "star_clique(64,1/8)": ExperimentConfig(graph_kind="star_clique", graph_n=64, graph_alpha=Fraction(1, 8),
                                                seeds=SEEDS20),
    }
    parts, ok = [], True
    for name, base in graphs.items():
        tasks = [(base.set("tokens.k", k), s) for k in (2, 4, 8, 16) for s in SEEDS20]
        results = run_many(tasks, WORKERS)
        assert all(r.completed for r in results)
        meds = [median_of(results[i * 20:(i + 1) * 20]) for i in range(4)]
        ratios = [b / a for a, b in zip(meds, meds[1:])]
        good = all(1.4 <= x <= 2.6 for x in ratios)
        ok &= good
        parts.append(f"{name} medians {meds} ratios {[round(x, 3) for x in ratios]} {'ok' if good else 'out of range'}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed <= 300
    verdict(5, ok, "; ".join(parts) + f"; {elapsed:.1f}s")
    assert ok


def test_criterion_06_budget_envelope(verdict, corpus):
    fitted = fit_budget_constant(corpus)
    over = budget_excursions(corpus, BUDGET_CONSTANT)
    worst = max(corpus, key=budget_ratio)
    ok = verdict(6, fitted == BUDGET_CONSTANT and not over,
                 f"C={BUDGET_CONSTANT} (refit {fitted}), {len(over)} excursions, largest ratio "
                 f"{budget_ratio(worst):.3f} on {worst.config.graph_kind}({worst.n}) k={worst.k}")
    assert ok


ASYNC_GRAPHS = {
    "ring(32)": dict(graph_kind="ring", graph_n=32),
    "star_clique(32,1/4)": dict(graph_kind="star_clique", graph_n=32, graph_alpha=Fraction(1, 4)),
}


def test_criterion_07_guarantee_audit(verdict):
    t0 = time.perf_counter()
    tasks = []
    for kw in ASYNC_GRAPHS.values():
        for adv in ("constant_max", "uniform_random", "bursty", "targeted_staller"):
            cfg = ExperimentConfig(engine="async", adversary=adv, tokens_k=4, seeds=tuple(range(10)), **kw)
            tasks += [(cfg, s) for s in cfg.seeds]
    results = run_many(tasks, WORKERS)
    guarantee = [r for r in results if "guarantee_" in r.violation_kinds]
    other = [r for r in results if not r.invariants_ok]
    late = async_excursions(results, ASYNC_CONSTANT)
    elapsed = time.perf_counter() - t0
    ok = verdict(7, not guarantee and not other and not late and elapsed <= 180,
                 f"{len(results)} async runs, {len(guarantee)} with guarantee violations, "
                 f"{len(other)} with any violation, {len(late)} past C'*n*k*delta_max, {elapsed:.1f}s")
    assert ok


def test_criterion_08_delta_max_scaling(verdict):
    base = ExperimentConfig(engine="async", adversary="uniform_random", tokens_k=4, seeds=SEEDS20,
                            **ASYNC_GRAPHS["ring(32)"])
    b2 = bounds_of(base).scaled(2)
    doubled = base.with_values(delta_update=b2.delta_update, delta_conn=b2.delta_conn,
                               rate_bits=b2.rate_bits, token_bits=b2.token_bits)
    assert bounds_of(doubled).delta_max == 2 * bounds_of(base).delta_max
    one = run_many([(base, s) for s in SEEDS20], WORKERS)
    two = run_many([(doubled, s) for s in SEEDS20], WORKERS)
    ratio = median_of(two) / median_of(one)
    late = async_excursions(one + two, ASYNC_CONSTANT)
    worst = max(r.completion / r.crude_async for r in one + two)
    ok = verdict(8, 1.6 <= ratio <= 2.4 and not late,
                 f"median {median_of(one):.3f} -> {median_of(two):.3f}, ratio {ratio:.3f}; "
                 f"C'={ASYNC_CONSTANT}, largest completion/(n*k*delta_max) {worst:.3f}")
    assert ok


def test_criterion_09_uniform_select(verdict):
    me = NodeState(0, TokenSet([99]))
    ads = [Tag(fingerprint([u, u + 10]), 2, u) for u in (1, 2, 3, 4)]
    counts = dict.fromkeys((1, 2, 3, 4), 0)
    for i in range(10_000):
        counts[select(me, ads, stream(2024, SELECT, 0, i))] += 1
    p = chisquare(list(counts.values())).pvalue
    ok = verdict(9, p > 0.01, f"counts {counts}, chi-square p={p:.4f}")
    assert ok


def test_criterion_10_determinism(verdict, tmp_path):
    cfgs = [
        ExperimentConfig(graph_kind="random", graph_n=20, graph_p=0.2, tokens_k=4, policy="uniform_random",
                         seeds=(0, 1, 2)),
        ExperimentConfig(graph_kind="star_clique", graph_n=32, graph_alpha=Fraction(1, 4), engine="async",
                         adversary="bursty", tokens_k=3, seeds=(0, 1, 2)),
    ]
    outputs = []
    for attempt, workers in (("a", 1), ("b", WORKERS)):
        tasks = [(c.set("trace_dir", str(tmp_path / attempt)), s) for c in cfgs for s in c.seeds]
        tasks += corpus_tasks()[:40]
        results = run_many(tasks, workers)
        traces = [open(r.trace_path, "rb").read() for r in results if r.trace_path]
        outputs.append((runs_csv(results), report(results, "engine"), traces))
    (csv_a, rep_a, tr_a), (csv_b, rep_b, tr_b) = outputs
    ok = verdict(10, csv_a == csv_b and rep_a == rep_b and tr_a == tr_b and len(tr_a) == 6,
                 f"{len(tr_a)} traces and both CSVs byte-identical across serial and parallel reruns")
    assert ok
