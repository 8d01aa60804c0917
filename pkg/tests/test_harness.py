import csv
import io
import statistics

import pytest

from mtmgossip.errors import ConfigError
from mtmgossip.graph import gen_star_clique
from mtmgossip.harness.cli import main
from mtmgossip.harness.config import ExperimentConfig, parse_config, parse_seeds
from mtmgossip.harness.corpus import (
    BUDGET_CONSTANT,
    budget_excursions,
    corpus_tasks,
    fit_budget_constant,
    standard_corpus,
)
from mtmgossip.harness.runner import build_tokens, quartiles, report, run, run_many, runs_csv, sweep

K2 = """
# two nodes, one token
graph.kind = complete
graph.n = 2
tokens.kind = at
tokens.k = 1
engine = sync
seeds = 7
"""


def test_parse_config_keys():
    cfg = parse_config(K2)
    assert cfg.graph_kind == "complete" and cfg.graph_n == 2
    assert cfg.seeds == (7,)


def test_k2_completes_round_one():
    r = run(parse_config(K2))
    assert r.seed == 7 and r.completed and r.completion == 1
    assert r.invariants_ok


def test_unknown_adversary_names_field():
    with pytest.raises(ConfigError) as exc:
        parse_config(K2 + "adversary.kind = sleepy\n")
    assert exc.value.field == "adversary.kind"


@pytest.mark.parametrize("text,field", [
    ("graph.kind = torus", "graph.kind"),
    ("graph.n = ten", "graph.n"),
    ("bogus.key = 1", "bogus.key"),
    ("seeds = ", "seeds"),
    ("graph.kind = star_clique", "graph.alpha"),
    ("graph.kind = random", "graph.p"),
    ("policy.kind = nice", "policy.kind"),
    ("engine = quantum", "engine"),
    ("delta_update = 0", "delta_update"),
    ("tokens.kind = clique", "tokens.kind"),
    ("just words", "line 1"),
])
def test_config_errors_name_field(text, field):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.field == field
    assert field in str(exc.value)


def test_seed_ranges():
    assert parse_seeds("0..3, 9") == (0, 1, 2, 3, 9)


def test_config_dump_round_trip():
    cfg = parse_config("graph.kind = star_clique\ngraph.n = 32\ngraph.alpha = 1/4\nseeds = 1..3\n")
    again = parse_config(cfg.dumps())
    assert again == cfg and again.digest() == cfg.digest()
    assert cfg.digest() != cfg.set("tokens.k", "2").digest()
    assert cfg.digest() == cfg.set("output", "x.csv").digest()


def test_uniform_seeding_places_every_token():
    cfg = ExperimentConfig(graph_n=10, tokens_k=25)
    g = gen_star_clique(10, "1/5")
    placed = build_tokens(cfg, g, seed=3)
    assert set().union(*placed.values()) == set(range(25))
    assert placed == build_tokens(cfg, g, seed=3)
    assert placed != build_tokens(cfg, g, seed=4)


def test_clique_seeding():
    cfg = ExperimentConfig(graph_kind="star_clique", graph_n=20, graph_alpha="1/4", tokens_kind="clique",
                           tokens_k=3)
    placed = build_tokens(cfg, gen_star_clique(20, "1/4"))
    assert placed == {u: {0, 1, 2} for u in range(5)}


def test_file_inputs(tmp_path):
    (tmp_path / "g.txt").write_text("3 2\n0 1\n1 2\n")
    (tmp_path / "t.txt").write_text("0 5\n2 6\n")
    cfg = parse_config(f"graph.kind = file\ngraph.path = {tmp_path / 'g.txt'}\n"
                       f"tokens.kind = file\ntokens.path = {tmp_path / 't.txt'}\n")
    r = run(cfg)
    assert r.completed and r.k == 2 and r.n == 3


def test_async_run_result():
    cfg = parse_config("engine = async\ngraph.n = 8\ntokens.k = 2\nadversary.kind = bursty\n"
                       "adversary.phase_factor = 2\nseeds = 4\n")
    r = run(cfg)
    assert r.completed and r.invariants_ok
    assert r.completion <= r.crude_async


def test_sweep_k_on_ring64_monotone_medians():
    cfg = ExperimentConfig(graph_kind="ring", graph_n=64, seeds=tuple(range(20)))
    results = sweep(cfg, "tokens.k", [1, 2, 4, 8])
    assert len(results) == 80
    meds = [statistics.median(r.completion for r in results if r.config.tokens_k == k) for k in (1, 2, 4, 8)]
    assert meds == sorted(meds)
    assert all(r.invariants_ok for r in results)


def test_sweep_rejects_bad_axis():
    with pytest.raises(ConfigError):
        sweep(ExperimentConfig(), "graph.colour", [1])
    with pytest.raises(ConfigError):
        sweep(ExperimentConfig(), "seeds", [1])


def test_report_quartiles():
    cfg = ExperimentConfig(graph_kind="ring", graph_n=12, seeds=(0, 1, 2, 3, 4))
    results = sweep(cfg, "tokens.k", ["1", "3"])
    rows = list(csv.DictReader(io.StringIO(report(results, "tokens.k"))))
    assert [r["value"] for r in rows] == ["1", "3"]
    for row, k in zip(rows, (1, 3)):
        xs = [float(r.completion) for r in results if r.config.tokens_k == k]
        q1, med, q3 = quartiles(xs)
        assert float(row["median"]) == statistics.median(xs) == med
        assert float(row["q1"]) == q1 and float(row["q3"]) == q3
        assert row["runs"] == "5" and row["invariant_failures"] == "0"


def test_quartiles_single_value():
    assert quartiles([4.0]) == (4.0, 4.0, 4.0)


def test_parallel_matches_serial():
    tasks = corpus_tasks(standard_corpus()[:6])
    serial = runs_csv(run_many(tasks, workers=1))
    parallel = runs_csv(run_many(tasks, workers=3))
    assert serial == parallel


def test_csv_is_reproducible():
    cfg = ExperimentConfig(graph_kind="random", graph_n=12, graph_p=0.3, tokens_k=3, policy="uniform_random",
                           seeds=(0, 1, 2))
    a = report(sweep(cfg, "policy.kind", ["first_by_id", "uniform_random"]), "policy.kind")
    b = report(sweep(cfg, "policy.kind", ["first_by_id", "uniform_random"]), "policy.kind")
    assert a == b


def test_trace_dir_written(tmp_path):
    cfg = ExperimentConfig(graph_n=6, trace_dir=str(tmp_path), seeds=(2,))
    r = run(cfg)
    assert r.trace_path and (tmp_path / f"{cfg.digest()}_2.jsonl").exists()


def test_corpus_size():
    assert len(corpus_tasks()) >= 500


def test_budget_helpers():
    class R:
        def __init__(self, kind, n, completion, budget):
            self.config = ExperimentConfig(graph_kind=kind, graph_n=n)
            self.n, self.completion, self.sync_budget, self.completed = n, completion, budget, True

    rs = [R("ring", 64, 30, 96), R("ring", 64, 10, 96), R("path", 12, 100, 10)]
    assert fit_budget_constant(rs) == pytest.approx(0.65)
    assert budget_excursions(rs, BUDGET_CONSTANT) == [rs[2]]


# cli


def test_cli_run(capsys):
    assert main(["run", "--graph.kind", "complete", "--graph.n", "2", "--tokens.kind", "at", "--seeds", "7"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert rows[0]["completion"] == "1" and rows[0]["seed"] == "7"


def test_cli_config_file_and_flag_override(tmp_path, capsys):
    p = tmp_path / "k2.conf"
    p.write_text(K2)
    assert main(["run", "--config", str(p), "--seeds", "1,2"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert [r["seed"] for r in rows] == ["1", "2"]


def test_cli_env_seed_is_default_only(monkeypatch, tmp_path, capsys):
    monkeypatch.setenv("MTM_GOSSIP_SEED", "5")
    assert main(["run", "--graph.n", "6"]) == 0
    assert list(csv.DictReader(io.StringIO(capsys.readouterr().out)))[0]["seed"] == "5"
    assert main(["run", "--graph.n", "6", "--seeds", "8"]) == 0
    assert list(csv.DictReader(io.StringIO(capsys.readouterr().out)))[0]["seed"] == "8"


def test_cli_config_error(capsys):
    assert main(["run", "--adversary.kind", "sleepy"]) == 2
    assert "adversary.kind" in capsys.readouterr().err


def test_cli_sweep_writes_files(tmp_path):
    out, runs = tmp_path / "summary.csv", tmp_path / "runs.csv"
    code = main(["sweep", "--graph.n", "10", "--seeds", "0..2", "--axis", "tokens.k", "--values", "1,2",
                 "--output", str(out), "--runs-output", str(runs)])
    assert code == 0
    assert len(out.read_text().splitlines()) == 3
    assert len(runs.read_text().splitlines()) == 7


def test_cli_graph_info(capsys):
    assert main(["graph-info", "--graph.kind", "star", "--graph.n", "6"]) == 0
    out = capsys.readouterr().out
    assert "n=6" in out and "max_degree=5" in out and "alpha=1/3" in out


def test_cli_verify_trace(tmp_path, capsys):
    assert main(["run", "--graph.n", "6", "--trace_dir", str(tmp_path), "--seeds", "1"]) == 0
    assert main(["run", "--graph.n", "6", "--engine", "async", "--trace_dir", str(tmp_path), "--seeds", "1"]) == 0
    capsys.readouterr()
    files = sorted(tmp_path.glob("*.jsonl"))
    assert len(files) == 2
    for f in files:
        assert main(["verify-trace", str(f)]) == 0
        assert "violations=0" in capsys.readouterr().out
    lines = files[0].read_text().splitlines()
    bad = tmp_path / "bad.jsonl"
    bad.write_text("\n".join(lines[:1] + lines[2:]) + "\n")
    assert main(["verify-trace", str(bad)]) == 1


def test_cli_flags_validated_together(capsys):
    assert main(["graph-info", "--graph.kind", "star_clique", "--graph.n", "32", "--graph.alpha", "1/4"]) == 0
    assert "alpha=1/2 " in capsys.readouterr().out        # q=8 outer-side cut: 8/16
