"""Command line entry point: run, sweep, verify-trace, graph-info.

Every config key is also a flag (``--graph.kind ring --tokens.k 4``); flags
override the ``--config`` file, which overrides built-in defaults. The
environment variable MTM_GOSSIP_SEED only supplies the default seed list.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from ..amtm import AsyncTrace, check_guarantees
from ..analysis import check_async_invariants, check_trace_invariants
from ..errors import ConfigError, GossipLabError
from ..expansion import EXACT_EXPANSION_LIMIT, known_expansion, vertex_expansion
from ..sync import SyncTrace
from .config import KEYS, ExperimentConfig, parse_config, parse_seeds
from .runner import build_graph, report, run_seeds, runs_csv, sweep

SEED_ENV = "MTM_GOSSIP_SEED"


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file")
    for key in KEYS:
        p.add_argument(f"--{key}", dest=f"cfg:{key}", metavar="VALUE")


def _config_from_args(args) -> ExperimentConfig:
    base = ExperimentConfig()
    env_seed = os.environ.get(SEED_ENV)
    if env_seed:
        try:
            base = base.set("seeds", parse_seeds(env_seed))
        except ValueError:
            raise ConfigError("seeds", f"{SEED_ENV}={env_seed!r} is not a seed list") from None
    cfg = base
    if args.config:
        with open(args.config) as fh:
            cfg = parse_config(fh.read(), base)
    flags = {key: getattr(args, f"cfg:{key}") for key in KEYS}
    return cfg.update({k: v for k, v in flags.items() if v is not None})


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_run(args) -> int:
    cfg = _config_from_args(args)
    results = run_seeds(cfg)
    _emit(runs_csv(results), cfg.output)
    return 0 if all(r.invariants_ok for r in results) else 1


def cmd_sweep(args) -> int:
    cfg = _config_from_args(args)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("values", "need at least one sweep value")
    results = sweep(cfg, args.axis, values)
    _emit(report(results, args.axis), cfg.output)
    if args.runs_output:
        _emit(runs_csv(results), args.runs_output)
    return 0 if all(r.invariants_ok for r in results) else 1


def cmd_verify_trace(args) -> int:
    with open(args.trace) as fh:
        text = fh.read()
    head = json.loads(text.split("\n", 1)[0])
    if head.get("engine") == "async":
        trace = AsyncTrace.loads(text)
        problems = [(kind, where, detail) for kind, where, detail in check_async_invariants(trace).violations]
        problems += [(f"guarantee_{v.kind}", v.time, v.detail) for v in check_guarantees(trace)]
        status = f"completion_time={trace.completion_time}"
    else:
        trace = SyncTrace.loads(text)
        problems = check_trace_invariants(trace).violations
        status = f"completion_round={trace.completion_round}"
    print(f"engine={head.get('engine')} n={trace.graph.n} k={trace.k} {status}")
    for kind, where, detail in problems:
        print(f"{kind}\t{where}\t{detail}")
    print(f"violations={len(problems)}")
    return 1 if problems else 0


def cmd_graph_info(args) -> int:
    cfg = _config_from_args(args)
    g = build_graph(cfg, cfg.seeds[0])
    print(f"n={g.n}")
    print(f"m={g.m}")
    print(f"max_degree={g.max_degree}")
    print(f"connected={'yes' if g.is_connected() else 'no'}")
    if g.n <= EXACT_EXPANSION_LIMIT or args.alpha or known_expansion(g) is not None:
        exp = vertex_expansion(g)
        how = "exact" if exp.exact else f"sampled upper estimate ({exp.samples} cuts)"
        print(f"alpha={exp.alpha} ({float(exp.alpha):.6g}, {how})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mtm-gossip", description="Random diffusion gossip simulation lab")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run every configured seed and print one CSV row per run")
    _add_config_flags(r)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="vary one key and print median/quartile CSV per value")
    _add_config_flags(s)
    s.add_argument("--axis", required=True, help="dotted config key to vary")
    s.add_argument("--values", required=True, help="comma-separated values")
    s.add_argument("--runs-output", help="also write per-run rows here")
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify-trace", help="re-check a saved trace")
    v.add_argument("trace")
    v.set_defaults(func=cmd_verify_trace)

    gi = sub.add_parser("graph-info", help="print n, max degree and expansion")
    _add_config_flags(gi)
    gi.add_argument("--alpha", action="store_true", help="estimate expansion even beyond exact size")
    gi.set_defaults(func=cmd_graph_info)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (GossipLabError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
