"""Command-line entry point: ``poprelay <command> [--config FILE] [--seed N] [--out DIR]``.

Config files are flat ``key = value`` lines; values are read as JSON when
they parse as JSON and as plain strings otherwise.  Every run writes
``manifest.json`` echoing the resolved configuration and seed.

Exit codes: 0 success, 1 invariant or verification failure, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Any

from . import __version__
from .bench import io as bench_io
from .bench.fitting import FitModel, fit
from .bench.measure import RetrievalPlan, fit_ready, measure_rctp, measure_rpr
from .bench.model import REFERENCE_MODELS, crossover, default_lambda_grid, rpr_grid
from .bench.stats import iqr_filter, iqr_filter_grouped
from .bench.workload import fixed_size_workload, generate_workload
from .errors import PopRelayError
from .ledger import BlockStore, Cluster, Fault, consensus_sweep, first_invalid_block
from .merkle import DEPTH, proof_from_dict, verify_proof
from .relay import (
    CycleRoot,
    LogicalClock,
    ProofOfProvenance,
    Relay,
    RelayConfig,
    Strategy,
    hash_cost_of_pop,
    verify_pop,
)

log = logging.getLogger("poprelay")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


class ConfigError(Exception):
    pass


RELAY_DEFAULTS = {
    "strategy": "novel",
    "lambda": 5,
    "cycle_time_ms": 1000,
    "cycles": 10,
    "cycles_per_period": None,  # None: one period spanning the whole run
    "retained_periods": 2,
    "node_count": 3,
    "latency_range": [1, 3],
    "drop_probability": 0.0,
    "partitions": [],
    "depth": DEPTH,
}

LEDGER_DEFAULTS = {
    "node_counts": [1, 3, 5, 7],
    "proposals_per_point": 20,
    "latency_range": [1, 3],
    "drop_probability": 0.0,
    "partitions": [],
    "timeout_ticks": 1000,
}

BENCH_EXPERIMENTS = ("novel-rctp", "legacy-rctp", "novel-rpr", "legacy-rpr", "crossover", "grid")

BENCH_DEFAULTS = {
    "plan": list(BENCH_EXPERIMENTS),
    "rctp_n": [25, 50, 75, 100],
    "rctp_cycles": 10,
    "rpr_n": 20,
    "rpr_cycles": 10,
    "legacy_n": 5,
    "legacy_delta_cs": [1, 10, 100, 1000],
    "samples_per_delta": 5,
    "crossover_n": 1000,
    "crossover_models": "reference",
    "grid_lambda": None,  # None: 250..1000 step 50
    "grid_T_p": [1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
    "grid_m": 1,
    "invlog_resolution": 0.01,
}

FIT_DEFAULTS = {
    "samples": None,
    "family": "linear",
    "kind": None,
    "iqr": True,
    "invlog_resolution": 0.01,
}

VERIFY_PROOF_DEFAULTS = {"proof": None, "roots": None, "root": None, "depth": DEPTH}
VERIFY_CHAIN_DEFAULTS = {"store": None}


# -- config and artifacts ------------------------------------------------------


def _parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw.strip().strip('"')


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {path} not found")
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"))
    parser.optionxform = str  # keep key case (grid_T_p)
    try:
        parser.read_string("[run]\n" + p.read_text())
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return {k: _parse_value(v) for k, v in parser["run"].items()}


def resolve(defaults: dict, loaded: dict, args) -> dict:
    unknown = sorted(set(loaded) - set(defaults) - {"seed", "out"})
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    cfg = dict(defaults)
    cfg.update({k: v for k, v in loaded.items() if k in defaults})
    seed = args.seed if args.seed is not None else loaded.get("seed", 0)
    try:
        cfg["seed"] = int(seed)
    except (TypeError, ValueError):
        raise ConfigError(f"seed must be an integer, got {seed!r}") from None
    if cfg["seed"] < 0 or cfg["seed"] >= 2**64:
        raise ConfigError("seed must fit in an unsigned 64-bit integer")
    if getattr(args, "strategy", None) is not None and "strategy" in defaults:
        cfg["strategy"] = args.strategy
    return cfg


def write_manifest(out: Path, command: str, cfg: dict) -> Path:
    manifest = {"command": command, "version": __version__, "seed": cfg["seed"], "config": cfg}
    return bench_io.write_json(out / "manifest.json", manifest)


def _int(cfg: dict, key: str, minimum: int | None = None) -> int:
    value = cfg[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ConfigError(f"{key} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{key} must be >= {minimum}")
    return int(value)


def _num(cfg: dict, key: str, positive: bool = False) -> float:
    value = cfg[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} must be a number, got {value!r}")
    if positive and not value > 0:
        raise ConfigError(f"{key} must be positive")
    return float(value)


def _latency(cfg: dict) -> tuple[int, int]:
    lr = cfg["latency_range"]
    if not (isinstance(lr, list) and len(lr) == 2 and all(isinstance(v, int) for v in lr)) or not 1 <= lr[0] <= lr[1]:
        raise ConfigError(f"latency_range must be [lo, hi] ticks with 1 <= lo <= hi, got {lr!r}")
    return lr[0], lr[1]


def _probability(cfg: dict, key: str) -> float:
    p = _num(cfg, key)
    if not 0 <= p < 1:
        raise ConfigError(f"{key} must be in [0, 1)")
    return p


def _faults(cfg: dict) -> list[Fault]:
    """``partitions``: list of {start_tick, end_tick, groups | isolate | crash} records."""
    sched = cfg["partitions"]
    if not isinstance(sched, list):
        raise ConfigError("partitions must be a list of fault records")
    try:
        return [Fault.from_dict(f) for f in sched]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad partition schedule: {exc}") from exc


# -- relay-sim -------------------------------------------------------------------


def _oldest_retained(relay: Relay) -> int:
    return min(relay._sealed)


def cmd_relay_sim(cfg: dict, out: Path) -> int:
    try:
        strategy = Strategy(cfg["strategy"])
    except ValueError:
        raise ConfigError(f"strategy must be legacy or novel, got {cfg['strategy']!r}") from None
    lam = _num(cfg, "lambda", positive=True)
    T_c = _num(cfg, "cycle_time_ms", positive=True) / 1000.0
    cycles = _int(cfg, "cycles", 1)
    m = cycles if cfg["cycles_per_period"] is None else _int(cfg, "cycles_per_period", 1)
    node_count = _int(cfg, "node_count", 1)
    if node_count % 2 == 0:
        raise ConfigError("node_count must be odd")
    depth = _int(cfg, "depth", 1)
    if depth > DEPTH:
        raise ConfigError(f"depth must be <= {DEPTH}")
    latency = _latency(cfg)
    drop = _probability(cfg, "drop_probability")
    config = RelayConfig(T_c * 1000.0, m, strategy, _int(cfg, "retained_periods", 1), lam)

    workload = generate_workload(lam, T_c, cycles, cfg["seed"])
    cluster = Cluster(node_count, cfg["seed"], latency, drop, _faults(cfg), store_dir=out / "nodes")
    if cluster.wait_for_leader(10_000) is None:
        log.error("no leader elected")
        return EXIT_FAILED
    clock = LogicalClock()
    relay = Relay(config, ledger=cluster, clock=clock, store_dir=out / "relay", depth=depth)

    pops: list[tuple[int, ProofOfProvenance]] = []
    for cycle, pairs in enumerate(workload):
        for kv in pairs:
            relay.submit_transaction(kv, at=cycle * config.cycle_time_ms, prove_on_close=True)
        relay.advance_to((cycle + 1) * config.cycle_time_ms)
        pops.extend((cycle, relay.ready_pops.pop(kv.key)) for kv in pairs)
        if not pairs:
            continue
        # one cross-cycle PoP per cycle: previous-cycle exclusion (novel) or the
        # full exclusion run back to the oldest retained cycle (legacy)
        if strategy is Strategy.NOVEL:
            if cycle % m:
                pops.append((cycle - 1, relay.retrieve_pop(pairs[0].key, cycle - 1, cycle, same_cycle=False)))
        else:
            inception = _oldest_retained(relay)
            if cycle > inception:
                pops.append((inception, relay.retrieve_pop(pairs[0].key, inception, cycle)))

    if relay.flush_pending():
        log.error("%d roots never reached the ledger", len(relay._pending))
        return EXIT_FAILED
    cluster.settle()

    archived = relay.archived_roots()
    with (out / "roots.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("cycle", "period", "root", "n_in_cycle", "N_total"))
        for cr in archived:
            w.writerow((cr.cycle_index, cr.period_index, cr.root.hex(), cr.n_in_cycle, cr.N_total))

    by_cycle = {cr.cycle_index: cr for cr in archived}
    pop_rows = []
    for inception, pop in pops:
        try:
            ok = verify_pop(pop, by_cycle, depth)
        except PopRelayError as exc:
            log.error("PoP for %s unverifiable: %s", pop.key.hex(), exc)
            ok = False
        pop_rows.append({
            "key": pop.key.hex(),
            "strategy": pop.strategy.value,
            "inception_cycle": inception,
            "current_cycle": pop.current_cycle,
            "delta_C": pop.delta_C,
            "exclusions": len(pop.exclusions),
            "hash_cost": hash_cost_of_pop(pop),
            "verified": ok,
        })

    nodes = {}
    for nid, node in sorted(cluster.nodes.items()):
        found = [cluster.query_root(cr.root, nid)["found"] for cr in archived]
        nodes[str(nid)] = {
            "blocks": len(node.store.root_blocks),
            "chain_valid": first_invalid_block(node.store) is None,
            "roots_found": sum(found),
        }
    checks = {
        "blocks_per_node": all(n["blocks"] == cycles for n in nodes.values()),
        "chains_valid": all(n["chain_valid"] for n in nodes.values()),
        "roots_found": all(n["roots_found"] == len(archived) for n in nodes.values()),
        "pops_verified": all(r["verified"] for r in pop_rows),
        "safety": cluster.monitor.ok,
    }
    report = {
        "ok": all(checks.values()),
        "checks": checks,
        "roots": len(archived),
        "nodes": nodes,
        "safety_violations": list(cluster.monitor.violations),
        "pops": pop_rows,
    }
    bench_io.write_json(out / "pop_report.json", report)
    print(f"relay-sim: {len(archived)} roots, {len(pop_rows)} PoPs, ok={report['ok']}")
    return EXIT_OK if report["ok"] else EXIT_FAILED


# -- ledger-sim ------------------------------------------------------------------


def cmd_ledger_sim(cfg: dict, out: Path) -> int:
    counts = cfg["node_counts"]
    if not isinstance(counts, list) or not counts or not all(isinstance(n, int) for n in counts):
        raise ConfigError("node_counts must be a non-empty list of integers")
    bad = [n for n in counts if n < 1 or n % 2 == 0]
    if bad:
        raise ConfigError(f"node counts must be odd and >= 1, got {bad}")
    faults = _faults(cfg)
    monitors: list = []
    rows = consensus_sweep(
        counts,
        cfg["seed"],
        _int(cfg, "proposals_per_point", 1),
        _latency(cfg),
        _probability(cfg, "drop_probability"),
        faults,
        timeout_ticks=_int(cfg, "timeout_ticks", 1),
        monitors=monitors,
    )
    with (out / "sweep.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("node_count", "mean_commit_ticks", "p99_commit_ticks", "proposals", "retries"))
        for r in rows:
            w.writerow((r.node_count, repr(r.mean_commit_ticks), repr(r.p99_commit_ticks), r.proposals, r.retries))
    violations = {str(n): mon.violations for n, mon in zip(counts, monitors)}
    ok = all(mon.ok for mon in monitors)
    bench_io.write_json(out / "safety_report.json", {"ok": ok, "violations": violations})
    print(f"ledger-sim: {len(rows)} cluster sizes, safety ok={ok}")
    return EXIT_OK if ok else EXIT_FAILED


# -- bench ----------------------------------------------------------------------


def _fit_series(samples, family: str, resolution: float, group=None) -> tuple[list, FitModel]:
    usable = fit_ready(samples)
    kept = iqr_filter_grouped(usable, group) if group is not None else iqr_filter(usable)
    kwargs = {"resolution": resolution} if family == "invlog" else {}
    model = fit(family, [s.x for s in kept], [s.y_ms for s in kept], **kwargs)
    model = FitModel(model.family, model.coefficients, model.domain, model.rms_residual,
                     model.n_samples, len(usable) - len(kept))
    return kept, model


def _emit_fit(out: Path, name: str, samples, family: str, cfg: dict, xlabel: str, group=None) -> FitModel:
    bench_io.write_samples_csv(out / f"samples_{name}.csv", samples)
    kept, model = _fit_series(samples, family, _num(cfg, "invlog_resolution", positive=True), group)
    bench_io.write_samples_csv(out / f"filtered_{name}.csv", kept)
    bench_io.write_fit_report(out / f"fit_{name}.json", model)
    (out / f"plot_{name}.gp").write_text(
        bench_io.samples_plot_script(f"filtered_{name}.csv", model, name, xlabel)
    )
    return model


def cmd_bench(cfg: dict, out: Path) -> int:
    plan = cfg["plan"]
    if isinstance(plan, str):
        plan = [plan]
    if not isinstance(plan, list) or not plan:
        raise ConfigError("bench plan is empty")
    unknown = [p for p in plan if p not in BENCH_EXPERIMENTS]
    if unknown:
        raise ConfigError(f"unknown bench experiments {unknown}; choose from {list(BENCH_EXPERIMENTS)}")
    if cfg.get("strategy_filter"):
        plan = [p for p in plan if not p.startswith(("novel", "legacy")) or p.startswith(cfg["strategy_filter"])]
    seed = cfg["seed"]
    fitted: dict[str, FitModel] = {}

    if "novel-rctp" in plan or "legacy-rctp" in plan:
        sizes = cfg["rctp_n"]
        if not isinstance(sizes, list) or not sizes:
            raise ConfigError("rctp_n must be a non-empty list")
        rounds = _int(cfg, "rctp_cycles", 1)
        for strategy, family in (("novel", "poly2"), ("legacy", "invlog")):
            if f"{strategy}-rctp" not in plan:
                continue
            combined, series_of = [], {}
            for i, n in enumerate(sizes):
                workload = fixed_size_workload([int(n)] * rounds, seed + i)
                config = RelayConfig(1000.0, rounds, Strategy(strategy))
                series = measure_rctp(config, workload)
                bench_io.write_samples_csv(out / f"samples_{strategy}-rctp_n{n}.csv", series)
                series_of.update((id(s), i) for s in series)
                combined.extend(series)
            xlabel = "N (total pairs)" if strategy == "novel" else "n (pairs per cycle)"
            fitted[f"{strategy}-rctp"] = _emit_fit(
                out, f"{strategy}-rctp", combined, family, cfg, xlabel, group=lambda s: series_of[id(s)]
            )

    if "novel-rpr" in plan:
        rounds = _int(cfg, "rpr_cycles", 2)
        workload = fixed_size_workload([_int(cfg, "rpr_n", 1)] * rounds, seed)
        samples = measure_rpr(RelayConfig(1000.0, rounds, Strategy.NOVEL), workload, RetrievalPlan())
        fitted["novel-rpr"] = _emit_fit(out, "novel-rpr", samples, "linear", cfg, "N (total pairs)")

    if "legacy-rpr" in plan:
        deltas = cfg["legacy_delta_cs"]
        if not isinstance(deltas, list) or not deltas or not all(isinstance(d, int) and d >= 1 for d in deltas):
            raise ConfigError("legacy_delta_cs must be a non-empty list of positive integers")
        per_delta = _int(cfg, "samples_per_delta", 1)
        # enough cycles that even the largest delta_C gets a full set of spend cycles
        workload = fixed_size_workload([_int(cfg, "legacy_n", 1)] * (max(deltas) + per_delta), seed)
        rplan = RetrievalPlan(tuple(deltas), per_delta)
        samples = measure_rpr(RelayConfig(1000.0, 1, Strategy.LEGACY), workload, rplan)
        fitted["legacy-rpr"] = _emit_fit(
            out, "legacy-rpr", samples, "linear", cfg, "delta_C (cycles)", group=lambda s: s.x
        )

    if "crossover" in plan:
        source = cfg["crossover_models"]
        if source == "reference":
            legacy, novel = REFERENCE_MODELS["legacy_rpr"], REFERENCE_MODELS["novel_rpr"]
        elif source == "fitted":
            if "legacy-rpr" not in fitted or "novel-rpr" not in fitted:
                raise ConfigError("crossover_models = fitted needs legacy-rpr and novel-rpr in the plan")
            legacy, novel = fitted["legacy-rpr"], fitted["novel-rpr"]
        else:
            raise ConfigError("crossover_models must be reference or fitted")
        n = _num(cfg, "crossover_n", positive=True)
        result = crossover(legacy, novel, n)
        bench_io.write_json(out / "crossover.json", {
            **result.to_dict(),
            "n": n,
            "legacy": legacy.to_dict(),
            "novel": novel.to_dict(),
        })

    if "grid" in plan:
        lams = cfg["grid_lambda"] if cfg["grid_lambda"] is not None else default_lambda_grid()
        model = fitted.get("novel-rpr", REFERENCE_MODELS["novel_rpr"])
        rows = rpr_grid(lams, cfg["grid_T_p"], _int(cfg, "grid_m", 1), model)
        bench_io.write_grid_csv(out / "grid.csv", rows)
        (out / "grid.gp").write_text(bench_io.grid_plot_script("grid.csv"))

    print(f"bench: ran {', '.join(plan)}")
    return EXIT_OK


# -- fit, verify-proof, verify-chain -------------------------------------------------


def cmd_fit(cfg: dict, out: Path) -> int:
    if cfg["samples"] is None:
        raise ConfigError("fit needs samples = <path to sample CSV>")
    try:
        samples = bench_io.read_samples_csv(cfg["samples"])
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot read samples: {exc}") from exc
    if cfg["kind"] is not None:
        samples = [s for s in samples if s.kind == cfg["kind"]]
    kept = iqr_filter(samples) if cfg["iqr"] else list(samples)
    family = cfg["family"]
    kwargs = {"resolution": _num(cfg, "invlog_resolution", positive=True)} if family == "invlog" else {}
    try:
        model = fit(family, [s.x for s in kept], [s.y_ms for s in kept], **kwargs)
    except (PopRelayError, ValueError) as exc:
        raise ConfigError(f"fit failed: {exc}") from exc
    model = FitModel(model.family, model.coefficients, model.domain, model.rms_residual,
                     model.n_samples, len(samples) - len(kept))
    bench_io.write_samples_csv(out / "filtered.csv", kept)
    bench_io.write_fit_report(out / "fit_report.json", model)
    print(json.dumps(model.to_dict(), sort_keys=True))
    return EXIT_OK


def _read_roots_csv(path) -> dict[int, CycleRoot]:
    with open(path, newline="") as fh:
        return {
            int(r["cycle"]): CycleRoot(int(r["cycle"]), int(r["period"]), bytes.fromhex(r["root"]),
                                       int(r["n_in_cycle"]), int(r["N_total"]), 0.0)
            for r in csv.DictReader(fh)
        }


def cmd_verify_proof(cfg: dict, out: Path) -> int:
    if cfg["proof"] is None:
        raise ConfigError("verify-proof needs proof = <path to proof JSON>")
    try:
        data = json.loads(Path(cfg["proof"]).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read proof: {exc}") from exc
    depth = _int(cfg, "depth", 1)
    try:
        if "inclusion" in data:
            if cfg["roots"] is None:
                raise ConfigError("verifying a PoP needs roots = <path to roots.csv>")
            ok = verify_pop(ProofOfProvenance.from_dict(data), _read_roots_csv(cfg["roots"]), depth)
        else:
            proof = proof_from_dict(data)
            root = bytes.fromhex(cfg["root"]) if cfg["root"] is not None else proof.root
            ok = verify_proof(root, proof, depth)
    except PopRelayError as exc:
        print(f"verify-proof: {type(exc).__name__}: {exc}")
        ok = False
    bench_io.write_json(out / "verify_proof.json", {"valid": ok})
    print(f"verify-proof: valid={ok}")
    return EXIT_OK if ok else EXIT_FAILED


def cmd_verify_chain(cfg: dict, out: Path) -> int:
    if cfg["store"] is None:
        raise ConfigError("verify-chain needs store = <block store file or directory>")
    target = Path(cfg["store"])
    paths = sorted(target.glob("*.jsonl")) if target.is_dir() else [target]
    if not paths or not all(p.is_file() for p in paths):
        raise ConfigError(f"no block store at {target}")
    results = {}
    for p in paths:
        try:
            bad = first_invalid_block(BlockStore.load(p))
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            log.error("%s is unreadable: %s", p, exc)
            bad = 0
        results[p.name] = {"valid": bad is None, "first_invalid": bad}
    ok = all(r["valid"] for r in results.values())
    bench_io.write_json(out / "verify_chain.json", {"valid": ok, "stores": results})
    print(f"verify-chain: {len(results)} stores, valid={ok}")
    return EXIT_OK if ok else EXIT_FAILED


COMMANDS = {
    "relay-sim": (cmd_relay_sim, RELAY_DEFAULTS),
    "ledger-sim": (cmd_ledger_sim, LEDGER_DEFAULTS),
    "bench": (cmd_bench, BENCH_DEFAULTS),
    "fit": (cmd_fit, FIT_DEFAULTS),
    "verify-proof": (cmd_verify_proof, VERIFY_PROOF_DEFAULTS),
    "verify-chain": (cmd_verify_chain, VERIFY_CHAIN_DEFAULTS),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="poprelay", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--seed", type=int, help="top-level seed (overrides the config)")
        p.add_argument("--out", default="out", help="output directory (default: ./out)")
        p.add_argument("--strategy", choices=[s.value for s in Strategy])
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    func, defaults = COMMANDS[args.command]
    defaults = dict(defaults)
    if args.command == "bench":
        defaults["strategy_filter"] = None
    try:
        cfg = resolve(defaults, load_config(args.config), args)
        if args.command == "bench" and args.strategy is not None:
            cfg["strategy_filter"] = args.strategy
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_manifest(out, args.command, cfg)
        return func(cfg, out)
    except ConfigError as exc:
        print(f"{args.command}: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PopRelayError as exc:
        print(f"{args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
