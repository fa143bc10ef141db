"""Acceptance checks 1-10. Each test prints one ``ACCEPTANCE n: PASS|FAIL`` line."""

import json
from hashlib import sha256
import random
import statistics
import time

import numpy as np
import pytest
from scipy.stats import truncnorm

from _oracle import sparse_root
from poprelay.bench import io as bench_io
from poprelay.bench.fitting import fit_invlog, fit_linear, fit_poly2
from poprelay.bench.measure import BenchSample, RetrievalPlan, fit_ready, measure_rpr
from poprelay.bench.model import REFERENCE_LEGACY_RPR, REFERENCE_NOVEL_RPR, crossover
from poprelay.bench.stats import iqr_mask
from poprelay.bench.workload import fixed_size_workload
from poprelay.cli import main
from poprelay.errors import Unavailable
from poprelay.ledger import Cluster, Fault
from poprelay.merkle import DEPTH, ExclusionProof, InclusionProof, KvPair, SparseTrie, verify_proof
from poprelay.relay import Relay, RelayConfig, Strategy, hash_cost_of_pop


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail=""):
        with capsys.disabled():
            print(f"\nACCEPTANCE {n}: {'PASS' if ok else 'FAIL'} {detail}".rstrip())
        assert ok, detail

    return emit


def test_01_trie_correctness(report):
    rng = random.Random(2024)
    start = time.perf_counter()
    t = SparseTrie()
    present = {}
    while len(present) < 10_000:
        k = rng.randbytes(16)
        present.setdefault(k, rng.randbytes(16))
    for k, v in present.items():
        t.insert(k, v)
    absent = set()
    while len(absent) < 10_000:
        k = rng.randbytes(16)
        if k not in present:
            absent.add(k)
    root = t.root
    bad = sum(not verify_proof(root, t.prove_inclusion(k)) for k in present)
    bad += sum(not verify_proof(root, t.prove_exclusion(k)) for k in absent)
    membership = all((k in t) for k in present) and not any((k in t) for k in absent)
    elapsed = time.perf_counter() - start
    ok = bad == 0 and membership and len(t) == 10_000 and elapsed <= 60
    report(1, ok, f"bad_proofs={bad} membership={membership} elapsed={elapsed:.1f}s")


def flip(b):
    return bytes([b[0] ^ 1]) + b[1:]


def test_02_soundness_mutation_sweep(report):
    rng = random.Random(7)
    t = SparseTrie()
    keys = [rng.randbytes(12) for _ in range(200)]
    for k in keys:
        t.insert(k, rng.randbytes(8))
    proofs = [t.prove_inclusion(k) for k in keys[:50]]
    proofs += [t.prove_exclusion(rng.randbytes(13)) for _ in range(50)]
    false_accepts = 0
    trials = 0
    for p in proofs:
        assert verify_proof(t.root, p)
        for i in range(DEPTH):
            sib = list(p.siblings)
            sib[i] = flip(sib[i])
            mutated = (InclusionProof(p.key, p.value, tuple(sib), p.root) if p.kind == "inclusion"
                       else ExclusionProof(p.key, tuple(sib), p.root))
            false_accepts += verify_proof(t.root, mutated)
            trials += 1
        if p.kind == "inclusion":
            false_accepts += verify_proof(t.root, InclusionProof(p.key, flip(p.value), p.siblings, p.root))
            trials += 1
        false_accepts += verify_proof(flip(t.root), p)
        trials += 1
    report(2, false_accepts == 0, f"proofs=100 mutations={trials} false_accepts={false_accepts}")


def test_03_cumulative_union(report):
    mismatches = 0
    for seed in range(20):
        rng = random.Random(seed)
        m = rng.randint(1, 10)
        relay = Relay(RelayConfig(1000.0, m, Strategy.NOVEL))
        union = []
        for c in range(m):
            n = rng.randint(0, 200)
            pairs = [KvPair(f"{seed}-{c}-{i}".encode(), rng.randbytes(4) + b"!") for i in range(n)]
            for kv in pairs:
                relay.submit_transaction(kv, at=c * 1000.0)
            cr = relay.close_cycle()
            union += [(kv.key, kv.value) for kv in pairs]
            mismatches += cr.root != sparse_root(union)
    report(3, mismatches == 0, f"runs=20 mismatches={mismatches}")


def test_04_pop_cost_contrast(report):
    deltas = range(1, 101)
    relays = {s: Relay(RelayConfig(1000.0, 101, s)) for s in Strategy}
    for relay in relays.values():
        for c in range(101):
            relay.submit_transaction(KvPair(f"c{c}".encode(), b"v"), at=c * 1000.0)
            relay.close_cycle()
    leg = [hash_cost_of_pop(relays[Strategy.LEGACY].retrieve_pop(b"c100", 100 - d, 100)) for d in deltas]
    nov = [hash_cost_of_pop(relays[Strategy.NOVEL].retrieve_pop(b"c100", 100 - d, 100, same_cycle=False))
           for d in deltas]
    cost_ok = leg == [256 * d for d in deltas] and max(nov) <= 512

    plan = RetrievalPlan((1, 10, 25, 50, 100), 7)
    samples = fit_ready(measure_rpr(RelayConfig(1000.0, 1, Strategy.LEGACY),
                                    fixed_size_workload([1] * 107, seed=4), plan))
    medians = [statistics.median(s.y_ms for s in samples if s.x == d) for d in plan.delta_cs]
    timing_ok = all(b >= a for a, b in zip(medians, medians[1:]))
    report(4, cost_ok and timing_ok,
           f"legacy=256*dC:{leg == [256 * d for d in deltas]} novel_max={max(nov)} "
           f"medians_ms={[round(v, 3) for v in medians]}")


def test_05_insert_rehash_count(report):
    rng = random.Random(5)
    t = SparseTrie()
    worst = 0
    for i in range(2**16):
        t.insert(i.to_bytes(4, "big") + rng.randbytes(4), b"v")
        worst = max(worst, t.last_insert_hashes)
    report(5, worst <= 257 and len(t) == 2**16, f"N=65536 max_hashes_per_insert={worst}")


def test_06_fit_recovery_and_iqr(report):
    x = np.linspace(0, 5000, 60)
    a = (1.31855648e3, 4.44412352e-2, -3.70701991e-7)
    p2 = fit_poly2(x, a[0] + a[1] * x + a[2] * x * x).coefficients
    p2_err = max(abs(f - t) / abs(t) for f, t in zip(p2, a))
    lin = fit_linear(x, 8.96 + 0.015 * x).coefficients
    lin_err = max(abs(f - t) / abs(t) for f, t in zip(lin, (8.96, 0.015)))
    xi = np.arange(6.0, 301.0)
    inv = fit_invlog(xi, 100 - 20 * np.log(xi - 5)).coefficients
    inv_err = max(abs(f - t) / t for f, t in zip(inv, (100, 20, 5)))

    rng = np.random.default_rng(6)
    outliers_kept = inliers_dropped = n_out = 0
    for trial in range(200):
        n = int(rng.integers(100, 400))
        inl = 50 + truncnorm.rvs(-1.5, 1.5, size=n, random_state=rng)
        k = max(1, n // 20)
        out = 50 + rng.choice([-10.0, 10.0], k)
        mask = iqr_mask(np.concatenate([inl, out]))
        inliers_dropped += int((~mask[:n]).sum())
        outliers_kept += int(mask[n:].sum())
        n_out += k
    ok = p2_err <= 1e-6 and lin_err <= 1e-6 and inv_err <= 0.01 and outliers_kept == 0 and inliers_dropped == 0
    report(6, ok, f"poly2_rel={p2_err:.2e} linear_rel={lin_err:.2e} invlog_rel={inv_err:.2e} "
                  f"outliers_removed={n_out - outliers_kept}/{n_out} inliers_removed={inliers_dropped}")


def test_07_crossover(report):
    star = crossover(REFERENCE_LEGACY_RPR, REFERENCE_NOVEL_RPR, 1000).delta_C_star
    hand = (2328.04 - 8.96) / (15 - 2.34)
    report(7, abs(star - hand) <= 1e-6, f"delta_C_star={star!r} hand={hand!r}")


def fault_schedule(seed):
    rng = random.Random(seed)
    faults = []
    t = rng.randint(10, 60)
    for _ in range(rng.randint(1, 3)):
        length = rng.randint(20, 150)
        kind = rng.choice(["partition", "isolate", "crash"])
        if kind == "partition":
            nodes = list(range(5))
            rng.shuffle(nodes)
            cut = rng.randint(1, 2)
            faults.append(Fault(t, t + length, "partition", (tuple(sorted(nodes[:cut])), tuple(sorted(nodes[cut:])))))
        elif kind == "isolate":
            faults.append(Fault(t, t + length, "isolate_leader"))
        else:
            faults.append(Fault(t, t + length, "crash"))
        t += length + rng.randint(0, 80)
    return rng.choice([0.0, 0.05, 0.1, 0.2, 0.3]), faults


def run_schedule(seed, proposals=30):
    """Proposals spread over the fault windows, each retried until it commits."""
    drop, faults = fault_schedule(seed)
    rng = random.Random(seed + 1000)
    cluster = Cluster(5, seed, (1, 3), drop, faults)
    cluster.wait_for_leader(10_000)
    roots = []
    for i in range(proposals):
        root = sha256(f"accept/{seed}/{i}".encode()).digest()
        for _ in range(50):
            try:
                cluster.propose_root(root, tag=f"r{i}", timeout_ticks=300)
                break
            except Unavailable:
                cluster.run(10)
        else:
            raise AssertionError(f"seed {seed}: proposal {i} never committed")
        roots.append(root)
        cluster.run(rng.randint(0, 15))
    cluster.run(max(0, max(f.end_tick for f in faults) - cluster.now))
    cluster.settle()
    cluster.monitor.check_durability(cluster, roots)
    fired = sum(e.kind == "fault-start" for e in cluster.trace)
    skipped = sum(e.kind == "fault-skipped" for e in cluster.trace)
    return cluster.monitor.violations, fired, skipped, len(faults), drop


def test_08_raft_safety(report):
    start = time.perf_counter()
    violations, fired, skipped, scheduled, drops = [], 0, 0, 0, set()
    for seed in range(100):
        v, f, s, n, drop = run_schedule(seed)
        violations += [f"seed {seed}: {x}" for x in v]
        fired += f
        skipped += s
        scheduled += n
        drops.add(drop)
    elapsed = time.perf_counter() - start
    # leader-targeted faults are skipped when no leader exists at their start tick
    ok = not violations and fired + skipped == scheduled and fired >= 0.8 * scheduled and elapsed <= 300
    report(8, ok, f"schedules=100 faults_fired={fired}/{scheduled} skipped_no_leader={skipped} drops={sorted(drops)} "
                  f"violations={len(violations)} elapsed={elapsed:.1f}s {violations[:3]}")


def test_09_end_to_end(report, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("cycles = 10\ncycles_per_period = 10\nlambda = 5\nnode_count = 3\n")
    code = main(["relay-sim", "--config", str(cfg), "--seed", "1", "--out", str(tmp_path / "out")])
    r = json.loads((tmp_path / "out" / "pop_report.json").read_text())
    blocks = [n["blocks"] for n in r["nodes"].values()]
    ok = code == 0 and r["roots"] == 10 and blocks == [10] * 3 and all(r["checks"].values())
    report(9, ok, f"exit={code} blocks={blocks} checks={r['checks']} pops={len(r['pops'])}")


def test_10_determinism(report, tmp_path):
    relay_cfg = tmp_path / "relay.cfg"
    relay_cfg.write_text("cycles = 6\ncycles_per_period = 3\nlambda = 8\ndrop_probability = 0.1\n")
    ledger_cfg = tmp_path / "ledger.cfg"
    ledger_cfg.write_text('node_counts = [3, 5]\nproposals_per_point = 10\n'
                          'partitions = [{"start_tick": 30, "end_tick": 90, "isolate": "leader"}]\n')
    rng = np.random.default_rng(10)
    xs = rng.uniform(0, 2000, 80)
    samples = [BenchSample(i, float(x), 9 + 0.015 * x + float(rng.normal(0, 0.5)), "rpr") for i, x in enumerate(xs)]
    csv_path = bench_io.write_samples_csv(tmp_path / "samples.csv", samples)
    fit_cfg = tmp_path / "fit.cfg"
    fit_cfg.write_text(f"samples = {csv_path}\nfamily = linear\n")
    bench_cfg = tmp_path / "bench.cfg"
    bench_cfg.write_text('plan = ["crossover", "grid"]\n')

    artifacts = {
        "relay-sim": (relay_cfg, ["roots.csv", "pop_report.json", "manifest.json"]
                      + [f"nodes/node_{i}.jsonl" for i in range(3)]),
        "ledger-sim": (ledger_cfg, ["sweep.csv", "safety_report.json", "manifest.json"]),
        "fit": (fit_cfg, ["fit_report.json", "filtered.csv", "manifest.json"]),
        "bench": (bench_cfg, ["crossover.json", "grid.csv", "manifest.json"]),
    }
    differing = []
    for cmd, (cfg, files) in artifacts.items():
        outs = [tmp_path / f"{cmd}-{run}" for run in ("a", "b")]
        for out in outs:
            assert main([cmd, "--config", str(cfg), "--seed", "99", "--out", str(out)]) == 0
        differing += [f"{cmd}/{f}" for f in files if (outs[0] / f).read_bytes() != (outs[1] / f).read_bytes()]
    report(10, not differing, f"commands={list(artifacts)} differing={differing}")
