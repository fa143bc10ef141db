"""Single-threaded timing of trie updates (R_ctp) and proof retrieval (R_pr)."""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass
from typing import Sequence

from ..errors import InvalidArgument, PopRelayError
from ..merkle import KvPair
from ..relay import Relay, RelayConfig, Strategy, hash_cost_of_pop, verify_pop

RCTP = "rctp"
RPR = "rpr"


@dataclass(frozen=True)
class BenchSample:
    cycle_index: int
    x: float
    y_ms: float
    kind: str
    cost: float = 0.0  # hash evaluations behind the timed work
    ok: bool = True

    def __post_init__(self):
        if self.y_ms < 0:
            raise InvalidArgument("y_ms must be non-negative")
        if self.kind not in (RCTP, RPR):
            raise InvalidArgument(f"unknown sample kind {self.kind!r}")


@dataclass(frozen=True)
class RetrievalPlan:
    """What to retrieve after ingestion.

    ``delta_cs`` and ``samples_per_delta`` drive the legacy sweep; the novel
    strategy always retrieves every pair in the cycle just sealed.
    ``extra_keys`` are looked up once at the end and normally fail.
    """

    delta_cs: tuple[int, ...] = (1,)
    samples_per_delta: int = 5
    extra_keys: tuple[bytes, ...] = ()
    verify: bool = True


def _ms(t0: int) -> float:
    return (time.perf_counter_ns() - t0) / 1e6


def _submit_cycle(relay: Relay, cycle: int, pairs: Sequence[KvPair]):
    at = cycle * relay.config.cycle_time_ms
    for kv in pairs:
        relay.submit_transaction(kv, at=at)


def _trie_hashes(relay: Relay, cycle: int) -> int:
    if relay.strategy is Strategy.LEGACY:
        return relay._cycle_tries[cycle].hash_count
    return relay._trie.hash_count


def _maybe_rotate(relay: Relay):
    if len(relay._period_roots) == relay.m:
        relay.rotate_period()


def measure_rctp(config: RelayConfig, workload: Sequence[Sequence[KvPair]]) -> list[BenchSample]:
    """Time submit + close per cycle.  x is N (novel) or n (legacy).

    Cycles are driven directly rather than by a clock, which is the same as a
    cycle time long enough that building never overlaps the next cycle.
    """
    relay = Relay(config)
    samples = []
    for cycle, pairs in enumerate(workload):
        before = relay._trie.hash_count if relay.strategy is Strategy.NOVEL else 0
        t0 = time.perf_counter_ns()
        _submit_cycle(relay, cycle, pairs)
        cr = relay.close_cycle()
        elapsed = _ms(t0)
        cost = _trie_hashes(relay, cycle) - before
        x = cr.N_total if relay.strategy is Strategy.NOVEL else cr.n_in_cycle
        samples.append(BenchSample(cycle, float(x), elapsed, RCTP, float(cost)))
        _maybe_rotate(relay)
    return samples


def _time_pop(relay: Relay, key: bytes, inception: int, current: int, verify: bool):
    t0 = time.perf_counter_ns()
    pop = relay.retrieve_pop(key, inception, current)
    if verify and not verify_pop(pop, relay._archive, relay.depth):
        raise AssertionError(f"PoP for {key.hex()} failed verification")
    return _ms(t0), pop


def measure_rpr(
    config: RelayConfig,
    workload: Sequence[Sequence[KvPair]],
    plan: RetrievalPlan,
) -> list[BenchSample]:
    """Proof retrieval timing (retrieve plus verify when ``plan.verify``).

    novel: after each cycle closes, PoPs for every pair of that cycle are
    retrieved; one sample per cycle holds the total time divided by the
    number of pairs, against x = N.
    legacy: the whole workload is ingested first (one period spanning it),
    then for each delta_C bundles are retrieved for keys spent in late
    cycles; one sample per bundle against x = delta_C.

    Unknown keys in ``plan.extra_keys`` produce ``ok=False`` samples.
    """
    samples: list[BenchSample] = []
    if not workload:
        return samples

    if config.strategy is Strategy.NOVEL:
        relay = Relay(config)
        for cycle, pairs in enumerate(workload):
            _submit_cycle(relay, cycle, pairs)
            cr = relay.close_cycle()
            if pairs:
                total = 0.0
                cost = 0
                for kv in pairs:
                    ms, pop = _time_pop(relay, kv.key, cycle, cycle, plan.verify)
                    total += ms
                    cost += hash_cost_of_pop(pop)
                samples.append(
                    BenchSample(cycle, float(cr.N_total), total / len(pairs), RPR, cost / len(pairs))
                )
            _maybe_rotate(relay)
    else:
        cycles = len(workload)
        relay = Relay(dataclasses.replace(config, cycles_per_period=max(cycles, 1)))
        for cycle, pairs in enumerate(workload):
            _submit_cycle(relay, cycle, pairs)
            relay.close_cycle()
        for delta in plan.delta_cs:
            if delta < 1:
                raise InvalidArgument("delta_C values must be >= 1")
            if delta >= cycles:
                raise InvalidArgument(f"delta_C={delta} needs more than {cycles} cycles of workload")
            taken = 0
            # walk back from the newest cycle so every delta uses late cycles
            for current in range(cycles - 1, delta - 1, -1):
                if taken >= plan.samples_per_delta:
                    break
                pairs = workload[current]
                if not pairs:
                    continue
                kv = pairs[taken % len(pairs)]
                ms, pop = _time_pop(relay, kv.key, current - delta, current, plan.verify)
                samples.append(BenchSample(current, float(delta), ms, RPR, float(hash_cost_of_pop(pop))))
                taken += 1

    last = relay.last_closed
    for key in plan.extra_keys:
        t0 = time.perf_counter_ns()
        try:
            relay.retrieve_pop(key, last, last)
            ok = True
        except PopRelayError:
            ok = False
        samples.append(BenchSample(last, 0.0, _ms(t0), RPR, 0.0, ok))
    return samples


def fit_ready(samples: Sequence[BenchSample]) -> list[BenchSample]:
    """Successful samples only; failed retrievals never enter a fit."""
    return [s for s in samples if s.ok]
