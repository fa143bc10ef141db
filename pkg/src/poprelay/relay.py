"""Cycle/period engine: collects KV pairs, seals Merkle roots, assembles PoPs.

Two strategies are supported:

* ``legacy`` builds a fresh trie from each cycle's pairs.  A Proof of
  Provenance needs one exclusion proof per cycle between the asset's inception
  and the current cycle.
* ``novel`` keeps one cumulative trie per period.  Each cycle's root covers
  every earlier cycle of the period, so a PoP is an inclusion proof plus at
  most one exclusion proof against the previous cycle's root.

Submissions go to the collector's per-cycle buckets.  The builder seals a
bucket when its cycle closes.  A submission that arrives after the changeover
instant lands in the next bucket, so nothing is rejected during a changeover.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from collections import OrderedDict, deque
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Mapping, Protocol

from .errors import (
    DuplicateKeyConflict,
    InvalidArgument,
    InvalidState,
    MalformedProof,
    NotFound,
    PeriodBoundary,
    PopRelayError,
    Unavailable,
    Unverifiable,
)
from .merkle import (
    DEPTH,
    ExclusionProof,
    InclusionProof,
    KvPair,
    SparseTrie,
    proof_from_dict,
    proof_to_dict,
    verify_proof,
)

log = logging.getLogger(__name__)


class Strategy(str, Enum):
    LEGACY = "legacy"
    NOVEL = "novel"


@dataclass(frozen=True)
class RelayConfig:
    cycle_time_ms: float = 1000.0
    cycles_per_period: int = 1
    strategy: Strategy = Strategy.NOVEL
    retained_periods: int = 2
    lambda_hint: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        if not self.cycle_time_ms > 0:
            raise InvalidArgument("cycle_time_ms must be positive")
        if self.cycles_per_period < 1:
            raise InvalidArgument("cycles_per_period must be >= 1")
        if self.retained_periods < 1:
            raise InvalidArgument("retained_periods must be >= 1")

    @property
    def cycle_time_s(self) -> float:
        return self.cycle_time_ms / 1000.0

    @property
    def period_time_s(self) -> float:
        return self.cycles_per_period * self.cycle_time_s

    @classmethod
    def from_mapping(cls, data: Mapping) -> "RelayConfig":
        return cls(
            cycle_time_ms=float(data.get("cycle_time_ms", 1000.0)),
            cycles_per_period=int(data.get("cycles_per_period", 1)),
            strategy=Strategy(data.get("strategy", "novel")),
            retained_periods=int(data.get("retained_periods", 2)),
            lambda_hint=data.get("lambda_hint"),
        )


@dataclass(frozen=True)
class Receipt:
    cycle_index: int
    accepted: bool


@dataclass(frozen=True)
class CycleRoot:
    cycle_index: int
    period_index: int
    root: bytes
    n_in_cycle: int
    N_total: int
    closed_at: float

    def to_dict(self) -> dict:
        return {
            "cycle_index": self.cycle_index,
            "period_index": self.period_index,
            "root": self.root.hex(),
            "n_in_cycle": self.n_in_cycle,
            "N_total": self.N_total,
            "closed_at": self.closed_at,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "CycleRoot":
        return cls(
            int(data["cycle_index"]),
            int(data["period_index"]),
            bytes.fromhex(data["root"]),
            int(data["n_in_cycle"]),
            int(data["N_total"]),
            data["closed_at"],
        )


@dataclass(frozen=True)
class ProofOfProvenance:
    key: bytes
    inclusion: InclusionProof
    exclusions: tuple[ExclusionProof, ...]
    anchor_cycles: tuple[int, ...]
    delta_C: int
    strategy: Strategy

    @property
    def current_cycle(self) -> int:
        return self.anchor_cycles[0]

    def to_dict(self) -> dict:
        return {
            "key": self.key.hex(),
            "strategy": self.strategy.value,
            "delta_C": self.delta_C,
            "anchor_cycles": list(self.anchor_cycles),
            "inclusion": proof_to_dict(self.inclusion),
            "exclusions": [proof_to_dict(p) for p in self.exclusions],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ProofOfProvenance":
        try:
            inclusion = proof_from_dict(data["inclusion"])
            exclusions = tuple(proof_from_dict(p) for p in data["exclusions"])
            if not isinstance(inclusion, InclusionProof) or not all(
                isinstance(p, ExclusionProof) for p in exclusions
            ):
                raise MalformedProof("PoP component proofs have the wrong kind")
            return cls(
                bytes.fromhex(data["key"]),
                inclusion,
                exclusions,
                tuple(int(c) for c in data["anchor_cycles"]),
                int(data["delta_C"]),
                Strategy(data["strategy"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedProof(f"cannot decode PoP: {exc}") from exc


@dataclass(frozen=True)
class PeriodSummary:
    period_index: int
    roots: tuple[CycleRoot, ...]
    final_leaf_count: int
    leaf_dump: Path | None = None


@dataclass(frozen=True)
class LatencyParams:
    R_ctp: float
    R_pr: float

    @property
    def L(self) -> float:
        return relay_latency(self.R_ctp, self.R_pr)


def relay_latency(r_ctp: float, r_pr: float) -> float:
    """Relay latency: trie processing time plus proof retrieval time (ms)."""
    if r_ctp < 0 or r_pr < 0:
        raise InvalidArgument("latency components must be non-negative")
    return r_ctp + r_pr


class RootSink(Protocol):
    def propose_root(self, root: bytes, tag: str | None = None): ...


class LogicalClock:
    """Manually advanced millisecond clock for deterministic runs."""

    def __init__(self, now: float = 0.0):
        self.now = now

    def __call__(self) -> float:
        return self.now

    def advance(self, ms: float) -> float:
        self.now += ms
        return self.now


class WallClock:
    def __init__(self):
        self._t0 = time.monotonic()

    def __call__(self) -> float:
        return (time.monotonic() - self._t0) * 1000.0


class Relay:
    """The relay core.

    ``ledger`` is any object with ``propose_root(root, tag=...)`` that may raise
    :class:`Unavailable`.  Roots that cannot be published are buffered and
    retried, in cycle order, on the next close or :meth:`flush_pending`.
    """

    def __init__(
        self,
        config: RelayConfig,
        ledger: RootSink | None = None,
        clock: Callable[[], float] | None = None,
        store_dir: str | Path | None = None,
        depth: int = DEPTH,
    ):
        self.config = config
        self.ledger = ledger
        self.clock = clock if clock is not None else LogicalClock()
        self.store_dir = Path(store_dir) if store_dir is not None else None
        self.depth = depth

        self.period_index = 0
        self.open_cycle = 0
        self.last_closed: int | None = None

        # collector state, guarded by _collect_lock
        self._collect_lock = threading.Lock()
        self._buckets: dict[int, dict[bytes, KvPair]] = {}
        self._period_keys: dict[int, dict[bytes, tuple[bytes, int]]] = {}
        self._prove_on_close: set[bytes] = set()

        # builder state, guarded by _build_lock
        self._build_lock = threading.RLock()
        self._trie = SparseTrie(depth)
        self._cycle_tries: dict[int, SparseTrie] = {}
        self._sealed: dict[int, list[KvPair]] = {}
        self._archive: dict[int, CycleRoot] = {}
        self._period_roots: list[CycleRoot] = []
        self._snapshots: OrderedDict[int, SparseTrie] = OrderedDict()
        self._pending: deque[CycleRoot] = deque()
        self.published: list[tuple[CycleRoot, object]] = []
        self.ready_pops: dict[bytes, ProofOfProvenance] = {}
        self.period_summaries: list[PeriodSummary] = []

    @property
    def strategy(self) -> Strategy:
        return self.config.strategy

    @property
    def m(self) -> int:
        return self.config.cycles_per_period

    def period_of(self, cycle: int) -> int:
        return cycle // self.m

    def cycle_at(self, now_ms: float) -> int:
        return int(now_ms // self.config.cycle_time_ms)

    # -- collector -------------------------------------------------------

    def submit_transaction(
        self, kv: KvPair, at: float | None = None, prove_on_close: bool = False
    ) -> Receipt:
        now = self.clock() if at is None else at
        with self._collect_lock:
            cycle = max(self.open_cycle, self.cycle_at(now))
            keys = self._period_keys.setdefault(self.period_of(cycle), {})
            prev = keys.get(kv.key)
            if prev is not None:
                if prev[0] != kv.value:
                    raise DuplicateKeyConflict(
                        f"key {kv.key.hex()} already submitted in cycle {prev[1]} with another value"
                    )
                return Receipt(prev[1], True)
            keys[kv.key] = (kv.value, cycle)
            self._buckets.setdefault(cycle, {})[kv.key] = kv
            if prove_on_close:
                self._prove_on_close.add(kv.key)
        return Receipt(cycle, True)

    def pending_count(self, cycle: int | None = None) -> int:
        with self._collect_lock:
            if cycle is None:
                return sum(len(b) for b in self._buckets.values())
            return len(self._buckets.get(cycle, ()))

    # -- builder ---------------------------------------------------------

    def close_cycle(self) -> CycleRoot:
        with self._build_lock:
            cycle = self.open_cycle
            period = self.period_of(cycle)
            if period != self.period_index:
                raise InvalidState(
                    f"period {self.period_index} has all {self.m} cycles closed; rotate_period first"
                )
            with self._collect_lock:
                bucket = self._buckets.pop(cycle, {})
                self.open_cycle = cycle + 1
                flagged = [k for k in bucket if k in self._prove_on_close]
                self._prove_on_close.difference_update(flagged)
            pairs = list(bucket.values())

            if self.strategy is Strategy.LEGACY:
                trie = SparseTrie(self.depth)
                for kv in pairs:
                    trie.insert(kv.key, kv.value)
                self._cycle_tries[cycle] = trie
                total = len(pairs)
            else:
                trie = self._trie
                for kv in pairs:
                    trie.insert(kv.key, kv.value)
                total = len(trie)

            cr = CycleRoot(cycle, period, trie.root, len(pairs), total, self.clock())
            self._archive[cycle] = cr
            self._sealed[cycle] = pairs
            self._period_roots.append(cr)
            self.last_closed = cycle

            for key in flagged:
                self.ready_pops[key] = self.retrieve_pop(key, cycle, cycle)

        self._pending.append(cr)
        self.flush_pending()
        return cr

    def flush_pending(self) -> int:
        """Publish buffered roots in cycle order; returns how many remain."""
        if self.ledger is None:
            self._pending.clear()
            return 0
        while self._pending:
            cr = self._pending[0]
            try:
                result = self.ledger.propose_root(cr.root, tag=f"cycle-{cr.cycle_index}")
            except Unavailable as exc:
                log.warning("ledger unavailable for cycle %d: %s", cr.cycle_index, exc)
                break
            self._pending.popleft()
            self.published.append((cr, result))
        return len(self._pending)

    def rotate_period(self) -> PeriodSummary:
        with self._build_lock:
            if len(self._period_roots) < self.m:
                raise InvalidState(
                    f"period {self.period_index} has {len(self._period_roots)} of {self.m} cycles closed"
                )
            period = self.period_index
            roots = tuple(self._period_roots)
            count = sum(cr.n_in_cycle for cr in roots)
            dump = self._write_leaf_dump(period, roots) if self.store_dir else None
            summary = PeriodSummary(period, roots, count, dump)

            self.period_index += 1
            self._period_roots = []
            self._trie = SparseTrie(self.depth)
            keep_from = (self.period_index - self.config.retained_periods + 1) * self.m
            for store in (self._cycle_tries, self._sealed):
                for c in [c for c in store if c < keep_from]:
                    del store[c]
            for c in [c for c in self._snapshots if c < keep_from]:
                del self._snapshots[c]
            with self._collect_lock:
                self._period_keys.pop(period, None)
            self.period_summaries.append(summary)
            return summary

    def _write_leaf_dump(self, period: int, roots: Iterable[CycleRoot]) -> Path:
        self.store_dir.mkdir(parents=True, exist_ok=True)
        path = self.store_dir / f"leaves_period_{period:06d}.jsonl"
        with path.open("w") as fh:
            for cr in roots:
                for kv in self._sealed.get(cr.cycle_index, ()):
                    rec = {"cycle": cr.cycle_index, "key_hex": kv.key.hex(), "value_hex": kv.value.hex()}
                    fh.write(json.dumps(rec) + "\n")
        return path

    def advance_to(self, now_ms: float) -> list[CycleRoot]:
        """Close every cycle that ended at or before ``now_ms``, rotating periods as they fill."""
        if isinstance(self.clock, LogicalClock):
            self.clock.now = max(self.clock.now, now_ms)
        closed = []
        while (self.open_cycle + 1) * self.config.cycle_time_ms <= now_ms:
            closed.append(self.close_cycle())
            if len(self._period_roots) == self.m:
                self.rotate_period()
        return closed

    # -- queries ---------------------------------------------------------

    def archived_roots(self) -> list[CycleRoot]:
        return [self._archive[c] for c in sorted(self._archive)]

    def roots(self, period: int) -> list[CycleRoot]:
        return [cr for cr in self.archived_roots() if cr.period_index == period]

    def cycle_root(self, cycle: int) -> CycleRoot:
        try:
            return self._archive[cycle]
        except KeyError:
            raise NotFound(f"cycle {cycle} not closed") from None

    def _retained(self, cycle: int) -> bool:
        return cycle in self._sealed

    def _novel_snapshot(self, cycle: int) -> SparseTrie:
        if cycle == self.last_closed and self.period_of(cycle) == self.period_index:
            return self._trie
        snap = self._snapshots.get(cycle)
        if snap is not None:
            self._snapshots.move_to_end(cycle)
            return snap
        snap = SparseTrie(self.depth)
        for c in range(self.period_of(cycle) * self.m, cycle + 1):
            for kv in self._sealed[c]:
                snap.insert(kv.key, kv.value)
        self._snapshots[cycle] = snap
        while len(self._snapshots) > 4:
            self._snapshots.popitem(last=False)
        return snap

    def retrieve_pop(
        self,
        key: bytes,
        inception_cycle: int,
        current_cycle: int,
        same_cycle: bool | None = None,
    ) -> ProofOfProvenance:
        """Assemble the Proof of Provenance for ``key`` spent in ``current_cycle``.

        ``same_cycle`` defaults to whether ``current_cycle`` is still the most
        recently closed cycle; under the novel strategy a same-cycle PoP carries
        no exclusion proof.
        """
        if inception_cycle > current_cycle:
            raise InvalidArgument("inception_cycle must not exceed current_cycle")
        if self.last_closed is None or current_cycle > self.last_closed:
            raise InvalidArgument(f"cycle {current_cycle} is not closed yet")
        delta = max(1, current_cycle - inception_cycle)
        with self._build_lock:
            if self.strategy is Strategy.LEGACY:
                span = range(inception_cycle + 1, current_cycle)
                for c in (current_cycle, *span):
                    if c not in self._cycle_tries:
                        raise InvalidArgument(f"cycle {c} is outside retained history")
                inclusion = self._cycle_tries[current_cycle].prove_inclusion(key)
                exclusions = tuple(self._cycle_tries[c].prove_exclusion(key) for c in span)
                anchors = (current_cycle, *span)
            else:
                if self.period_of(inception_cycle) != self.period_of(current_cycle):
                    raise PeriodBoundary(
                        f"cycles {inception_cycle} and {current_cycle} lie in different periods"
                    )
                if not self._retained(current_cycle):
                    raise InvalidArgument(f"cycle {current_cycle} is outside retained history")
                if same_cycle is None:
                    same_cycle = current_cycle == self.last_closed
                inclusion = self._novel_snapshot(current_cycle).prove_inclusion(key)
                period_start = self.period_of(current_cycle) * self.m
                if not same_cycle and current_cycle > period_start:
                    prev = current_cycle - 1
                    exclusions = (self._novel_snapshot(prev).prove_exclusion(key),)
                    anchors = (current_cycle, prev)
                else:
                    exclusions = ()
                    anchors = (current_cycle,)
        return ProofOfProvenance(key, inclusion, exclusions, anchors, delta, self.strategy)


def verify_pop(
    pop: ProofOfProvenance,
    archived_roots: Iterable[CycleRoot] | Mapping[int, CycleRoot],
    depth: int = DEPTH,
) -> bool:
    """Check every component proof against its archived root.

    Raises :class:`Unverifiable` when an anchor cycle has no archived root.
    """
    if isinstance(archived_roots, Mapping):
        roots = {c: cr.root for c, cr in archived_roots.items()}
    else:
        roots = {cr.cycle_index: cr.root for cr in archived_roots}
    missing = [c for c in pop.anchor_cycles if c not in roots]
    if missing:
        raise Unverifiable(f"no archived root for cycles {missing}")

    if len(pop.anchor_cycles) != 1 + len(pop.exclusions) or pop.delta_C < 1:
        return False
    current = pop.anchor_cycles[0]
    rest = list(pop.anchor_cycles[1:])
    if pop.strategy is Strategy.LEGACY:
        if rest != list(range(current - pop.delta_C + 1, current)):
            return False
    elif rest not in ([], [current - 1]):
        return False

    proofs = (pop.inclusion, *pop.exclusions)
    if any(p.key != pop.key for p in proofs):
        return False
    return all(
        verify_proof(roots[c], p, depth) for c, p in zip(pop.anchor_cycles, proofs)
    )


def hash_cost_of_pop(pop: ProofOfProvenance) -> int:
    """Sibling-hash evaluations needed to verify the whole bundle."""
    return sum(len(p.siblings) for p in (pop.inclusion, *pop.exclusions))


def handle_request(relay: Relay, request: Mapping) -> dict:
    """In-process form of the relay's JSON request/response protocol."""
    op = request.get("op")
    try:
        if op == "submit":
            kv = KvPair(bytes.fromhex(request["key"]), bytes.fromhex(request["value"]))
            receipt = relay.submit_transaction(kv)
            return {"cycle": receipt.cycle_index, "accepted": receipt.accepted}
        if op == "pop":
            pop = relay.retrieve_pop(
                bytes.fromhex(request["key"]),
                int(request["inception_cycle"]),
                int(request["current_cycle"]),
            )
            return pop.to_dict()
        if op == "roots":
            return {"roots": [cr.to_dict() for cr in relay.roots(int(request["period"]))]}
    except PopRelayError as exc:
        return {"error": type(exc).__name__, "message": str(exc)}
    except (KeyError, TypeError, ValueError) as exc:
        return {"error": "BadRequest", "message": str(exc)}
    return {"error": "BadRequest", "message": f"unknown op {op!r}"}
