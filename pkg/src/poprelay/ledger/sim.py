"""Deterministic discrete-event simulation of a Raft root ledger.

Time advances in integer ticks.  Every random choice (message latency, drops,
election timeouts) comes from RNGs seeded from one top-level seed, so equal
seeds and configs reproduce identical traces and block stores.
"""

from __future__ import annotations

import hashlib
import heapq
import logging
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..errors import InvalidArgument, Unavailable
from .blocks import BlockStore, query_root
from .raft import LogEntry, Message, RaftConfig, RaftNode, Role

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Fault:
    """One scheduled fault, active on ticks [start_tick, end_tick).

    ``kind`` is ``partition`` (explicit ``groups``; unlisted nodes are cut off
    alone), ``isolate_leader`` or ``crash`` (``node`` or, when None, whoever
    leads at ``start_tick``; restarted at ``end_tick``).
    """

    start_tick: int
    end_tick: int
    kind: str = "partition"
    groups: tuple[tuple[int, ...], ...] = ()
    node: int | None = None

    @classmethod
    def from_dict(cls, data: Mapping) -> "Fault":
        start, end = int(data["start_tick"]), int(data["end_tick"])
        if end <= start:
            raise InvalidArgument("fault end_tick must be after start_tick")
        if data.get("isolate") == "leader" or data.get("kind") == "isolate_leader":
            return cls(start, end, "isolate_leader")
        if "crash" in data:
            target = data["crash"]
            return cls(start, end, "crash", node=None if target == "leader" else int(target))
        groups = tuple(tuple(int(n) for n in g) for g in data["groups"])
        return cls(start, end, "partition", groups)

    def to_dict(self) -> dict:
        if self.kind == "isolate_leader":
            return {"start_tick": self.start_tick, "end_tick": self.end_tick, "isolate": "leader"}
        if self.kind == "crash":
            node = "leader" if self.node is None else self.node
            return {"start_tick": self.start_tick, "end_tick": self.end_tick, "crash": node}
        return {"start_tick": self.start_tick, "end_tick": self.end_tick,
                "groups": [list(g) for g in self.groups]}


class SimNet:
    def __init__(self, seed: int, latency_range: tuple[int, int] = (1, 3), drop_probability: float = 0.0):
        lo, hi = latency_range
        if lo < 1 or hi < lo:
            raise InvalidArgument("latency_range must satisfy 1 <= lo <= hi")
        if not 0.0 <= drop_probability <= 1.0:
            raise InvalidArgument("drop_probability must lie in [0, 1]")
        self.rng = random.Random(f"net/{seed}")
        self.latency_range = (lo, hi)
        self.drop_probability = drop_probability
        self.groups: list[frozenset[int]] | None = None
        self.down: set[int] = set()
        self._queue: list[tuple[int, int, Message]] = []
        self._seq = 0
        self.sent = self.dropped = self.delivered = 0

    def connected(self, a: int, b: int) -> bool:
        if a in self.down or b in self.down:
            return False
        if self.groups is None:
            return True
        return any(a in g and b in g for g in self.groups)

    def send(self, msg: Message, now: int):
        self.sent += 1
        if not self.connected(msg.src, msg.dst):
            self.dropped += 1
            return
        if self.drop_probability and self.rng.random() < self.drop_probability:
            self.dropped += 1
            return
        self._seq += 1
        heapq.heappush(self._queue, (now + self.rng.randint(*self.latency_range), self._seq, msg))

    def due(self, now: int) -> list[Message]:
        out = []
        while self._queue and self._queue[0][0] <= now:
            _, _, msg = heapq.heappop(self._queue)
            if self.connected(msg.src, msg.dst):
                self.delivered += 1
                out.append(msg)
            else:
                self.dropped += 1
        return out

    @property
    def in_flight(self) -> int:
        return len(self._queue)


@dataclass(frozen=True)
class Event:
    tick: int
    kind: str
    node: int
    detail: tuple = ()


@dataclass(frozen=True)
class CommitResult:
    committed: bool
    index: int  # block index of the root (root entries only, 1-based)
    term: int
    redirected_from: int | None
    log_index: int
    ticks: int


class SafetyMonitor:
    """Checks Raft safety properties while a cluster runs."""

    def __init__(self, log_matching_every: int = 10):
        self.leaders: dict[int, set[int]] = {}
        self.committed: dict[int, LogEntry] = {}
        self.block_ids: dict[int, bytes] = {}
        self.violations: list[str] = []
        self.log_matching_every = log_matching_every
        self._seen_commit: dict[int, int] = {}
        self._seen_blocks: dict[int, int] = {}

    def _violate(self, text: str):
        if text not in self.violations:
            log.error("safety violation: %s", text)
            self.violations.append(text)

    def observe(self, cluster: "Cluster"):
        nodes = cluster.nodes.values()
        for node in nodes:
            start = self._seen_commit.get(node.id, 0)
            for i in range(start + 1, node.commit_index + 1):
                entry = node.log[i - 1]
                known = self.committed.get(i)
                if known is None:
                    self.committed[i] = entry
                elif known != entry:
                    self._violate(f"state-machine safety: index {i} committed differently on node {node.id}")
            self._seen_commit[node.id] = max(start, node.commit_index)

            seen = self._seen_blocks.get(node.id, 0)
            for b in node.store.blocks[seen:]:
                known = self.block_ids.setdefault(b.index, b.block_id)
                if known != b.block_id:
                    self._violate(f"state-machine safety: block {b.index} differs on node {node.id}")
            self._seen_blocks[node.id] = len(node.store.blocks)

        for node in nodes:
            if node.role is not Role.LEADER:
                continue
            holders = self.leaders.setdefault(node.current_term, set())
            if node.id not in holders:
                holders.add(node.id)
                if len(holders) > 1:
                    self._violate(f"election safety: term {node.current_term} has leaders {sorted(holders)}")
                for i, entry in self.committed.items():
                    if i > len(node.log) or node.log[i - 1] != entry:
                        self._violate(
                            f"leader completeness: leader {node.id} of term {node.current_term} lacks committed index {i}"
                        )
        if self.log_matching_every and cluster.now % self.log_matching_every == 0:
            self.check_log_matching(nodes)

    def check_log_matching(self, nodes: Iterable[RaftNode]):
        nodes = list(nodes)
        for a_i, a in enumerate(nodes):
            for b in nodes[a_i + 1:]:
                for i in range(min(len(a.log), len(b.log)), 0, -1):
                    if a.log[i - 1].term == b.log[i - 1].term:
                        if a.log[:i] != b.log[:i]:
                            self._violate(f"log matching: nodes {a.id},{b.id} diverge below index {i}")
                        break

    def check_durability(self, cluster: "Cluster", roots: Iterable[bytes]):
        for root in roots:
            for node in cluster.nodes.values():
                if not query_root(node.store, root)["found"]:
                    self._violate(f"durability: node {node.id} lost committed root {root.hex()[:16]}")

    @property
    def ok(self) -> bool:
        return not self.violations


class Cluster:
    """A simulated Raft group plus the client-side ``propose_root`` used by the relay."""

    def __init__(
        self,
        node_count: int = 3,
        seed: int = 0,
        latency_range: tuple[int, int] = (1, 3),
        drop_probability: float = 0.0,
        faults: Sequence[Fault] = (),
        raft_config: RaftConfig | None = None,
        store_dir: str | Path | None = None,
        auto_apply: bool = True,
    ):
        if node_count < 1:
            raise InvalidArgument("node_count must be >= 1")
        self.seed = seed
        self.now = 0
        self.net = SimNet(seed, latency_range, drop_probability)
        self.faults = list(faults)
        self.auto_apply = auto_apply
        self.raft_config = raft_config or RaftConfig()
        ids = list(range(node_count))
        self.nodes: dict[int, RaftNode] = {}
        for i in ids:
            path = Path(store_dir) / f"node_{i}.jsonl" if store_dir is not None else None
            self.nodes[i] = RaftNode(
                i,
                [j for j in ids if j != i],
                random.Random(f"node/{seed}/{i}"),
                self.raft_config,
                BlockStore(path),
            )
        self.monitor = SafetyMonitor()
        self.trace: list[Event] = []
        self._known_leaders: set[tuple[int, int]] = set()
        self._active: dict[int, object] = {}
        self._single_node_bootstrap()

    def _single_node_bootstrap(self):
        # a group of one is its own majority and elects itself immediately
        if len(self.nodes) == 1:
            node = self.nodes[0]
            node.election_deadline = self.now
            node.on_tick(self.now)
            self._record()

    # -- time ------------------------------------------------------------

    def tick(self) -> list[Event]:
        self.now += 1
        now = self.now
        mark = len(self.trace)
        self._apply_faults()
        for msg in self.net.due(now):
            for out in self.nodes[msg.dst].step(msg, now):
                self.net.send(out, now)
        for nid in sorted(self.nodes):
            if nid in self.net.down:
                continue
            for out in self.nodes[nid].on_tick(now):
                self.net.send(out, now)
        if self.auto_apply:
            for nid in sorted(self.nodes):
                if nid not in self.net.down:
                    self.apply(nid)
        self._record()
        self.monitor.observe(self)
        return self.trace[mark:]

    def run(self, ticks: int) -> list[Event]:
        events = []
        for _ in range(ticks):
            events.extend(self.tick())
        return events

    def run_until(self, predicate, max_ticks: int) -> bool:
        for _ in range(max_ticks):
            if predicate(self):
                return True
            self.tick()
        return predicate(self)

    def apply(self, nid: int) -> list:
        blocks = self.nodes[nid].apply_committed()
        for b in blocks:
            self.trace.append(Event(self.now, "block", nid, (b.index, b.merkle_root.hex())))
        return blocks

    def _record(self):
        for node in self.nodes.values():
            if node.role is Role.LEADER and (node.current_term, node.id) not in self._known_leaders:
                self._known_leaders.add((node.current_term, node.id))
                self.trace.append(Event(self.now, "elected", node.id, (node.current_term,)))

    # -- faults ----------------------------------------------------------

    def _apply_faults(self):
        now = self.now
        for i, f in enumerate(self.faults):
            if f.start_tick == now:
                self._start_fault(i, f)
            if f.end_tick == now and i in self._active:
                self._end_fault(i, f)

    def _start_fault(self, i: int, f: Fault):
        if f.kind == "partition":
            listed = {n for g in f.groups for n in g}
            groups = [frozenset(g) for g in f.groups]
            groups += [frozenset({n}) for n in self.nodes if n not in listed]
            self.partition(groups)
            self._active[i] = groups
        elif f.kind == "isolate_leader":
            leader = self.leader()
            if leader is None:
                self.trace.append(Event(self.now, "fault-skipped", -1, (f.kind,)))
                return
            others = frozenset(n for n in self.nodes if n != leader.id)
            self.partition([frozenset({leader.id}), others])
            self._active[i] = leader.id
        elif f.kind == "crash":
            target = f.node
            if target is None:
                leader = self.leader()
                if leader is None:
                    self.trace.append(Event(self.now, "fault-skipped", -1, (f.kind,)))
                    return
                target = leader.id
            self.crash(target)
            self._active[i] = target
        else:
            raise InvalidArgument(f"unknown fault kind {f.kind!r}")
        self.trace.append(Event(self.now, "fault-start", -1, (f.kind, repr(self._active[i]))))

    def _end_fault(self, i: int, f: Fault):
        target = self._active.pop(i)
        if f.kind == "crash":
            self.restart(target)
        else:
            self.heal()
        self.trace.append(Event(self.now, "fault-end", -1, (f.kind,)))

    def partition(self, groups: Iterable[Iterable[int]]):
        self.net.groups = [frozenset(g) for g in groups]

    def heal(self):
        self.net.groups = None

    def crash(self, nid: int):
        self.net.down.add(nid)
        self.trace.append(Event(self.now, "crash", nid))

    def restart(self, nid: int):
        self.nodes[nid].crash_reset(self.now)
        self.net.down.discard(nid)
        self.trace.append(Event(self.now, "restart", nid))

    # -- queries ---------------------------------------------------------

    def live_nodes(self) -> list[RaftNode]:
        return [n for i, n in sorted(self.nodes.items()) if i not in self.net.down]

    def leader(self) -> RaftNode | None:
        leaders = [n for n in self.live_nodes() if n.role is Role.LEADER]
        if not leaders:
            return None
        return max(leaders, key=lambda n: (n.current_term, -n.id))

    def wait_for_leader(self, max_ticks: int = 1000) -> RaftNode | None:
        self.run_until(lambda c: c.leader() is not None, max_ticks)
        return self.leader()

    def query_root(self, root: bytes, node: int | None = None) -> dict:
        nid = node if node is not None else self.live_nodes()[0].id
        return query_root(self.nodes[nid].store, root)

    def settled(self) -> bool:
        leader = self.leader()
        if leader is None or leader.commit_index != leader.last_log_index:
            return False
        return all(
            n.last_applied == leader.commit_index and len(n.log) == len(leader.log)
            for n in self.live_nodes()
        )

    def settle(self, max_ticks: int = 2000) -> bool:
        return self.run_until(Cluster.settled, max_ticks)

    # -- client ----------------------------------------------------------

    def propose_root(
        self,
        root: bytes,
        tag: str | None = None,
        via: int | None = None,
        timeout_ticks: int = 500,
    ) -> CommitResult:
        """Submit ``root`` through node ``via`` (default: the current leader).

        A follower redirects to the leader it knows.  Raises :class:`Unavailable`
        if no commit happens within ``timeout_ticks``.
        """
        start = self.now
        deadline = start + timeout_ticks
        if via is None:
            leader = self.leader()
            target = leader.id if leader is not None else self.live_nodes()[0].id
        else:
            target = via
        redirected_from = None
        pending: tuple[int, int, int] | None = None
        visited: set[int] = set()
        while True:
            if target in self.net.down and via is None:
                leader = self.leader()
                if leader is not None:
                    target = leader.id
            node = self.nodes[target]
            up = target not in self.net.down
            if pending is None and up:
                if node.role is Role.LEADER:
                    idx, msgs = node.propose(root, tag, self.now)
                    for m in msgs:
                        self.net.send(m, self.now)
                    pending = (target, node.current_term, idx)
                elif node.leader_id is not None and node.leader_id != target and node.leader_id not in visited:
                    visited.add(target)
                    if redirected_from is None:
                        redirected_from = target
                    target = node.leader_id
                    continue
            if pending is not None:
                nid, term, idx = pending
                owner = self.nodes[nid]
                if nid in self.net.down or owner.role is not Role.LEADER or owner.current_term != term:
                    # leadership lost: resubmit through whoever leads now (tag dedups)
                    pending = None
                    continue
                if owner.commit_index >= idx:
                    if self.auto_apply:
                        self.apply(nid)
                    return CommitResult(True, owner.root_ordinal(idx), term, redirected_from, idx,
                                        self.now - start)
            if self.now >= deadline:
                raise Unavailable(f"root {root.hex()[:16]} not committed within {timeout_ticks} ticks")
            self.tick()
            visited.clear()


@dataclass(frozen=True)
class SweepRow:
    node_count: int
    mean_commit_ticks: float
    p99_commit_ticks: float
    proposals: int
    retries: int


def consensus_sweep(
    node_counts: Sequence[int],
    seed: int,
    proposals_per_point: int,
    latency_range: tuple[int, int] = (1, 3),
    drop_probability: float = 0.0,
    faults: Sequence[Fault] = (),
    raft_config: RaftConfig | None = None,
    timeout_ticks: int = 1000,
    max_attempts: int = 20,
    monitors: list | None = None,
) -> list[SweepRow]:
    """Ticks from propose to commit for each cluster size, under identical network settings."""
    rows = []
    for n in node_counts:
        if n < 1 or n % 2 == 0:
            raise InvalidArgument(f"node counts must be odd and >= 1, got {n}")
        cluster = Cluster(n, seed, latency_range, drop_probability, faults, raft_config)
        cluster.wait_for_leader(10_000)
        samples, retries, roots = [], 0, []
        for i in range(proposals_per_point):
            root = hashlib.sha256(f"sweep/{seed}/{n}/{i}".encode()).digest()
            roots.append(root)
            begin = cluster.now
            for attempt in range(max_attempts):
                try:
                    cluster.propose_root(root, tag=f"p{i}", timeout_ticks=timeout_ticks)
                    break
                except Unavailable:
                    retries += 1
            else:
                raise Unavailable(f"proposal {i} on {n} nodes never committed")
            samples.append(cluster.now - begin)
            cluster.tick()
        # let every scheduled fault expire, then every committed root must be on every node
        last_fault = max((f.end_tick for f in faults), default=0)
        if cluster.now < last_fault:
            cluster.run(last_fault - cluster.now)
        cluster.settle()
        cluster.monitor.check_durability(cluster, roots)
        if monitors is not None:
            monitors.append(cluster.monitor)
        arr = np.asarray(samples, dtype=float)
        rows.append(SweepRow(n, float(arr.mean()), float(np.percentile(arr, 99)), len(samples), retries))
    return rows
