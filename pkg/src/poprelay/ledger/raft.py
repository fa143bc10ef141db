"""Raft consensus over a log of Merkle roots.

Each :class:`RaftNode` is a single-threaded, message-driven state machine:
``step`` consumes one message and ``on_tick`` handles timers, both returning
the outbound messages.  Transport is someone else's job (see ``sim``).

Log indices are 1-based.  A new leader appends a no-op entry for its term so
that entries from earlier terms can be committed; no-ops never become blocks.
The replicated log's latest applied root plays the part of the atomic register.
"""

from __future__ import annotations

import enum
import logging
import random
from dataclasses import dataclass, field

from .blocks import Block, BlockStore

log = logging.getLogger(__name__)


class Role(enum.Enum):
    FOLLOWER = "follower"
    CANDIDATE = "candidate"
    LEADER = "leader"


@dataclass(frozen=True)
class RaftConfig:
    election_timeout: tuple[int, int] = (10, 20)  # ticks, [lo, hi)
    heartbeat_interval: int = 3
    max_batch: int = 64
    max_backoff_exp: int = 6


@dataclass(frozen=True)
class LogEntry:
    term: int
    root: bytes | None  # None marks a leader no-op
    tag: str | None = None
    timestamp: int = 0


@dataclass(frozen=True)
class RequestVote:
    src: int
    dst: int
    term: int
    last_log_index: int
    last_log_term: int


@dataclass(frozen=True)
class RequestVoteReply:
    src: int
    dst: int
    term: int
    granted: bool


@dataclass(frozen=True)
class AppendEntries:
    src: int
    dst: int
    term: int
    prev_log_index: int
    prev_log_term: int
    entries: tuple[LogEntry, ...]
    leader_commit: int


@dataclass(frozen=True)
class AppendEntriesReply:
    src: int
    dst: int
    term: int
    success: bool
    match_index: int


Message = RequestVote | RequestVoteReply | AppendEntries | AppendEntriesReply


@dataclass
class RaftNode:
    id: int
    peers: list[int]
    rng: random.Random
    config: RaftConfig = field(default_factory=RaftConfig)
    store: BlockStore = field(default_factory=BlockStore)

    role: Role = Role.FOLLOWER
    current_term: int = 0
    voted_for: int | None = None
    log: list[LogEntry] = field(default_factory=list)
    commit_index: int = 0
    last_applied: int = 0
    leader_id: int | None = None
    election_deadline: int = 0
    election_rounds: int = 0
    votes: set[int] = field(default_factory=set)
    next_index: dict[int, int] = field(default_factory=dict)
    match_index: dict[int, int] = field(default_factory=dict)
    heartbeat_due: int = 0

    def __post_init__(self):
        self.election_deadline = self._draw_deadline(0)

    # -- helpers ---------------------------------------------------------

    @property
    def cluster_size(self) -> int:
        return len(self.peers) + 1

    @property
    def majority(self) -> int:
        return self.cluster_size // 2 + 1

    @property
    def last_log_index(self) -> int:
        return len(self.log)

    @property
    def last_log_term(self) -> int:
        return self.log[-1].term if self.log else 0

    def term_at(self, index: int) -> int:
        return self.log[index - 1].term if index > 0 else 0

    def _draw_deadline(self, now: int) -> int:
        lo, hi = self.config.election_timeout
        # consecutive failed rounds widen the window so tied candidates separate
        span = max(hi - lo, 1) * (2 ** min(self.election_rounds, self.config.max_backoff_exp))
        return now + lo + self.rng.randrange(span)

    def _become_follower(self, term: int, now: int, leader: int | None = None):
        was_follower = self.role is Role.FOLLOWER
        if term > self.current_term:
            self.current_term = term
            self.voted_for = None
            self.leader_id = None
        self.role = Role.FOLLOWER
        self.votes = set()
        if leader is not None:
            self.leader_id = leader
            self.election_rounds = 0
        # a higher-term vote request alone must not postpone our own timeout
        if leader is not None or not was_follower:
            self.election_deadline = self._draw_deadline(now)

    def _append_entries_for(self, peer: int) -> AppendEntries:
        nxt = self.next_index.get(peer, self.last_log_index + 1)
        prev = nxt - 1
        entries = tuple(self.log[prev:prev + self.config.max_batch])
        return AppendEntries(
            self.id, peer, self.current_term, prev, self.term_at(prev), entries, self.commit_index
        )

    def _broadcast_append(self, now: int) -> list[Message]:
        self.heartbeat_due = now + self.config.heartbeat_interval
        return [self._append_entries_for(p) for p in self.peers]

    def _become_leader(self, now: int) -> list[Message]:
        self.role = Role.LEADER
        self.leader_id = self.id
        self.election_rounds = 0
        self.votes = set()
        self.next_index = {p: self.last_log_index + 1 for p in self.peers}
        self.match_index = {p: 0 for p in self.peers}
        self.log.append(LogEntry(self.current_term, None, None, now))
        self._advance_commit()
        return self._broadcast_append(now)

    def _start_election(self, now: int) -> list[Message]:
        self.current_term += 1
        self.role = Role.CANDIDATE
        self.voted_for = self.id
        self.votes = {self.id}
        self.leader_id = None
        self.election_deadline = self._draw_deadline(now)
        self.election_rounds += 1
        if len(self.votes) >= self.majority:
            return self._become_leader(now)
        return [
            RequestVote(self.id, p, self.current_term, self.last_log_index, self.last_log_term)
            for p in self.peers
        ]

    def _advance_commit(self):
        for n in range(self.last_log_index, self.commit_index, -1):
            if self.log[n - 1].term != self.current_term:
                break
            acks = 1 + sum(1 for p in self.peers if self.match_index.get(p, 0) >= n)
            if acks >= self.majority:
                self.commit_index = n
                break

    # -- timers ----------------------------------------------------------

    def on_tick(self, now: int) -> list[Message]:
        if self.role is Role.LEADER:
            if now >= self.heartbeat_due:
                return self._broadcast_append(now)
            return []
        if now >= self.election_deadline:
            return self._start_election(now)
        return []

    # -- client requests -------------------------------------------------

    def find_tag(self, tag: str, root: bytes) -> int | None:
        for i in range(len(self.log), 0, -1):
            e = self.log[i - 1]
            if e.tag == tag and e.root == root:
                return i
        return None

    def propose(self, root: bytes, tag: str | None, now: int) -> tuple[int, list[Message]]:
        """Append ``root`` (leader only); returns its log index and messages to send.

        A (tag, root) pair already in the log is not appended again.
        """
        if self.role is not Role.LEADER:
            raise RuntimeError(f"node {self.id} is not the leader")
        if tag is not None:
            existing = self.find_tag(tag, root)
            if existing is not None:
                return existing, []
        self.log.append(LogEntry(self.current_term, root, tag, now))
        self._advance_commit()
        return self.last_log_index, self._broadcast_append(now)

    def root_ordinal(self, index: int) -> int:
        """Position of the root entry at ``index`` among root entries (= block index)."""
        return sum(1 for e in self.log[:index] if e.root is not None)

    # -- messages --------------------------------------------------------

    def step(self, msg: Message, now: int) -> list[Message]:
        if msg.term > self.current_term:
            self._become_follower(msg.term, now)
        if isinstance(msg, RequestVote):
            return self._on_request_vote(msg, now)
        if isinstance(msg, RequestVoteReply):
            return self._on_vote_reply(msg, now)
        if isinstance(msg, AppendEntries):
            return self._on_append(msg, now)
        if isinstance(msg, AppendEntriesReply):
            return self._on_append_reply(msg, now)
        raise TypeError(f"unknown message {msg!r}")

    def _on_request_vote(self, msg: RequestVote, now: int) -> list[Message]:
        granted = False
        if msg.term == self.current_term and self.voted_for in (None, msg.src):
            up_to_date = (msg.last_log_term, msg.last_log_index) >= (
                self.last_log_term,
                self.last_log_index,
            )
            if up_to_date:
                granted = True
                self.voted_for = msg.src
                self.election_deadline = self._draw_deadline(now)
        return [RequestVoteReply(self.id, msg.src, self.current_term, granted)]

    def _on_vote_reply(self, msg: RequestVoteReply, now: int) -> list[Message]:
        if self.role is not Role.CANDIDATE or msg.term != self.current_term or not msg.granted:
            return []
        self.votes.add(msg.src)
        if len(self.votes) >= self.majority:
            return self._become_leader(now)
        return []

    def _on_append(self, msg: AppendEntries, now: int) -> list[Message]:
        if msg.term < self.current_term:
            return [AppendEntriesReply(self.id, msg.src, self.current_term, False, 0)]
        self._become_follower(msg.term, now, leader=msg.src)
        if msg.prev_log_index > self.last_log_index or self.term_at(msg.prev_log_index) != msg.prev_log_term:
            return [AppendEntriesReply(self.id, msg.src, self.current_term, False, 0)]
        index = msg.prev_log_index
        for entry in msg.entries:
            index += 1
            if index <= self.last_log_index:
                if self.log[index - 1].term == entry.term:
                    continue
                if index <= self.commit_index:
                    raise AssertionError(f"node {self.id}: leader tried to overwrite committed index {index}")
                del self.log[index - 1:]
            self.log.append(entry)
        match = msg.prev_log_index + len(msg.entries)
        if msg.leader_commit > self.commit_index:
            self.commit_index = max(self.commit_index, min(msg.leader_commit, match))
        return [AppendEntriesReply(self.id, msg.src, self.current_term, True, match)]

    def _on_append_reply(self, msg: AppendEntriesReply, now: int) -> list[Message]:
        if self.role is not Role.LEADER or msg.term != self.current_term:
            return []
        if msg.success:
            if msg.match_index > self.match_index.get(msg.src, 0):
                self.match_index[msg.src] = msg.match_index
            self.next_index[msg.src] = self.match_index[msg.src] + 1
            self._advance_commit()
            if self.next_index[msg.src] <= self.last_log_index:
                return [self._append_entries_for(msg.src)]
            return []
        self.next_index[msg.src] = max(1, self.next_index.get(msg.src, 1) - 1)
        return [self._append_entries_for(msg.src)]

    # -- state machine ---------------------------------------------------

    def apply_committed(self) -> list[Block]:
        """Turn newly committed roots into blocks; no-ops advance the index only.

        A failed store write leaves ``last_applied`` untouched so the call can
        simply be repeated.
        """
        out = []
        while self.last_applied < self.commit_index:
            entry = self.log[self.last_applied]
            if entry.root is not None:
                out.append(self.store.append_root(entry.root, entry.timestamp))
            self.last_applied += 1
        return out

    def crash_reset(self, now: int):
        """Drop volatile state as a restart would; term, vote, log and blocks survive."""
        self.role = Role.FOLLOWER
        self.leader_id = None
        self.votes = set()
        self.next_index = {}
        self.match_index = {}
        self.commit_index = self.last_applied
        self.election_rounds = 0
        self.election_deadline = self._draw_deadline(now)
