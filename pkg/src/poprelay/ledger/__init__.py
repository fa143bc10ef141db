"""Permissioned root-only ledger: Raft over Merkle roots, one block per root."""

from .blocks import (
    GENESIS,
    Block,
    BlockStore,
    canonical_bytes,
    first_invalid_block,
    handle_query,
    query_root,
    verify_chain,
)
from .raft import LogEntry, RaftConfig, RaftNode, Role
from .sim import (
    Cluster,
    CommitResult,
    Event,
    Fault,
    SafetyMonitor,
    SimNet,
    SweepRow,
    consensus_sweep,
)

__all__ = [
    "GENESIS",
    "Block",
    "BlockStore",
    "Cluster",
    "CommitResult",
    "Event",
    "Fault",
    "LogEntry",
    "RaftConfig",
    "RaftNode",
    "Role",
    "SafetyMonitor",
    "SimNet",
    "SweepRow",
    "canonical_bytes",
    "consensus_sweep",
    "first_invalid_block",
    "handle_query",
    "query_root",
    "verify_chain",
]
