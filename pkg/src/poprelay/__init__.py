"""Merkle-trie relay with Proofs of Provenance, a Raft root ledger and a benchmark harness."""

from .errors import PopRelayError
from .merkle import (
    DEPTH,
    ExclusionProof,
    InclusionProof,
    KvPair,
    SparseTrie,
    default_hash,
    key_digest,
    leaf_hash,
    verify_proof,
)
from .relay import (
    CycleRoot,
    ProofOfProvenance,
    Relay,
    RelayConfig,
    Strategy,
    hash_cost_of_pop,
    relay_latency,
    verify_pop,
)

__version__ = "0.1.0"
