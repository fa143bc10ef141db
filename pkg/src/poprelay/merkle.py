"""Fixed-depth sparse binary Merkle trie with inclusion and exclusion proofs.

Keys are addressed by ``SHA-256(key)``; the most significant bit of the digest
selects the child directly below the root (0 = left).  Hashes are domain
separated::

    leaf      H(0x00 || key || value)
    internal  H(0x01 || left || right)
    empty     H(0x02)            (height 0, then folded upward)

Only nodes whose subtree holds two or more leaves are stored.  A subtree with
a single leaf is represented by a short cached chain of that leaf's folded
hashes, which keeps memory roughly linear in the number of leaves while an
insert still costs exactly ``depth + 1`` hash evaluations.
"""

from __future__ import annotations

import hashlib
from bisect import bisect_left, insort
from dataclasses import dataclass
from typing import Iterable, Union

from .errors import (
    DuplicateKeyConflict,
    InvalidArgument,
    KeyPresent,
    MalformedProof,
    NotFound,
)

DEPTH = 256
DIGEST_SIZE = 32

LEAF_PREFIX = b"\x00"
NODE_PREFIX = b"\x01"
EMPTY_PREFIX = b"\x02"

# Heights below depth - CHAIN_SPAN are never cached for single-leaf subtrees;
# reaching them needs a shared key prefix longer than CHAIN_SPAN bits.
CHAIN_SPAN = 64

_sha256 = hashlib.sha256


def key_digest(key: bytes) -> bytes:
    if not isinstance(key, (bytes, bytearray)):
        raise InvalidArgument(f"key must be bytes, got {type(key).__name__}")
    if not key:
        raise InvalidArgument("key must be non-empty")
    return _sha256(key).digest()


def _build_defaults() -> list[bytes]:
    out = [_sha256(EMPTY_PREFIX).digest()]
    for _ in range(DEPTH):
        prev = out[-1]
        out.append(_sha256(NODE_PREFIX + prev + prev).digest())
    return out


_DEFAULTS = _build_defaults()


def default_hash(level: int) -> bytes:
    """Hash of an empty subtree of the given height (0 = empty leaf)."""
    if not isinstance(level, int) or not 0 <= level <= DEPTH:
        raise InvalidArgument(f"level must be in [0, {DEPTH}], got {level!r}")
    return _DEFAULTS[level]


def leaf_hash(key: bytes, value: bytes) -> bytes:
    return _sha256(LEAF_PREFIX + key + value).digest()


def key_path(key: bytes, depth: int = DEPTH) -> int:
    """Top ``depth`` bits of the key digest as an integer."""
    return int.from_bytes(key_digest(key), "big") >> (DEPTH - depth)


@dataclass(frozen=True)
class KvPair:
    key: bytes
    value: bytes

    def __post_init__(self):
        if not self.key:
            raise InvalidArgument("KvPair.key must be non-empty")
        if not self.value:
            raise InvalidArgument("KvPair.value must be non-empty")


@dataclass(frozen=True)
class InclusionProof:
    key: bytes
    value: bytes
    siblings: tuple[bytes, ...]
    root: bytes

    kind = "inclusion"


@dataclass(frozen=True)
class ExclusionProof:
    key: bytes
    siblings: tuple[bytes, ...]
    root: bytes

    kind = "exclusion"


Proof = Union[InclusionProof, ExclusionProof]


class SparseTrie:
    """Sparse Merkle trie over ``depth`` bits of the hashed key.

    Single writer; concurrent readers are fine as long as no insert runs.
    ``hash_count`` accumulates every hash evaluation performed by the trie and
    ``last_insert_hashes`` holds the cost of the most recent insert.
    """

    def __init__(self, depth: int = DEPTH, pairs: Iterable[KvPair] = ()):
        if not 1 <= depth <= DEPTH:
            raise InvalidArgument(f"depth must be in [1, {DEPTH}]")
        self.depth = depth
        self._defaults = _DEFAULTS
        self._chain_lo = max(0, depth - CHAIN_SPAN)
        # path -> (key, value, leaf hash)
        self._leaves: dict[int, tuple[bytes, bytes, bytes]] = {}
        self._paths: list[int] = []
        # path -> folded hashes of the single-leaf subtree, heights [chain_lo, hi)
        self._chains: dict[int, bytes] = {}
        # height -> {prefix: hash} for subtrees holding two or more leaves
        self._nodes: list[dict[int, bytes]] = [{} for _ in range(depth + 1)]
        self._root = self._defaults[depth]
        self.hash_count = 0
        self.last_insert_hashes = 0
        for kv in pairs:
            self.insert(kv.key, kv.value)

    def __len__(self) -> int:
        return len(self._leaves)

    def __contains__(self, key: bytes) -> bool:
        leaf = self._leaves.get(key_path(key, self.depth))
        return leaf is not None and leaf[0] == key

    @property
    def root(self) -> bytes:
        return self._root

    def get(self, key: bytes) -> bytes | None:
        leaf = self._leaves.get(key_path(key, self.depth))
        if leaf is None or leaf[0] != key:
            return None
        return leaf[1]

    def items(self) -> list[KvPair]:
        """Stored pairs in path order."""
        return [KvPair(self._leaves[p][0], self._leaves[p][1]) for p in self._paths]

    # -- internals -------------------------------------------------------

    def _split_height(self, path: int, exclude_self: bool = False) -> int:
        """Lowest height whose node on ``path`` contains a leaf other than ``path``.

        Returns ``depth + 1`` when no other leaf exists.
        """
        paths = self._paths
        i = bisect_left(paths, path)
        best = self.depth + 1
        if i > 0:
            best = (paths[i - 1] ^ path).bit_length()
        j = i + 1 if (exclude_self and i < len(paths) and paths[i] == path) else i
        if j < len(paths):
            best = min(best, (paths[j] ^ path).bit_length())
        return best

    def _chain_hash(self, path: int, height: int) -> bytes:
        lo = self._chain_lo
        chain = self._chains[path]
        if height >= lo and (height - lo) * DIGEST_SIZE < len(chain):
            off = (height - lo) * DIGEST_SIZE
            return chain[off:off + DIGEST_SIZE]
        # below the cached window: fold the leaf up against empty siblings
        cur = self._leaves[path][2]
        defaults = self._defaults
        for h in range(height):
            if (path >> h) & 1:
                cur = _sha256(NODE_PREFIX + defaults[h] + cur).digest()
            else:
                cur = _sha256(NODE_PREFIX + cur + defaults[h]).digest()
        self.hash_count += height
        return cur

    def _node(self, height: int, prefix: int) -> bytes:
        if height == 0:
            leaf = self._leaves.get(prefix)
            return leaf[2] if leaf is not None else self._defaults[0]
        stored = self._nodes[height].get(prefix)
        if stored is not None:
            return stored
        lo = prefix << height
        paths = self._paths
        i = bisect_left(paths, lo)
        if i == len(paths) or paths[i] >= lo + (1 << height):
            return self._defaults[height]
        # subtrees with 2+ leaves are always stored, so this one holds one leaf
        return self._chain_hash(paths[i], height)

    def _siblings(self, path: int, split: int) -> tuple[bytes, ...]:
        defaults = self._defaults
        out = []
        for h in range(self.depth):
            if h + 1 < split:
                out.append(defaults[h])
            else:
                out.append(self._node(h, (path >> h) ^ 1))
        return tuple(out)

    # -- mutation --------------------------------------------------------

    def insert(self, key: bytes, value: bytes) -> bool:
        """Insert a pair; returns False when the identical pair was already present."""
        if not value:
            raise InvalidArgument("value must be non-empty")
        path = key_path(key, self.depth)
        existing = self._leaves.get(path)
        if existing is not None:
            if existing[0] != key:
                raise DuplicateKeyConflict(
                    f"path collision between keys {existing[0].hex()} and {key.hex()}"
                )
            if existing[1] != value:
                raise DuplicateKeyConflict(f"key {key.hex()} already bound to a different value")
            self.last_insert_hashes = 0
            return False

        cur = leaf_hash(key, value)
        self._leaves[path] = (key, value, cur)
        insort(self._paths, path)
        split = self._split_height(path, exclude_self=True)

        defaults = self._defaults
        nodes = self._nodes
        lo = self._chain_lo
        chain = [cur] if lo == 0 else []
        for h in range(self.depth):
            if h + 1 < split:
                sib = defaults[h]
            else:
                sib = self._node(h, (path >> h) ^ 1)
            if (path >> h) & 1:
                cur = _sha256(NODE_PREFIX + sib + cur).digest()
            else:
                cur = _sha256(NODE_PREFIX + cur + sib).digest()
            if h + 1 < split:
                if h + 1 >= lo:
                    chain.append(cur)
            else:
                nodes[h + 1][path >> (h + 1)] = cur
        self._chains[path] = b"".join(chain)
        self._root = cur
        self.last_insert_hashes = self.depth + 1
        self.hash_count += self.depth + 1
        return True

    def insert_pair(self, kv: KvPair) -> bool:
        return self.insert(kv.key, kv.value)

    # -- proofs ----------------------------------------------------------

    def prove_inclusion(self, key: bytes) -> InclusionProof:
        path = key_path(key, self.depth)
        leaf = self._leaves.get(path)
        if leaf is None or leaf[0] != key:
            raise NotFound(f"key {key.hex()} not in trie")
        split = self._split_height(path, exclude_self=True)
        return InclusionProof(key, leaf[1], self._siblings(path, split), self._root)

    def prove_exclusion(self, key: bytes) -> ExclusionProof:
        path = key_path(key, self.depth)
        leaf = self._leaves.get(path)
        if leaf is not None:
            if leaf[0] == key:
                raise KeyPresent(f"key {key.hex()} is present; exclusion impossible")
            raise KeyPresent(f"path of key {key.hex()} is occupied by another key")
        split = self._split_height(path)
        return ExclusionProof(key, self._siblings(path, split), self._root)

    # -- audit -----------------------------------------------------------

    def recompute_root(self) -> bytes:
        """Rebuild the root from the leaf set alone, ignoring all caches."""
        leaves = self._leaves
        defaults = self._defaults

        def build(height: int, items: list[int]) -> bytes:
            if not items:
                return defaults[height]
            if height == 0:
                return leaves[items[0]][2]
            bit = 1 << (height - 1)
            left = [p for p in items if not p & bit]
            right = [p for p in items if p & bit]
            return _sha256(
                NODE_PREFIX + build(height - 1, left) + build(height - 1, right)
            ).digest()

        return build(self.depth, sorted(leaves))


def _fold(start: bytes, path: int, siblings) -> bytes:
    cur = start
    for h, sib in enumerate(siblings):
        if (path >> h) & 1:
            cur = _sha256(NODE_PREFIX + sib + cur).digest()
        else:
            cur = _sha256(NODE_PREFIX + cur + sib).digest()
    return cur


def verify_proof(root: bytes, proof: Proof, depth: int = DEPTH) -> bool:
    """Check ``proof`` against ``root`` without access to any trie."""
    if len(proof.siblings) != depth:
        raise MalformedProof(f"expected {depth} siblings, got {len(proof.siblings)}")
    if any(len(s) != DIGEST_SIZE for s in proof.siblings):
        raise MalformedProof("sibling digests must be 32 bytes")
    try:
        path = key_path(proof.key, depth)
    except InvalidArgument as exc:
        raise MalformedProof(str(exc)) from exc
    if isinstance(proof, InclusionProof):
        start = leaf_hash(proof.key, proof.value)
    elif isinstance(proof, ExclusionProof):
        start = _DEFAULTS[0]
    else:
        raise MalformedProof(f"unknown proof type {type(proof).__name__}")
    return _fold(start, path, proof.siblings) == root


def proof_to_dict(proof: Proof) -> dict:
    return {
        "kind": proof.kind,
        "key": proof.key.hex(),
        "value": proof.value.hex() if isinstance(proof, InclusionProof) else None,
        "siblings": [s.hex() for s in proof.siblings],
        "root": proof.root.hex(),
    }


def proof_from_dict(data: dict) -> Proof:
    try:
        kind = data["kind"]
        key = bytes.fromhex(data["key"])
        siblings = tuple(bytes.fromhex(s) for s in data["siblings"])
        root = bytes.fromhex(data["root"])
        if kind == "inclusion":
            return InclusionProof(key, bytes.fromhex(data["value"]), siblings, root)
        if kind == "exclusion":
            return ExclusionProof(key, siblings, root)
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedProof(f"cannot decode proof: {exc}") from exc
    raise MalformedProof(f"unknown proof kind {kind!r}")
