"""Root-only blocks and the append-only JSON-lines block store."""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

ZERO_DIGEST = bytes(32)


def canonical_bytes(index: int, prev_hash: bytes, timestamp: int, merkle_root: bytes) -> bytes:
    """index (u64 BE) || prev_hash || timestamp (u64 BE) || merkle_root"""
    return struct.pack(">Q", index) + prev_hash + struct.pack(">Q", timestamp) + merkle_root


@dataclass(frozen=True)
class Block:
    index: int
    prev_hash: bytes
    timestamp: int
    merkle_root: bytes
    block_id: bytes

    @classmethod
    def make(cls, index: int, prev_hash: bytes, timestamp: int, merkle_root: bytes) -> "Block":
        digest = hashlib.sha256(canonical_bytes(index, prev_hash, timestamp, merkle_root)).digest()
        return cls(index, prev_hash, timestamp, merkle_root, digest)

    def expected_id(self) -> bytes:
        return hashlib.sha256(
            canonical_bytes(self.index, self.prev_hash, self.timestamp, self.merkle_root)
        ).digest()

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "prev_hash": self.prev_hash.hex(),
            "timestamp": self.timestamp,
            "merkle_root": self.merkle_root.hex(),
            "block_id": self.block_id.hex(),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Block":
        return cls(
            int(data["index"]),
            bytes.fromhex(data["prev_hash"]),
            int(data["timestamp"]),
            bytes.fromhex(data["merkle_root"]),
            bytes.fromhex(data["block_id"]),
        )


GENESIS = Block.make(0, ZERO_DIGEST, 0, ZERO_DIGEST)


class BlockStore:
    """Genesis plus one block per committed root, optionally mirrored to a file."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self.blocks: list[Block] = [GENESIS]
        self._by_root: dict[bytes, int] = {}
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text(json.dumps(GENESIS.to_dict()) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "BlockStore":
        store = cls()
        store.path = Path(path)
        with open(path) as fh:
            blocks = [Block.from_dict(json.loads(line)) for line in fh if line.strip()]
        store.blocks = blocks
        for b in blocks[1:]:
            store._by_root.setdefault(b.merkle_root, b.index)
        return store

    def __len__(self) -> int:
        return len(self.blocks)

    def __iter__(self):
        return iter(self.blocks)

    def __getitem__(self, i):
        return self.blocks[i]

    @property
    def head(self) -> Block:
        return self.blocks[-1]

    @property
    def root_blocks(self) -> list[Block]:
        return self.blocks[1:]

    def append_root(self, merkle_root: bytes, timestamp: int) -> Block:
        head = self.head
        block = Block.make(head.index + 1, head.block_id, timestamp, merkle_root)
        if self.path is not None:
            with self.path.open("a") as fh:
                fh.write(json.dumps(block.to_dict()) + "\n")
        self.blocks.append(block)
        self._by_root.setdefault(merkle_root, block.index)
        return block

    def find_root(self, merkle_root: bytes) -> int | None:
        return self._by_root.get(merkle_root)


def first_invalid_block(blocks: Sequence[Block] | BlockStore) -> int | None:
    """Index of the first block breaking the chain invariants, or None."""
    prev = None
    for i, b in enumerate(blocks):
        if b.index != i:
            return i
        if i == 0:
            if b.prev_hash != ZERO_DIGEST:
                return 0
        elif b.prev_hash != prev.block_id:
            return i
        if b.expected_id() != b.block_id:
            return i
        prev = b
    return None


def verify_chain(blocks: Sequence[Block] | BlockStore) -> bool:
    return first_invalid_block(blocks) is None


def query_root(store: BlockStore, merkle_root: bytes) -> dict:
    index = store.find_root(merkle_root)
    return {"found": index is not None, "block_index": index}


def handle_query(store: BlockStore, request: Mapping) -> dict:
    """Query protocol: ``{"root": hex}`` -> ``{"found": bool, "block_index": int | None}``."""
    try:
        root = bytes.fromhex(request["root"])
    except (KeyError, TypeError, ValueError) as exc:
        return {"error": "BadRequest", "message": str(exc)}
    return query_root(store, root)


