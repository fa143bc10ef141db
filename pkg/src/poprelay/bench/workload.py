"""Seeded synthetic workloads: one list of unique KV pairs per cycle."""

from __future__ import annotations

import numpy as np

from ..errors import InvalidArgument
from ..merkle import KvPair

KEY_BYTES = 16
VALUE_BYTES = 16


def pairs_per_cycle(lam: float, T_c: float) -> int:
    """n = round(lambda * T_c)."""
    return int(round(lam * T_c))


def generate_workload(lam: float, T_c: float, m: int, seed: int) -> list[list[KvPair]]:
    """``m`` cycles of ``round(lam*T_c)`` pairs; keys are unique across the whole workload.

    The stream is drawn from one generator in cycle order, so the same seed
    always reproduces the same pairs.
    """
    if not (lam > 0 and T_c > 0 and m > 0):
        raise InvalidArgument("lambda, T_c and m must all be positive")
    n = pairs_per_cycle(lam, T_c)
    rng = np.random.default_rng(seed)
    seen: set[bytes] = set()
    cycles = []
    for _ in range(m):
        cycle = []
        while len(cycle) < n:
            key = rng.bytes(KEY_BYTES)
            value = rng.bytes(VALUE_BYTES)
            if key in seen:
                continue
            seen.add(key)
            cycle.append(KvPair(key, value))
        cycles.append(cycle)
    return cycles


def fixed_size_workload(sizes, seed: int) -> list[list[KvPair]]:
    """Workload whose cycle ``i`` holds ``sizes[i]`` pairs (for n-sweeps)."""
    rng = np.random.default_rng(seed)
    seen: set[bytes] = set()
    cycles = []
    for size in sizes:
        if size < 0:
            raise InvalidArgument("cycle sizes must be non-negative")
        cycle = []
        while len(cycle) < size:
            key = rng.bytes(KEY_BYTES)
            if key in seen:
                continue
            seen.add(key)
            cycle.append(KvPair(key, rng.bytes(VALUE_BYTES)))
        cycles.append(cycle)
    return cycles
