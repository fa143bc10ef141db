"""Tukey-fence outlier filtering."""

from __future__ import annotations

import logging
from typing import Sequence, TypeVar

import numpy as np

log = logging.getLogger(__name__)

T = TypeVar("T")


def iqr_bounds(values: Sequence[float], k: float = 1.5) -> tuple[float, float]:
    """(Q1 - k*IQR, Q3 + k*IQR) with linearly interpolated quartiles."""
    q1, q3 = np.percentile(np.asarray(values, dtype=float), [25, 75], method="linear")
    iqr = q3 - q1
    return float(q1 - k * iqr), float(q3 + k * iqr)


def iqr_mask(values: Sequence[float], k: float = 1.5) -> np.ndarray:
    """True for values that survive the fences."""
    arr = np.asarray(values, dtype=float)
    if arr.size < 4:
        log.warning("IQR filter needs at least 4 samples, got %d; passing through", arr.size)
        return np.ones(arr.size, dtype=bool)
    lo, hi = iqr_bounds(arr, k)
    return (arr >= lo) & (arr <= hi)


def iqr_filter(samples: Sequence[T], key=None, k: float = 1.5) -> list[T]:
    """Drop samples whose value lies outside the IQR fences.

    ``key`` extracts the value from each sample (default: the sample itself,
    or its ``y_ms`` attribute when present).  This is a single pass; the
    fences are not recomputed on the survivors.
    """
    if key is None:
        key = (lambda s: s.y_ms) if samples and hasattr(samples[0], "y_ms") else (lambda s: s)
    mask = iqr_mask([key(s) for s in samples], k)
    return [s for s, keep in zip(samples, mask) if keep]


def iqr_filter_grouped(samples: Sequence[T], group, key=None, k: float = 1.5) -> list[T]:
    """Apply :func:`iqr_filter` within each group (e.g. one delta_C cluster).

    Fences computed over clusters with very different typical values would
    discard whole clusters, so each group gets its own quartiles.  Output
    keeps the input order.
    """
    buckets: dict = {}
    for i, s in enumerate(samples):
        buckets.setdefault(group(s), []).append((i, s))
    keep: set[int] = set()
    for members in buckets.values():
        kept = iqr_filter([s for _, s in members], key=key, k=k)
        ids = {id(s) for s in kept}
        keep.update(i for i, s in members if id(s) in ids)
    return [s for i, s in enumerate(samples) if i in keep]
