"""Scalar field snapshots, lazy point evaluation, and rank partitioning.

A :class:`FieldSnapshot` holds one timestep of values either eagerly (a
float64 array) or lazily through a :class:`PointEvaluator` that computes
points on demand and counts how many it computed. Sampling helpers draw
indices with replacement from counter-based hashes so results depend only
on the seed.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np

from . import _rng
from .errors import InvalidArgumentError, InvalidPartitionError

logger = logging.getLogger(__name__)

_GLOBAL_STREAM = 0x61
_RANK_STREAM = 0x72


class PointEvaluator:
    """Deterministic, possibly expensive point function with a call counter.

    ``func`` maps an int64 index array to a float64 value array and must be
    pure. Every evaluated index adds one to :attr:`eval_count`.
    """

    def __init__(self, func: Callable[[np.ndarray], np.ndarray]):
        self._func = func
        self._count = 0
        self._lock = threading.Lock()

    @property
    def eval_count(self) -> int:
        return self._count

    def eval(self, index: int) -> float:
        return float(self.eval_many(np.array([index], dtype=np.int64))[0])

    def eval_many(self, indices: np.ndarray) -> np.ndarray:
        indices = np.asarray(indices, dtype=np.int64)
        values = np.asarray(self._func(indices), dtype=np.float64)
        with self._lock:
            self._count += int(indices.size)
        return values


@dataclass(frozen=True, eq=False)
class PartitionedField:
    """Contiguous rank extents covering ``[0, size)``.

    ``bounds`` has ``ranks + 1`` entries; rank ``r`` owns
    ``[bounds[r], bounds[r + 1])``.
    """

    bounds: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bounds, dtype=np.int64)
        if b.ndim != 1 or b.size < 2:
            raise InvalidPartitionError("need at least one rank")
        if b[0] != 0:
            raise InvalidPartitionError("first extent must start at 0")
        sizes = np.diff(b)
        if np.any(sizes <= 0):
            empty = int(np.flatnonzero(sizes <= 0)[0])
            raise InvalidPartitionError(f"rank {empty} is empty")
        object.__setattr__(self, "bounds", b)
        if sizes.max() - sizes.min() > 1:
            logger.warning(
                "rank sizes range from %d to %d; per-rank sampling is stratified",
                sizes.min(),
                sizes.max(),
            )

    @classmethod
    def even(cls, size: int, ranks: int) -> "PartitionedField":
        if ranks < 1:
            raise InvalidArgumentError("ranks must be >= 1")
        if size < ranks:
            raise InvalidPartitionError(f"{ranks} ranks cannot split {size} points")
        base, extra = divmod(size, ranks)
        sizes = np.full(ranks, base, dtype=np.int64)
        sizes[:extra] += 1
        return cls(np.concatenate([[0], np.cumsum(sizes)]))

    @classmethod
    def from_extents(cls, extents: Sequence[tuple[int, int]]) -> "PartitionedField":
        """Build from explicit ``(start, stop)`` pairs, which must tile ``[0, N)``."""
        bounds = [0]
        for start, stop in extents:
            if start != bounds[-1]:
                raise InvalidPartitionError(
                    f"extent ({start}, {stop}) leaves a gap or overlaps at {bounds[-1]}"
                )
            bounds.append(stop)
        return cls(np.asarray(bounds, dtype=np.int64))

    @property
    def ranks(self) -> int:
        return self.bounds.size - 1

    @property
    def size(self) -> int:
        return int(self.bounds[-1])

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(self.bounds)

    def extent(self, rank: int) -> tuple[int, int]:
        return int(self.bounds[rank]), int(self.bounds[rank + 1])


@dataclass(frozen=True, eq=False)
class FieldSnapshot:
    """One timestep of a scalar field over ``size`` grid points."""

    step: int
    size: int
    values: np.ndarray | None = None
    evaluator: PointEvaluator | None = dc_field(default=None, compare=False)
    partition: PartitionedField | None = dc_field(default=None, compare=False)

    def __post_init__(self):
        if (self.values is None) == (self.evaluator is None):
            raise InvalidArgumentError("exactly one of values or evaluator is required")
        if self.size < 1:
            raise InvalidArgumentError("a field needs at least one point")
        if self.values is not None:
            v = np.asarray(self.values, dtype=np.float64).view()
            if v.ndim != 1 or v.size != self.size:
                raise InvalidArgumentError(f"expected {self.size} values, got shape {v.shape}")
            if np.isnan(v).any():
                raise InvalidArgumentError("field values contain NaN")
            v.flags.writeable = False
            object.__setattr__(self, "values", v)
        if self.partition is not None and self.partition.size != self.size:
            raise InvalidPartitionError(
                f"partition covers {self.partition.size} points, field has {self.size}"
            )

    @classmethod
    def from_array(cls, values, step: int = 0, ranks: int | None = None) -> "FieldSnapshot":
        v = np.asarray(values, dtype=np.float64).ravel()
        part = PartitionedField.even(v.size, ranks) if ranks else None
        return cls(step=step, size=v.size, values=v, partition=part)

    @classmethod
    def lazy(
        cls,
        func: Callable[[np.ndarray], np.ndarray],
        size: int,
        step: int = 0,
        ranks: int | None = None,
    ) -> "FieldSnapshot":
        part = PartitionedField.even(size, ranks) if ranks else None
        return cls(step=step, size=size, evaluator=PointEvaluator(func), partition=part)

    @property
    def is_lazy(self) -> bool:
        return self.evaluator is not None

    @property
    def eval_count(self) -> int:
        return self.evaluator.eval_count if self.evaluator is not None else 0

    def with_partition(self, ranks: int) -> "FieldSnapshot":
        return FieldSnapshot(
            step=self.step,
            size=self.size,
            values=self.values,
            evaluator=self.evaluator,
            partition=PartitionedField.even(self.size, ranks),
        )

    def materialize(self) -> np.ndarray:
        """All values as an array. On a lazy field this evaluates every point."""
        if self.values is not None:
            return self.values
        return self.evaluator.eval_many(np.arange(self.size, dtype=np.int64))

    def eager(self) -> "FieldSnapshot":
        if not self.is_lazy:
            return self
        return FieldSnapshot(
            step=self.step, size=self.size, values=self.materialize(), partition=self.partition
        )


def global_index_sample(size: int, k: int, seed: int) -> np.ndarray:
    """``k`` indices drawn uniformly with replacement from ``[0, size)``."""
    if size < 1 or k < 1:
        raise InvalidArgumentError(f"need size >= 1 and k >= 1, got size={size}, k={k}")
    key = _rng.derive_key(_GLOBAL_STREAM, seed)
    return _rng.below(key, np.arange(k, dtype=np.uint64), size)


def per_rank_sample(partition: PartitionedField, samples_per_rank: int, seed: int) -> np.ndarray:
    """Stratified draw: ``samples_per_rank`` indices from every rank.

    Returns an ``(R * s, 2)`` int64 array of ``(rank, index)`` rows in rank
    order; ``index`` is a global index inside the rank's extent. Rank ``r``'s
    draws depend only on ``(seed, r)``.
    """
    if samples_per_rank < 1:
        raise InvalidArgumentError("samples_per_rank must be >= 1")
    if np.any(partition.sizes <= 0):
        raise InvalidPartitionError("every rank must be nonempty")
    s = int(samples_per_rank)
    R = partition.ranks
    ranks = np.repeat(np.arange(R, dtype=np.int64), s)
    # counter = rank * s + j keys each rank's stream independently of R
    counters = ranks.astype(np.uint64) * np.uint64(1 << 32) + np.tile(
        np.arange(s, dtype=np.uint64), R
    )
    key = _rng.derive_key(_RANK_STREAM, seed)
    local = _rng.below(key, counters, np.repeat(partition.sizes, s))
    out = np.empty((R * s, 2), dtype=np.int64)
    out[:, 0] = ranks
    out[:, 1] = partition.bounds[:-1][ranks] + local
    return out


def gather_values(field: FieldSnapshot, indices) -> np.ndarray:
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= field.size):
        bad = idx[(idx < 0) | (idx >= field.size)][0]
        raise IndexError(f"index {bad} out of range for field of size {field.size}")
    if field.values is not None:
        return field.values[idx]
    return field.evaluator.eval_many(idx)


def sample_indices(
    field: FieldSnapshot,
    seed: int,
    k: int | None = None,
    samples_per_rank: int | None = None,
) -> np.ndarray:
    """Global uniform indices, or per-rank indices when ``samples_per_rank`` is set."""
    if samples_per_rank is not None:
        if field.partition is None:
            raise InvalidPartitionError("per-rank sampling needs a partitioned field")
        return per_rank_sample(field.partition, samples_per_rank, seed)[:, 1]
    if k is None:
        raise InvalidArgumentError("either k or samples_per_rank is required")
    return global_index_sample(field.size, k, seed)
