"""Shared value types: label sets, instances and stream metadata."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class LabelSet:
    """Sorted, duplicate-free set of active label indices."""

    indices: tuple[int, ...] = ()

    def __post_init__(self):
        idx = self.indices
        for a, b in zip(idx, idx[1:]):
            if a >= b:
                raise ValueError(f"label indices must be strictly increasing: {idx}")
        if idx and idx[0] < 0:
            raise ValueError(f"negative label index in {idx}")

    @classmethod
    def of(cls, labels: Iterable[int]) -> "LabelSet":
        return cls(tuple(sorted({int(i) for i in labels})))

    def __iter__(self):
        return iter(self.indices)

    def __len__(self):
        return len(self.indices)

    def __contains__(self, item):
        return item in self.indices

    def __repr__(self):
        return "LabelSet({" + ", ".join(map(str, self.indices)) + "})"

    def as_set(self) -> frozenset[int]:
        return frozenset(self.indices)

    def max_index(self) -> int:
        return self.indices[-1] if self.indices else -1


EMPTY = LabelSet()


@dataclass(frozen=True)
class Instance:
    features: np.ndarray
    labels: LabelSet | None = None


@dataclass(frozen=True)
class StreamConfig:
    label_count: int
    feature_count: int
    temporally_ordered: bool = False

    def __post_init__(self):
        if self.label_count < 1 or self.feature_count < 1:
            raise ValueError("label_count and feature_count must be >= 1")


@dataclass(frozen=True)
class RestrictedLabels:
    """A label set expressed in the local coordinates of a cluster.

    ``index_map[k]`` is the global label index of local label ``k``.
    """

    local: LabelSet
    index_map: tuple[int, ...] = field(default=())

    def to_global(self) -> LabelSet:
        return LabelSet(tuple(self.index_map[k] for k in self.local))


def labelset_from_indicator(bits: Sequence[int]) -> LabelSet:
    out = []
    for i, b in enumerate(bits):
        if b == 1:
            out.append(i)
        elif b != 0:
            raise ValueError(f"indicator entries must be 0 or 1, got {b!r} at {i}")
    return LabelSet(tuple(out))


def labelset_to_indicator(s: LabelSet, n_labels: int) -> np.ndarray:
    bits = np.zeros(n_labels, dtype=np.int8)
    if s.indices:
        bits[list(s.indices)] = 1
    return bits


def labelset_restrict(s: LabelSet, cluster: Iterable[int]) -> RestrictedLabels:
    """Intersect ``s`` with ``cluster`` and renumber into cluster-local indices."""
    index_map = tuple(sorted(set(cluster)))
    if not index_map:
        raise ValueError("cluster must be non-empty")
    position = {g: k for k, g in enumerate(index_map)}
    local = tuple(position[i] for i in s.indices if i in position)
    return RestrictedLabels(LabelSet(local), index_map)
