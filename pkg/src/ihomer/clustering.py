"""Incremental label co-occurrence statistics and the divisive-agglomerative label hierarchy."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from itertools import count

import numpy as np

from .core import LabelSet
from .drift import hoeffding_epsilon

# dissimilarity assigned to label pairs that were never observed
UNSEEN_PAIR_DISSIMILARITY = 1.0


class CooccurrenceStats:
    """Pairwise co-occurrence counters over the label space.

    For labels ``p`` and ``q``: ``a`` counts instances carrying both,
    ``b`` only ``p`` and ``c`` only ``q``.  Only joint and marginal
    presence counts are stored; ``b`` and ``c`` are derived.
    Absent labels count as zeros.
    """

    def __init__(self, n_labels: int = 0):
        self.n_labels = 0
        self.n = 0
        self.presence = np.zeros(0, dtype=np.int64)
        self.joint = np.zeros((0, 0), dtype=np.int64)
        self.size_histogram: Counter = Counter()
        self.grow(n_labels)

    def grow(self, n_labels: int) -> None:
        if n_labels <= self.n_labels:
            return
        presence = np.zeros(n_labels, dtype=np.int64)
        presence[: self.n_labels] = self.presence
        joint = np.zeros((n_labels, n_labels), dtype=np.int64)
        joint[: self.n_labels, : self.n_labels] = self.joint
        self.presence, self.joint, self.n_labels = presence, joint, n_labels

    def update(self, y: LabelSet) -> None:
        idx = y.indices
        if idx and idx[-1] >= self.n_labels:
            self.grow(idx[-1] + 1)
        self.n += 1
        self.size_histogram[len(idx)] += 1
        if not idx:
            return
        if len(idx) == 1:
            self.presence[idx[0]] += 1
            self.joint[idx[0], idx[0]] += 1
            return
        arr = np.asarray(idx)
        self.presence[arr] += 1
        self.joint[np.ix_(arr, arr)] += 1

    def counts(self, p: int, q: int) -> tuple[int, int, int]:
        a = int(self.joint[p, q])
        return a, int(self.presence[p]) - a, int(self.presence[q]) - a

    def dissimilarity(self, p: int, q: int, prior: float = UNSEEN_PAIR_DISSIMILARITY) -> float:
        return jaccard_dissimilarity(*self.counts(p, q), prior=prior)

    def dissimilarity_matrix(self, labels, prior: float = UNSEEN_PAIR_DISSIMILARITY) -> np.ndarray:
        """Dense Jaccard dissimilarity matrix restricted to ``labels`` (zero diagonal)."""
        arr = np.asarray(labels, dtype=np.int64)
        a = self.joint[np.ix_(arr, arr)].astype(float)
        pres = self.presence[arr].astype(float)
        union = pres[:, None] + pres[None, :] - a
        with np.errstate(invalid="ignore", divide="ignore"):
            d = np.where(union > 0, 1.0 - a / np.where(union > 0, union, 1.0), prior)
        np.fill_diagonal(d, 0.0)
        return d

    def modal_labelset_size(self) -> int:
        if not self.size_histogram:
            return 0
        return max(self.size_histogram.items(), key=lambda kv: (kv[1], -kv[0]))[0]

    def copy(self) -> "CooccurrenceStats":
        other = CooccurrenceStats()
        other.n_labels, other.n = self.n_labels, self.n
        other.presence = self.presence.copy()
        other.joint = self.joint.copy()
        other.size_histogram = Counter(self.size_histogram)
        return other


def jaccard_dissimilarity(a: int, b: int, c: int, prior: float = UNSEEN_PAIR_DISSIMILARITY) -> float:
    total = a + b + c
    if total == 0:
        return prior
    return 1.0 - a / total


def diameter_stats(d: np.ndarray) -> tuple[float, float, float]:
    """(max, min, mean) of the off-diagonal pairwise dissimilarities."""
    iu = np.triu_indices(d.shape[0], k=1)
    vals = d[iu]
    return float(vals.max()), float(vals.min()), float(vals.mean())


def split_ratio(d1: float, d0: float, d_mean: float) -> float:
    denom = abs(d1 + d0 - 2.0 * d_mean)
    if denom == 0.0:
        return math.inf if d1 > d0 else 0.0
    return (d1 - d0) / denom


_node_ids = count()


@dataclass(eq=False)
class ClusterNode:
    labels: tuple[int, ...]
    parent: "ClusterNode | None" = None
    children: list["ClusterNode"] = field(default_factory=list)
    born_at: int = 0
    last_test_at: int = 0
    n_at_split: int = 0
    tested: bool = False
    d1: float = math.nan
    d0: float = math.nan
    d_mean: float = math.nan
    epsilon: float = math.nan
    node_id: int = field(default_factory=lambda: next(_node_ids))

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def sibling(self) -> "ClusterNode | None":
        if self.parent is None:
            return None
        a, b = self.parent.children
        return b if a is self else a

    def to_dict(self) -> dict:
        out = {"labels": list(self.labels)}
        if self.children:
            out["n_at_split"] = self.n_at_split
            out["children"] = [c.to_dict() for c in self.children]
        return out


@dataclass(frozen=True)
class SplitDecision:
    split: bool
    d1: float = math.nan
    d0: float = math.nan
    d_mean: float = math.nan
    epsilon: float = math.nan
    ratio: float = math.nan
    pivots: tuple[int, int] | None = None
    groups: tuple[tuple[int, ...], tuple[int, ...]] | None = None


@dataclass(frozen=True)
class MergeDecision:
    merge: bool
    lhs: float = math.nan
    epsilon: float = math.nan


def assign_to_pivots(labels, d: np.ndarray) -> tuple[int, int, tuple[int, ...], tuple[int, ...]]:
    """Pick the most dissimilar pair as pivots and attach every other label to its nearer pivot.

    Ties between candidate pivot pairs go to the lexicographically first pair;
    a label equidistant from both pivots joins the one with the lower index.
    """
    k = len(labels)
    iu = np.triu_indices(k, k=1)
    best = int(np.argmax(d[iu]))
    i, j = int(iu[0][best]), int(iu[1][best])
    left, right = [labels[i]], [labels[j]]
    lo, hi = (i, j) if labels[i] < labels[j] else (j, i)
    for m in range(k):
        if m in (i, j):
            continue
        di, dj = d[m, i], d[m, j]
        if di < dj:
            left.append(labels[m])
        elif dj < di:
            right.append(labels[m])
        else:
            (left if lo == i else right).append(labels[m])
    return labels[i], labels[j], tuple(sorted(left)), tuple(sorted(right))


class ClusterHierarchy:
    """Binary tree of label clusters whose leaves partition the known labels."""

    def __init__(self, n_labels: int, n_min: int = 200, delta: float = 1e-5, tau: float = 0.05,
                 stats: CooccurrenceStats | None = None,
                 unseen_dissimilarity: float = UNSEEN_PAIR_DISSIMILARITY):
        self.n_min = n_min
        self.delta = delta
        self.tau = tau
        self.unseen_dissimilarity = unseen_dissimilarity
        self.stats = stats if stats is not None else CooccurrenceStats(n_labels)
        self.stats.grow(n_labels)
        self.n_seen = 0
        self.n_splits = 0
        self.n_merges = 0
        self.version = 0
        self._next_due = n_min
        self.root = ClusterNode(tuple(range(n_labels)))

    @property
    def n_labels(self) -> int:
        return len(self.root.labels)

    def iter_leaves(self):
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                yield node
            else:
                stack.extend(reversed(node.children))

    def leaves(self) -> list[tuple[int, ...]]:
        return [n.labels for n in self.iter_leaves() if n.labels]

    def add_labels(self, n_labels: int) -> None:
        """Register labels up to ``n_labels``; new ones join the root and its leftmost branch."""
        if n_labels <= self.n_labels:
            return
        new = tuple(range(self.n_labels, n_labels))
        self.stats.grow(n_labels)
        node = self.root
        while True:
            node.labels = node.labels + new
            if node.is_leaf:
                break
            node = node.children[0]
        self.version += 1

    def local_count(self, node: ClusterNode) -> int:
        return self.n_seen - node.born_at

    def _dissimilarities(self, labels) -> np.ndarray:
        return self.stats.dissimilarity_matrix(labels, self.unseen_dissimilarity)

    def diameter(self, node: ClusterNode) -> float:
        if len(node.labels) < 2:
            return 0.0
        return diameter_stats(self._dissimilarities(node.labels))[0]

    def evaluate_split(self, leaf: ClusterNode) -> SplitDecision:
        if len(leaf.labels) < 2:
            return SplitDecision(False)
        n_local = self.local_count(leaf)
        if n_local < 1:
            return SplitDecision(False)
        d = self._dissimilarities(leaf.labels)
        d1, d0, d_mean = diameter_stats(d)
        eps = hoeffding_epsilon(1.0, self.delta, n_local)
        leaf.d1, leaf.d0, leaf.d_mean, leaf.epsilon = d1, d0, d_mean, eps
        ratio = split_ratio(d1, d0, d_mean)
        do_split = d1 > d0 and (ratio > eps or self.tau > eps)
        if not do_split:
            return SplitDecision(False, d1, d0, d_mean, eps, ratio)
        p, q, left, right = assign_to_pivots(leaf.labels, d)
        return SplitDecision(True, d1, d0, d_mean, eps, ratio, (p, q), (left, right))

    def try_split(self, leaf: ClusterNode) -> SplitDecision:
        decision = self.evaluate_split(leaf)
        if decision.split:
            self.apply_split(leaf, decision.groups)
        return decision

    def apply_split(self, leaf: ClusterNode, groups) -> None:
        leaf.n_at_split = max(self.local_count(leaf), 1)
        leaf.children = [
            ClusterNode(tuple(g), parent=leaf, born_at=self.n_seen, last_test_at=self.n_seen)
            for g in groups
        ]
        self.n_splits += 1
        self.version += 1

    def evaluate_aggregate(self, leaf: ClusterNode) -> MergeDecision:
        parent = leaf.parent
        if parent is None or not leaf.is_leaf:
            return MergeDecision(False)
        sib = leaf.sibling()
        if not sib.is_leaf or parent.n_at_split < 1:
            return MergeDecision(False)
        eps = hoeffding_epsilon(1.0, self.delta, parent.n_at_split)
        lhs = 2.0 * self.diameter(parent) - (self.diameter(leaf) + self.diameter(sib))
        return MergeDecision(lhs < eps, lhs, eps)

    def try_aggregate(self, leaf: ClusterNode) -> MergeDecision:
        decision = self.evaluate_aggregate(leaf)
        if decision.merge:
            self.apply_merge(leaf.parent)
        return decision

    def apply_merge(self, parent: ClusterNode) -> None:
        for child in parent.children:
            child.parent = None
        parent.children = []
        parent.born_at = self.n_seen
        parent.last_test_at = self.n_seen
        parent.n_at_split = 0
        parent.tested = False
        parent.d1 = parent.d0 = parent.d_mean = parent.epsilon = math.nan
        self.n_merges += 1
        self.version += 1

    def step(self) -> bool:
        """Advance one instance (statistics are updated by the caller) and run due tests.

        Returns True when the leaf set changed.
        """
        self.n_seen += 1
        if self.n_seen < self._next_due:
            return False
        before = self.version
        due = [leaf for leaf in self.iter_leaves() if self.n_seen - leaf.last_test_at >= self.n_min]
        for leaf in due:
            if not leaf.is_leaf or (leaf.parent is None and leaf is not self.root):
                continue  # absorbed by an earlier merge in this step
            leaf.last_test_at = self.n_seen
            leaf.tested = True
            if self.try_split(leaf).split:
                continue
            self.try_aggregate(leaf)
        self._next_due = min(leaf.last_test_at for leaf in self.iter_leaves()) + self.n_min
        return self.version != before

    def learn_one(self, y: LabelSet) -> bool:
        if y.indices and y.indices[-1] >= self.n_labels:
            self.add_labels(y.indices[-1] + 1)
        self.stats.update(y)
        return self.step()

    def to_dict(self) -> dict:
        return {
            "n_seen": self.n_seen,
            "n_splits": self.n_splits,
            "n_merges": self.n_merges,
            "root": self.root.to_dict(),
        }


def min_safe_cluster_size(size_histogram) -> int:
    """Most common label-set cardinality (ties go to the smaller size)."""
    if not size_histogram:
        return 1
    size = max(size_histogram.items(), key=lambda kv: (kv[1], -kv[0]))[0]
    return max(int(size), 1)


def balanced_partition(h: ClusterHierarchy, size_histogram) -> list[tuple[int, ...]]:
    """Coarsen the leaf cut so no cluster is smaller than the modal label-set size.

    A subtree containing an undersized child is collapsed into the nearest
    ancestor that is large enough.
    """
    min_size = min_safe_cluster_size(size_histogram)
    out: list[tuple[int, ...]] = []

    def cut(node: ClusterNode):
        if node.is_leaf or any(len(c.labels) < min_size for c in node.children):
            out.append(tuple(sorted(node.labels)))
            return
        for child in node.children:
            cut(child)

    if h.root.labels:
        cut(h.root)
    return out
