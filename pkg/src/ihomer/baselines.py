"""Reference learners sharing the iHOMER test-then-train interface."""
from __future__ import annotations

from collections import Counter

import numpy as np

from .core import EMPTY, LabelSet
from .metrics import LabelIndexError
from .mlhat import MlhatTree, TreeConfig
from .model import IhomerConfig, IhomerModel

LEARNERS = ("ihomer", "mlhat-single", "br-hoeffding", "majority-labelset")


def _check_labels(y: LabelSet, n_labels: int) -> None:
    if y and y.max_index() >= n_labels:
        raise LabelIndexError(f"label {y.max_index()} outside the declared {n_labels} labels")


class MajorityLabelset:
    """Predicts the most frequent label set seen so far; ties go to the earliest seen."""

    def __init__(self, n_labels: int):
        self.n_labels = n_labels
        self.counts: Counter = Counter()
        self.first_seen: dict[LabelSet, int] = {}
        self.best: LabelSet = EMPTY
        self.n_seen = 0

    def predict_one(self, x=None) -> LabelSet:
        return self.best

    def learn_one(self, x, y: LabelSet) -> None:
        _check_labels(y, self.n_labels)
        self.counts[y] += 1
        self.first_seen.setdefault(y, self.n_seen)
        self.n_seen += 1
        key = (self.counts[y], -self.first_seen[y])
        if y != self.best and key > (self.counts[self.best], -self.first_seen.get(self.best, self.n_seen)):
            self.best = y

    def predict_learn_one(self, x, y: LabelSet) -> LabelSet:
        pred = self.best
        self.learn_one(x, y)
        return pred

    def structure_size(self) -> int:
        return len(self.counts)


class SingleMlhat:
    """One adaptive multi-label tree over the whole label space."""

    def __init__(self, n_labels: int, config: TreeConfig | None = None, n_features: int | None = None):
        self.n_labels = n_labels
        self.tree = MlhatTree(n_labels, config or TreeConfig(), n_features)

    def predict_one(self, x) -> LabelSet:
        return LabelSet(self.tree.predict_one(np.asarray(x, dtype=float))[0])

    def learn_one(self, x, y: LabelSet) -> None:
        _check_labels(y, self.n_labels)
        self.tree.learn_one(np.asarray(x, dtype=float), list(y))

    def predict_learn_one(self, x, y: LabelSet) -> LabelSet:
        pred = self.predict_one(x)
        self.learn_one(x, y)
        return pred

    def structure_size(self) -> int:
        return self.tree.n_nodes()


class BinaryRelevanceHoeffding:
    """One non-adaptive single-label Hoeffding tree per label."""

    def __init__(self, n_labels: int, config: TreeConfig | None = None, n_features: int | None = None):
        base = config or TreeConfig()
        cfg = TreeConfig(**{**base.__dict__, "adaptive": False})
        self.n_labels = n_labels
        self.trees = [MlhatTree(1, cfg, n_features) for _ in range(n_labels)]

    def predict_one(self, x) -> LabelSet:
        x = np.asarray(x, dtype=float)
        return LabelSet(tuple(j for j, t in enumerate(self.trees) if t.predict_one(x)[0]))

    def learn_one(self, x, y: LabelSet) -> None:
        _check_labels(y, self.n_labels)
        x = np.asarray(x, dtype=float)
        members = y.as_set()
        for j, t in enumerate(self.trees):
            t.learn_one(x, [0] if j in members else [])

    def predict_learn_one(self, x, y: LabelSet) -> LabelSet:
        pred = self.predict_one(x)
        self.learn_one(x, y)
        return pred

    def structure_size(self) -> int:
        return sum(t.n_nodes() for t in self.trees)


class IhomerLearner:
    """Adapter exposing :class:`IhomerModel` through the shared interface."""

    def __init__(self, n_labels: int, config: IhomerConfig | None = None, n_features: int | None = None):
        self.model = IhomerModel(n_labels, config, n_features)

    def predict_one(self, x) -> LabelSet:
        return self.model.predict_one(x)

    def predict_learn_one(self, x, y: LabelSet) -> LabelSet:
        return self.model.predict_learn_one(x, y)[0]

    def structure_size(self) -> int:
        return self.model.n_tree_nodes()


def make_learner(kind: str, n_labels: int, config: IhomerConfig | None = None, n_features: int | None = None):
    config = config or IhomerConfig()
    if kind == "ihomer":
        return IhomerLearner(n_labels, config, n_features)
    if kind == "mlhat-single":
        return SingleMlhat(n_labels, config.tree_config(), n_features)
    if kind == "br-hoeffding":
        return BinaryRelevanceHoeffding(n_labels, config.tree_config(), n_features)
    if kind == "majority-labelset":
        return MajorityLabelset(n_labels)
    raise ValueError(f"unknown learner {kind!r}; choose from {', '.join(LEARNERS)}")
