"""iHOMER: label-space partitioning with one adaptive multi-label tree per cluster."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from enum import Enum

import numpy as np

from .clustering import ClusterHierarchy, CooccurrenceStats, balanced_partition, min_safe_cluster_size
from .core import EMPTY, LabelSet
from .drift import ADWIN, welch_significant, welch_t
from .mlhat import MlhatTree, TreeConfig


class SwapAction(str, Enum):
    SWAP = "swap"
    SPAWN_ALT = "spawn_alt"
    KEEP = "keep"


@dataclass
class IhomerConfig:
    n_min: int = 200
    delta_cluster: float = 1e-5
    tau_cluster: float = 0.05
    delta_tree: float = 1e-5
    tau_tree: float = 0.05
    delta_alt_tree: float = 0.05
    delta_alt_cluster: float = 0.05
    adwin_delta: float = 0.002
    hierarchy_adwin_delta: float = 0.002
    drift_signals: int = 3
    # instances without a drift signal after which the consecutive count restarts
    signal_memory: int = 200
    # warning-level rises of the error count as drift signals too
    warnings_as_signals: bool = True
    clustering: bool = True
    balanced: bool = True
    alternate_hierarchy: bool = True
    freeze_partition_after: int | None = None
    # alternate hierarchies count label co-occurrences from their spawn time
    # instead of starting from a copy of the main hierarchy's counters
    alt_fresh_statistics: bool = True

    def tree_config(self) -> TreeConfig:
        return TreeConfig(
            n_min=self.n_min,
            delta_tree=self.delta_tree,
            tau_tree=self.tau_tree,
            delta_alt_tree=self.delta_alt_tree,
            adwin_delta=self.adwin_delta,
        )

    @classmethod
    def from_dict(cls, values: dict) -> "IhomerConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise KeyError(f"unknown configuration keys: {sorted(unknown)}")
        return cls(**values)

    def to_dict(self) -> dict:
        return asdict(self)


class HierarchyEnsemble:
    """A label hierarchy plus one tree per cluster of its balanced partition."""

    def __init__(self, n_labels: int, config: IhomerConfig, stats: CooccurrenceStats | None = None,
                 n_features: int | None = None):
        self.config = config
        self.n_features = n_features
        self.hierarchy = ClusterHierarchy(
            n_labels, n_min=config.n_min, delta=config.delta_cluster, tau=config.tau_cluster,
            stats=stats if stats is not None else CooccurrenceStats(n_labels),
        )
        self.adwin = ADWIN(delta=config.hierarchy_adwin_delta)
        self.drift_signals = 0
        self.last_signal_at = -1
        self.n_seen = 0
        self.n_remaps = 0
        self.models: dict[tuple[int, ...], MlhatTree] = {}
        self.partition: list[tuple[int, ...]] = []
        self._min_size = 1
        self._remap(self._current_partition())

    def _current_partition(self) -> list[tuple[int, ...]]:
        if self.config.balanced:
            return balanced_partition(self.hierarchy, self.hierarchy.stats.size_histogram)
        return self.hierarchy.leaves()

    def _remap(self, partition) -> None:
        partition = [tuple(c) for c in partition if c]
        if partition == self.partition:
            return
        cfg = self.config.tree_config()
        models = {}
        for cluster in partition:
            tree = self.models.get(cluster)
            models[cluster] = tree if tree is not None else MlhatTree(len(cluster), cfg, self.n_features)
        self.models = models
        self.partition = partition
        self._owner = {}
        for c, cluster in enumerate(partition):
            for k, label in enumerate(cluster):
                self._owner[label] = (c, k)
        self.n_remaps += 1

    def predict_one(self, x) -> LabelSet:
        out = []
        for cluster in self.partition:
            local, _ = self.models[cluster].predict_one(x)
            out.extend(cluster[k] for k in local)
        return LabelSet.of(out) if out else EMPTY

    def register_labels(self, n_labels: int) -> None:
        if n_labels > self.hierarchy.n_labels:
            self.hierarchy.add_labels(n_labels)
            self._remap(self._current_partition())

    @property
    def stats(self) -> CooccurrenceStats:
        return self.hierarchy.stats

    def structure_step(self, frozen: bool) -> bool:
        """Run the clustering tests for one instance; remap trees when the partition moves."""
        changed = False
        if self.config.clustering and not frozen:
            changed = self.hierarchy.step()
        else:
            self.hierarchy.n_seen += 1
        min_size = min_safe_cluster_size(self.hierarchy.stats.size_histogram)
        if changed or (self.config.balanced and min_size != self._min_size):
            self._min_size = min_size
            if not frozen:
                before = self.partition
                self._remap(self._current_partition())
                return self.partition != before
        return False

    def train_trees(self, x, y: LabelSet) -> None:
        local: list[list[int]] = [[] for _ in self.partition]
        owner = self._owner
        for label in y:
            c, k = owner[label]
            local[c].append(k)
        for cluster, y_local in zip(self.partition, local):
            self.models[cluster].learn_one(x, y_local)

    def record_error(self, error: float) -> bool:
        self.n_seen += 1
        drift, warning = self.adwin.update(error)
        if self.last_signal_at >= 0 and self.n_seen - self.last_signal_at > self.config.signal_memory:
            self.drift_signals = 0
        flagged = drift or (warning and self.config.warnings_as_signals)
        if flagged and self.adwin.change_sign > 0:
            self.drift_signals += 1
            self.last_signal_at = self.n_seen
        return drift

    def to_dict(self) -> dict:
        return {
            "partition": [list(c) for c in self.partition],
            "hierarchy": self.hierarchy.to_dict(),
            "error_window": {
                "mean": self.adwin.estimation,
                "variance": self.adwin.variance,
                "width": self.adwin.width,
            },
            "trees": [{"cluster": list(c), "tree": self.models[c].to_dict()} for c in self.partition],
        }


class IhomerModel:
    """Online multi-label classifier over a dynamically partitioned label space."""

    def __init__(self, n_labels: int, config: IhomerConfig | None = None, n_features: int | None = None):
        self.config = config or IhomerConfig()
        self.n_labels = n_labels
        self.n_features = n_features
        self.main = HierarchyEnsemble(n_labels, self.config, None, n_features)
        self.alt: HierarchyEnsemble | None = None
        self.n_seen = 0
        self.n_swaps = 0
        self.n_spawns = 0
        self.events: list[tuple[int, str]] = []

    @property
    def partition(self) -> list[tuple[int, ...]]:
        return self.main.partition

    def predict_one(self, x) -> LabelSet:
        return self.main.predict_one(np.asarray(x, dtype=float))

    def _register(self, y: LabelSet) -> None:
        top = y.max_index() + 1
        if top > self.n_labels:
            self.n_labels = top
            for ens in (self.main, self.alt):
                if ens is not None:
                    ens.register_labels(top)

    def learn_one(self, x, y: LabelSet) -> SwapAction:
        return self.predict_learn_one(x, y)[1]

    def predict_learn_one(self, x, y: LabelSet) -> tuple[LabelSet, SwapAction]:
        """Test-then-train on one instance; returns the main prediction made before training."""
        x = np.asarray(x, dtype=float)
        if self.n_features is None:
            self.n_features = x.shape[0]
            self.main.n_features = self.n_features
        self._register(y)
        ensembles = [self.main] if self.alt is None else [self.main, self.alt]
        predictions = [ens.predict_one(x) for ens in ensembles]

        for ens in ensembles:
            ens.stats.update(y)
        self.n_seen += 1
        frozen = (
            self.config.freeze_partition_after is not None
            and self.n_seen > self.config.freeze_partition_after
        )
        for ens in ensembles:
            if ens.structure_step(frozen):
                self.events.append((self.n_seen, "remap"))
            ens.train_trees(x, y)
        for ens, pred in zip(ensembles, predictions):
            ens.record_error(0.0 if pred == y else 1.0)
        return predictions[0], self.maybe_swap_hierarchy(frozen)

    def maybe_swap_hierarchy(self, frozen: bool = False) -> SwapAction:
        cfg = self.config
        if self.alt is not None:
            main_s, alt_s = self.main.adwin.summary(), self.alt.adwin.summary()
            if (main_s is not None and alt_s is not None
                    and main_s.count >= cfg.n_min and alt_s.count >= cfg.n_min):
                t, dof = welch_t(main_s, alt_s)
                if welch_significant(t, max(dof, 1.0), cfg.delta_alt_cluster):
                    self.main, self.alt = self.alt, None
                    self.main.drift_signals = 0
                    self.n_swaps += 1
                    self.events.append((self.n_seen, "swap"))
                    return SwapAction.SWAP
            if self.alt.drift_signals >= cfg.drift_signals:
                # the candidate drifted as well, so it no longer offers a fresh view
                self.alt = None
                self.events.append((self.n_seen, "drop_alt"))
        allowed = cfg.clustering and cfg.alternate_hierarchy and not frozen
        if allowed and self.alt is None and self.main.drift_signals >= cfg.drift_signals:
            self.main.drift_signals = 0
            stats = None if cfg.alt_fresh_statistics else self.main.stats.copy()
            self.alt = HierarchyEnsemble(self.n_labels, cfg, stats, self.n_features)
            self.n_spawns += 1
            self.events.append((self.n_seen, "spawn_alt"))
            return SwapAction.SPAWN_ALT
        return SwapAction.KEEP

    def n_tree_nodes(self) -> int:
        total = sum(t.n_nodes() for t in self.main.models.values())
        if self.alt is not None:
            total += sum(t.n_nodes() for t in self.alt.models.values())
        return total

    def snapshot(self) -> dict:
        return {
            "n_seen": self.n_seen,
            "n_labels": self.n_labels,
            "swaps": self.n_swaps,
            "alternates_spawned": self.n_spawns,
            "main": self.main.to_dict(),
            "alt": None if self.alt is None else self.alt.to_dict(),
        }
