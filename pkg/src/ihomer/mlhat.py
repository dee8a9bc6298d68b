"""Multi-label Hoeffding adaptive tree over one label cluster.

Leaves hold per-label Bernoulli counters and, per feature, Gaussian
summaries of the feature overall and conditioned on each label being
present.  Splits maximise the reduction of the summed binary label
entropies; every node monitors its Hamming error with ADWIN and may grow
an alternate subtree that later replaces it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import ndtr, ndtri

from .drift import ADWIN, alternate_bound, hoeffding_epsilon_tree

N_THRESHOLDS = 10


class AlternateVerdict(str, Enum):
    REPLACE = "replace"
    PRUNE = "prune"
    CONTINUE = "continue"


@dataclass
class TreeConfig:
    n_min: int = 200
    delta_tree: float = 1e-5
    tau_tree: float = 0.05
    delta_alt_tree: float = 0.05
    adwin_delta: float = 0.002
    adaptive: bool = True
    n_thresholds: int = N_THRESHOLDS


def binary_entropy(p):
    """Entropy in bits of Bernoulli(p), elementwise; 0 at p in {0, 1}."""
    p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(np.where(p > 0, p * np.log2(p), 0.0) + np.where(q > 0, q * np.log2(q), 0.0))
    return h


def leaf_entropy(positives, n) -> float:
    """Sum over labels of the binary entropy of each label's empirical frequency."""
    if n <= 0:
        return 0.0
    return float(np.sum(binary_entropy(np.asarray(positives, dtype=float) / n)))


@dataclass(frozen=True)
class SplitDecision:
    split: bool
    feature: int = -1
    threshold: float = math.nan
    gain_best: float = 0.0
    gain_second: float = 0.0
    epsilon: float = math.inf
    left_n: float = 0.0
    left_pos: np.ndarray | None = None
    right_n: float = 0.0
    right_pos: np.ndarray | None = None

    @property
    def delta_gain(self) -> float:
        return self.gain_best - self.gain_second


class Node:
    """Tree node; a leaf when ``feature`` is None."""

    __slots__ = (
        "n_labels", "n", "pos", "feature", "threshold", "children", "adwin",
        "alternate", "alt_seen", "obs_n", "mean", "m2", "fmin", "fmax",
        "v_lo", "v_hi", "binary", "pos_obs", "pos_mean", "pos_m2",
        "known", "last_eval", "split_gain", "split_delta_gain", "last_bound",
    )

    def __init__(self, n_labels: int, n: float = 0.0, pos=None, adwin_delta: float = 0.002):
        self.n_labels = n_labels
        self.n = float(n)
        self.pos = np.zeros(n_labels) if pos is None else np.asarray(pos, dtype=float).copy()
        self.feature: int | None = None
        self.threshold = math.nan
        self.children: list[Node] = []
        self.adwin = ADWIN(delta=adwin_delta)
        self.alternate: Node | None = None
        self.alt_seen = 0
        self.known: set = set()
        self.last_eval = 0
        self.split_gain = math.nan
        self.split_delta_gain = math.nan
        self.last_bound = math.nan
        self.obs_n = 0
        self.mean = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def _init_estimators(self, n_features: int):
        K = self.n_labels
        self.mean = np.zeros(n_features)
        self.m2 = np.zeros(n_features)
        self.fmin = np.full(n_features, np.inf)
        self.fmax = np.full(n_features, -np.inf)
        self.v_lo = np.full(n_features, np.nan)
        self.v_hi = np.full(n_features, np.nan)
        self.binary = np.ones(n_features, dtype=bool)
        self.pos_obs = np.zeros(K)
        self.pos_mean = np.zeros((K, n_features))
        self.pos_m2 = np.zeros((K, n_features))

    def scores(self) -> np.ndarray:
        return (self.pos + 1.0) / (self.n + 2.0)

    def route(self, x) -> "Node":
        return self.children[0] if x[self.feature] <= self.threshold else self.children[1]

    def observe(self, x: np.ndarray, y_bits: np.ndarray, y_key: tuple) -> None:
        self.n += 1.0
        self.pos += y_bits
        self.known.add(y_key)
        if self.mean is None:
            self._init_estimators(len(x))
        self.obs_n += 1
        delta = x - self.mean
        self.mean += delta / self.obs_n
        self.m2 += delta * (x - self.mean)
        np.minimum(self.fmin, x, out=self.fmin)
        np.maximum(self.fmax, x, out=self.fmax)
        if self.binary.any():
            lo_unset = np.isnan(self.v_lo)
            self.v_lo[lo_unset] = x[lo_unset]
            hi_unset = np.isnan(self.v_hi) & (x != self.v_lo)
            self.v_hi[hi_unset] = x[hi_unset]
            self.binary &= (x == self.v_lo) | (x == self.v_hi)
        rows = np.flatnonzero(y_bits)
        if rows.size:
            self.pos_obs[rows] += 1.0
            c = self.pos_obs[rows][:, None]
            d = x[None, :] - self.pos_mean[rows]
            self.pos_mean[rows] += d / c
            self.pos_m2[rows] += d * (x[None, :] - self.pos_mean[rows])

    def to_dict(self) -> dict:
        out: dict = {"n": round(self.n, 6), "adwin_error": self.adwin.estimation}
        if self.is_leaf:
            out["positives"] = [round(float(v), 6) for v in self.pos]
            out["known_label_sets"] = len(self.known)
        else:
            out.update(
                feature=self.feature,
                threshold=self.threshold,
                gain=self.split_gain,
                delta_gain=self.split_delta_gain,
                children=[c.to_dict() for c in self.children],
            )
        if self.alternate is not None:
            out["alternate"] = {"seen": self.alt_seen, "tree": self.alternate.to_dict()}
        return out


def evaluate_splits(leaf: Node, n_thresholds: int = N_THRESHOLDS):
    """Best binary split per feature from the leaf's Gaussian summaries.

    Returns ``(gains, thresholds, left_n, left_pos)`` with ``gains`` of shape
    (F,) and the others describing each feature's best candidate, or None
    when the leaf has no observations.
    """
    n = leaf.obs_n
    if n == 0 or leaf.mean is None:
        return None
    F, K = leaf.mean.shape[0], leaf.n_labels
    pos = leaf.pos_obs
    parent_h = leaf_entropy(pos, n)

    sd = np.sqrt(np.maximum(leaf.m2 / n, 0.0))
    probs = np.arange(1, n_thresholds + 1) / (n_thresholds + 1)
    thr = leaf.mean[:, None] + sd[:, None] * ndtri(probs)[None, :]
    thr = np.clip(thr, leaf.fmin[:, None], leaf.fmax[:, None])
    with np.errstate(divide="ignore", invalid="ignore"):
        left_frac = np.where(sd[:, None] > 0, ndtr((thr - leaf.mean[:, None]) / sd[:, None]), 0.0)

        pos_sd = np.sqrt(np.maximum(leaf.pos_m2 / np.maximum(pos, 1.0)[:, None], 0.0))  # (K, F)
        z = (thr.T[:, :, None] - leaf.pos_mean.T[None, :, :]) / pos_sd.T[None, :, :]  # (T, F, K)
        step = (thr.T[:, :, None] >= leaf.pos_mean.T[None, :, :]).astype(float)
        pos_left_frac = np.where(pos_sd.T[None, :, :] > 0, ndtr(z), step).transpose(1, 0, 2)  # (F, T, K)

    # exact counts for two-valued features, read off the means
    two_valued = leaf.binary & ~np.isnan(leaf.v_hi)
    if two_valued.any():
        lo = np.minimum(leaf.v_lo, leaf.v_hi)[two_valued]
        hi = np.maximum(leaf.v_lo, leaf.v_hi)[two_valued]
        span = hi - lo
        thr[two_valued] = ((lo + hi) / 2.0)[:, None]
        left_frac[two_valued] = (1.0 - (leaf.mean[two_valued] - lo) / span)[:, None]
        pos_hi = (leaf.pos_mean[:, two_valued] - lo[None, :]) / span[None, :]  # (K, F2)
        pos_hi = np.where(pos[:, None] > 0, pos_hi, 0.0)
        pos_left_frac[two_valued] = (1.0 - pos_hi.T)[:, None, :]

    left_n = left_frac * n
    right_n = n - left_n
    left_pos = pos_left_frac * pos[None, None, :]
    left_pos = np.clip(left_pos, np.maximum(pos[None, None, :] - right_n[:, :, None], 0.0),
                       np.minimum(pos[None, None, :], left_n[:, :, None]))
    right_pos = pos[None, None, :] - left_pos
    with np.errstate(divide="ignore", invalid="ignore"):
        h_left = binary_entropy(np.where(left_n[:, :, None] > 0, left_pos / left_n[:, :, None], 0.0)).sum(-1)
        h_right = binary_entropy(np.where(right_n[:, :, None] > 0, right_pos / right_n[:, :, None], 0.0)).sum(-1)
    gain = parent_h - (left_n / n) * h_left - (right_n / n) * h_right
    valid = (left_n >= 0.5) & (right_n >= 0.5)
    gain = np.where(valid, gain, -np.inf)

    best_t = np.argmax(gain, axis=1)
    rows = np.arange(F)
    return gain[rows, best_t], thr[rows, best_t], left_n[rows, best_t], left_pos[rows, best_t]


def attempt_split(leaf: Node, config: TreeConfig) -> SplitDecision:
    """Hoeffding-bounded split test on a leaf; does not modify the tree."""
    n_known = len(leaf.known)
    if n_known < 2 or leaf.obs_n < 1:
        return SplitDecision(False)
    evaluated = evaluate_splits(leaf, config.n_thresholds)
    if evaluated is None:
        return SplitDecision(False)
    gains, thresholds, left_n, left_pos = evaluated
    order = np.argsort(-gains, kind="stable")
    f1 = int(order[0])
    g1 = float(gains[f1])
    g2 = float(gains[order[1]]) if len(order) > 1 and np.isfinite(gains[order[1]]) else 0.0
    g2 = max(g2, 0.0)
    eps = hoeffding_epsilon_tree(n_known, config.delta_tree, leaf.obs_n)
    leaf.last_bound = eps
    do_split = np.isfinite(g1) and g1 > 0 and (g1 - g2 > eps or eps < config.tau_tree)
    if not do_split:
        return SplitDecision(False, f1, float(thresholds[f1]), g1 if np.isfinite(g1) else 0.0, g2, eps)
    n = leaf.obs_n
    ln = float(left_n[f1])
    lp = np.asarray(left_pos[f1], dtype=float)
    return SplitDecision(True, f1, float(thresholds[f1]), g1, g2, eps,
                         ln, lp, n - ln, leaf.pos_obs - lp)


def evaluate_alternate(node: Node, config: TreeConfig) -> tuple[AlternateVerdict, float]:
    """Compare a node's error with its alternate's; returns the verdict and the bound."""
    alt = node.alternate
    e, e_alt = node.adwin.estimation, alt.adwin.estimation
    bound = alternate_bound(e, e_alt, node.adwin.width, alt.adwin.width, config.delta_alt_tree)
    if e - e_alt > config.delta_alt_tree:
        return AlternateVerdict.REPLACE, bound
    if e_alt - e > config.delta_alt_tree:
        return AlternateVerdict.PRUNE, bound
    return AlternateVerdict.CONTINUE, bound


class MlhatTree:
    """Adaptive multi-label Hoeffding tree predicting ``n_labels`` local labels."""

    def __init__(self, n_labels: int, config: TreeConfig | None = None, n_features: int | None = None):
        if n_labels < 1:
            raise ValueError("a tree needs at least one label")
        self.n_labels = n_labels
        self.config = config or TreeConfig()
        self.n_features = n_features
        self.root = self._new_leaf()
        self.n_seen = 0
        self.n_replacements = 0
        self.n_prunes = 0
        self.n_alternates = 0

    def _new_leaf(self, n=0.0, pos=None) -> Node:
        return Node(self.n_labels, n, pos, adwin_delta=self.config.adwin_delta)

    def _check_features(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.n_features is None:
            self.n_features = x.shape[0]
        elif x.shape != (self.n_features,):
            raise ValueError(f"expected {self.n_features} features, got shape {x.shape}")
        return x

    @staticmethod
    def _leaf(node: Node, x) -> Node:
        while not node.is_leaf:
            node = node.route(x)
        return node

    def _subtree_scores(self, node: Node, x) -> np.ndarray:
        """Main-leaf scores blended with mature alternates met along the path."""
        contributions = []
        while True:
            alt = node.alternate
            if alt is not None and node.alt_seen >= self.config.n_min:
                alt_leaf = self._leaf(alt, x)
                contributions.append((self._subtree_scores(alt, x), 1.0 - alt_leaf.adwin.estimation))
            if node.is_leaf:
                break
            node = node.route(x)
        main = node.scores()
        if not contributions:
            return main
        weights = [1.0 - node.adwin.estimation] + [w for _, w in contributions]
        total = sum(weights)
        if total <= 0:
            return main
        blended = weights[0] * main
        for (s, _), w in zip(contributions, weights[1:]):
            blended = blended + w * s
        return blended / total

    def predict_scores(self, x) -> np.ndarray:
        x = self._check_features(x) if self.n_features is not None else np.asarray(x, dtype=float)
        return self._subtree_scores(self.root, x)

    def predict_one(self, x) -> tuple[tuple[int, ...], np.ndarray]:
        scores = self.predict_scores(x)
        return tuple(int(i) for i in np.flatnonzero(scores > 0.5)), scores

    def learn_one(self, x, y_local) -> None:
        x = self._check_features(x)
        y_bits = np.zeros(self.n_labels)
        key = tuple(int(i) for i in y_local)
        if key:
            y_bits[list(key)] = 1.0
        self.n_seen += 1
        self.root = self._train(self.root, x, y_bits, key)

    def _train(self, root: Node, x, y_bits, key) -> Node:
        cfg = self.config
        path = [root]
        while not path[-1].is_leaf:
            path.append(path[-1].route(x))
        leaf = path[-1]
        err = float(np.count_nonzero((leaf.scores() > 0.5) != (y_bits > 0))) / self.n_labels

        for depth, node in enumerate(path):
            if node.is_leaf:
                node.observe(x, y_bits, key)
            else:
                node.n += 1.0
                node.pos += y_bits
            if not cfg.adaptive:
                continue
            _, warning = node.adwin.update(err)
            if node.alternate is not None:
                node.alternate = self._train(node.alternate, x, y_bits, key)
                node.alt_seen += 1
                if node.alt_seen >= cfg.n_min:
                    verdict, _ = evaluate_alternate(node, cfg)
                    if verdict is AlternateVerdict.REPLACE:
                        new = node.alternate
                        new.adwin.reset()
                        self.n_replacements += 1
                        if depth == 0:
                            return new
                        parent = path[depth - 1]
                        parent.children[parent.children.index(node)] = new
                        return root
                    if verdict is AlternateVerdict.PRUNE:
                        node.alternate = None
                        node.alt_seen = 0
                        self.n_prunes += 1
            if warning and node.alternate is None:
                node.alternate = self._new_leaf()
                node.alt_seen = 0
                self.n_alternates += 1

        if leaf.obs_n - leaf.last_eval >= cfg.n_min:
            leaf.last_eval = leaf.obs_n
            decision = attempt_split(leaf, cfg)
            if decision.split:
                self._apply_split(leaf, decision)
        return root

    def _apply_split(self, leaf: Node, d: SplitDecision) -> None:
        leaf.feature = d.feature
        leaf.threshold = d.threshold
        leaf.split_gain = d.gain_best
        leaf.split_delta_gain = d.delta_gain
        leaf.children = [self._new_leaf(d.left_n, d.left_pos), self._new_leaf(d.right_n, d.right_pos)]
        # release leaf-only estimators
        leaf.mean = leaf.m2 = leaf.pos_mean = leaf.pos_m2 = None
        leaf.known = set()

    def iter_nodes(self, include_alternates: bool = True):
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(node.children)
            if include_alternates and node.alternate is not None:
                stack.append(node.alternate)

    def n_nodes(self) -> int:
        return sum(1 for _ in self.iter_nodes())

    def depth(self) -> int:
        def _d(node):
            return 0 if node.is_leaf else 1 + max(_d(c) for c in node.children)
        return _d(self.root)

    def to_dict(self) -> dict:
        return {
            "n_labels": self.n_labels,
            "n_seen": self.n_seen,
            "replacements": self.n_replacements,
            "prunes": self.n_prunes,
            "root": self.root.to_dict(),
        }
