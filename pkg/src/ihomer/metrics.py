"""Prequential (test-then-train) multi-label evaluation."""
from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import LabelSet

DEFAULT_ROLLING_WINDOW = 500


class EmptyEvaluationError(ValueError):
    pass


class LabelIndexError(IndexError):
    """A label index beyond the registered label count reached the evaluator."""


@dataclass(frozen=True)
class MetricsReport:
    subset_accuracy: float
    sample_accuracy: float
    hamming_loss: float
    micro_f1: float
    macro_f1: float

    def to_dict(self) -> dict:
        return asdict(self)


def sample_accuracy(truth: LabelSet, pred: LabelSet) -> float:
    """Per-instance Jaccard score; two empty sets score 1."""
    t, p = truth.as_set(), pred.as_set()
    union = len(t | p)
    if union == 0:
        return 1.0
    return len(t & p) / union


@dataclass
class PrequentialState:
    n_labels: int
    window: int = DEFAULT_ROLLING_WINDOW
    n: int = 0
    exact_matches: int = 0
    hamming_errors: int = 0
    jaccard_sum: float = 0.0
    per_label_tp: list[int] = field(default_factory=list)
    per_label_pred_pos: list[int] = field(default_factory=list)
    per_label_true_pos: list[int] = field(default_factory=list)
    history: list[float] = field(default_factory=list)
    rolling: deque = field(default=None)

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")
        grow = self.n_labels - len(self.per_label_tp)
        for counter in (self.per_label_tp, self.per_label_pred_pos, self.per_label_true_pos):
            counter.extend([0] * grow)
        if self.rolling is None:
            self.rolling = deque(maxlen=self.window)

    def register_labels(self, n_labels: int) -> None:
        """Grow the label space; never shrinks."""
        if n_labels > self.n_labels:
            extra = n_labels - self.n_labels
            for counter in (self.per_label_tp, self.per_label_pred_pos, self.per_label_true_pos):
                counter.extend([0] * extra)
            self.n_labels = n_labels

    def rolling_value(self) -> float:
        if not self.rolling:
            return math.nan
        return sum(self.rolling) / len(self.rolling)


def prequential_update(state: PrequentialState, truth: LabelSet, pred: LabelSet) -> PrequentialState:
    """Advance every accumulator by one (truth, pred) pair, in place."""
    L = state.n_labels
    if truth.max_index() >= L or pred.max_index() >= L:
        raise LabelIndexError(
            f"label index beyond registered label count {L}: truth={truth}, pred={pred}"
        )
    t, p = truth.as_set(), pred.as_set()
    inter = t & p
    state.n += 1
    if t == p:
        state.exact_matches += 1
    state.hamming_errors += len(t ^ p)
    for i in inter:
        state.per_label_tp[i] += 1
    for i in t:
        state.per_label_true_pos[i] += 1
    for i in p:
        state.per_label_pred_pos[i] += 1
    union = len(t) + len(p) - len(inter)
    acc = 1.0 if union == 0 else len(inter) / union
    state.jaccard_sum += acc
    state.history.append(acc)
    state.rolling.append(acc)
    return state


def _f1(tp: int, true_pos: int, pred_pos: int) -> float:
    denom = true_pos + pred_pos
    return 0.0 if denom == 0 else 2.0 * tp / denom


def report(state: PrequentialState) -> MetricsReport:
    if state.n == 0:
        raise EmptyEvaluationError("no instances evaluated")
    L = state.n_labels
    macro = sum(
        _f1(tp, tr, pr)
        for tp, tr, pr in zip(state.per_label_tp, state.per_label_true_pos, state.per_label_pred_pos)
    ) / L
    micro = _f1(sum(state.per_label_tp), sum(state.per_label_true_pos), sum(state.per_label_pred_pos))
    return MetricsReport(
        subset_accuracy=state.exact_matches / state.n,
        sample_accuracy=state.jaccard_sum / state.n,
        hamming_loss=state.hamming_errors / (state.n * L),
        micro_f1=micro,
        macro_f1=macro,
    )


def moving_average(values, window: int) -> np.ndarray:
    if window < 1:
        raise ValueError("window must be >= 1")
    values = np.asarray(values, dtype=float)
    if len(values) < window:
        return np.empty(0)
    return np.lib.stride_tricks.sliding_window_view(values, window).mean(axis=1)


def rolling_series(state: PrequentialState, window: int) -> np.ndarray:
    """Mean sample accuracy over each trailing ``window`` instances.

    Entry ``k`` covers instances ``k .. k + window - 1``.
    """
    return moving_average(state.history, window)


def write_rolling_csv(path, series, window: int) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["instance_index", "rolling_sample_accuracy"])
        for k, value in enumerate(series):
            writer.writerow([k + window - 1, repr(float(value))])
