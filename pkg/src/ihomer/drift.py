"""Statistical primitives: Hoeffding bounds, ADWIN and Welch's t-test."""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import betainc


def hoeffding_epsilon(value_range: float, delta: float, n: int) -> float:
    """Deviation bound of an empirical mean of ``n`` samples with range ``value_range``."""
    if value_range <= 0:
        raise ValueError("range must be positive")
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1)")
    if n < 1:
        raise ValueError("n must be >= 1")
    return math.sqrt(value_range * value_range * math.log(1.0 / delta) / (2.0 * n))


def hoeffding_epsilon_tree(n_label_sets: int, delta: float, n: int) -> float:
    """Split bound for a multi-label tree node; the range is log2 of the known label-set count."""
    if n_label_sets < 2:
        raise ValueError("a node with fewer than two known label sets admits no split")
    return hoeffding_epsilon(math.log2(n_label_sets), delta, n)


@dataclass(frozen=True)
class ErrorSummary:
    mean: float
    variance: float
    count: int

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError("variance must be non-negative")
        if self.count < 1:
            raise ValueError("count must be >= 1")


def welch_t(a: ErrorSummary, b: ErrorSummary) -> tuple[float, float]:
    """Welch statistic for ``a.mean - b.mean`` and its Welch-Satterthwaite dof."""
    sa = a.variance / a.count
    sb = b.variance / b.count
    diff = a.mean - b.mean
    se2 = sa + sb
    if se2 == 0.0:
        dof = float(a.count + b.count - 2)
        if diff == 0.0:
            return 0.0, dof
        return math.copysign(math.inf, diff), dof
    t = diff / math.sqrt(se2)
    denom = 0.0
    if a.count > 1:
        denom += sa * sa / (a.count - 1)
    if b.count > 1:
        denom += sb * sb / (b.count - 1)
    dof = se2 * se2 / denom if denom > 0 else float(a.count + b.count - 2)
    return t, dof


def student_t_sf(t: float, dof: float) -> float:
    """Upper tail P(T > t) of Student's t via the regularized incomplete beta."""
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    tail = 0.5 * betainc(dof / 2.0, 0.5, dof / (dof + t * t))
    return tail if t > 0 else 1.0 - tail


def welch_significant(t: float, dof: float, delta: float) -> bool:
    """One-sided test: is ``t`` significantly positive at level ``delta``?"""
    if dof < 1:
        raise ValueError("dof must be >= 1")
    return student_t_sf(t, dof) < delta


def alternate_bound(err_main: float, err_alt: float, w_main: int, w_alt: int, delta: float) -> float:
    """Hoeffding bound used when comparing a subtree with its alternate."""
    if w_main < 1 or w_alt < 1:
        return math.inf
    val = 2.0 * err_main * (1.0 - err_alt) * (w_main + w_alt) * math.log(2.0 / delta) / (w_main * w_alt)
    return math.sqrt(max(val, 0.0))


class ADWIN:
    """Adaptive windowing change detector over values in [0, 1].

    The window is summarised by an exponential histogram: row ``i`` holds up
    to ``max_buckets`` buckets of ``2**i`` values, each stored as
    ``(total, variance)``.  Cut points are checked every ``clock`` updates.
    """

    def __init__(self, delta=0.002, max_buckets=5, clock=32, min_window=10,
                 min_sub_window=5, warning_factor=10.0):
        if not 0 < delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        self.delta = delta
        self.delta_warning = min(delta * warning_factor, 0.999)
        self.max_buckets = max_buckets
        self.clock = clock
        self.min_window = min_window
        self.min_sub_window = min_sub_window
        self.reset()

    def reset(self):
        # rows[i] is ordered oldest -> newest
        self.rows: list[list[list[float]]] = [[]]
        self.width = 0
        self.total = 0.0
        self._variance = 0.0  # sum of squared deviations
        self.ticks = 0
        self.n_detections = 0
        self.drift_flag = False
        self.warning_flag = False
        self.change_sign = 0  # +1 when the newer sub-window mean is higher

    @property
    def estimation(self) -> float:
        return self.total / self.width if self.width else 0.0

    @property
    def variance(self) -> float:
        return max(self._variance / self.width, 0.0) if self.width else 0.0

    def summary(self) -> ErrorSummary | None:
        if self.width == 0:
            return None
        return ErrorSummary(self.estimation, self.variance, self.width)

    def bucket_count_total(self) -> int:
        return sum(len(row) << i for i, row in enumerate(self.rows))

    def update(self, value: float) -> tuple[bool, bool]:
        self._insert(float(value))
        self.ticks += 1
        self.drift_flag = False
        self.warning_flag = False
        self.change_sign = 0
        if self.ticks % self.clock == 0 and self.width > self.min_window:
            self.drift_flag, self.warning_flag = self._check()
            if self.drift_flag:
                self.n_detections += 1
        return self.drift_flag, self.warning_flag

    def _insert(self, value: float):
        if self.width > 0:
            mean = self.total / self.width
            self._variance += self.width * (value - mean) ** 2 / (self.width + 1)
        self.width += 1
        self.total += value
        self.rows[0].append([value, 0.0])
        self._compress()

    def _compress(self):
        i = 0
        while i < len(self.rows) and len(self.rows[i]) > self.max_buckets:
            if i + 1 == len(self.rows):
                self.rows.append([])
            row = self.rows[i]
            (t1, v1), (t2, v2) = row[0], row[1]
            size = 1 << i
            u1, u2 = t1 / size, t2 / size
            merged = [t1 + t2, v1 + v2 + size * size * (u1 - u2) ** 2 / (2 * size)]
            del row[:2]
            self.rows[i + 1].append(merged)
            i += 1

    def _drop_oldest(self):
        i = len(self.rows) - 1
        while not self.rows[i]:
            i -= 1
        t1, v1 = self.rows[i].pop(0)
        n1 = 1 << i
        self.width -= n1
        self.total -= t1
        if self.width > 0:
            u1 = t1 / n1
            self._variance -= v1 + n1 * self.width * (u1 - self.total / self.width) ** 2 / (n1 + self.width)
            self._variance = max(self._variance, 0.0)
        else:
            self._variance = 0.0
        while len(self.rows) > 1 and not self.rows[-1]:
            self.rows.pop()

    def _cut_excess(self, delta_drift: float, delta_warn: float) -> tuple[bool, bool]:
        """Scan cut points oldest-first; report whether either bound is exceeded."""
        n = self.width
        var = self.variance
        log_term = math.log(max(math.log(n), 1e-12))
        dd_drift = math.log(2.0 / delta_drift) + log_term
        dd_warn = math.log(2.0 / delta_warn) + log_term
        n0, t0 = 0, 0.0
        warn = False
        for i in range(len(self.rows) - 1, -1, -1):
            size = 1 << i
            for total, _ in self.rows[i]:
                n0 += size
                t0 += total
                n1 = n - n0
                if n1 < self.min_sub_window:
                    return False, warn
                if n0 < self.min_sub_window:
                    continue
                signed = (self.total - t0) / n1 - t0 / n0
                diff = abs(signed)
                m = 1.0 / (n0 - self.min_sub_window + 1) + 1.0 / (n1 - self.min_sub_window + 1)
                if diff > math.sqrt(2 * m * var * dd_drift) + 2.0 / 3.0 * dd_drift * m:
                    self.change_sign = 1 if signed > 0 else -1
                    return True, True
                if not warn and diff > math.sqrt(2 * m * var * dd_warn) + 2.0 / 3.0 * dd_warn * m:
                    warn = True
                    self.change_sign = 1 if signed > 0 else -1
        return False, warn

    def _check(self) -> tuple[bool, bool]:
        drift, warn = self._cut_excess(self.delta, self.delta_warning)
        if not drift:
            return False, warn
        sign = self.change_sign
        while self.width > self.min_window:
            still, _ = self._cut_excess(self.delta, self.delta_warning)
            if not still:
                break
            self._drop_oldest()
        self.change_sign = sign
        return True, True
