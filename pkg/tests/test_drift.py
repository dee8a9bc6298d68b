import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from ihomer.drift import (ADWIN, ErrorSummary, alternate_bound, hoeffding_epsilon, hoeffding_epsilon_tree,
                          student_t_sf, welch_significant, welch_t)

# 40-digit evaluations, frozen
EPS_R1_D005_N100 = 0.12238734153404082732
EPS_TREE_L2_D005_N200 = 0.08654091913011426691


def test_hoeffding_reference_values():
    assert hoeffding_epsilon(1.0, 0.05, 100) == pytest.approx(EPS_R1_D005_N100, rel=1e-14)
    assert hoeffding_epsilon_tree(2, 0.05, 200) == pytest.approx(EPS_TREE_L2_D005_N200, rel=1e-14)


def test_hoeffding_limits_and_scaling():
    assert hoeffding_epsilon(1.0, 1.0, 10) == 0.0
    e = hoeffding_epsilon(2.5, 1e-3, 400)
    assert hoeffding_epsilon(2.5, 1e-3, 800) == pytest.approx(e / math.sqrt(2), rel=1e-14)
    assert hoeffding_epsilon_tree(7, 0.01, 400) == pytest.approx(hoeffding_epsilon_tree(7, 0.01, 100) / 2, rel=1e-14)
    assert hoeffding_epsilon_tree(2, 0.3, 17) == hoeffding_epsilon(1.0, 0.3, 17)


def test_tree_bound_needs_two_label_sets():
    with pytest.raises(ValueError):
        hoeffding_epsilon_tree(1, 0.05, 100)


@given(st.floats(0.01, 10), st.floats(1e-9, 0.99), st.integers(1, 10**6), st.integers(1, 10**6))
def test_hoeffding_monotone_in_n(R, delta, n1, n2):
    if n1 == n2:
        return
    lo, hi = sorted((n1, n2))
    assert hoeffding_epsilon(R, delta, lo) > hoeffding_epsilon(R, delta, hi)


@given(st.floats(0.01, 10), st.floats(1e-9, 0.98), st.integers(1, 10**6))
def test_hoeffding_monotone_in_delta(R, delta, n):
    assert hoeffding_epsilon(R, delta, n) > hoeffding_epsilon(R, delta * 1.01, n)


def test_welch_worked_example():
    a = ErrorSummary(0.4, 0.04, 100)
    b = ErrorSummary(0.3, 0.09, 100)
    t, dof = welch_t(a, b)
    assert t == pytest.approx(0.1 / math.sqrt(0.0013), rel=1e-12)
    assert dof == pytest.approx(172.48453608247422680, rel=1e-12)
    t2, dof2 = welch_t(b, a)
    assert t2 == -t and dof2 == dof
    assert welch_significant(t, dof, 0.05)
    assert welch_significant(2.77, 165, 0.05)


def test_welch_degenerate_variances():
    z = ErrorSummary(0.2, 0.0, 10)
    assert welch_t(z, z) == (0.0, 18.0)
    t, _ = welch_t(ErrorSummary(0.3, 0.0, 10), z)
    assert t == math.inf
    assert welch_significant(math.inf, 5, 0.05)
    assert not welch_significant(-math.inf, 5, 0.05)


def test_welch_identical_summaries():
    s = ErrorSummary(0.31, 0.02, 57)
    assert welch_t(s, s)[0] == 0.0
    assert not welch_significant(0.0, 10, 0.4)


def test_student_tail_matches_scipy():
    rng = np.random.default_rng(0)
    for _ in range(200):
        t = float(rng.normal(0, 3))
        dof = float(rng.uniform(1, 500))
        assert student_t_sf(t, dof) == pytest.approx(stats.t.sf(t, dof), rel=1e-9, abs=1e-15)


def test_significance_requires_dof():
    with pytest.raises(ValueError):
        welch_significant(1.0, 0.5, 0.05)


@given(st.floats(0, 1), st.floats(0, 1), st.integers(1, 10**5), st.integers(1, 10**5), st.floats(1e-6, 0.5))
def test_alternate_bound_symmetric_and_decreasing(e, e_alt, w, w_alt, delta):
    b = alternate_bound(e, e_alt, w, w_alt, delta)
    assert b == pytest.approx(alternate_bound(e, e_alt, w_alt, w, delta))
    assert alternate_bound(e, e_alt, 2 * w, 2 * w_alt, delta) <= b


def test_adwin_constant_stream_never_drifts():
    d = ADWIN(0.002)
    assert not any(d.update(0.0)[0] for _ in range(10_000))
    assert d.estimation == 0.0
    assert d.width == 10_000


def test_adwin_detects_abrupt_change():
    delays = []
    for seed in range(100):
        rng = np.random.default_rng(seed)
        d = ADWIN(0.002)
        false_alarm = False
        for _ in range(2000):
            false_alarm |= d.update(float(rng.random() < 0.1))[0]
        delay = None
        for k in range(2000):
            if d.update(float(rng.random() < 0.9))[0]:
                delay = k
                break
        delays.append(None if false_alarm else delay)
    detected = sum(1 for x in delays if x is not None and x <= 500)
    assert detected >= 95


def test_adwin_drops_old_window_on_drift():
    rng = np.random.default_rng(1)
    d = ADWIN(0.002)
    for _ in range(1000):
        d.update(float(rng.random() < 0.1))
    before = d.width
    for _ in range(500):
        width = d.width
        drift, _ = d.update(float(rng.random() < 0.9))
        if drift:
            assert d.width < width + 1
            assert d.width < before
            assert d.change_sign == 1
            break
    else:
        pytest.fail("no drift detected")


def test_adwin_reports_decrease_direction():
    d = ADWIN(0.002)
    for _ in range(1000):
        d.update(1.0)
    for _ in range(500):
        if d.update(0.0)[0]:
            assert d.change_sign == -1
            break
    else:
        pytest.fail("no drift detected")


@given(st.lists(st.floats(0, 1), min_size=1, max_size=400))
def test_adwin_mean_within_range(values):
    d = ADWIN(0.01)
    for v in values:
        d.update(v)
    # the retained window is a suffix of the input
    kept = values[-d.width:]
    assert min(kept) - 1e-9 <= d.estimation <= max(kept) + 1e-9
    assert d.bucket_count_total() == d.width
    assert d.variance >= 0


def test_adwin_variance_matches_window():
    rng = np.random.default_rng(5)
    values = rng.random(300)
    d = ADWIN(1e-9)
    for v in values:
        d.update(v)
    assert d.width == 300
    assert d.estimation == pytest.approx(values.mean())
    assert d.variance == pytest.approx(values.var(), rel=1e-9)


def test_adwin_rejects_bad_delta():
    with pytest.raises(ValueError):
        ADWIN(0.0)
