"""Constrained DTW, checked against exhaustive path enumeration."""

import math
import warnings

import numpy as np
import pytest

from sigvq import (
    DistanceCounter,
    DtwConfig,
    InvalidConfigError,
    InvalidInputError,
    TEMPLATE_COMBINERS,
    dtw_distance,
    multi_template_score,
    resolve_epsilon,
)
from sigvq.dtw import _band
from sigvq.signal import FeatureMatrix


# ---- oracles -------------------------------------------------------------------
#
# dtw_distance sweeps rows of a cost table where cell (i, j) extends
# (i-1, j), (i-1, j-1) or (i-1, j-2). The oracle instead enumerates every
# admissible path explicitly and takes the cheapest endpoint, which is
# tractable for tiny inputs and shares no code with the implementation.


def _local(a, b, i, j):
    acc = 0.0
    for u, w in zip(a[i], b[j]):
        acc = acc + (u - w) * (u - w)
    return math.sqrt(acc)


def hull_intervals(n_rows, n_cols, eps):
    """Slope-constrained region as inclusive 0-based [lo, hi] per row,
    derived with pure integer arithmetic: ceil(a/2) == (a + 1) // 2."""
    los, his = [], []
    for i in range(1, n_rows + 1):
        lo = max(1, 1 + (i - eps + 1) // 2, n_cols - eps - 2 * (n_rows - i))
        hi = min(n_cols, eps + 2 * (i - 1), n_cols - (n_rows - eps - i + 1) // 2)
        los.append(lo - 1)
        his.append(hi - 1)
    return los, his


def enumerate_paths(a, b, eps, band=None):
    """Cheapest relaxed-endpoint path cost / n_rows, by brute enumeration.

    Paths start on the first row (first eps columns) or the first column
    (rows 1..eps-1), advance one row per step moving 0..2 columns right, and
    may be scored at any cell of the last column in the final eps rows or of
    the last row in the final eps columns. band, when given, confines every
    visited cell to a per-row [lo, hi] window.
    """
    n_rows, n_cols = len(a), len(b)

    def in_band(i, j):
        if band is None:
            return True
        return band[0][i] <= j <= band[1][i]

    ends = {(i, n_cols - 1) for i in range(n_rows) if i >= n_rows - eps - 1}
    ends |= {(n_rows - 1, j) for j in range(max(0, n_cols - eps - 1), n_cols)}
    starts = [(0, j) for j in range(min(eps, n_cols))]
    starts += [(i, 0) for i in range(1, min(eps, n_rows))]

    best = math.inf
    stack = [(i, j, _local(a, b, i, j)) for (i, j) in starts if in_band(i, j)]
    while stack:
        i, j, cost = stack.pop()
        if (i, j) in ends and cost < best:
            best = cost
        for dj in (0, 1, 2):
            ni, nj = i + 1, j + dj
            if ni < n_rows and nj < n_cols and in_band(ni, nj):
                stack.append((ni, nj, cost + _local(a, b, ni, nj)))
    return best / n_rows if math.isfinite(best) else math.inf


def _quiet_dtw(a, b, config):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return dtw_distance(a, b, config)


# ---- epsilon -------------------------------------------------------------------


def test_resolve_epsilon_default_is_two_percent():
    assert resolve_epsilon(DtwConfig(), 454) == 9
    assert resolve_epsilon(DtwConfig(), 100) == 2
    assert resolve_epsilon(DtwConfig(), 10) == 1  # floor never drops below 1
    assert resolve_epsilon(DtwConfig(), 1) == 1
    assert resolve_epsilon(DtwConfig(epsilon=5), 454) == 5


def test_dtw_config_validation():
    with pytest.raises(InvalidConfigError):
        DtwConfig(epsilon=0)
    with pytest.raises(InvalidConfigError):
        DtwConfig(combiner="AVG")
    assert TEMPLATE_COMBINERS == ("MIN", "MEAN", "MEDIAN")


# ---- distances -----------------------------------------------------------------


def test_dtw_identical_sequences_cost_zero():
    rng = np.random.default_rng(5)
    for n in (1, 3, 10, 40):
        x = rng.normal(0.0, 1.0, (n, 3))
        assert dtw_distance(x, x) == 0.0
        assert dtw_distance(x, x, DtwConfig(use_parallelogram=False)) == 0.0


def test_dtw_hand_anchor_modes_differ():
    # the cheap path consumes both test rows on the first reference sample,
    # which the slope constraint forbids; the constrained best is forced
    # through the expensive diagonal
    test_sig = [[0.0], [0.0]]
    ref = [[1.0], [3.0]]
    relaxed = dtw_distance(test_sig, ref, DtwConfig(epsilon=1, use_parallelogram=False))
    constrained = dtw_distance(test_sig, ref, DtwConfig(epsilon=1))
    assert relaxed == 1.0  # (|0-1| + |0-1|) / 2
    assert constrained == 2.0  # (|0-1| + |0-3|) / 2


def test_dtw_relaxed_endpoint_skips_trailing_rows():
    # ends are allowed on the last reference column up to eps rows early
    test_sig = [[0.0], [1.0], [2.0]]
    ref = [[0.0]]
    cfg = DtwConfig(epsilon=1, use_parallelogram=False)
    assert dtw_distance(test_sig, ref, cfg) == 1.0 / 3.0


def test_dtw_unconstrained_matches_path_enumeration():
    rng = np.random.default_rng(2024)
    for trial in range(250):
        n_rows = int(rng.integers(1, 6))
        n_cols = int(rng.integers(1, 6))
        dim = int(rng.integers(1, 3))
        eps = int(rng.integers(1, n_cols + 3))
        a = rng.normal(0.0, 3.0, (n_rows, dim))
        b = rng.normal(0.0, 3.0, (n_cols, dim))
        cfg = DtwConfig(epsilon=eps, use_parallelogram=False)
        got = _quiet_dtw(a, b, cfg)
        expected = enumerate_paths(a, b, eps)
        assert got == expected, f"trial {trial}: {got} != {expected}"


def test_dtw_constrained_matches_hull_confined_enumeration():
    rng = np.random.default_rng(4096)
    for trial in range(250):
        n_rows = int(rng.integers(1, 6))
        n_cols = int(rng.integers(1, 6))
        dim = int(rng.integers(1, 3))
        eps = int(rng.integers(1, n_cols + 3))
        a = rng.normal(0.0, 3.0, (n_rows, dim))
        b = rng.normal(0.0, 3.0, (n_cols, dim))
        got = _quiet_dtw(a, b, DtwConfig(epsilon=eps))
        expected = enumerate_paths(a, b, eps, band=hull_intervals(n_rows, n_cols, eps))
        assert got == expected, f"trial {trial}: {got} != {expected}"


def test_band_matches_integer_hull():
    for n_rows in range(1, 10):
        for n_cols in range(1, 10):
            for eps in range(1, 5):
                lo, hi = _band(n_rows, n_cols, eps, True)
                exp_lo, exp_hi = hull_intervals(n_rows, n_cols, eps)
                assert list(lo) == exp_lo, (n_rows, n_cols, eps)
                assert list(hi) == exp_hi, (n_rows, n_cols, eps)
                flo, fhi = _band(n_rows, n_cols, eps, False)
                assert list(flo) == [0] * n_rows
                assert list(fhi) == [n_cols - 1] * n_rows


def test_dtw_infeasible_warns_and_returns_inf():
    # a single test row cannot reach the far end of a long reference
    with pytest.warns(UserWarning, match="no feasible warping path"):
        cost = dtw_distance([[0.0]], [[0.0], [1.0], [2.0], [3.0]], DtwConfig(epsilon=1))
    assert math.isinf(cost)


def test_dtw_counter_counts_band_cells():
    rng = np.random.default_rng(7)
    for constrained in (True, False):
        for n_rows, n_cols, eps in [(8, 11, 2), (10, 10, 1), (5, 9, 3), (9, 4, 2)]:
            a = rng.normal(0.0, 1.0, (n_rows, 2))
            b = rng.normal(0.0, 1.0, (n_cols, 2))
            counter = DistanceCounter()
            _quiet_dtw(a, b, DtwConfig(epsilon=eps, use_parallelogram=constrained))
            lo, hi = _band(n_rows, n_cols, eps, constrained)
            widths = [max(0, h - l + 1) for l, h in zip(lo, hi)]
            widths[0] = max(0, min(hi[0], eps - 1) - lo[0] + 1)
            counter2 = DistanceCounter()
            dtw_distance(a, b, DtwConfig(epsilon=eps, use_parallelogram=constrained), counter2)
            assert counter2.distance_evals == sum(widths)


def test_dtw_validation():
    with pytest.raises(InvalidInputError):
        dtw_distance([[0.0, 1.0]], [[0.0]])  # dimension mismatch
    with pytest.raises(InvalidInputError):
        dtw_distance(np.zeros((0, 2)), np.zeros((3, 2)))
    with pytest.raises(InvalidInputError):
        dtw_distance([[math.nan]], [[0.0]])


def test_dtw_accepts_feature_matrices():
    rng = np.random.default_rng(11)
    a = rng.normal(0.0, 1.0, (20, 4))
    b = rng.normal(0.0, 1.0, (24, 4))
    ma = FeatureMatrix(a, "FS2")
    mb = FeatureMatrix(b, "FS2")
    assert dtw_distance(ma, mb) == dtw_distance(a, b)


# ---- multi-template ------------------------------------------------------------


def test_multi_template_anchor():
    test_sig = [[0.0]]
    refs = [[[float(k)]] for k in range(1, 6)]
    assert multi_template_score(test_sig, refs, DtwConfig(combiner="MIN")) == 1.0
    assert multi_template_score(test_sig, refs, DtwConfig(combiner="MEAN")) == 3.0
    assert multi_template_score(test_sig, refs, DtwConfig(combiner="MEDIAN")) == 3.0


def test_multi_template_default_is_min():
    test_sig = [[0.0]]
    refs = [[[2.0]], [[7.0]]]
    assert multi_template_score(test_sig, refs) == 2.0


def test_multi_template_rejects_empty_references():
    with pytest.raises(InvalidInputError):
        multi_template_score([[0.0]], [])


def test_multi_template_counter_accumulates():
    rng = np.random.default_rng(13)
    test_sig = rng.normal(0.0, 1.0, (12, 2))
    refs = [rng.normal(0.0, 1.0, (15, 2)) for _ in range(3)]
    counter = DistanceCounter()
    multi_template_score(test_sig, refs, DtwConfig(), counter)
    single = DistanceCounter()
    dtw_distance(test_sig, refs[0], DtwConfig(), single)
    assert counter.distance_evals == 3 * single.distance_evals
