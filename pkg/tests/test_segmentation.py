import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from hrvbands.segmentation import (REPORT_HEADER, ContrastTable, PenaltyPath, optimal_partition,
                                   parse_clock, penalty_path, report_csv, report_rows,
                                   report_text, segment, segment_contrast,
                                   select_segmentation, stability_intervals, variance_floor,
                                   index_to_clock)
from hrvbands.synth import random_piecewise_gaussian
from oracles import brute_force_partition, clock, naive_contrast


# contrast

def test_contrast_worked_example():
    assert segment_contrast([0, 2, 0, 2], 0, 4, min_segment_length=1) == pytest.approx(4.0)


def test_constant_segment_uses_floor():
    x = np.array([5.0, 5, 5, 5, 1, 9])
    floor = variance_floor(x)
    assert segment_contrast(x, 0, 4, 1) == pytest.approx(4 * math.log(floor) + 4)


def test_floor_rule():
    assert variance_floor([1.0, 1.0]) == 1e-12
    assert variance_floor([0.0, 2.0]) == pytest.approx(1e-12)


def test_contrast_too_short():
    with pytest.raises(ValueError):
        segment_contrast(np.arange(20.0), 0, 5)
    with pytest.raises(ValueError):
        segment_contrast(np.arange(20.0), 5, 30, 1)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 60), st.floats(-1e3, 1e3),
       st.floats(1e-3, 1e3))
def test_prefix_sums_match_two_pass(seed, n, loc, scale):
    rng = np.random.default_rng(seed)
    x = loc + scale * rng.standard_normal(n)
    t = ContrastTable(x, 1)
    lo = int(rng.integers(0, n - 1))
    hi = int(rng.integers(lo + 1, n + 1))
    ref = naive_contrast(x[lo:hi], t.floor)
    assert t.contrast(lo, hi) == pytest.approx(ref, rel=1e-9, abs=1e-9)


# optimal partition

def test_k1_is_whole_series():
    x = np.random.default_rng(0).normal(size=50)
    s = optimal_partition(x, 1)
    assert s.change_points == ()
    assert s.contrast == pytest.approx(segment_contrast(x, 0, 50) / 50)


def test_planted_mean_shift():
    rng = np.random.default_rng(1)
    x = np.r_[rng.normal(0, 1, 20), rng.normal(5, 1, 20)]
    assert optimal_partition(x, 2).change_points == (20,)
    best = min(range(10, 31), key=lambda t: segment_contrast(x, 0, t) + segment_contrast(x, t, 40))
    assert best == 20


def test_infeasible_k():
    with pytest.raises(ValueError):
        optimal_partition(np.zeros(25), 3)
    with pytest.raises(ValueError):
        optimal_partition(np.zeros(25), 0)


def series_strategy():
    return st.tuples(st.integers(0, 2 ** 32 - 1), st.integers(4, 30), st.integers(1, 4),
                     st.integers(1, 4), st.booleans())


def _draw(seed, n, discrete):
    rng = np.random.default_rng(seed)
    if discrete:
        return rng.integers(0, 3, n).astype(float)
    return rng.normal(size=n) * rng.uniform(0.5, 3, n)


@settings(max_examples=150, deadline=None)
@given(series_strategy())
def test_dp_equals_brute_force(params):
    seed, n, K, m, discrete = params
    assume(n >= K * m)
    x = _draw(seed, n, discrete)
    s = optimal_partition(x, K, m)
    J, tau = brute_force_partition(x, K, m, variance_floor(x))
    assert s.change_points == tau
    assert s.contrast == pytest.approx(J / n, rel=1e-9, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(20, 120), st.integers(1, 5))
def test_segmentation_invariants(seed, n, m):
    x = np.random.default_rng(seed).normal(size=n)
    # n >= 2 * k_max * m guarantees a splittable segment, hence monotone J
    k_max = max(1, min(6, n // (2 * m)))
    path = penalty_path(x, k_max, m)
    floor = variance_floor(x)
    for K in range(1, path.k_max + 1):
        s = path.segmentation(K)
        edges = (0, *s.change_points, n)
        assert all(a < b for a, b in zip(edges, edges[1:]))
        assert s.sizes.sum() == n and s.sizes.min() >= m
        assert np.all(s.variances >= floor)
        assert s.K == K
    assert np.all(np.diff(path.J) <= 1e-12 * np.abs(path.J[:-1]).max())


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(30, 80), st.integers(2, 4),
       st.floats(0.01, 100.0))
def test_scale_equivariance(seed, n, K, c):
    x = np.random.default_rng(seed).normal(size=n)
    a = optimal_partition(x, K, 3)
    b = optimal_partition(c * x, K, 3)
    assert a.change_points == b.change_points
    assert b.contrast == pytest.approx(a.contrast + 2 * math.log(c), rel=1e-9, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(30, 80), st.integers(2, 4))
def test_reversal(seed, n, K):
    x = np.random.default_rng(seed).normal(size=n)
    a = optimal_partition(x, K, 3)
    b = optimal_partition(x[::-1], K, 3)
    assert b.change_points == tuple(sorted(n - t for t in a.change_points))


def test_monotonicity_needs_room_to_split():
    # with every optimal segment shorter than 2m, one more segment can cost more
    x = np.random.default_rng(1).normal(size=20)
    J = penalty_path(x, 6, 3).J
    assert J[5] > J[4]


def test_segment_stats():
    x = np.r_[np.zeros(10) + 1.0, np.arange(10.0)]
    s = optimal_partition(x, 2, 5)
    assert s.change_points == (10,)
    np.testing.assert_allclose(s.means, [1.0, 4.5])
    assert s.variances[0] == variance_floor(x)
    assert s.variances[1] == pytest.approx(np.var(np.arange(10.0)))
    assert s.bounds == [(0, 10), (10, 20)]


# penalty path and selection

def test_strictly_convex_path_all_vertices():
    J = np.array([10.0, 6.0, 3.0, 1.0, 0.0])
    hull, iv = stability_intervals(J)
    assert hull == (1, 2, 3, 4, 5)
    assert iv[1] == (4.0, math.inf)
    assert iv[3] == (2.0, 3.0)
    assert iv[5] == (0.0, 1.0)
    assert all(hi > lo for lo, hi in iv.values())


def test_affine_path_degenerates():
    J = np.array([8.0, 6.0, 4.0, 2.0])
    hull, iv = stability_intervals(J)
    assert hull == (1, 4)
    assert iv[1] == (2.0, math.inf) and iv[4] == (0.0, 2.0)


def test_intervals_tile_half_line():
    J = np.sort(np.random.default_rng(2).uniform(0, 10, 12))[::-1]
    hull, iv = stability_intervals(J)
    bounds = [iv[k] for k in hull]
    assert bounds[0][1] == math.inf and bounds[-1][0] == 0.0
    for (lo_a, _), (_, hi_b) in zip(bounds, bounds[1:]):
        assert lo_a == pytest.approx(hi_b)


def _planted_two_change(seed, n=2000):
    rng = np.random.default_rng(seed)
    return np.r_[rng.normal(0, 1, 700), rng.normal(6, 1, 600), rng.normal(-2, 2, n - 1300)]


def test_two_change_k3_widest():
    path = penalty_path(_planted_two_change(0), 12)
    lengths = {k: math.log(hi / lo) for k, (lo, hi) in path.intervals.items()
               if 2 <= k < path.k_max}
    assert max(lengths, key=lengths.get) == 3


def test_select_planted_two_change():
    s = select_segmentation(penalty_path(_planted_two_change(1), 12))
    assert s.K == 3
    assert abs(s.change_points[0] - 700) <= 20 and abs(s.change_points[1] - 1300) <= 20


def test_select_noise_gives_one():
    x = np.random.default_rng(3).normal(size=1000)
    assert segment(x).K == 1


def test_select_dominant_vertex():
    J = np.array([10.0, 2.0, 1.9, 1.85, 1.83])
    hull, iv = stability_intervals(J)
    path = PenaltyPath(J, tuple(optimal_partition(np.arange(50.0), k, 5) for k in range(1, 6)),
                       iv, hull)
    assert select_segmentation(path).K == 2


def test_constant_series_selects_one():
    assert segment(np.full(200, 3.0)).K == 1


def test_k_max_capped_by_length():
    path = penalty_path(np.random.default_rng(0).normal(size=35), 20, 10)
    assert path.k_max == 3


def test_false_alarm_rate_small_sample():
    rng = np.random.default_rng(11)
    hits = sum(segment(rng.normal(size=1000)).K == 1 for _ in range(40))
    assert hits >= 36


def test_planted_random_changes_small_sample():
    rng = np.random.default_rng(12)
    ok = 0
    for _ in range(10):
        x, tau = random_piecewise_gaussian(rng, n=5000, n_changes=int(rng.integers(1, 4)))
        s = segment(x)
        ok += s.K == len(tau) + 1 and all(abs(a - b) <= 50 for a, b in zip(s.change_points, tau))
    assert ok >= 9


# clock times

def test_reference_clock_pairs():
    assert index_to_clock(28220, 1.0, "05:50:30") == "13:40:50"
    assert index_to_clock(71048, 1.0, "05:50:30") == "01:34:38"
    assert index_to_clock(0, 1.0, "00:00:00") == "00:00:00"


def test_clock_styles_and_parsing():
    assert index_to_clock(28220, 1.0, "05:50:30", style="prime") == "13h40'50''"
    assert parse_clock("13h40'50''") == parse_clock("13:40:50") == 49250
    assert parse_clock("5:50") == 21000


@pytest.mark.parametrize("bad", ["", "25:00:00", "12:61:00", "noon", "12-30-00"])
def test_malformed_start(bad):
    with pytest.raises(ValueError):
        index_to_clock(10, 1.0, bad)


def test_negative_index():
    with pytest.raises(ValueError):
        index_to_clock(-1, 1.0, "00:00:00")


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(0, 86399), st.sampled_from([0.5, 1.0, 2.0]))
def test_clock_matches_modular_oracle(index, start, b_step):
    assert index_to_clock(index, b_step, start) == clock(start + index * b_step)


# report

def test_report_rows_and_formats():
    rng = np.random.default_rng(4)
    x = np.r_[rng.normal(1, 0.1, 100), rng.normal(2, 0.1, 100)]
    s = optimal_partition(x, 2)
    rows = report_rows(s, "hf", index_offset=40, b_step=1.0, recording_start="05:50:30")
    assert len(rows) == 1
    idx, clk, band, mb, ma, vb, va = rows[0]
    assert idx == 140 and clk == index_to_clock(140, 1.0, "05:50:30") and band == "hf"
    assert mb == pytest.approx(s.means[0]) and va == pytest.approx(s.variances[1])
    text = report_csv(rows).splitlines()
    assert text[0] == REPORT_HEADER and text[1].startswith("140,05:52:50,hf,")
    assert "index 140 (05:52:50)" in report_text(rows, "hf")
    assert report_rows(s, "hf")[0][1] == ""
