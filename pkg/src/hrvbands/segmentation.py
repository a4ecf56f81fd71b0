"""
Change-point segmentation of a real series under a Gaussian contrast.

A candidate partition ``0 = tau_0 < tau_1 < ... < tau_K = n`` is scored by

    J(tau) = (1/n) * sum_k [ n_k * log(var_k) + n_k ]

with segment-local mean and (floored) variance. The exact minimiser for
each K is found by dynamic programming; K is then chosen from the lower
convex hull of ``K -> J_K`` by comparing how long each K stays optimal
as the linear penalty weight ``beta`` varies.
"""
from __future__ import annotations

import io
import math
import re
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from . import _dp

MIN_SEGMENT_LENGTH = 10
K_MAX = 20
STABILITY_FRACTION = 0.1
FLOOR_FACTOR = 1e-12
DAY = 86400

REPORT_HEADER = ("index,clock_time,band,segment_mean_before,segment_mean_after,"
                 "segment_var_before,segment_var_after")


def variance_floor(x) -> float:
    v = float(np.var(np.asarray(x, dtype=float)))
    return FLOOR_FACTOR * (v if v > 0 else 1.0)


class ContrastTable:
    """
    Prefix sums of a series for O(1) segment contrasts.

    The series is centred on its global mean before accumulation, which
    keeps the variance differences well conditioned.
    """

    def __init__(self, series, min_segment_length: int = MIN_SEGMENT_LENGTH,
                 floor: Optional[float] = None):
        x = np.asarray(series, dtype=float)
        if x.ndim != 1 or len(x) == 0:
            raise ValueError("series must be a non-empty 1-D array")
        if not np.all(np.isfinite(x)):
            raise ValueError("series contains non-finite values")
        if int(min_segment_length) < 1:
            raise ValueError("min_segment_length must be >= 1")
        self.n = len(x)
        self.min_segment_length = int(min_segment_length)
        self.floor = variance_floor(x) if floor is None else float(floor)
        self.offset = float(np.mean(x))
        xc = x - self.offset
        self.c1 = np.concatenate([[0.0], np.cumsum(xc)])
        self.c2 = np.concatenate([[0.0], np.cumsum(xc * xc)])

    def _check(self, lo, hi):
        if not 0 <= lo < hi <= self.n:
            raise ValueError(f"segment [{lo}, {hi}) outside [0, {self.n})")
        if hi - lo < self.min_segment_length:
            raise ValueError(
                f"segment [{lo}, {hi}) shorter than min_segment_length={self.min_segment_length}")

    def mean(self, lo: int, hi: int) -> float:
        return self.offset + (self.c1[hi] - self.c1[lo]) / (hi - lo)

    def variance(self, lo: int, hi: int) -> float:
        """Biased variance of ``[lo, hi)``, clamped below at the floor."""
        n = hi - lo
        s1 = self.c1[hi] - self.c1[lo]
        v = (self.c2[hi] - self.c2[lo] - s1 * s1 / n) / n
        return max(v, self.floor)

    def contrast(self, lo: int, hi: int) -> float:
        self._check(lo, hi)
        n = hi - lo
        return n * math.log(self.variance(lo, hi)) + n


def segment_contrast(series, lo: int, hi: int,
                     min_segment_length: int = MIN_SEGMENT_LENGTH,
                     floor: Optional[float] = None) -> float:
    """Contrast of ``series[lo:hi]``; the floor defaults to the global-variance rule."""
    return ContrastTable(series, min_segment_length, floor).contrast(lo, hi)


@dataclass(frozen=True, eq=False)
class Segmentation:
    n: int
    change_points: tuple
    sizes: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    contrast: float

    @property
    def K(self) -> int:
        return len(self.change_points) + 1

    @property
    def bounds(self) -> List[tuple]:
        edges = (0, *self.change_points, self.n)
        return list(zip(edges[:-1], edges[1:]))


def _build(table: ContrastTable, tau, total: float) -> Segmentation:
    edges = (0, *[int(t) for t in tau], table.n)
    pairs = list(zip(edges[:-1], edges[1:]))
    sizes = np.array([b - a for a, b in pairs], dtype=np.int64)
    means = np.array([table.mean(a, b) for a, b in pairs])
    variances = np.array([table.variance(a, b) for a, b in pairs])
    return Segmentation(table.n, tuple(edges[1:-1]), sizes, means, variances, total / table.n)


def _table(series, min_segment_length, kmax):
    t = series if isinstance(series, ContrastTable) else ContrastTable(series, min_segment_length)
    if kmax < 1:
        raise ValueError("K must be >= 1")
    if t.n < kmax * t.min_segment_length:
        raise ValueError(
            f"K={kmax} infeasible: n={t.n} < K * min_segment_length={kmax * t.min_segment_length}")
    G = _dp.suffix_table(t.c1, t.c2, kmax, t.min_segment_length, t.floor)
    return t, G


def optimal_partition(series, K: int, min_segment_length: int = MIN_SEGMENT_LENGTH) -> Segmentation:
    """
    Exact minimiser of the contrast over partitions into ``K`` segments.

    Among equal-cost partitions (relative tolerance 1e-12) the one with
    the lexicographically smallest change-point vector is returned.
    """
    K = int(K)
    t, G = _table(series, min_segment_length, K)
    tau = _dp.backtrack(t.c1, t.c2, G, K, t.min_segment_length, t.floor)
    return _build(t, tau, G[0, K])


@dataclass(frozen=True, eq=False)
class PenaltyPath:
    """
    ``J[K-1]`` is the optimal contrast with K segments. ``intervals``
    maps each lower-hull vertex K to ``(beta_lo, beta_hi)``, the range of
    penalty weights over which K minimises ``J_K + beta * K``.
    """
    J: np.ndarray
    segmentations: tuple
    intervals: dict
    hull: tuple

    @property
    def k_max(self) -> int:
        return len(self.J)

    def segmentation(self, K: int) -> Segmentation:
        return self.segmentations[K - 1]


def stability_intervals(J: Sequence[float]):
    """
    Lower convex hull of ``(K, J_K)``, K = 1..len(J), and the beta range
    of each vertex. Collinear interior points are not vertices.

    Returns ``(hull, intervals)``.
    """
    J = np.asarray(J, dtype=float)
    hull: List[int] = []
    for i in range(len(J)):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            # b lies on or above the chord a -> i
            if (J[b] - J[a]) * (i - a) >= (J[i] - J[a]) * (b - a):
                hull.pop()
            else:
                break
        hull.append(i)
    intervals = {}
    for j, h in enumerate(hull):
        hi = math.inf if j == 0 else (J[hull[j - 1]] - J[h]) / (h - hull[j - 1])
        lo = 0.0 if j == len(hull) - 1 else (J[h] - J[hull[j + 1]]) / (hull[j + 1] - h)
        intervals[h + 1] = (max(lo, 0.0), hi)
    return tuple(k + 1 for k in hull), intervals


def penalty_path(series, k_max: int = K_MAX,
                 min_segment_length: int = MIN_SEGMENT_LENGTH) -> PenaltyPath:
    """Optimal segmentations for K = 1..k_max from a single DP pass."""
    t = series if isinstance(series, ContrastTable) else ContrastTable(series, min_segment_length)
    k_max = min(int(k_max), t.n // t.min_segment_length)
    t, G = _table(t, None, k_max)
    J = G[0, 1:k_max + 1] / t.n
    segs = tuple(
        _build(t, _dp.backtrack(t.c1, t.c2, G, K, t.min_segment_length, t.floor), G[0, K])
        for K in range(1, k_max + 1))
    hull, intervals = stability_intervals(J)
    J.setflags(write=False)
    return PenaltyPath(J, segs, intervals, hull)


def select_segmentation(path: PenaltyPath,
                        stability_fraction: float = STABILITY_FRACTION) -> Segmentation:
    """
    Pick K from the penalty path.

    Candidates are hull vertices with ``2 <= K < k_max``; the largest K
    is excluded because its interval reaches down to zero only for lack
    of larger competitors. Interval lengths are compared on a log scale,
    ``log(beta_hi / beta_lo)``, ties going to the smaller K. When the
    winner's ``beta_lo`` is at least ``stability_fraction`` times the
    K = 1 threshold the extra segments are not worth it and K = 1 is
    returned.
    """
    iv = path.intervals
    b1 = iv[1][0]
    best, best_len = None, -math.inf
    for K in sorted(iv):
        if K < 2 or K >= path.k_max:
            continue
        lo, hi = iv[K]
        length = math.inf if lo <= 0 else math.log(hi / lo)
        if length > best_len:
            best, best_len = K, length
    # J_1 - J_2 at rounding level: nothing to gain from any split
    if b1 <= 1e-9 * max(1.0, abs(float(path.J[0]))):
        return path.segmentation(1)
    if best is None or iv[best][0] >= stability_fraction * b1:
        return path.segmentation(1)
    return path.segmentation(best)


def segment(series, k_max: int = K_MAX, min_segment_length: int = MIN_SEGMENT_LENGTH,
            stability_fraction: float = STABILITY_FRACTION) -> Segmentation:
    return select_segmentation(penalty_path(series, k_max, min_segment_length), stability_fraction)


# clock times

_CLOCK_RE = re.compile(
    r"^\s*(\d{1,2})\s*(?::|h)\s*(\d{1,2})\s*(?:(?::|')\s*(\d{1,2}(?:\.\d*)?)\s*(?:''|\")?)?\s*$")


def parse_clock(text: str) -> float:
    """Seconds after midnight for ``HH:MM[:SS]`` or ``13h40'50''``."""
    m = _CLOCK_RE.match(str(text))
    if not m:
        raise ValueError(f"malformed clock time {text!r}; expected HH:MM:SS")
    h, mi = int(m.group(1)), int(m.group(2))
    s = float(m.group(3)) if m.group(3) else 0.0
    if h > 23 or mi > 59 or s >= 60:
        raise ValueError(f"clock time {text!r} out of range")
    return h * 3600 + mi * 60 + s


def format_clock(seconds: float, style: str = "colon") -> str:
    s = int(round(seconds)) % DAY
    h, rem = divmod(s, 3600)
    mi, sec = divmod(rem, 60)
    if style == "colon":
        return f"{h:02d}:{mi:02d}:{sec:02d}"
    if style == "prime":
        return f"{h}h{mi:02d}'{sec:02d}''"
    raise ValueError(f"unknown clock style {style!r}")


def index_to_clock(index: int, b_step: float = 1.0, recording_start="00:00:00",
                   style: str = "colon") -> str:
    """Wall-clock time of grid ``index``, wrapped to 24 h."""
    if index < 0:
        raise ValueError("index must be >= 0")
    start = recording_start if isinstance(recording_start, (int, float)) else parse_clock(recording_start)
    return format_clock(start + index * b_step, style)


def report_rows(seg: Segmentation, band: str, index_offset: int = 0, b_step: float = 1.0,
                recording_start=None) -> List[tuple]:
    """
    One row per change point. ``index_offset`` is the grid index of the
    first element of the segmented series, so reported indices refer to
    the recording.
    """
    rows = []
    for j, tau in enumerate(seg.change_points):
        idx = int(tau) + int(index_offset)
        clock = "" if recording_start is None else index_to_clock(idx, b_step, recording_start)
        rows.append((idx, clock, band, float(seg.means[j]), float(seg.means[j + 1]),
                     float(seg.variances[j]), float(seg.variances[j + 1])))
    return rows


def report_csv(rows) -> str:
    buf = io.StringIO()
    buf.write(REPORT_HEADER + "\n")
    for idx, clock, band, mb, ma, vb, va in rows:
        buf.write(f"{idx},{clock},{band},{mb:.8e},{ma:.8e},{vb:.8e},{va:.8e}\n")
    return buf.getvalue()


def report_text(rows, band: str) -> str:
    lines = [f"band {band}: {len(rows)} change point(s)"]
    for idx, clock, _, mb, ma, vb, va in rows:
        when = f" ({clock})" if clock else ""
        lines.append(f"  index {idx}{when}: mean {mb:.6g} -> {ma:.6g}, variance {vb:.6g} -> {va:.6g}")
    return "\n".join(lines) + "\n"
