"""
RR-interval ingestion: parsing, artifact handling and uniform resampling.

Text input holds one number per line, either R-peak times or inter-beat
intervals, in seconds. Blank lines and lines starting with ``#`` are
ignored.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Iterable, TextIO, Union

import numpy as np

RR_MIN = 60.0 / 250.0   # 250 bpm
RR_MAX = 60.0 / 20.0    # 20 bpm

FORMATS = ("peak-times", "intervals")
POLICIES = ("hold-previous", "linear", "reject")


class RRFormatError(ValueError):
    """Input text cannot be turned into a valid RR series."""


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


def artifact_mask(intervals) -> np.ndarray:
    iv = np.asarray(intervals, dtype=float)
    return (iv < RR_MIN) | (iv > RR_MAX)


@dataclass(frozen=True, eq=False)
class RRSeries:
    peak_times: np.ndarray
    intervals: np.ndarray
    artifact_mask: np.ndarray

    @classmethod
    def from_peak_times(cls, peak_times) -> "RRSeries":
        t = _frozen(peak_times)
        if t.ndim != 1 or len(t) < 2:
            raise RRFormatError("need at least two peak times")
        iv = np.diff(t)
        if np.any(iv <= 0):
            i = int(np.argmax(iv <= 0))
            raise RRFormatError(f"peak times not strictly increasing at entry {i + 1}")
        return cls(t, _frozen(iv), _frozen(artifact_mask(iv), bool))

    @classmethod
    def from_intervals(cls, intervals, start: float = 0.0) -> "RRSeries":
        iv = np.asarray(intervals, dtype=float)
        if iv.ndim != 1 or len(iv) < 1:
            raise RRFormatError("need at least one interval")
        if np.any(iv <= 0):
            raise RRFormatError("intervals must be > 0")
        t = start + np.concatenate([[0.0], np.cumsum(iv)])
        return cls(_frozen(t), _frozen(iv), _frozen(artifact_mask(iv), bool))

    def __len__(self):
        return len(self.intervals)

    @property
    def duration(self) -> float:
        return float(self.peak_times[-1] - self.peak_times[0])


@dataclass(frozen=True, eq=False)
class UniformSeries:
    start_time: float
    step: float
    values: np.ndarray

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("step must be > 0")
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or not np.all(np.isfinite(v)):
            raise ValueError("values must be a finite 1-D array")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.values)

    @property
    def times(self) -> np.ndarray:
        return self.start_time + np.arange(len(self.values)) * self.step

    @property
    def end_time(self) -> float:
        return self.start_time + (len(self.values) - 1) * self.step

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t,rr\n")
        for t, v in zip(self.times, self.values):
            buf.write(f"{t:.3f},{v:.6f}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: Union[str, TextIO]) -> "UniformSeries":
        lines = text.splitlines() if isinstance(text, str) else text.read().splitlines()
        lines = [ln.strip() for ln in lines if ln.strip() and not ln.lstrip().startswith("#")]
        if not lines or lines[0].replace(" ", "") != "t,rr":
            raise RRFormatError("uniform series CSV must start with header 't,rr'")
        t, v = [], []
        for k, ln in enumerate(lines[1:], start=2):
            try:
                a, b = ln.split(",")[:2]
                t.append(float(a))
                v.append(float(b))
            except ValueError:
                raise RRFormatError(f"line {k}: cannot parse {ln!r}") from None
        if len(v) < 2:
            raise RRFormatError("uniform series needs at least two samples")
        steps = np.diff(t)
        step = float(np.mean(steps))
        # t is written with 3 decimals
        if step <= 0 or np.max(np.abs(steps - step)) > 1.5e-3:
            raise RRFormatError("uniform series times are not equally spaced")
        return cls(float(t[0]), step, np.asarray(v))


def _numbers(stream: Union[str, TextIO, Iterable[str]]):
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        token = line.replace(",", " ").split()[0]
        try:
            value = float(token)
        except ValueError:
            raise RRFormatError(f"line {lineno}: cannot parse {token!r} as a number") from None
        if not math.isfinite(value):
            raise RRFormatError(f"line {lineno}: non-finite value {token!r}")
        yield lineno, value


def parse_rr(stream: Union[str, TextIO, Iterable[str]], format: str = "peak-times") -> RRSeries:
    """
    Parse a text stream of peak times or intervals into an :class:`RRSeries`.

    Raises :class:`RRFormatError` on empty or single-sample input, on an
    unparseable line, and on non-increasing peak times; the message
    carries the offending line number.
    """
    if format not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}, got {format!r}")
    entries = list(_numbers(stream))
    if len(entries) < 2:
        raise RRFormatError(f"need at least two samples, got {len(entries)}")
    values = np.array([v for _, v in entries])
    if format == "peak-times":
        bad = np.flatnonzero(np.diff(values) <= 0)
        if len(bad):
            lineno = entries[bad[0] + 1][0]
            raise RRFormatError(
                f"line {lineno}: peak time {values[bad[0] + 1]} does not exceed "
                f"the previous one ({values[bad[0]]})")
        return RRSeries.from_peak_times(values)
    bad = np.flatnonzero(values <= 0)
    if len(bad):
        raise RRFormatError(f"line {entries[bad[0]][0]}: interval must be > 0")
    return RRSeries.from_intervals(values)


def read_rr(path, format: str = "peak-times") -> RRSeries:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_rr(fh, format)


def clean_artifacts(series: RRSeries, policy: str = "linear") -> RRSeries:
    """
    Replace physiologically implausible intervals.

    ``hold-previous`` copies the last valid interval, ``linear``
    interpolates between the neighbouring valid intervals (by beat index;
    runs at either end take the nearest valid value) and ``reject``
    raises. Peak times are rebuilt from the first peak and the cleaned
    intervals, so the returned series satisfies the usual invariants.
    """
    if policy not in POLICIES:
        raise ValueError(f"policy must be one of {POLICIES}, got {policy!r}")
    mask = series.artifact_mask
    if not mask.any():
        return series
    bad = np.flatnonzero(mask)
    if policy == "reject":
        raise RRFormatError(f"artifact intervals at indices {bad.tolist()}")
    if mask.all():
        raise RRFormatError("every interval is an artifact")
    iv = series.intervals.copy()
    if policy == "hold-previous":
        if mask[0]:
            raise RRFormatError("leading interval is an artifact; no previous value to hold")
        for i in bad:
            iv[i] = iv[i - 1]
    else:
        good = np.flatnonzero(~mask)
        iv[bad] = np.interp(bad, good, iv[good])
    return RRSeries.from_intervals(iv, start=float(series.peak_times[0]))


def resample(series: RRSeries, step: float = 0.25) -> UniformSeries:
    """
    Sample the RR step function on a uniform grid.

    ``X(t) = intervals[i]`` for ``peak_times[i] <= t < peak_times[i+1]``;
    the grid starts at the first peak and stops at the last one.
    """
    if not step > 0:
        raise ValueError(f"step must be > 0, got {step}")
    if series.artifact_mask.any():
        raise ValueError("series still contains artifacts; call clean_artifacts first")
    t0 = float(series.peak_times[0])
    n = int(math.floor(series.duration / step)) + 1
    if n < 2:
        raise ValueError("recording is shorter than one resampling step")
    grid = t0 + np.arange(n) * step
    idx = np.searchsorted(series.peak_times, grid, side="right") - 1
    idx = np.clip(idx, 0, len(series.intervals) - 1)
    return UniformSeries(t0, float(step), series.intervals[idx])


def read_uniform(path) -> UniformSeries:
    with open(path, "r", encoding="utf-8") as fh:
        return UniformSeries.from_csv(fh)
