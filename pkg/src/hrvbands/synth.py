"""
Synthetic locally stationary Gaussian signals.

A signal is a piecewise-constant mean plus, on each spectral piece, an
independent stationary Gaussian process whose two-sided spectral density
is a sum of rectangles mirrored about zero. Each piece is drawn by
spectral synthesis: with ``df = 1 / (n * dt)`` the bin at frequency
``f_k > 0`` gets a complex Gaussian weight with ``E|A_k|^2 = f(f_k) * df``
and

    x_j = sum_k (A_k exp(2 pi i f_k t_j) + conj)

so that ``Var x = integral of f over the real line = 2 * sum p * (hi - lo)``.
"""
from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .ingest import UniformSeries

Rect = Tuple[float, float, float]


class SpecError(ValueError):
    """Invalid synthetic-signal description."""


@dataclass(frozen=True)
class SpectralPiece:
    start: float
    rects: Tuple[Rect, ...] = ()

    def variance(self) -> float:
        return 2.0 * sum(p * (hi - lo) for lo, hi, p in self.rects)

    def density(self, f) -> np.ndarray:
        """Two-sided density at frequencies ``f`` (Hz)."""
        a = np.abs(np.asarray(f, dtype=float))
        out = np.zeros_like(a)
        for lo, hi, p in self.rects:
            out[(a >= lo) & (a < hi)] += p
        return out


@dataclass(frozen=True)
class PiecewiseSpec:
    """
    ``mean_breaks`` is a sequence of ``(start, level)`` and
    ``spectral_pieces`` a sequence of :class:`SpectralPiece`; both start
    at 0 with strictly increasing start times below ``duration``.
    """
    duration: float
    sample_step: float
    mean_breaks: Tuple[Tuple[float, float], ...] = ((0.0, 0.0),)
    spectral_pieces: Tuple[SpectralPiece, ...] = (SpectralPiece(0.0),)

    def __post_init__(self):
        object.__setattr__(self, "mean_breaks",
                           tuple((float(a), float(b)) for a, b in self.mean_breaks))
        object.__setattr__(self, "spectral_pieces", tuple(
            p if isinstance(p, SpectralPiece)
            else SpectralPiece(float(p[0]), tuple(tuple(map(float, r)) for r in p[1]))
            for p in self.spectral_pieces))
        self.validate()

    @property
    def n_samples(self) -> int:
        return int(math.floor(self.duration / self.sample_step + 1e-9))

    @property
    def nyquist(self) -> float:
        return 0.5 / self.sample_step

    def validate(self):
        if not self.duration > 0:
            raise SpecError("duration must be > 0")
        if not self.sample_step > 0:
            raise SpecError("sample_step must be > 0")
        if self.n_samples < 2:
            raise SpecError("duration shorter than two samples")
        for name, starts in (("mean_breaks", [b[0] for b in self.mean_breaks]),
                             ("spectral_pieces", [p.start for p in self.spectral_pieces])):
            if not starts or starts[0] != 0:
                raise SpecError(f"{name}: first break must start at 0")
            if any(b <= a for a, b in zip(starts, starts[1:])):
                raise SpecError(f"{name}: break times must be strictly increasing")
            if starts[-1] >= self.duration:
                raise SpecError(f"{name}: break at {starts[-1]} not inside [0, duration)")
        for i, piece in enumerate(self.spectral_pieces):
            for lo, hi, p in piece.rects:
                if not 0 <= lo < hi:
                    raise SpecError(f"piece {i}: rectangle needs 0 <= lo < hi, got ({lo}, {hi})")
                if p < 0:
                    raise SpecError(f"piece {i}: power level must be >= 0, got {p}")
                if hi > self.nyquist + 1e-12:
                    raise SpecError(
                        f"piece {i}: rectangle hi={hi} Hz above Nyquist {self.nyquist} Hz")

    def times(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.sample_step

    def mean_function(self) -> np.ndarray:
        t = self.times()
        starts = np.array([b[0] for b in self.mean_breaks])
        levels = np.array([b[1] for b in self.mean_breaks])
        return levels[np.searchsorted(starts, t + 1e-9 * self.sample_step, side="right") - 1]


def stationary_piece(n: int, dt: float, rects: Sequence[Rect], rng: np.random.Generator) -> np.ndarray:
    """One stationary realisation of length ``n`` (DC and Nyquist bins left empty)."""
    f = np.fft.rfftfreq(n, dt)
    df = 1.0 / (n * dt)
    S = np.zeros_like(f)
    for lo, hi, p in rects:
        S[(f >= lo) & (f < hi)] += p
    S[0] = 0.0
    if n % 2 == 0:
        S[-1] = 0.0
    z = (rng.standard_normal(len(f)) + 1j * rng.standard_normal(len(f))) / math.sqrt(2.0)
    return np.fft.irfft(np.sqrt(S * df) * z * n, n)


def generate(spec: PiecewiseSpec, seed: int = 0) -> UniformSeries:
    """Draw one realisation; identical ``(spec, seed)`` give identical output."""
    spec.validate()
    t = spec.times()
    x = spec.mean_function().astype(float)
    starts = [p.start for p in spec.spectral_pieces] + [math.inf]
    rngs = [np.random.default_rng(s) for s in
            np.random.SeedSequence(int(seed)).spawn(len(spec.spectral_pieces))]
    for piece, a, b, rng in zip(spec.spectral_pieces, starts, starts[1:], rngs):
        sel = np.flatnonzero((t >= a - 1e-9) & (t < b - 1e-9))
        if len(sel) == 0 or not piece.rects:
            continue
        x[sel] += stationary_piece(len(sel), spec.sample_step, piece.rects, rng)
    return UniformSeries(0.0, spec.sample_step, x)


def planted_truth(spec: PiecewiseSpec, b_step: float = 1.0) -> List[int]:
    """Interior break times of either kind as coefficient-grid indices (floor)."""
    times = {b[0] for b in spec.mean_breaks} | {p.start for p in spec.spectral_pieces}
    return sorted({int(math.floor(tb / b_step + 1e-9))
                   for tb in times if 0 < tb < spec.duration})


# spec files

def _rects(text: str) -> Tuple[Rect, ...]:
    out = []
    for chunk in text.replace("\n", ";").split(";"):
        if chunk.strip():
            vals = [float(v) for v in chunk.replace(",", " ").split()]
            if len(vals) != 3:
                raise SpecError(f"rectangle needs 'lo hi power', got {chunk.strip()!r}")
            out.append(tuple(vals))
    return tuple(out)


def loads_spec(text: str) -> PiecewiseSpec:
    """
    Parse an INI description::

        [signal]
        duration = 7200
        sample_step = 0.25

        [mean.0]
        start = 0
        level = 0.8

        [piece.0]
        start = 0
        rects = 0.04 0.15 0.004; 0.15 0.5 0.001
    """
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
        sig = cp["signal"]
        duration = float(sig["duration"])
        step = float(sig.get("sample_step", "0.25"))
        means = [(float(cp[s]["start"]), float(cp[s]["level"]))
                 for s in cp.sections() if s.startswith("mean.")]
        pieces = [SpectralPiece(float(cp[s]["start"]), _rects(cp[s].get("rects", "")))
                  for s in cp.sections() if s.startswith("piece.")]
    except SpecError:
        raise
    except (configparser.Error, KeyError, ValueError) as exc:
        raise SpecError(f"malformed spec: {exc}") from None
    means.sort()
    pieces.sort(key=lambda p: p.start)
    return PiecewiseSpec(duration, step, tuple(means) or ((0.0, 0.0),),
                         tuple(pieces) or (SpectralPiece(0.0),))


def load_spec(path) -> PiecewiseSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return loads_spec(fh.read())


def dumps_spec(spec: PiecewiseSpec) -> str:
    cp = configparser.ConfigParser()
    cp["signal"] = {"duration": repr(spec.duration), "sample_step": repr(spec.sample_step)}
    for i, (start, level) in enumerate(spec.mean_breaks):
        cp[f"mean.{i}"] = {"start": repr(start), "level": repr(level)}
    for i, p in enumerate(spec.spectral_pieces):
        cp[f"piece.{i}"] = {"start": repr(p.start),
                            "rects": "; ".join(" ".join(repr(v) for v in r) for r in p.rects)}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def two_regime_spec(duration: float = 7200.0, change: float = 3600.0, factor: float = 9.0,
                    sample_step: float = 0.25, mean: float = 0.8) -> PiecewiseSpec:
    """Constant ortho-band power; para-band power multiplied by ``factor`` at ``change``."""
    ortho = (0.04, 0.15, 0.004)
    return PiecewiseSpec(duration, sample_step, ((0.0, mean),), (
        SpectralPiece(0.0, (ortho, (0.15, 0.5, 0.001))),
        SpectralPiece(change, (ortho, (0.15, 0.5, 0.001 * factor)))))


def piecewise_gaussian(n: int, change_points: Sequence[int], means: Sequence[float],
                       sds: Sequence[float], rng: np.random.Generator) -> np.ndarray:
    """Independent Gaussian samples, constant mean and sd between change points."""
    edges = [0, *change_points, n]
    if len(means) != len(edges) - 1 or len(sds) != len(means):
        raise ValueError("need one mean and one sd per segment")
    return np.concatenate([rng.normal(m, s, b - a)
                           for a, b, m, s in zip(edges[:-1], edges[1:], means, sds)])


def random_piecewise_gaussian(rng: np.random.Generator, n: int = 5000, n_changes: int = 2,
                              min_gap: int = 250, snr: float = 3.0):
    """
    Random change points at least ``min_gap`` apart; at each one the mean
    jumps by ``snr``-``snr+1`` times the larger neighbouring sd and the sd
    is halved, kept or doubled. Returns ``(x, change_points)``.
    """
    while True:
        tau = np.sort(rng.choice(np.arange(min_gap, n - min_gap), n_changes, replace=False))
        if np.all(np.diff(tau) >= min_gap):
            break
    means, sds = [0.0], [1.0]
    for _ in range(n_changes):
        sd = sds[-1] * rng.choice([0.5, 1.0, 2.0])
        means.append(means[-1] + rng.choice([-1.0, 1.0]) * rng.uniform(snr, snr + 1) * max(sds[-1], sd))
        sds.append(sd)
    return piecewise_gaussian(n, tau.tolist(), means, sds, rng), [int(t) for t in tau]
