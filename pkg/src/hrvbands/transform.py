"""
Wavelet coefficients of a uniformly sampled signal on a regular grid of
translations ``b``.

``W(b) = sum_j conj(psi(t_j - b)) * X(t_j) * dt`` over the samples
``t_j`` inside the wavelet's truncated support around ``b``. Positions
are multiples of ``b_step`` in the signal's own time base, so
``round(b / b_step)`` is an index into the recording.
"""
from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .ingest import UniformSeries
from .wavelets import BandSpec, FittedWavelet

# positions per work unit; fixed so results never depend on the worker count
CHUNK = 4096
_GRID_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class CoefficientSeries:
    band: BandSpec
    b_step: float
    positions: np.ndarray
    coeffs: np.ndarray
    modulus: np.ndarray
    edge_mask: np.ndarray

    def __len__(self):
        return len(self.positions)

    @property
    def grid_index(self) -> np.ndarray:
        """Recording index of each position, in units of ``b_step``."""
        return np.rint(self.positions / self.b_step).astype(np.int64)

    @property
    def interior(self) -> np.ndarray:
        return ~self.edge_mask

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("b,re,im,modulus,edge\n")
        for b, z, m, e in zip(self.positions, self.coeffs, self.modulus, self.edge_mask):
            buf.write(f"{b:.1f},{z.real:.8e},{z.imag:.8e},{m:.8e},{int(e)}\n")
        return buf.getvalue()


def band_energy(series: CoefficientSeries, squared: bool = False) -> np.ma.MaskedArray:
    """``|W(b)|`` (or ``|W(b)|**2``) with edge-affected positions masked."""
    values = series.modulus ** 2 if squared else series.modulus
    return np.ma.MaskedArray(values, mask=series.edge_mask.copy())


def _position_grid(signal, support, b_step, include_edges):
    t_lo, t_hi = support
    start, end = signal.start_time, signal.end_time
    if include_edges:
        first, last = start, end
    else:
        first, last = start - t_lo, end - t_hi
    k0 = math.ceil(first / b_step - _GRID_TOL)
    k1 = math.floor(last / b_step + _GRID_TOL)
    if k1 < k0:
        return np.empty(0)
    return np.arange(k0, k1 + 1) * b_step


def _kernel(wavelet, signal, support, b0):
    # samples j with t_j - b0 inside the support, expressed relative to j=0
    dt = signal.step
    delta = signal.start_time - b0
    j_lo = math.ceil((support[0] - delta) / dt - _GRID_TOL)
    j_hi = math.floor((support[1] - delta) / dt + _GRID_TOL)
    u = delta + np.arange(j_lo, j_hi + 1) * dt
    return j_lo, np.conj(wavelet.evaluate(u))


def wavelet_coefficients(signal: UniformSeries, wavelet: FittedWavelet,
                         b_step: float = 1.0, include_edges: bool = False,
                         workers: int = 1) -> CoefficientSeries:
    """
    Complex wavelet coefficients of ``signal`` every ``b_step`` seconds.

    By default only positions whose truncated support lies inside the
    recording are returned. With ``include_edges`` the grid covers the
    whole recording; samples outside it count as zero and those
    positions are flagged in ``edge_mask``.
    """
    if not b_step > 0:
        raise ValueError("b_step must be > 0")
    dt = signal.step
    if dt > 0.5 / wavelet.band.hi + 1e-12:
        raise ValueError(
            f"signal step {dt} s exceeds the Nyquist limit {0.5 / wavelet.band.hi} s "
            f"for band {wavelet.band.name or (wavelet.band.lo, wavelet.band.hi)}")
    support = wavelet.truncation
    span = support[1] - support[0]
    if signal.end_time - signal.start_time < span:
        raise ValueError(
            f"signal ({signal.end_time - signal.start_time:.1f} s) is shorter than "
            f"the wavelet support ({span:.1f} s)")

    positions = _position_grid(signal, support, b_step, include_edges)
    if len(positions) == 0:
        raise ValueError("no position has a full wavelet support inside the signal")
    edge = ((positions + support[0] < signal.start_time - _GRID_TOL)
            | (positions + support[1] > signal.end_time + _GRID_TOL))

    x = signal.values
    ratio = b_step / dt
    r = int(round(ratio))
    if r >= 1 and abs(ratio - r) < 1e-9:
        coeffs = _strided(x, wavelet, signal, support, positions, r, workers)
    else:
        coeffs = _general(x, wavelet, signal, support, positions)
    coeffs.setflags(write=False)
    modulus = np.abs(coeffs)
    modulus.setflags(write=False)
    positions.setflags(write=False)
    edge.setflags(write=False)
    return CoefficientSeries(wavelet.band, float(b_step), positions, coeffs, modulus, edge)


def _strided(x, wavelet, signal, support, positions, r, workers):
    dt = signal.step
    j_lo, kern = _kernel(wavelet, signal, support, positions[0])
    width = len(kern)
    # every position reuses the kernel; pad so edge windows stay in range
    first = j_lo
    last = j_lo + (len(positions) - 1) * r + width
    pad_left = max(0, -first)
    pad_right = max(0, last - len(x))
    xp = np.concatenate([np.zeros(pad_left), x, np.zeros(pad_right)])
    windows = sliding_window_view(xp[first + pad_left:], width)[::r][:len(positions)]
    kr = np.ascontiguousarray(kern.real)
    ki = np.ascontiguousarray(kern.imag)

    def run(sl):
        w = windows[sl]
        return (w @ kr + 1j * (w @ ki)) * dt

    chunks = [slice(i, min(i + CHUNK, len(positions))) for i in range(0, len(positions), CHUNK)]
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    return np.concatenate(parts)


def _general(x, wavelet, signal, support, positions):
    dt = signal.step
    t0 = signal.start_time
    out = np.empty(len(positions), dtype=complex)
    for k, b in enumerate(positions):
        j_lo = max(0, math.ceil((b + support[0] - t0) / dt - _GRID_TOL))
        j_hi = min(len(x) - 1, math.floor((b + support[1] - t0) / dt + _GRID_TOL))
        u = t0 + np.arange(j_lo, j_hi + 1) * dt - b
        out[k] = np.sum(np.conj(wavelet.evaluate(u)) * x[j_lo:j_hi + 1]) * dt
    return out
