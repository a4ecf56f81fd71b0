"""
Band-fitted complex wavelets.

Two families are supported: the Gabor atom and a modulated Daubechies
wavelet. A mother wavelet carries a time support and a frequency
pseudo support ``[lo, hi]`` (in Hz, i.e. cycles per unit of the mother's
time axis) holding a fraction ``rho`` of its L2 energy. Scaling by
``lam`` and modulating by ``eta`` moves that pseudo support onto any
target band while preserving ``rho``.

Fourier convention: ``psi_hat(xi) = int psi(t) exp(-i xi t) dt`` with
``xi`` in rad/s. Every public function takes and returns frequencies in
Hz; ``spectrum(f)`` means ``psi_hat(2 pi f)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, signal as sps, special

Interval = Tuple[float, float]

TWO_PI = 2.0 * math.pi

# Daubechies mother defaults ("D6" = six vanishing moments).
D6_FREQ_SUPPORT: Interval = (0.08, 1.75)
DEFAULT_HALF_WIDTH = 3.5


@dataclass(frozen=True)
class BandSpec:
    """Frequency band in Hz."""

    lo: float
    hi: float
    name: str = ""

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)):
            raise ValueError(f"band {self.name!r}: edges must be finite")
        if self.lo <= 0:
            raise ValueError(f"band {self.name!r}: lo must be > 0, got {self.lo}")
        if self.hi <= self.lo:
            raise ValueError(
                f"band {self.name!r}: hi ({self.hi}) must exceed lo ({self.lo})")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def center(self) -> float:
        return 0.5 * (self.lo + self.hi)


ORTHOSYMPATHETIC = BandSpec(0.04, 0.15, "orthosympathetic")
PARASYMPATHETIC = BandSpec(0.15, 0.5, "parasympathetic")
DEFAULT_BANDS = (ORTHOSYMPATHETIC, PARASYMPATHETIC)


# ---------------------------------------------------------------------------
# quadrature

def _simpson_energy(g, a, b, step):
    if b <= a:
        return 0.0
    n = max(int(math.ceil((b - a) / step)), 2)
    if n % 2:
        n += 1
    x = np.linspace(a, b, n + 1)
    return float(integrate.simpson(np.abs(g(x)) ** 2, x=x))


def _auto_window(g, interval, step, tail=1e-8, max_doublings=40):
    w = max(abs(interval[0]), abs(interval[1]), 1.0)
    for _ in range(max_doublings):
        total = _simpson_energy(g, -2 * w, 2 * w, step)
        if total <= 0:
            w *= 2
            continue
        shell = total - _simpson_energy(g, -w, w, step)
        if shell < tail * total:
            return (-2 * w, 2 * w)
        w *= 2
    raise ValueError("could not find a window holding all but 1e-8 of the energy")


def pseudo_support_ratio(g: Callable[[np.ndarray], np.ndarray],
                         interval: Sequence[float],
                         quadrature_step: float = 1e-3,
                         window: Optional[Sequence[float]] = None) -> float:
    """
    Fraction of the L2 energy of ``g`` that lies inside ``interval``.

    Parameters
    ----------
    g : callable
        Vectorised map, real or complex valued.
    interval : (a, b)
        Compact interval with ``a <= b``.
    quadrature_step : float
        Maximum spacing of the composite Simpson grid.
    window : (lo, hi), optional
        Integration window standing in for the real line. When omitted it
        is grown by doubling until the energy in the outer shell is below
        1e-8 of the total.

    Returns
    -------
    float
        Ratio in ``[0, 1]``.
    """
    a, b = float(interval[0]), float(interval[1])
    if a > b:
        raise ValueError(f"interval must satisfy a <= b, got ({a}, {b})")
    if not quadrature_step > 0:
        raise ValueError("quadrature_step must be > 0")
    if window is None:
        window = _auto_window(g, (a, b), quadrature_step)
    w0, w1 = float(window[0]), float(window[1])
    total = _simpson_energy(g, w0, w1, quadrature_step)
    if not total > 0:
        raise ValueError("g has zero energy on the evaluation window")
    lo, hi = max(a, w0), min(b, w1)
    if (lo, hi) == (w0, w1):
        return 1.0
    inside = _simpson_energy(g, lo, hi, quadrature_step)
    return min(max(inside / total, 0.0), 1.0)


# ---------------------------------------------------------------------------
# mother wavelets

@dataclass(frozen=True, eq=False)
class MotherWavelet:
    """Base class; see :class:`GaborMother` and :class:`DaubechiesMother`."""

    family: str
    time_support: Interval
    freq_support: Interval
    rho: float
    # transform truncation and quadrature windows, mother units
    truncation: Interval
    time_window: Interval
    freq_window: Interval
    freq_step: float
    vanishing_moments: Optional[int] = None

    def evaluate(self, t):
        raise NotImplementedError

    def spectrum(self, f):
        raise NotImplementedError

    def __call__(self, t):
        return self.evaluate(t)

    def norm(self, step: float = 1e-3) -> float:
        return math.sqrt(_simpson_energy(self.evaluate, *self.time_window, step))

    def freq_ratio(self, interval: Sequence[float]) -> float:
        """In-band energy fraction of the transform, measured numerically."""
        return pseudo_support_ratio(self.spectrum, interval, self.freq_step,
                                    self.freq_window)


@dataclass(frozen=True, eq=False)
class GaborMother(MotherWavelet):
    """Gaussian window ``g(t) = pi^{-1/4} exp(-t^2/2)`` (sigma = 1)."""

    half_width: float = DEFAULT_HALF_WIDTH

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        return (math.pi ** -0.25) * np.exp(-0.5 * t * t) + 0j

    def spectrum(self, f):
        xi = TWO_PI * np.asarray(f, dtype=float)
        return (4 * math.pi) ** 0.25 * np.exp(-0.5 * xi * xi) + 0j


def gabor_mother(half_width: float = DEFAULT_HALF_WIDTH) -> GaborMother:
    """
    Unit Gabor window with time pseudo support ``[-L, L]``.

    Its transform has pseudo support ``[-L, L]`` in rad/s, i.e.
    ``[-L/2pi, L/2pi]`` Hz, with the same ratio ``erf(L)``.
    """
    L = float(half_width)
    if not L > 0:
        raise ValueError("half_width must be > 0")
    fl = L / TWO_PI
    return GaborMother(
        family="gabor",
        time_support=(-L, L),
        freq_support=(-fl, fl),
        rho=float(special.erf(L)),
        truncation=(-4.0, 4.0),
        time_window=(-8.0, 8.0),
        freq_window=(-8.0 / TWO_PI, 8.0 / TWO_PI),
        freq_step=1e-3,
        half_width=L,
    )


@lru_cache(maxsize=None)
def daubechies_filter(vanishing_moments: int) -> np.ndarray:
    """
    Orthonormal Daubechies low-pass filter with ``2N`` taps.

    Built by spectral factorisation, keeping the minimum-phase roots.
    Coefficients sum to sqrt(2).
    """
    N = int(vanishing_moments)
    if not 1 <= N <= 10:
        raise ValueError(f"vanishing_moments must be in 1..10, got {vanishing_moments}")
    # P(y) = sum_k C(N-1+k, k) y^k, y = sin^2(w/2) = (2 - z - 1/z) / 4
    poly = [math.comb(N - 1 + k, k) for k in range(N)]
    h = np.array([1.0 + 0j])
    for _ in range(N):
        h = np.convolve(h, [1.0, 1.0])
    for y in np.roots(poly[::-1]) if N > 1 else []:
        roots = np.roots([1.0, -(2.0 - 4.0 * y), 1.0])
        h = np.convolve(h, [1.0, -roots[np.argmin(np.abs(roots))]])
    h = np.real(h)
    h = h * math.sqrt(2.0) / h.sum()
    h.setflags(write=False)
    return h


def cascade(vanishing_moments: int, refinement_level: int = 10):
    """
    Scaling function and wavelet on the dyadic grid ``k / 2**J``.

    Returns ``(t, phi, psi)`` over the compact support ``[0, 2N - 1]``.
    """
    h = daubechies_filter(vanishing_moments)
    L = len(h)
    M = L - 1
    J = int(refinement_level)
    g = np.array([(-1) ** k * h[M - k] for k in range(L)])

    # values at the integers: eigenvector of the two-scale operator for eigenvalue 1
    A = np.zeros((M + 1, M + 1))
    for n in range(M + 1):
        for k in range(L):
            m = 2 * n - k
            if 0 <= m <= M:
                A[n, m] += math.sqrt(2.0) * h[k]
    w, v = np.linalg.eig(A)
    phi = np.real(v[:, np.argmin(np.abs(w - 1.0))])
    phi = phi / phi.sum()

    for j in range(1, J + 1):
        s = 2 ** (j - 1)
        new = np.zeros(M * 2 ** j + 1)
        for k in range(L):
            new[k * s:k * s + len(phi)] += math.sqrt(2.0) * h[k] * phi
        phi = new

    S = 2 ** J
    idx = np.arange(M * S + 1)
    psi = np.zeros(len(idx))
    for k in range(L):
        m = 2 * idx - k * S
        ok = (m >= 0) & (m < len(phi))
        psi[ok] += math.sqrt(2.0) * g[k] * phi[m[ok]]
    return idx / S, phi, psi


@dataclass(frozen=True, eq=False)
class DaubechiesMother(MotherWavelet):
    """
    Analytic Daubechies wavelet ``(psi + i H psi) / sqrt(2)``.

    ``table`` holds the real cascade values of ``psi``; ``evaluate``
    interpolates the analytic companion, whose spectrum is one-sided.
    Less than 1e-8 of its energy falls outside ``[0, 2N - 1]`` for
    N >= 4, so it is truncated to the compact support.
    """

    grid: np.ndarray = field(default=None, repr=False)
    table: np.ndarray = field(default=None, repr=False)
    analytic: np.ndarray = field(default=None, repr=False)
    spec_f: np.ndarray = field(default=None, repr=False)
    spec_values: np.ndarray = field(default=None, repr=False)
    refinement_level: int = 10
    delay: float = 0.0   # phase slope removed from spec_values before interpolation

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        re = np.interp(t, self.grid, self.analytic.real, left=0.0, right=0.0)
        im = np.interp(t, self.grid, self.analytic.imag, left=0.0, right=0.0)
        return re + 1j * im

    def spectrum(self, f):
        f = np.asarray(f, dtype=float)
        re = np.interp(f, self.spec_f, self.spec_values.real, left=0.0, right=0.0)
        im = np.interp(f, self.spec_f, self.spec_values.imag, left=0.0, right=0.0)
        return (re + 1j * im) * np.exp(-1j * TWO_PI * f * self.delay)

    def norm(self, step: float = 0.0) -> float:
        dt = self.grid[1] - self.grid[0]
        return math.sqrt(float(integrate.trapezoid(np.abs(self.analytic) ** 2, dx=dt)))


@lru_cache(maxsize=16)
def daubechies_mother(vanishing_moments: int = 6, refinement_level: int = 10,
                      freq_support: Interval = D6_FREQ_SUPPORT) -> DaubechiesMother:
    """
    Daubechies mother wavelet tabulated by the cascade algorithm.

    Parameters
    ----------
    vanishing_moments : int
        Filter order N in 2..10 (support ``[0, 2N - 1]``).
    refinement_level : int
        J >= 6; the table resolution is ``2**-J``.
    freq_support : (lo, hi)
        Declared frequency pseudo support in Hz. Its ratio ``rho`` is
        measured on the tabulated transform, not assumed.
    """
    N = int(vanishing_moments)
    if not 2 <= N <= 10:
        raise ValueError(f"unsupported vanishing moment count {vanishing_moments}; "
                         "tabulated filters cover 2..10")
    J = int(refinement_level)
    if J < 6:
        raise ValueError(f"refinement_level must be >= 6, got {refinement_level}")
    lo, hi = float(freq_support[0]), float(freq_support[1])
    if not hi > lo:
        raise ValueError("freq_support must have positive width")

    t, _, psi = cascade(N, J)
    dt = t[1] - t[0]
    n = len(psi)

    # analytic companion on a padded grid, then cut back to the support
    pad = 1 << int(math.ceil(math.log2(16 * n)))
    buf = np.zeros(pad)
    off = (pad - n) // 2
    buf[off:off + n] = psi
    analytic = sps.hilbert(buf)[off:off + n] / math.sqrt(2.0)
    analytic /= math.sqrt(float(integrate.trapezoid(np.abs(analytic) ** 2, dx=dt)))

    # transform of the tabulated function, sampled finely by zero padding;
    # the linear phase of the energy centroid is taken out so that linear
    # interpolation between bins does not shave the modulus
    nfft = 1 << 20
    energy = np.abs(analytic) ** 2
    delay = float(np.sum(t * energy) / np.sum(energy))
    spec = np.fft.fftshift(np.fft.fft(analytic, nfft)) * dt
    fgrid = np.fft.fftshift(np.fft.fftfreq(nfft, dt))
    spec = spec * np.exp(1j * TWO_PI * fgrid * delay)
    nyq = 0.5 / dt

    for arr in (t, psi, analytic, spec, fgrid):
        arr.setflags(write=False)

    proto = DaubechiesMother(
        family="daubechies",
        time_support=(0.0, float(2 * N - 1)),
        freq_support=(lo, hi),
        rho=float("nan"),
        truncation=(0.0, float(2 * N - 1)),
        time_window=(0.0, float(2 * N - 1)),
        freq_window=(-nyq, nyq),
        freq_step=fgrid[1] - fgrid[0],
        vanishing_moments=N,
        grid=t, table=psi, analytic=analytic, spec_f=fgrid, spec_values=spec,
        refinement_level=J, delay=delay,
    )
    rho = proto.freq_ratio((lo, hi))
    return DaubechiesMother(**{**proto.__dict__, "rho": rho})


# ---------------------------------------------------------------------------
# fitting

@dataclass(frozen=True, eq=False)
class FittedWavelet:
    """``psi(t) = amplitude * exp(i modulation t) * mother(scale * t)``."""

    band: BandSpec
    mother: MotherWavelet
    amplitude: float
    modulation: float          # eta, rad/s
    scale: float               # lambda, dimensionless
    time_support: Interval     # seconds
    freq_support: Interval     # Hz
    rho: float

    @property
    def family(self) -> str:
        return self.mother.family

    @property
    def modulation_hz(self) -> float:
        return self.modulation / TWO_PI

    @property
    def sigma(self) -> float:
        """Gabor envelope width in seconds."""
        if self.family != "gabor":
            raise AttributeError("sigma is only defined for the Gabor family")
        return 1.0 / self.scale

    @property
    def centre(self) -> float:
        """Energy centroid of ``|psi|^2`` in seconds (0 for the Gabor family)."""
        return getattr(self.mother, "delay", 0.0) / self.scale

    @property
    def truncation(self) -> Interval:
        a, b = self.mother.truncation
        return (a / self.scale, b / self.scale)

    @property
    def freq_window(self) -> Interval:
        a, b = self.mother.freq_window
        return (self.modulation_hz + self.scale * a, self.modulation_hz + self.scale * b)

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        return self.amplitude * np.exp(1j * self.modulation * t) * self.mother.evaluate(self.scale * t)

    __call__ = evaluate

    def spectrum(self, f):
        f = np.asarray(f, dtype=float)
        u = (f - self.modulation_hz) / self.scale
        return (self.amplitude / self.scale) * self.mother.spectrum(u)

    def energy_fraction(self, interval: Sequence[float]) -> float:
        return pseudo_support_ratio(self.spectrum, interval,
                                    self.mother.freq_step * self.scale,
                                    self.freq_window)

    def norm(self) -> float:
        a, b = self.mother.time_window
        if isinstance(self.mother, DaubechiesMother):
            dt = (self.mother.grid[1] - self.mother.grid[0]) / self.scale
            x = self.mother.grid / self.scale
            return math.sqrt(float(integrate.trapezoid(np.abs(self.evaluate(x)) ** 2, dx=dt)))
        return math.sqrt(_simpson_energy(self.evaluate, a / self.scale, b / self.scale,
                                         1e-3 / self.scale))


def fit_by_scaling_modulation(mother: MotherWavelet, band: BandSpec) -> FittedWavelet:
    """
    Map the mother's frequency pseudo support exactly onto ``band``.

    ``lam = band.width / (hi - lo)`` and ``eta = band.lo - lam * lo`` (Hz),
    so that ``eta + lam * [lo, hi] == [band.lo, band.hi]``. The time
    support scales by ``1 / lam`` and the amplitude is set for unit norm.
    """
    lo, hi = mother.freq_support
    if not hi > lo:
        raise ValueError("mother has a zero-width frequency pseudo support")
    if not band.hi > band.lo:
        raise ValueError("degenerate band")
    lam = band.width / (hi - lo)
    eta_hz = band.lo - lam * lo
    amplitude = math.sqrt(lam) / mother.norm()
    L1, L2 = mother.time_support
    mapped = (eta_hz + lam * lo, eta_hz + lam * hi)
    return FittedWavelet(
        band=band,
        mother=mother,
        amplitude=amplitude,
        modulation=TWO_PI * eta_hz,
        scale=lam,
        time_support=(L1 / lam, L2 / lam),
        freq_support=mapped,
        rho=mother.rho,
    )


def fit_gabor(band: BandSpec, half_width: float = DEFAULT_HALF_WIDTH) -> FittedWavelet:
    """
    Gabor wavelet centred on the band.

    ``eta = 2 pi * band.center`` and ``sigma = 2L / (2 pi * band.width)``.
    """
    if not half_width > 0:
        raise ValueError("half_width must be > 0")
    w = fit_by_scaling_modulation(gabor_mother(half_width), band)
    # the mother has unit norm analytically; drop the quadrature noise
    return FittedWavelet(**{**w.__dict__, "amplitude": math.sqrt(w.scale)})


def fit_daubechies(band: BandSpec, vanishing_moments: int = 6,
                   refinement_level: int = 10,
                   freq_support: Interval = D6_FREQ_SUPPORT) -> FittedWavelet:
    return fit_by_scaling_modulation(
        daubechies_mother(vanishing_moments, refinement_level, tuple(freq_support)), band)


def fit_wavelet(band: BandSpec, family: str = "gabor", half_width: float = DEFAULT_HALF_WIDTH,
                vanishing_moments: int = 6) -> FittedWavelet:
    if family == "gabor":
        return fit_gabor(band, half_width)
    if family == "daubechies":
        return fit_daubechies(band, vanishing_moments)
    raise ValueError(f"unknown wavelet family {family!r}")


# ---------------------------------------------------------------------------
# dumps

def dump_wavelet(wavelet: FittedWavelet, step: float = 0.25) -> str:
    """CSV ``t,re,im`` over the truncated time support."""
    a, b = wavelet.truncation
    t = np.arange(math.ceil(a / step), math.floor(b / step) + 1) * step
    v = wavelet.evaluate(t)
    rows = ["t,re,im"]
    rows += [f"{ti:.6f},{z.real:.9e},{z.imag:.9e}" for ti, z in zip(t, v)]
    return "\n".join(rows) + "\n"


def dump_spectrum(wavelet: FittedWavelet, f_max: float = 1.0, step: float = 1e-3) -> str:
    """CSV ``xi_hz,power`` of ``|psi_hat|^2`` on ``[0, f_max]``."""
    f = np.arange(0, int(round(f_max / step)) + 1) * step
    p = np.abs(wavelet.spectrum(f)) ** 2
    rows = ["xi_hz,power"]
    rows += [f"{fi:.6f},{pi:.9e}" for fi, pi in zip(f, p)]
    return "\n".join(rows) + "\n"
