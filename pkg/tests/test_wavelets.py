import math

import numpy as np
import pytest
import pywt
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from hrvbands.wavelets import (DEFAULT_BANDS, ORTHOSYMPATHETIC, PARASYMPATHETIC, BandSpec,
                               cascade, daubechies_filter, daubechies_mother, dump_spectrum,
                               dump_wavelet, fit_by_scaling_modulation, fit_daubechies,
                               fit_gabor, fit_wavelet, gabor_mother, pseudo_support_ratio)
from oracles import db_band_ratio


def unit_gabor(t):
    return math.pi ** -0.25 * np.exp(-0.5 * np.asarray(t) ** 2)


# pseudo_support_ratio

def test_gabor_ratio_matches_erf():
    # |g|^2 is a normal density with variance 1/2
    r = pseudo_support_ratio(unit_gabor, (-3.5, 3.5), window=(-8, 8))
    assert r == pytest.approx(special.erf(3.5), abs=1e-9)


def test_ratio_auto_window_agrees():
    a = pseudo_support_ratio(unit_gabor, (-1.0, 2.0))
    b = 0.5 * (special.erf(2.0) + special.erf(1.0))
    assert a == pytest.approx(b, abs=1e-8)


def test_ratio_full_window_is_one():
    assert pseudo_support_ratio(unit_gabor, (-8, 8), window=(-8, 8)) == 1.0
    assert pseudo_support_ratio(unit_gabor, (-100, 100), window=(-8, 8)) == 1.0


def test_ratio_zero_width_is_zero():
    assert pseudo_support_ratio(unit_gabor, (0.0, 0.0)) == 0.0


def test_ratio_errors():
    with pytest.raises(ValueError):
        pseudo_support_ratio(unit_gabor, (1.0, -1.0))
    with pytest.raises(ValueError):
        pseudo_support_ratio(unit_gabor, (-1, 1), quadrature_step=0.0)
    with pytest.raises(ValueError):
        pseudo_support_ratio(lambda t: np.zeros_like(t), (-1, 1), window=(-2, 2))


# Daubechies construction

@pytest.mark.parametrize("N", range(1, 11))
def test_filter_matches_pywavelets(N):
    ref = pywt.Wavelet(f"db{N}").rec_lo
    np.testing.assert_allclose(daubechies_filter(N), ref, atol=1e-12)


@pytest.mark.parametrize("N", [2, 4, 6])
def test_cascade_matches_pywavelets(N):
    # pywt's wavefun approaches the cascade limit as its level grows; ours is
    # exact at dyadic points, so the gap must shrink and end up small
    t, phi, psi = cascade(N, 10)

    def gap(level):
        _, psi_ref, x = pywt.Wavelet(f"db{N}").wavefun(level=level)
        ref = np.interp(t, x, psi_ref)
        ref = ref * np.sign(np.dot(ref, psi))
        return np.linalg.norm(psi - ref) / np.linalg.norm(ref)

    g10, g14 = gap(10), gap(14)
    assert g14 < g10 / 8
    assert g14 < 5e-4


def test_filter_order_range():
    with pytest.raises(ValueError):
        daubechies_filter(0)
    with pytest.raises(ValueError):
        daubechies_filter(11)


@pytest.mark.parametrize("N", range(2, 11))
def test_mother_moments_and_norm(N):
    m = daubechies_mother(N, 10)
    dt = m.grid[1] - m.grid[0]
    assert abs(integrate.trapezoid(m.table, dx=dt)) < 1e-6
    assert math.sqrt(integrate.trapezoid(m.table ** 2, dx=dt)) == pytest.approx(1.0, abs=1e-4)
    assert m.norm() == pytest.approx(1.0, abs=1e-9)
    assert m.time_support == (0.0, 2 * N - 1)


@pytest.mark.parametrize("args", [(1, 10), (11, 10), (6, 5)])
def test_mother_rejects_unsupported(args):
    with pytest.raises(ValueError):
        daubechies_mother(*args)


def test_analytic_mother_is_one_sided():
    m = daubechies_mother(6)
    f = np.linspace(0.05, 5, 200)
    neg = np.abs(m.spectrum(-f)) ** 2
    pos = np.abs(m.spectrum(f)) ** 2
    assert neg.max() < 1e-6 * pos.max()


def test_mother_rho_matches_infinite_product():
    # frozen oracle value: 0.998443 for db6 on [0.08, 1.75] Hz
    ref = db_band_ratio(daubechies_filter(6), (0.08, 1.75))
    assert ref == pytest.approx(0.998443, abs=2e-6)
    assert daubechies_mother(6).rho == pytest.approx(ref, abs=1e-5)


def test_mother_rho_grows_with_order():
    rhos = [daubechies_mother(N).rho for N in (2, 4, 6, 8, 10)]
    assert all(b > a for a, b in zip(rhos, rhos[1:]))


# fitting

def test_d6_orthosympathetic_fit():
    w = fit_daubechies(ORTHOSYMPATHETIC)
    assert w.scale == pytest.approx(0.0659, abs=5e-4)
    assert w.modulation_hz == pytest.approx(0.0347, abs=5e-4)
    assert w.freq_support[0] == pytest.approx(0.04, abs=1e-9)
    assert w.freq_support[1] == pytest.approx(0.15, abs=1e-9)
    eta = w.modulation_hz
    assert eta + w.scale * 0.08 == pytest.approx(0.04, abs=1e-12)
    assert eta + w.scale * 1.75 == pytest.approx(0.15, abs=1e-12)


def test_identity_fit():
    band = BandSpec(0.08, 1.75)
    w = fit_by_scaling_modulation(daubechies_mother(6), band)
    assert w.scale == pytest.approx(1.0, abs=1e-12)
    assert w.modulation == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("band,centre", [(ORTHOSYMPATHETIC, 0.095), (PARASYMPATHETIC, 0.325)])
def test_gabor_centre_and_width(band, centre):
    w = fit_gabor(band)
    assert w.modulation_hz == pytest.approx(centre, abs=1e-12)
    assert w.sigma == pytest.approx(2 * 3.5 / (2 * math.pi * band.width), rel=1e-12)
    assert w.time_support == pytest.approx((-3.5 * w.sigma, 3.5 * w.sigma))
    assert w.energy_fraction((band.lo, band.hi)) >= 0.999


def test_gabor_fit_rho_is_erf():
    assert fit_gabor(ORTHOSYMPATHETIC).rho == pytest.approx(special.erf(3.5), abs=1e-12)


def test_degenerate_band():
    with pytest.raises(ValueError):
        BandSpec(0.15, 0.15)
    with pytest.raises(ValueError):
        BandSpec(0.0, 0.1)
    with pytest.raises(ValueError):
        fit_gabor(ORTHOSYMPATHETIC, half_width=0)


def test_unknown_family():
    with pytest.raises(ValueError):
        fit_wavelet(ORTHOSYMPATHETIC, "morlet")


@pytest.mark.parametrize("family", ["gabor", "daubechies"])
@pytest.mark.parametrize("band", DEFAULT_BANDS, ids=lambda b: b.name)
def test_spectrum_matches_direct_quadrature(family, band):
    w = fit_wavelet(band, family)
    a, b = w.mother.time_window
    t = np.linspace(a / w.scale, b / w.scale, 200001)
    v = w.evaluate(t)
    for f in (band.lo, band.center, band.hi):
        direct = integrate.trapezoid(v * np.exp(-2j * math.pi * f * t), t)
        assert abs(w.spectrum(f) - direct) < 2e-3 * abs(direct) + 1e-6


@pytest.mark.parametrize("band", DEFAULT_BANDS, ids=lambda b: b.name)
def test_cross_band_leak(band):
    other = [b for b in DEFAULT_BANDS if b is not band][0]
    for family in ("gabor", "daubechies"):
        w = fit_wavelet(band, family)
        assert w.energy_fraction((other.lo, other.hi)) <= 0.01


band_strategy = st.tuples(st.floats(0.005, 2.0), st.floats(0.01, 2.0)).map(
    lambda p: BandSpec(p[0], p[0] + p[1]))
mother_strategy = st.one_of(
    st.floats(1.0, 5.0).map(gabor_mother),
    st.sampled_from([4, 6, 8]).map(daubechies_mother))


@settings(max_examples=100, deadline=None)
@given(mother_strategy, band_strategy)
def test_fit_preserves_rho_norm_and_support(mother, band):
    w = fit_by_scaling_modulation(mother, band)
    if mother.family == "gabor":
        w = fit_gabor(band, mother.half_width)
    assert w.freq_support[0] == pytest.approx(band.lo, abs=1e-9)
    assert w.freq_support[1] == pytest.approx(band.hi, abs=1e-9)
    assert w.energy_fraction((band.lo, band.hi)) >= mother.rho - 1e-3
    assert w.norm() == pytest.approx(1.0, abs=1e-6)
    L1, L2 = mother.time_support
    lo, hi = mother.freq_support
    assert (w.time_support[1] - w.time_support[0]) * band.width == pytest.approx(
        (L2 - L1) * (hi - lo), rel=1e-12)


def test_wavelet_objects_immutable():
    w = fit_gabor(ORTHOSYMPATHETIC)
    with pytest.raises(Exception):
        w.scale = 2.0


def test_dumps():
    w = fit_gabor(PARASYMPATHETIC)
    lines = dump_wavelet(w, 0.5).splitlines()
    assert lines[0] == "t,re,im"
    a, b = w.truncation
    assert len(lines) - 1 == math.floor(b / 0.5) - math.ceil(a / 0.5) + 1
    s = dump_spectrum(w, 1.0, 0.01).splitlines()
    assert s[0] == "xi_hz,power" and len(s) == 102
    peak = max(s[1:], key=lambda r: float(r.split(",")[1]))
    assert float(peak.split(",")[0]) == pytest.approx(0.325, abs=0.006)
