import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from pdclhv.core import build_mode_grid
from pdclhv.field import (AmplitudeSet, anomalous_moment, apply_pdc, complex_normal,
                          coupled_mask, dump_amplitudes_csv, excess_occupation,
                          expected_signal_intensity, intensity_correlation, relative_excess,
                          sample_vacuum, signal_product_moment, zpf_grid_intensity,
                          zpf_weight_sums)
from pdclhv.streams import Role, stream

from conftest import make_config

# ---- symbolic oracle: Gaussian expectation of polynomials in Re/Im parts ----

G = sp.symbols("g", positive=True)
X = sp.symbols("x1 y1 x2 y2", real=True)  # Re/Im of alpha1_j and alpha2_pair(j)


def gaussian_mean(expr):
    """E[expr] for independent N(0, 1/4) components (Wick moments)."""
    poly = sp.Poly(sp.expand(expr), *X)
    total = 0
    for powers, coeff in poly.terms():
        term = coeff
        for k in powers:
            term *= 0 if k % 2 else sp.factorial2(k - 1) * sp.Rational(1, 4) ** (k // 2)
        total += term
    return sp.simplify(total)


def symbolic_betas():
    a1 = X[0] + sp.I * X[1]
    a2 = X[2] + sp.I * X[3]
    gain = 1 + G ** 2 / 2
    b1 = gain * a1 + G * sp.conjugate(a2)
    b2 = gain * a2 + G * sp.conjugate(a1)
    return b1, b2


def test_symbolic_moments_match_closed_forms():
    b1, b2 = symbolic_betas()
    occ = gaussian_mean(b1 * sp.conjugate(b1)) - sp.Rational(1, 2)
    anom = gaussian_mean(b1 * b2)
    same = gaussian_mean(b1 * b1)
    n1 = sp.expand(b1 * sp.conjugate(b1))
    n2 = sp.expand(b2 * sp.conjugate(b2))
    cov = gaussian_mean(n1 * n2) - gaussian_mean(n1) * gaussian_mean(n2)
    var = gaussian_mean(n1 * n1) - gaussian_mean(n1) ** 2
    for gv in (0.0, 0.03, 0.1, 0.5, 0.9):
        sub = {G: gv}
        assert float(occ.subs(sub)) == pytest.approx(excess_occupation(gv), abs=1e-15)
        assert float(anom.subs(sub)) == pytest.approx(anomalous_moment(gv), abs=1e-15)
        assert float(same.subs(sub)) == 0.0
        if gv:
            assert float((cov / var).subs(sub)) == pytest.approx(intensity_correlation(gv),
                                                                rel=1e-12)


def test_kappa_is_twice_excess():
    assert relative_excess(0.1) == pytest.approx(2 * 0.01 + 0.1 ** 4 / 4)


# ---- sampling ----------------------------------------------------------------

def test_vacuum_moments_one_mode():
    z = complex_normal(stream(3, Role.BEAM1), 10 ** 6)
    n = z.size
    p = np.abs(z) ** 2
    assert abs(p.mean() - 0.5) < 4 * p.std() / math.sqrt(n)
    sq = z * z
    assert abs(sq.real.mean()) < 4 * sq.real.std() / math.sqrt(n)
    assert abs(sq.imag.mean()) < 4 * sq.imag.std() / math.sqrt(n)
    assert abs(z.real.var() - 0.25) < 0.002


def test_vacuum_is_deterministic(small):
    grid = build_mode_grid(small)
    a = sample_vacuum(grid, (stream(1, Role.BEAM1), stream(1, Role.BEAM2)), size=5)
    b = sample_vacuum(grid, (stream(1, Role.BEAM1), stream(1, Role.BEAM2)), size=5)
    assert np.array_equal(a.alpha_beam1, b.alpha_beam1)
    assert np.array_equal(a.alpha_beam2, b.alpha_beam2)
    assert a.alpha_beam1.shape == (5, grid.n_modes)


def test_distinct_modes_uncorrelated(small):
    grid = build_mode_grid(small)
    a = sample_vacuum(grid, stream(2, Role.BEAM1), size=200_000).alpha_beam1
    c = a[:, 0] * np.conj(a[:, 1])
    se = c.real.std() / math.sqrt(len(c))
    assert abs(c.real.mean()) < 4 * se


def test_g_zero_is_identity(small):
    grid = build_mode_grid(small)
    a = sample_vacuum(grid, stream(0, Role.BEAM1), size=3)
    b = apply_pdc(a, grid, 0.0)
    assert np.array_equal(b.beta_beam1, a.alpha_beam1)
    assert np.array_equal(b.beta_beam2, a.alpha_beam2)


@given(st.floats(-0.9, 0.9), st.floats(-2, 2), st.floats(-2, 2))
def test_transform_is_linear(g, c1, c2):
    grid = build_mode_grid(make_config(T_window=8e-12))
    rng = np.random.default_rng(0)
    a = AmplitudeSet(complex_normal(rng, 8), complex_normal(rng, 8))
    b = AmplitudeSet(complex_normal(rng, 8), complex_normal(rng, 8))
    mix = AmplitudeSet(c1 * a.alpha_beam1 + c2 * b.alpha_beam1,
                       c1 * a.alpha_beam2 + c2 * b.alpha_beam2)
    lhs = apply_pdc(mix, grid, g).beta_beam1
    rhs = c1 * apply_pdc(a, grid, g).beta_beam1 + c2 * apply_pdc(b, grid, g).beta_beam1
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_bad_pairing_and_g():
    grid = build_mode_grid(make_config(T_window=8e-12))
    a = AmplitudeSet(np.zeros(5, complex), np.zeros(5, complex))
    with pytest.raises(IndexError):
        apply_pdc(a, grid, 0.1)
    with pytest.raises(ValueError):
        apply_pdc(AmplitudeSet(np.zeros(8, complex), np.zeros(8, complex)), grid, 1.0)


@given(st.integers(1, 400), st.floats(0, 1))
def test_coupled_mask_closed_under_pairing(n, frac):
    mask = coupled_mask(n, frac)
    assert np.array_equal(mask, mask[::-1])
    assert abs(mask.sum() - frac * n) <= 1.0 + 1e-9


def test_sampled_anomalous_moment():
    cfg = make_config(T_window=16e-12, g_coupling=0.3)
    grid = build_mode_grid(cfg)
    a = sample_vacuum(grid, (stream(4, Role.BEAM1), stream(4, Role.BEAM2)), size=100_000)
    b = apply_pdc(a, grid, 0.3)
    prod = b.beta_beam1[:, 0] * b.beta_beam2[:, -1]
    se = prod.real.std() / math.sqrt(len(prod))
    assert abs(prod.real.mean() - anomalous_moment(0.3)) < 4 * se
    occ = np.abs(b.beta_beam1[:, 3]) ** 2 - 0.5
    assert abs(occ.mean() - excess_occupation(0.3)) < 4 * occ.std() / math.sqrt(len(occ))
    # a linear combination of beta stays Gaussian: excess kurtosis of its real part ~ 0
    lin = (b.beta_beam1[:, 0] + 0.7j * b.beta_beam2[:, 5] - b.beta_beam1[:, 9]).real
    z = (lin - lin.mean()) / lin.std()
    kurt = np.mean(z ** 4) - 3
    assert abs(kurt) < 4 * math.sqrt(24 / len(z))


# ---- mean signal intensity ------------------------------------------------------

def test_signal_intensity_zero_without_coupling(typical):
    assert expected_signal_intensity(typical) == 0.0


def test_signal_intensity_relative_size(typical):
    cfg = typical.replace(g_coupling=0.1)
    ratio = expected_signal_intensity(cfg) / zpf_grid_intensity(cfg)
    assert ratio == pytest.approx(relative_excess(0.1), rel=1e-12)
    assert 0.01 < ratio < 0.03


def test_signal_scales_as_g_squared(typical):
    a = expected_signal_intensity(typical.replace(g_coupling=0.025))
    b = expected_signal_intensity(typical.replace(g_coupling=0.05))
    assert b / a == pytest.approx(4.0, rel=0.01)


def test_weight_sums_match_explicit_grid():
    cfg = make_config(T_window=101e-12, g_coupling=0.1, signal_fraction=0.4)
    grid = build_mode_grid(cfg)
    from pdclhv.detector import element_zpf_intensity
    w = element_zpf_intensity(grid.frequencies, cfg)
    mask = coupled_mask(grid.n_elements, cfg.signal_fraction)
    for part, sel in (("all", slice(None)), ("coupled", mask), ("uncoupled", ~mask)):
        s1, s2, k = zpf_weight_sums(cfg, part)
        assert s1 == pytest.approx(w[sel].sum(), rel=1e-12)
        assert s2 == pytest.approx((w[sel] ** 2).sum(), rel=1e-9)
        assert k == len(w[sel])
    ww = np.sum(w[mask] * w[grid.pairing][mask])
    i_s = expected_signal_intensity(cfg)
    assert signal_product_moment(cfg) == pytest.approx(
        i_s ** 2 + 4 * anomalous_moment(0.1) ** 2 * ww, rel=1e-9)


def test_amplitude_dump(tmp_path, small):
    grid = build_mode_grid(small)
    a = sample_vacuum(grid, stream(0, Role.BEAM1), size=2)
    p = tmp_path / "amp.csv"
    dump_amplitudes_csv(p, a)
    lines = p.read_text().splitlines()
    assert lines[0] == "trial,beam,mode,re,im"
    assert len(lines) == 1 + 2 * 2 * grid.n_modes
