import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pdclhv.core import CONSTANTS, build_mode_grid, derive_params
from pdclhv.detector import (ClickOutcome, detection_probability, detection_probability_si,
                             effective_intensity, element_scale, filter_fields, sample_clicks,
                             sinc_weights, write_trace_csv)
from pdclhv.field import BeamAmplitudes, apply_pdc, sample_vacuum
from pdclhv.streams import Role, stream

from conftest import make_config


def beams_for(grid, size=4, seed=0, g=0.0):
    a = sample_vacuum(grid, (stream(seed, Role.BEAM1), stream(seed, Role.BEAM2)), size=size)
    return apply_pdc(a, grid, g)


def test_default_grid_is_elementwise(small):
    grid = build_mode_grid(small)
    b = beams_for(grid)
    e = filter_fields(b, grid, 1, small).e_plus
    np.testing.assert_allclose(e / element_scale(grid, small), b.beta_beam1, rtol=1e-14)


def test_intensity_is_sum_of_moduli(small):
    grid = build_mode_grid(small)
    b = beams_for(grid)
    I = effective_intensity(filter_fields(b, grid, 2, small), 1.0).I_bar
    scale2 = element_scale(grid, small) ** 2
    expected = CONSTANTS.c * CONSTANTS.epsilon0 * np.sum(scale2 * np.abs(b.beta_beam2) ** 2, -1)
    np.testing.assert_allclose(I, expected, rtol=1e-13)


def test_oversampled_off_centre_weight():
    T = 1e-9
    w = sinc_weights(np.array([0.0, math.pi / T]), np.array([0.0]), T)
    assert w[0, 0] == 1.0
    assert w[0, 1] == pytest.approx(2 / math.pi, rel=1e-14)


def test_oversampled_filter_uses_sinc(small):
    grid = build_mode_grid(small, oversample=2)
    b = beams_for(grid, size=2)
    e = filter_fields(b, grid, 1, small).e_plus
    assert e.shape == (2, grid.n_elements)
    S = sinc_weights(grid.modes, grid.frequencies, small.T_window)
    np.testing.assert_allclose(e / element_scale(grid, small), b.beta_beam1 @ S.T, atol=1e-12)


def test_invalid_detector(small):
    grid = build_mode_grid(small)
    with pytest.raises(ValueError):
        filter_fields(beams_for(grid), grid, 3, small)


def test_zero_field_gives_zero_intensity(small):
    grid = build_mode_grid(small)
    z = np.zeros(grid.n_modes, complex)
    s = effective_intensity(filter_fields(BeamAmplitudes(z, z, 0.0), grid, 1, small), 2.0)
    assert s.I_bar == 0.0 and s.u == 0.0


@given(st.floats(0, 2 * math.pi))
def test_global_phase_invariance(phi):
    cfg = make_config(T_window=32e-12)
    grid = build_mode_grid(cfg)
    b = beams_for(grid, size=1, g=0.2)
    rot = BeamAmplitudes(b.beta_beam1 * np.exp(1j * phi), b.beta_beam2, 0.2)
    i0 = effective_intensity(filter_fields(b, grid, 1, cfg), 1.0).I_bar
    i1 = effective_intensity(filter_fields(rot, grid, 1, cfg), 1.0).I_bar
    np.testing.assert_allclose(i0, i1, rtol=1e-12)


def test_vacuum_elements_uncorrelated(small):
    grid = build_mode_grid(small)
    b = beams_for(grid, size=200_000, seed=9)
    e = filter_fields(b, grid, 1, small).e_plus
    c = (e[:, 3] * np.conj(e[:, 10])).real
    assert abs(c.mean()) < 4 * c.std() / math.sqrt(len(c))


def test_zpf_mean_u_is_one(small):
    grid = build_mode_grid(small)
    d = derive_params(small)
    b = beams_for(grid, size=10_000, seed=5)
    u = effective_intensity(filter_fields(b, grid, 1, small), d.I0_bar).u
    assert abs(u.mean() - 1) < 4 * u.std() / math.sqrt(len(u))
    assert np.all(u >= 0)


def test_probability_examples():
    m, g, s = 5.0, 0.5, 0.01
    assert detection_probability(1 + 4.9 * s, m, g, s) == 0.0
    assert detection_probability(2.0, 4.0, g, 0.25) == 0.0  # strict threshold, exact y = m
    p = detection_probability(1 + 20 * s, m, g, s)
    assert p == pytest.approx(1 - math.exp(-10), rel=1e-15)
    assert detection_probability(1 + 6 * s, m, 1e6, s) == 1.0
    with pytest.raises(ValueError):
        detection_probability(1.0, 0.0, g, s)


@given(st.floats(0.1, 10), st.floats(1e-3, 10), st.floats(1e-4, 0.1),
       st.lists(st.floats(0, 3), min_size=2, max_size=30))
def test_probability_monotone_and_bounded(m, gamma, s, us):
    us = np.sort(np.asarray(us))
    p = detection_probability(us, m, gamma, s)
    assert np.all((p >= 0) & (p <= 1))
    assert np.all(np.diff(p) >= 0)


@given(st.floats(0.5, 2), st.floats(0.1, 10))
def test_si_form_matches_dimensionless(u, zeta):
    I0, sigma0 = 60.0, 0.6
    I = u * I0
    m = 3.0
    gamma = zeta * sigma0
    a = detection_probability(u, m, gamma, sigma0 / I0)
    b = detection_probability_si(I, I0, I0 + m * sigma0, zeta)
    assert a == pytest.approx(b, abs=1e-12)


def test_clicks_extremes():
    rng = stream(0, Role.CLICKS)
    never = sample_clicks(np.zeros(100), np.zeros(100), rng)
    assert not never.clicked.any()
    always = sample_clicks(np.ones(100), np.ones(100), rng)
    assert always.clicked.all()
    with pytest.raises(ValueError):
        sample_clicks(1.5, 0.0, rng)


def test_click_product_law():
    n = 10 ** 6
    out = sample_clicks(np.full(n, 0.3), np.full(n, 0.6), stream(1, Role.CLICKS))
    both = out.clicked.all(axis=-1).astype(float)
    assert abs(both.mean() - 0.18) < 4 * math.sqrt(0.18 * 0.82 / n)


def test_trace_csv(tmp_path):
    clicks = ClickOutcome(np.array([[True, False], [False, False]]), np.zeros((2, 2)))
    p = tmp_path / "trace.csv"
    write_trace_csv(p, [1.0, 2.0], [0.1, 0.2], clicks, u2=[1.5, 0.5], p2=[0.0, 0.0])
    rows = p.read_text().splitlines()
    assert rows[0] == "trial,detector,u,probability,clicked"
    assert rows[1] == "0,1,1.0,0.1,1"
    assert len(rows) == 5
