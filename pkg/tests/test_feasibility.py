import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pdclhv import feasibility as fz

from conftest import make_config


def section_config(**kw):
    base = dict(T_window=1e-8, tau_coherence=1e-13, detector_L=5e-3, lens_Rl=5e-3,
                lens_f=5e-3, eta=0.1)
    base.update(kw)
    return make_config(**base)


def test_unit_aperture():
    b2, r1, r2 = fz.lens_and_diffraction(make_config(lens_Rl=2.5e-3, lens_f=5e-3))
    assert r1 == pytest.approx(1.22 * 700e-9)
    assert r2 == pytest.approx(2.23 * 700e-9)


def test_quartic_lens_gain():
    a = fz.lens_and_diffraction(make_config(lens_Rl=1e-3, lens_f=2.5e-2))[0]
    b = fz.lens_and_diffraction(make_config(lens_Rl=2e-3, lens_f=2.5e-2))[0]
    assert b / a == pytest.approx(16.0)


def test_direct_evaluation():
    b2, r1, _ = fz.lens_and_diffraction(make_config(lens_Rl=5e-3, lens_f=2.5e-2))
    assert b2 == pytest.approx(math.pi ** 2 * 5e-3 ** 4 / (700e-9 ** 2 * 2.5e-2 ** 2))
    assert r1 == pytest.approx(1.22 * 700e-9 * 2.5e-2 / 1e-2)


def test_rate_bound_order_of_magnitude():
    rates = [r["rate_min_lens"] for r in fz.sweep_tau(section_config(), fz.default_tau_grid())]
    assert any(1e5 <= r <= 1e6 for r in rates)


def test_bounds_vanish_for_long_coherence():
    near, far = fz.sweep_tau(section_config(), [1e-13, 1e11])
    for key in ("I_s_min", "rate_min_lens", "rate_min_coherence"):
        assert 0 < far[key] < 1e-11 * near[key]


@given(st.floats(1e-6, 1e-3), st.floats(1e-3, 1e-2))
def test_coherence_form_equals_lens_form_at_saturation(rc, rl):
    lam = 700e-9
    cfg = section_config(source_distance_d=rl * rc / lam, crystal_radius_Rc=rc, lens_Rl=rl)
    assert fz.rate_bound_coherence(cfg) == pytest.approx(fz.rate_bound_lens(cfg), rel=1e-12)


def test_bounds_scale_as_inverse_root_tau():
    taus = np.geomspace(1e-13, 4e-12, 7)
    rows = fz.sweep_tau(section_config(), taus)
    for key in ("I_s_min", "rate_min_lens", "rate_min_coherence"):
        scaled = [r[key] * math.sqrt(r["tau"]) for r in rows]
        assert np.ptp(scaled) / np.mean(scaled) < 1e-12
        assert all(r[key] >= 0 for r in rows)


def test_report_flags_and_margins():
    cfg = section_config(g_coupling=0.1, I_m_margin=3.0, zeta_gain=0.1, tau_coherence=1e-12)
    rep = fz.minimal_bounds(cfg, k=10)
    assert rep.I_s_configured > 0 and rep.margin_intensity > 0
    assert rep.signal_dominates == (rep.I_s_configured > 10 * rep.I_s_min)
    assert rep.I_in_min == pytest.approx(rep.I_s_min / rep.b_squared)
    with pytest.raises(ValueError):
        fz.minimal_bounds(cfg, k=0.5)
    coherent = section_config(source_distance_d=1.0, lens_Rl=1e-3, crystal_radius_Rc=1e-4)
    assert fz.minimal_bounds(coherent).spatially_coherent
