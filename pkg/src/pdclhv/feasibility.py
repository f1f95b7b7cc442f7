"""Experiment-design bounds: lens gain, diffraction radius, minimal intensity and rate.

Strong inequalities ("much greater than") are made concrete with a strictness
factor k: a configuration passes when its value exceeds k times the raw bound.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import analytic
from .core import (CONSTANTS, RING_FIRST, RING_SECOND, ExperimentConfig, derive_params)
from .field import expected_signal_intensity

DEFAULT_STRICTNESS = 10.0
RING_FRACTIONS = {"first": 0.84, "second": 0.91}  # reported, not computed


@dataclass(frozen=True)
class FeasibilityReport:
    strictness: float
    b_squared: float
    R_diffraction_first: float
    R_diffraction_second: float
    I_s_min: float
    I_in_min: float
    rate_min_lens: float
    rate_min_coherence: float
    I_s_configured: float
    rate_configured: float
    margin_intensity: float
    margin_rate_lens: float
    margin_rate_coherence: float
    signal_dominates: bool
    spatially_coherent: bool
    small_radius: bool

    def to_dict(self) -> dict:
        return asdict(self)


def lens_and_diffraction(config: ExperimentConfig) -> tuple[float, float, float]:
    """(b^2, R_first, R_second) for the collecting lens."""
    lam, rl, f = config.lambda_center, config.lens_Rl, config.lens_f
    if not (rl > 0 and f > 0):
        raise ValueError("lens radius and focal length must be positive")
    b2 = math.pi ** 2 * rl ** 4 / (lam ** 2 * f ** 2)
    a_r = 2.0 * rl / f
    return b2, RING_FIRST * lam / a_r, RING_SECOND * lam / a_r


def _root_tau_t(config: ExperimentConfig) -> float:
    return math.sqrt(config.tau_coherence * config.T_window)


def intensity_bound(config: ExperimentConfig) -> float:
    """Raw lower bound on the signal effective intensity, sigma0 in closed form."""
    omega_bar = 2.0 * math.pi * CONSTANTS.c / config.lambda_center
    return CONSTANTS.hbar * omega_bar ** 2 / (4.0 * CONSTANTS.c * config.detector_L
                                               * _root_tau_t(config))


def rate_bound_lens(config: ExperimentConfig) -> float:
    return (config.eta * config.lambda_center * config.lens_f ** 2
            / (2.0 * config.lens_Rl ** 2 * config.detector_L * _root_tau_t(config)))


def rate_bound_coherence(config: ExperimentConfig) -> float:
    return (config.eta * config.lens_f ** 2 * config.crystal_radius_Rc ** 2
            / (2.0 * config.detector_L * config.source_distance_d ** 2 * config.lambda_center
               * _root_tau_t(config)))


def minimal_bounds(config: ExperimentConfig, k: float = DEFAULT_STRICTNESS) -> FeasibilityReport:
    if not k >= 1:
        raise ValueError(f"strictness factor must be >= 1, got {k!r}")
    b2, r1, r2 = lens_and_diffraction(config)
    d = derive_params(config)
    i_min = intensity_bound(config)
    r_lens = rate_bound_lens(config)
    r_coh = rate_bound_coherence(config)
    i_s = expected_signal_intensity(config)
    if i_s > 0:
        rate = analytic.p_single_model(analytic.SingleParams.from_config(config)) / config.T_window
    else:
        rate = 0.0

    def ratio(value, bound):
        return value / bound if bound > 0 else math.inf

    return FeasibilityReport(
        strictness=float(k), b_squared=b2, R_diffraction_first=r1, R_diffraction_second=r2,
        I_s_min=i_min, I_in_min=i_min / b2, rate_min_lens=r_lens, rate_min_coherence=r_coh,
        I_s_configured=i_s, rate_configured=rate,
        margin_intensity=ratio(i_s, i_min), margin_rate_lens=ratio(rate, r_lens),
        margin_rate_coherence=ratio(rate, r_coh),
        signal_dominates=i_s > k * i_min,
        spatially_coherent=(config.source_distance_d * config.lambda_center
                            >= config.lens_Rl * config.crystal_radius_Rc),
        small_radius=d.small_radius_ok,
    )


SWEEP_COLUMNS = ("tau", "I_s_min", "I_in_min", "rate_min_lens", "rate_min_coherence",
                 "k_rate_min_lens", "k_rate_min_coherence")


def sweep_tau(config: ExperimentConfig, taus, k: float = DEFAULT_STRICTNESS) -> list[dict]:
    """Bounds over a list of coherence times (the window is held fixed)."""
    rows = []
    for tau in np.asarray(taus, dtype=float):
        cfg = config.replace(tau_coherence=float(tau))
        i_min = intensity_bound(cfg)
        rl, rc = rate_bound_lens(cfg), rate_bound_coherence(cfg)
        rows.append({"tau": float(tau), "I_s_min": i_min,
                     "I_in_min": i_min / lens_and_diffraction(cfg)[0],
                     "rate_min_lens": rl, "rate_min_coherence": rc,
                     "k_rate_min_lens": k * rl, "k_rate_min_coherence": k * rc})
    return rows


def default_tau_grid(n: int = 9) -> np.ndarray:
    """Log-spaced coherence times from 0.1 ps to 4 ps."""
    return np.geomspace(0.1e-12, 4e-12, n)
