"""Filtered fields, effective intensity and the threshold detection law."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import CONSTANTS, ExperimentConfig, ModeGrid
from .field import VACUUM_VARIANCE, BeamAmplitudes


@dataclass(frozen=True)
class FilteredFieldSet:
    e_plus: np.ndarray  # V/m, last axis = element
    detector_id: int


@dataclass(frozen=True)
class IntensitySample:
    I_bar: np.ndarray  # W/m^2
    u: np.ndarray
    detector_id: int


@dataclass(frozen=True)
class ClickOutcome:
    clicked: np.ndarray  # (..., 2) bool
    probability_used: np.ndarray  # (..., 2)


def element_zpf_intensity(omega, config: ExperimentConfig):
    """Vacuum mean effective intensity of one element, hbar omega^2 / (4 c T L)."""
    omega = np.asarray(omega, dtype=float)
    return CONSTANTS.hbar * omega ** 2 / (4.0 * CONSTANTS.c * config.T_window * config.detector_L)


def element_scale(grid: ModeGrid, config: ExperimentConfig) -> np.ndarray:
    """Field scale (V/m per unit amplitude) fixing c eps0 <|E_j|^2> = I0_j in vacuum.

    Absorbs sqrt(hbar omega / eps0 L0^3) and the small-detector transverse and
    longitudinal factors, which are unity under the small-radius condition.
    """
    w = element_zpf_intensity(grid.frequencies, config)
    return np.sqrt(w / (CONSTANTS.c * CONSTANTS.epsilon0 * VACUUM_VARIANCE))


def sinc_weights(modes: np.ndarray, elements: np.ndarray, T: float) -> np.ndarray:
    """sinc[T/2 (omega_k - omega_j)], shape (elements, modes)."""
    d = modes[None, :] - elements[:, None]
    return np.sinc(T * d / (2.0 * math.pi))


def filter_fields(beams: BeamAmplitudes, grid: ModeGrid, detector_id: int,
                  config: ExperimentConfig) -> FilteredFieldSet:
    if detector_id not in (1, 2):
        raise ValueError(f"detector_id must be 1 or 2, got {detector_id!r}")
    beta = beams.beta_beam1 if detector_id == 1 else beams.beta_beam2
    if beta.shape[-1] != grid.n_modes:
        raise ValueError("amplitudes are not defined on this grid")
    scale = element_scale(grid, config)
    if grid.oversample == 1:
        # sinc vanishes at every nonzero multiple of 2 pi / T
        e = beta * scale
    else:
        e = (beta @ sinc_weights(grid.modes, grid.frequencies, config.T_window).T) * scale
    return FilteredFieldSet(e, detector_id)


def effective_intensity(fields: FilteredFieldSet, I0_bar: float) -> IntensitySample:
    e = fields.e_plus
    intensity = CONSTANTS.c * CONSTANTS.epsilon0 * np.sum(e.real ** 2 + e.imag ** 2, axis=-1)
    return IntensitySample(intensity, intensity / I0_bar, fields.detector_id)


def detection_probability(u, m: float, gamma: float, s: float):
    """(1 - exp(-gamma (u - 1)/s)) * Theta[u - (1 + m s)], elementwise.

    Identical to (1 - exp(-zeta (I - I0))) Theta[I - I_m] with gamma = zeta sigma0.
    """
    if not (m > 0 and gamma > 0 and s > 0):
        raise ValueError("detection_probability requires m > 0, gamma > 0, s > 0")
    u = np.asarray(u, dtype=float)
    y = (u - 1.0) / s
    p = np.where(y > m, -np.expm1(-gamma * np.maximum(y, 0.0)), 0.0)
    return np.clip(p, 0.0, 1.0)


def detection_probability_si(I_bar, I0_bar: float, I_m: float, zeta: float):
    I_bar = np.asarray(I_bar, dtype=float)
    p = np.where(I_bar > I_m, -np.expm1(-zeta * (I_bar - I0_bar)), 0.0)
    return np.clip(p, 0.0, 1.0)


def sample_clicks(prob1, prob2, rng: np.random.Generator) -> ClickOutcome:
    """Independent Bernoulli decisions given the field realisation."""
    p = np.stack(np.broadcast_arrays(np.asarray(prob1, float), np.asarray(prob2, float)), axis=-1)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    return ClickOutcome(rng.random(p.shape) < p, p)


def write_trace_csv(path: str | Path, u1, p1, clicks: ClickOutcome, u2=None, p2=None,
                    trial_offset: int = 0):
    """Per-trial trace: trial, detector, u, probability, clicked."""
    rows = [(1, np.atleast_1d(u1), np.atleast_1d(p1), clicks.clicked[..., 0])]
    if u2 is not None:
        rows.append((2, np.atleast_1d(u2), np.atleast_1d(p2), clicks.clicked[..., 1]))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["trial", "detector", "u", "probability", "clicked"])
        for t in range(len(rows[0][1])):
            for det, u, p, c in rows:
                w.writerow([t + trial_offset, det, repr(float(u[t])), repr(float(p[t])),
                            int(np.atleast_1d(c)[t])])
