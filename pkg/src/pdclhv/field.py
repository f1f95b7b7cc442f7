"""Vacuum amplitudes (the hidden variables) and the down-conversion transform.

Each conjugate pair (j, pair(j)) is treated as a two-mode coupler:

    beta1_j       = (1 + g^2/2) alpha1_j       + g conj(alpha2_pair(j))
    beta2_pair(j) = (1 + g^2/2) alpha2_pair(j) + g conj(alpha1_j)

which keeps the three terms of the second-order PDC field (unchanged vacuum,
g-coupled conjugate, g^2 correction) restricted to one pair.  Moments under
the vacuum Wigner density (<|alpha|^2> = 1/2) follow by bilinear expansion:

    <|beta|^2> - 1/2           = g^2 + g^4/8
    <beta1_j beta2_pair(j)>    = g (1 + g^2/2)
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import CONSTANTS, ExperimentConfig, ModeGrid, grid_size

VACUUM_VARIANCE = 0.5  # <|alpha|^2>


@dataclass(frozen=True)
class AmplitudeSet:
    """Vacuum amplitudes per mode; a leading axis, if present, indexes trials."""

    alpha_beam1: np.ndarray
    alpha_beam2: np.ndarray


@dataclass(frozen=True)
class BeamAmplitudes:
    beta_beam1: np.ndarray
    beta_beam2: np.ndarray
    g_used: float


def complex_normal(rng: np.random.Generator, shape, variance: float = VACUUM_VARIANCE) -> np.ndarray:
    """Circular complex Gaussian with <|z|^2> = variance."""
    shape = (shape,) if isinstance(shape, (int, np.integer)) else tuple(shape)
    z = rng.standard_normal(shape + (2,))
    z *= math.sqrt(variance / 2.0)
    return z.view(np.complex128)[..., 0]


def sample_vacuum(grid: ModeGrid, rng, size: int | None = None) -> AmplitudeSet:
    """Draw alpha from W(alpha) = prod (2/pi) exp(-2|alpha|^2).

    ``rng`` is one generator (both beams drawn from it in turn) or a pair of
    generators, one per beam.
    """
    if grid.n_modes == 0:
        raise ValueError("empty mode grid")
    rng1, rng2 = rng if isinstance(rng, (tuple, list)) else (rng, rng)
    shape = (grid.n_modes,) if size is None else (size, grid.n_modes)
    return AmplitudeSet(complex_normal(rng1, shape), complex_normal(rng2, shape))


def coupled_mask(n: int, fraction: float) -> np.ndarray:
    """Central block of ``fraction * n`` elements, symmetric under j -> n-1-j."""
    n_c = n - 2 * round((n - fraction * n) / 2.0)
    n_c = min(max(n_c, 0), n)
    lo = (n - n_c) // 2
    mask = np.zeros(n, dtype=bool)
    mask[lo:lo + n_c] = True
    return mask


def apply_pdc(amplitudes: AmplitudeSet, grid: ModeGrid, g: float,
              coupled: np.ndarray | None = None) -> BeamAmplitudes:
    if not g * g < 1:
        raise ValueError(f"g^2 must be < 1, got g={g!r}")
    a1, a2 = amplitudes.alpha_beam1, amplitudes.alpha_beam2
    pair = grid.pairing
    n = a1.shape[-1]
    if pair.shape != (n,) or pair.min() < 0 or pair.max() >= n:
        raise IndexError("pairing index out of range for the amplitude set")
    if g == 0.0:
        return BeamAmplitudes(a1.copy(), a2.copy(), 0.0)
    gain = 1.0 + 0.5 * g * g
    if coupled is None:
        b1 = gain * a1 + g * np.conj(a2[..., pair])
        b2 = gain * a2 + g * np.conj(a1[..., pair])
    else:
        if not np.array_equal(coupled, coupled[pair]):
            raise ValueError("coupled mask must be closed under the pairing")
        b1 = a1.copy()
        b2 = a2.copy()
        b1[..., coupled] = gain * a1[..., coupled] + g * np.conj(a2[..., pair][..., coupled])
        b2[..., coupled] = gain * a2[..., coupled] + g * np.conj(a1[..., pair][..., coupled])
    return BeamAmplitudes(b1, b2, float(g))


def excess_occupation(g: float) -> float:
    """<|beta|^2> - 1/2 on a coupled mode."""
    return g * g + g ** 4 / 8.0


def relative_excess(g: float) -> float:
    """kappa_g: per-element mean intensity gain relative to the vacuum level."""
    return excess_occupation(g) / VACUUM_VARIANCE


def anomalous_moment(g: float) -> float:
    """<beta1_j beta2_pair(j)> on a coupled pair."""
    return g * (1.0 + 0.5 * g * g)


def intensity_correlation(g: float) -> float:
    """Correlation coefficient of |beta1_j|^2 and |beta2_pair(j)|^2."""
    v = VACUUM_VARIANCE + excess_occupation(g)
    return anomalous_moment(g) ** 2 / (v * v)


def _sum_omega_sq(n: int, n_c: int, center: float, spacing: float) -> float:
    # sum of (center + o_j)^2 over the central n_c of n symmetric offsets
    del n
    return n_c * center ** 2 + spacing ** 2 * n_c * (n_c ** 2 - 1) / 12.0


def zpf_grid_intensity(config: ExperimentConfig, coupled_only: bool = False) -> float:
    """Sum of hbar omega_j^2 / (4 c T L) over the element grid (or its coupled part)."""
    n = grid_size(config)
    lo, hi = config.band
    n_c = int(coupled_mask(n, config.signal_fraction).sum()) if coupled_only else n
    s2 = _sum_omega_sq(n, n_c, 0.5 * (lo + hi), 2.0 * math.pi / config.T_window)
    return CONSTANTS.hbar * s2 / (4.0 * CONSTANTS.c * config.T_window * config.detector_L)


def expected_signal_intensity(config: ExperimentConfig, derived=None) -> float:
    """Mean excess effective intensity I_s = <I> - I0 produced by the coupling."""
    del derived
    if config.g_coupling == 0.0 or config.signal_fraction == 0.0:
        return 0.0
    return relative_excess(config.g_coupling) * zpf_grid_intensity(config, coupled_only=True)


def signal_product_moment(config: ExperimentConfig) -> float:
    """<(I1 - I10)(I2 - I20)> for the symmetric two-detector arrangement.

    Equals I1s I2s + cov(I1, I2); the covariance comes from the conjugate
    pairs, cov = sum_j 4 w_j w_pair(j) |<beta1 beta2>|^2 with w_j the vacuum
    element intensity.
    """
    i_s = expected_signal_intensity(config)
    if config.g_coupling == 0.0:
        return i_s * i_s
    # sum over coupled pairs of w_j w_pair(j) = scale^2 sum (c^2 - o_j^2)^2
    n = grid_size(config)
    k = int(coupled_mask(n, config.signal_fraction).sum())
    lo, hi = config.band
    center = 0.5 * (lo + hi)
    h = 2.0 * math.pi / config.T_window
    s2 = h ** 2 * k * (k * k - 1) / 12.0
    s4 = h ** 4 * k * (k * k - 1) * (3 * k * k - 7) / 240.0
    scale = CONSTANTS.hbar / (4.0 * CONSTANTS.c * config.T_window * config.detector_L)
    ww = scale ** 2 * (k * center ** 4 - 2 * center ** 2 * s2 + s4)
    return i_s * i_s + 4.0 * anomalous_moment(config.g_coupling) ** 2 * ww


def dump_amplitudes_csv(path: str | Path, amplitudes: AmplitudeSet, trial_offset: int = 0):
    """Debug dump: one row per (trial, beam, mode)."""
    a1 = np.atleast_2d(amplitudes.alpha_beam1)
    a2 = np.atleast_2d(amplitudes.alpha_beam2)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["trial", "beam", "mode", "re", "im"])
        for t in range(a1.shape[0]):
            for beam, arr in ((1, a1), (2, a2)):
                for k, z in enumerate(arr[t]):
                    w.writerow([t + trial_offset, beam, k, repr(z.real), repr(z.imag)])


def zpf_weight_sums(config: ExperimentConfig, part: str = "all") -> tuple[float, float, int]:
    """(sum w_j, sum w_j^2, count) of vacuum element intensities.

    ``part`` selects all elements, the coupled block or its complement.
    """
    n = grid_size(config)
    n_c = int(coupled_mask(n, config.signal_fraction).sum())
    lo, hi = config.band
    center = 0.5 * (lo + hi)
    h = 2.0 * math.pi / config.T_window
    scale = CONSTANTS.hbar / (4.0 * CONSTANTS.c * config.T_window * config.detector_L)

    def sums(k):
        # symmetric arithmetic block of k offsets: sum o^2, sum o^4
        s2 = h ** 2 * k * (k * k - 1) / 12.0
        s4 = h ** 4 * k * (k * k - 1) * (3 * k * k - 7) / 240.0
        return (scale * (k * center ** 2 + s2),
                scale ** 2 * (k * center ** 4 + 6 * center ** 2 * s2 + s4))

    if part == "all":
        return (*sums(n), n)
    c1, c2 = sums(n_c)
    if part == "coupled":
        return c1, c2, n_c
    if part == "uncoupled":
        a1, a2 = sums(n)
        return a1 - c1, a2 - c2, n - n_c
    raise ValueError(f"unknown part {part!r}")
