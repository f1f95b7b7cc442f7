"""Closed-form intensity distributions and detection probabilities.

All probabilities are written in the standardized variable y = (I - I0)/sigma0,
under which the effective intensity is N(x, 1) and the detector fires with
probability (1 - exp(-gamma y)) for y > m.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np
from scipy import integrate, special

from .core import CONSTANTS, ExperimentConfig, derive_params, small_radius_limit
from .field import expected_signal_intensity, signal_product_moment

SQRT2 = math.sqrt(2.0)
SQRT2PI = math.sqrt(2.0 * math.pi)


class ConvergenceError(ArithmeticError):
    def __init__(self, message: str, achieved: float):
        super().__init__(message)
        self.achieved = achieved


@dataclass(frozen=True)
class SingleParams:
    m: float
    x: float
    gamma: float

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError(f"margin m must be > 0, got {self.m!r}")
        if not self.x >= 0:
            raise ValueError(f"signal x must be >= 0, got {self.x!r}")
        if not self.gamma > 0:
            raise ValueError(f"gain gamma must be > 0, got {self.gamma!r}")

    @classmethod
    def from_config(cls, config: ExperimentConfig) -> "SingleParams":
        d = derive_params(config)
        return cls(m=config.I_m_margin, x=expected_signal_intensity(config) / d.sigma0,
                   gamma=config.zeta_gain * d.sigma0)


@dataclass(frozen=True)
class JointParams:
    first: SingleParams
    second: SingleParams
    rho_c: float

    def __post_init__(self):
        if not abs(self.rho_c) < 1:
            raise ValueError(f"|rho_c| must be < 1, got {self.rho_c!r}")

    @classmethod
    def symmetric(cls, m: float, x: float, gamma: float, rho_c: float) -> "JointParams":
        p = SingleParams(m, x, gamma)
        return cls(p, p, rho_c)

    @classmethod
    def from_config(cls, config: ExperimentConfig) -> "JointParams":
        p = SingleParams.from_config(config)
        return cls(p, p, joint_correlation(config))


# -- vacuum statistics ------------------------------------------------------

def zpf_element_intensity_closed(config: ExperimentConfig, omega_j: float) -> float:
    return CONSTANTS.hbar * omega_j ** 2 / (4.0 * CONSTANTS.c * config.T_window * config.detector_L)


def _bessel_factor(x):
    x = np.asarray(x, dtype=float)
    small = x < 1e-6
    xs = np.where(small, 1.0, x)
    return np.where(small, 1.0 - x * x / 8.0, (2.0 * special.j1(xs) / xs) ** 2)


def _element_integrand(v, omega_j: float, R: float, L: float):
    c = CONSTANTS.c
    w = c * v / (L * omega_j)
    arg = 2.0 * omega_j * R / c * np.sqrt(np.clip(w * (1.0 - w), 0.0, None))
    return np.sinc(v / math.pi) ** 2 * _bessel_factor(arg)


def _panel_gauss_legendre(f, edges: np.ndarray, n: int) -> float:
    nodes, weights = np.polynomial.legendre.leggauss(n)
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    v = 0.5 * (a + b) + half * nodes[None, :]
    return math.fsum((f(v) * weights[None, :] * half).sum(axis=1))


class QuadResult(NamedTuple):
    value: float
    error: float


def zpf_element_quadrature(config: ExperimentConfig, omega_j: float,
                           rtol: float = 1e-6, max_nodes: int = 96) -> QuadResult:
    """Full Bessel-sinc element integral over v in (0, L omega_j / 2c).

    Integrates panel-wise between consecutive zeros of sin(v) with a pair of
    Gauss-Legendre rules; the rule pair is refined until their difference
    meets ``rtol``.
    """
    L, R = config.detector_L, config.detector_R
    upper = L * omega_j / (2.0 * CONSTANTS.c)
    edges = np.arange(0.0, upper, math.pi)
    edges = np.append(edges, upper) if edges[-1] < upper else edges
    f = lambda v: _element_integrand(v, omega_j, R, L)  # noqa: E731
    n = 12
    coarse = _panel_gauss_legendre(f, edges, n)
    while True:
        fine = _panel_gauss_legendre(f, edges, 2 * n)
        err = abs(fine - coarse)
        if err <= rtol * abs(fine) or 2 * n >= max_nodes:
            break
        n, coarse = 2 * n, fine
    prefactor = CONSTANTS.hbar * omega_j ** 2 / (
        2.0 * math.pi * CONSTANTS.c * config.T_window * L)
    if err > rtol * abs(fine):
        raise ConvergenceError(
            f"element quadrature reached relative error {err / abs(fine):.3g} > {rtol:g}",
            err / abs(fine))
    return QuadResult(float(prefactor * fine), float(prefactor * err))


def zpf_element_intensity(config: ExperimentConfig, omega_j: float, method: str = "closed",
                          rtol: float = 1e-6) -> float:
    if method == "closed":
        return zpf_element_intensity_closed(config, omega_j)
    if method == "quadrature":
        return zpf_element_quadrature(config, omega_j, rtol).value
    raise ValueError(f"unknown method {method!r}")


def zpf_statistics(config: ExperimentConfig) -> tuple[float, float]:
    d = derive_params(config)
    return d.I0_bar, d.sigma0


def small_radius_ratio(config: ExperimentConfig) -> float:
    return config.detector_R / small_radius_limit(config.lambda_center, config.detector_L)


# -- single detector --------------------------------------------------------

def rho_density(u, x: float, s: float):
    """Density of u = I/I0: normal with mean 1 + x s and sd s (x = 0: vacuum)."""
    if not s > 0:
        raise ValueError("s must be > 0")
    z = (np.asarray(u, dtype=float) - 1.0 - x * s) / s
    return np.exp(-0.5 * z * z) / (s * SQRT2PI)


def subzero_mass(x: float, s: float) -> float:
    """Probability the Gaussian density assigns to unphysical u < 0."""
    return float(special.ndtr(-(1.0 + x * s) / s))


def _half_erfc(z):
    return 0.5 * special.erfc(z)


def tail_expectation(m, mean, sd, gamma):
    """E[(1 - exp(-gamma Y)) 1{Y > m}] for Y ~ N(mean, sd^2), elementwise.

    The exponential term exp(-gamma mean + gamma^2 sd^2/2) erfc(.) is folded
    through erfcx whenever the erfc argument is positive, so large gamma does
    not overflow.
    """
    m, mean, sd, gamma = np.broadcast_arrays(*(np.asarray(a, dtype=float)
                                               for a in (m, mean, sd, gamma)))
    d = (m - mean) / sd
    first = _half_erfc(d / SQRT2)
    z = (d + gamma * sd) / SQRT2
    pos = z >= 0
    zp = np.where(pos, z, 0.0)
    # exponent after absorbing exp(-z^2): -d^2/2 - gamma m
    second_pos = 0.5 * special.erfcx(zp) * np.exp(-0.5 * d * d - gamma * m)
    second_neg = _half_erfc(np.where(pos, 0.0, z)) * np.exp(
        np.where(pos, 0.0, -gamma * mean + 0.5 * (gamma * sd) ** 2))
    p = first - np.where(pos, second_pos, second_neg)
    return np.clip(p, 0.0, 1.0)


def p_single_model(params: SingleParams) -> float:
    """Single-detection probability of the threshold model."""
    return float(tail_expectation(params.m, params.x, 1.0, params.gamma))


class LinearApprox(NamedTuple):
    full: float
    limit: float


def p_single_linear(params: SingleParams) -> LinearApprox:
    """Linearised response gamma y above threshold; ``limit`` is gamma x."""
    d = params.m - params.x
    full = (params.gamma * params.x * _half_erfc(d / SQRT2)
            + params.gamma / SQRT2PI * math.exp(-0.5 * d * d))
    return LinearApprox(float(full), params.gamma * params.x)


def p_dark(params: SingleParams) -> float:
    if not params.m > 0:
        raise ValueError("m must be > 0")
    return params.gamma / SQRT2PI * math.exp(-0.5 * params.m ** 2)


def photon_energy(config: ExperimentConfig) -> float:
    return CONSTANTS.h * CONSTANTS.c / config.lambda_center


def window_energy(config: ExperimentConfig, I_s: float) -> float:
    """Aperture- and window-integrated signal energy of a spatially coherent signal."""
    return math.pi * config.detector_R ** 2 * config.T_window * I_s


def quantum_zeta(config: ExperimentConfig) -> float:
    """Gain at which the model's linear regime reproduces the quantum rate."""
    return config.eta * config.T_window * math.pi * config.detector_R ** 2 / photon_energy(config)


def p_single_quantum(config: ExperimentConfig, signal_window_energy: float) -> float:
    return config.eta / photon_energy(config) * signal_window_energy


# -- two detectors ----------------------------------------------------------

def joint_correlation(config: ExperimentConfig) -> float:
    """Intensity correlation coefficient <I1^ I2^> / sigma0^2 of the two arms."""
    d = derive_params(config)
    cov = signal_product_moment(config) - expected_signal_intensity(config) ** 2
    return cov / d.sigma0 ** 2


def joint_density(u1, u2, x1: float, x2: float, s1: float, s2: float, rho: float):
    """Bivariate normal density of (u1, u2) with means 1 + x_i s_i, sds s_i."""
    z1 = (np.asarray(u1, float) - 1.0 - x1 * s1) / s1
    z2 = (np.asarray(u2, float) - 1.0 - x2 * s2) / s2
    q = (z1 * z1 - 2 * rho * z1 * z2 + z2 * z2) / (1 - rho * rho)
    return np.exp(-0.5 * q) / (2 * math.pi * s1 * s2 * math.sqrt(1 - rho * rho))


def joint_density_equal_sigma(I1, I2, I10: float, I20: float, I1s: float, I2s: float,
                              sigma0: float, cov: float):
    """Double Gaussian in physical units for sigma1 = sigma2 = sigma0."""
    h1 = np.asarray(I1, float) - I1s - I10
    h2 = np.asarray(I2, float) - I2s - I20
    r = cov / sigma0 ** 2
    pref = 1.0 / (2 * math.pi * sigma0 ** 2) / math.sqrt(1 - r * r)
    return pref * np.exp(-(h1 * h1 + h2 * h2 - 2 * h1 * h2 * r)
                         / (2 * (sigma0 ** 2 - cov ** 2 / sigma0 ** 2)))


def p_joint_model(params: JointParams, tol: float = 1e-10, return_error: bool = False):
    """Joint detection probability by integrating over the first intensity.

    Conditional on y1 the second intensity is normal, so the inner integral
    over y2 is :func:`tail_expectation`; the outer one is adaptive
    Gauss-Kronrod on y1 in (m1, x1 + 12).
    """
    a, b, r = params.first, params.second, params.rho_c
    cs = math.sqrt(1.0 - r * r)
    lo = max(a.m, a.x - 12.0)
    hi = a.x + 12.0
    if lo >= hi:
        return (0.0, 0.0) if return_error else 0.0

    def outer(y1):
        w = math.exp(-0.5 * (y1 - a.x) ** 2) / SQRT2PI * -math.expm1(-a.gamma * y1)
        return w * float(tail_expectation(b.m, b.x + r * (y1 - a.x), cs, b.gamma))

    brk = sorted({p for p in (a.x, a.x - 3, a.x + 3) if lo < p < hi})
    value, err = integrate.quad(outer, lo, hi, epsabs=tol / 10, epsrel=1e-13, limit=400,
                                points=brk or None)
    if err > tol:
        raise ConvergenceError(f"joint quadrature error {err:.3g} exceeds {tol:g}", err)
    value = min(max(value, 0.0), 1.0)
    return (value, err) if return_error else value


def p_joint_linear(params: JointParams) -> float:
    """gamma1 gamma2 <y1 y2> = zeta1 zeta2 <(I1 - I10)(I2 - I20)>."""
    a, b = params.first, params.second
    return a.gamma * b.gamma * (a.x * b.x + params.rho_c)


def p_joint_quantum(config: ExperimentConfig, window_product_moment: float,
                    config2: ExperimentConfig | None = None) -> float:
    """(eta1 eta2 / h^2 nu1 nu2) <I~1s I~2s>."""
    config2 = config2 or config
    return (config.eta * config2.eta / (photon_energy(config) * photon_energy(config2))
            * window_product_moment)


def window_product_moment(config: ExperimentConfig) -> float:
    """<I~1s I~2s> from the effective-intensity moments under spatial coherence."""
    at = math.pi * config.detector_R ** 2 * config.T_window
    return at * at * signal_product_moment(config)


# -- coherent single-mode signal --------------------------------------------

def coherent_identity_check(config: ExperimentConfig, amplitude: complex,
                            offset: float = 0.0, n_time: int = 64,
                            n_z: int = 16) -> tuple[float, float]:
    """Effective signal intensity vs windowed mean intensity / (A T).

    The signal is a plane wave along the detector axis at the centre element
    frequency shifted by ``offset`` element spacings.  ``lhs`` sums
    c eps0 |E_j|^2 over the filtered element fields; ``rhs`` averages
    c eps0 |E+(z, t)|^2 over the window and detector volume by quadrature.
    """
    from .core import build_mode_grid

    grid = build_mode_grid(config)
    c, eps0 = CONSTANTS.c, CONSTANTS.epsilon0
    T, L = config.T_window, config.detector_L
    omega_s = grid.frequencies[grid.n_elements // 2] + offset * grid.spacing
    dw = omega_s - grid.frequencies
    filt = amplitude * np.sinc(T * dw / (2 * math.pi)) * np.sinc(L * dw / (2 * math.pi * c))
    lhs = c * eps0 * float(np.sum(np.abs(filt) ** 2))

    tn, tw = np.polynomial.legendre.leggauss(n_time)
    zn, zw = np.polynomial.legendre.leggauss(n_z)
    t = 0.5 * T * (tn + 1.0)
    z = 0.5 * L * zn
    field = amplitude * np.exp(1j * omega_s * (z[None, :] / c - t[:, None]))
    mean_int = c * eps0 * np.sum(np.abs(field) ** 2 * tw[:, None] * zw[None, :]) / 4.0
    area = math.pi * config.detector_R ** 2
    window_energy_ = mean_int * area * T
    return lhs, float(window_energy_ / (area * T))


# -- report -----------------------------------------------------------------

@dataclass(frozen=True)
class AnalyticReport:
    I0_bar: float
    sigma0: float
    m: float
    x: float
    gamma: float
    rho_c: float
    p_single: float
    p_single_linear: float
    p_single_linear_limit: float
    p_dark: float
    p_joint: float
    p_joint_linear: float
    p_single_quantum: float
    p_joint_quantum: float
    subzero_mass: float

    def to_dict(self):
        return asdict(self)


def analytic_report(config: ExperimentConfig, m: float | None = None, x: float | None = None,
                    gamma: float | None = None, rho_c: float | None = None) -> AnalyticReport:
    d = derive_params(config)
    base = SingleParams.from_config(config)
    sp = SingleParams(base.m if m is None else m, base.x if x is None else x,
                      base.gamma if gamma is None else gamma)
    rc = joint_correlation(config) if rho_c is None else rho_c
    jp = JointParams(sp, sp, rc)
    lin = p_single_linear(sp)
    # quantum rates from the signal implied by x through the coherence identity
    I_s = sp.x * d.sigma0
    e_s = window_energy(config, I_s)
    prod = window_energy(config, 1.0) ** 2 * (I_s * I_s + rc * d.sigma0 ** 2)
    return AnalyticReport(
        I0_bar=d.I0_bar, sigma0=d.sigma0, m=sp.m, x=sp.x, gamma=sp.gamma, rho_c=rc,
        p_single=p_single_model(sp), p_single_linear=lin.full, p_single_linear_limit=lin.limit,
        p_dark=p_dark(sp), p_joint=p_joint_model(jp), p_joint_linear=p_joint_linear(jp),
        p_single_quantum=min(p_single_quantum(config, e_s), 1.0),
        p_joint_quantum=min(p_joint_quantum(config, prod), 1.0),
        subzero_mass=subzero_mass(sp.x, d.s),
    )
