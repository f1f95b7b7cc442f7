"""Configuration, physical constants, derived parameters and the element grid.

Everything at this boundary is SI.  The dimensionless set used downstream is

    u = I / I0        s = sigma0 / I0        m = (I_m - I0) / sigma0
    x = I_s / sigma0  gamma = zeta * sigma0
"""

from __future__ import annotations

import dataclasses
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np


class ConfigError(ValueError):
    """Raised for unreadable, incomplete or out-of-range configurations."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


@dataclass(frozen=True)
class PhysicalConstants:
    """CODATA 2018 exact / recommended values."""

    hbar: float = 1.054571817e-34  # J s
    c: float = 299792458.0  # m/s
    epsilon0: float = 8.8541878128e-12  # F/m

    @property
    def h(self) -> float:
        return 2.0 * math.pi * self.hbar


CONSTANTS = PhysicalConstants()

# Diffraction constants: radius of the first / second dark ring in units of
# lambda / relative aperture.  84% and 91% of the focused power fall inside.
RING_FIRST = 1.22
RING_SECOND = 2.23
RING_ENCLOSED_FRACTION = {RING_FIRST: 0.84, RING_SECOND: 0.91}

MIN_WINDOW_RATIO = 10.0
G_WARN = 0.1


@dataclass(frozen=True)
class ExperimentConfig:
    lambda_center: float
    delta_lambda: float
    T_window: float
    omega_min: float | None = None
    omega_max: float | None = None
    tau_coherence: float = 1.0e-12
    detector_R: float = 2.0e-6
    detector_L: float = 5.0e-3
    g_coupling: float = 0.0
    eta: float = 0.1
    zeta_gain: float = 1.0e-2
    I_m_margin: float = 5.0
    lens_Rl: float = 2.5e-3
    lens_f: float = 5.0e-3
    source_distance_d: float = 1.0
    crystal_radius_Rc: float = 1.0e-4
    omega_pump: float | None = None
    n_trials: int = 10000
    seed: int = 0
    # fraction of conjugate pairs carrying the PDC coupling (central pairs)
    signal_fraction: float = 1.0
    diffraction_a: float = RING_FIRST

    def __post_init__(self):
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"{f.name}: expected a number, got {v!r}", f.name)
            if not math.isfinite(v):
                raise ConfigError(f"{f.name}: value must be finite, got {v!r}", f.name)

        positive = ("lambda_center", "delta_lambda", "T_window", "tau_coherence",
                    "detector_R", "detector_L", "zeta_gain", "lens_Rl", "lens_f",
                    "source_distance_d", "crystal_radius_Rc", "diffraction_a")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name}: must be > 0, got {getattr(self, name)!r}", name)
        if not 0 < self.eta <= 1:
            raise ConfigError(f"eta: must lie in (0, 1], got {self.eta!r}", "eta")
        if not self.g_coupling ** 2 < 1:
            raise ConfigError(f"g_coupling: g^2 must be < 1, got g={self.g_coupling!r}",
                              "g_coupling")
        if self.g_coupling ** 2 > G_WARN:
            warnings.warn(f"g_coupling^2 = {self.g_coupling ** 2:.3g} is not small; "
                          "the second-order PDC field is a weak-coupling expansion",
                          stacklevel=3)
        if not 0 <= self.signal_fraction <= 1:
            raise ConfigError("signal_fraction: must lie in [0, 1]", "signal_fraction")
        if self.n_trials < 1 or int(self.n_trials) != self.n_trials:
            raise ConfigError("n_trials: must be a positive integer", "n_trials")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed: must be an integer in [0, 2^64)", "seed")
        if (self.omega_min is None) != (self.omega_max is None):
            key = "omega_max" if self.omega_max is None else "omega_min"
            raise ConfigError(f"{key}: omega_min and omega_max must be given together", key)
        if self.omega_min is not None:
            if self.omega_min <= 0:
                raise ConfigError("omega_min: must be > 0", "omega_min")
            if not self.omega_min < self.omega_max:
                raise ConfigError("omega_max: must exceed omega_min", "omega_max")
        lo, hi = self.band
        if self.omega_pump is not None and not math.isclose(
                self.omega_pump, lo + hi, rel_tol=1e-12):
            raise ConfigError(
                f"omega_pump: must equal omega_min + omega_max = {lo + hi:.12g}",
                "omega_pump")

    @property
    def n_elements(self) -> int:
        return max(1, round(self.T_window / self.tau_coherence))

    @property
    def band(self) -> tuple[float, float]:
        """(omega_min, omega_max); by default centered on 2 pi c / lambda with
        width 2 pi N / T, so the element grid tiles it exactly."""
        if self.omega_min is not None:
            return float(self.omega_min), float(self.omega_max)
        center = 2.0 * math.pi * CONSTANTS.c / self.lambda_center
        half = math.pi * self.n_elements / self.T_window
        return center - half, center + half

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


REQUIRED_KEYS = ("lambda_center", "delta_lambda", "T_window")
CONFIG_KEYS = tuple(f.name for f in dataclasses.fields(ExperimentConfig))
_INT_KEYS = ("n_trials", "seed")


def config_from_mapping(data: Mapping[str, Any], *, strict: bool = True) -> ExperimentConfig:
    """Build a config from a flat mapping of SI values.

    With ``strict`` the window ratio and threshold margin are also enforced
    (both are reported rather than raised by :func:`validate_config`).
    """
    if not isinstance(data, Mapping):
        raise ConfigError("configuration must be a JSON object")
    unknown = sorted(set(data) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown configuration key", unknown[0])
    for key in REQUIRED_KEYS:
        if key not in data:
            raise ConfigError(f"{key}: required key missing", key)
    kwargs = {}
    for key, value in data.items():
        if key in _INT_KEYS and isinstance(value, float) and value.is_integer():
            value = int(value)
        kwargs[key] = value
    config = ExperimentConfig(**kwargs)
    if strict:
        ratio = config.T_window / config.tau_coherence
        if ratio < MIN_WINDOW_RATIO:
            raise ConfigError(
                f"tau_coherence: T_window/tau_coherence = {ratio:.4g} < {MIN_WINDOW_RATIO:g}",
                "tau_coherence")
        if config.I_m_margin <= 0:
            raise ConfigError("I_m_margin: threshold must lie above the mean "
                              f"zeropoint intensity (margin > 0), got {config.I_m_margin!r}",
                              "I_m_margin")
    return config


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"configuration file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"malformed configuration file {path}: {exc}") from exc
    return config_from_mapping(data)


@dataclass(frozen=True)
class DerivedParams:
    omega_bar: float
    delta_omega: float
    Delta_omega_element: float
    N_elements: int
    I0_bar: float
    sigma0: float
    I_m: float
    b_squared: float
    A_r: float
    R_diffraction: float
    detector_area: float
    small_radius_limit: float
    small_radius_ok: bool
    tau_from_bandwidth: float

    @property
    def s(self) -> float:
        return self.sigma0 / self.I0_bar

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


def small_radius_limit(lambda_center: float, detector_L: float) -> float:
    return math.sqrt(lambda_center * detector_L / (8.0 * math.pi ** 2))


def derive_params(config: ExperimentConfig) -> DerivedParams:
    k = CONSTANTS
    lo, hi = config.band
    omega_bar = 0.5 * (lo + hi)
    delta_omega = hi - lo
    I0 = k.hbar * omega_bar ** 2 * delta_omega / (8.0 * math.pi * k.c * config.detector_L)
    sigma0 = I0 * math.sqrt(config.tau_coherence / config.T_window)
    A_r = 2.0 * config.lens_Rl / config.lens_f
    r_lim = small_radius_limit(config.lambda_center, config.detector_L)
    return DerivedParams(
        omega_bar=omega_bar,
        delta_omega=delta_omega,
        Delta_omega_element=2.0 * math.pi / config.T_window,
        N_elements=config.n_elements,
        I0_bar=I0,
        sigma0=sigma0,
        I_m=I0 + config.I_m_margin * sigma0,
        b_squared=(math.pi ** 2 * config.lens_Rl ** 4
                   / (config.lambda_center ** 2 * config.lens_f ** 2)),
        A_r=A_r,
        R_diffraction=config.diffraction_a * config.lambda_center / A_r,
        detector_area=math.pi * config.detector_R ** 2,
        small_radius_limit=r_lim,
        small_radius_ok=config.detector_R < r_lim,
        tau_from_bandwidth=config.lambda_center ** 2 / (k.c * config.delta_lambda),
    )


@dataclass(frozen=True)
class ModeGrid:
    """Element centre frequencies and, optionally, a finer set of field modes.

    ``frequencies`` holds one entry per detector element, spaced exactly 2 pi / T.
    ``modes`` holds the plane-wave modes fed to the sampler; with
    ``oversample == 1`` they coincide with the element centres.  Both sets are
    symmetric about omega_bar so reversal pairs conjugate frequencies.
    """

    frequencies: np.ndarray
    modes: np.ndarray
    spacing: float
    omega_pump: float
    oversample: int = 1
    pairing: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.pairing is None:
            object.__setattr__(self, "pairing", np.arange(len(self.modes))[::-1].copy())
        for arr in (self.frequencies, self.modes, self.pairing):
            arr.setflags(write=False)

    @property
    def n_elements(self) -> int:
        return len(self.frequencies)

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def center(self) -> float:
        return 0.5 * self.omega_pump


def grid_size(config: ExperimentConfig) -> int:
    """Number of elements that fit in the band (at most round(T / tau))."""
    lo, hi = config.band
    spacing = 2.0 * math.pi / config.T_window
    n_fit = math.floor((hi - lo) / spacing * (1 + 1e-12))
    if n_fit < 1:
        raise ConfigError(
            f"band ({lo:.6g}, {hi:.6g}) rad/s is narrower than one element "
            f"spacing 2*pi/T = {spacing:.6g} rad/s", "omega_max")
    return min(config.n_elements, n_fit)


def build_mode_grid(config: ExperimentConfig, oversample: int = 1) -> ModeGrid:
    """Element grid centred in the band with spacing 2 pi / T.

    When the band holds exactly N spacings this is omega_min + (j + 1/2) 2 pi/T.
    A narrower band truncates the element count; the pairing j -> N-1-j then
    satisfies omega_j + omega_pair(j) = omega_min + omega_max exactly.
    """
    if oversample < 1 or int(oversample) != oversample:
        raise ValueError("oversample must be a positive integer")
    lo, hi = config.band
    spacing = 2.0 * math.pi / config.T_window
    n = grid_size(config)
    center = 0.5 * (lo + hi)
    offsets = (np.arange(n) - 0.5 * (n - 1)) * spacing
    frequencies = center + offsets
    if oversample == 1:
        modes = frequencies.copy()
    else:
        m = (n - 1) * oversample + 1
        modes = center + (np.arange(m) - 0.5 * (m - 1)) * (spacing / oversample)
    return ModeGrid(frequencies=frequencies, modes=modes, spacing=spacing,
                    omega_pump=lo + hi, oversample=int(oversample))


@dataclass(frozen=True)
class Diagnostic:
    condition: str
    measured: float
    required: float
    message: str


def validate_config(config: ExperimentConfig) -> list[Diagnostic]:
    """Physics preconditions of the model; one diagnostic per violation."""
    out = []
    r_lim = small_radius_limit(config.lambda_center, config.detector_L)
    if not config.detector_R < r_lim:
        out.append(Diagnostic("small_radius", config.detector_R, r_lim,
                              f"detector_R = {config.detector_R:.4g} m must be below "
                              f"sqrt(lambda L / 8 pi^2) = {r_lim:.4g} m"))
    lhs = config.source_distance_d * config.lambda_center
    rhs = config.lens_Rl * config.crystal_radius_Rc
    if lhs < rhs:
        out.append(Diagnostic("spatial_coherence", lhs, rhs,
                              f"d*lambda = {lhs:.4g} m^2 is below R_l*R_C = {rhs:.4g} m^2"))
    if not config.I_m_margin > 0:
        out.append(Diagnostic("threshold", config.I_m_margin, 0.0,
                              "I_m_margin must be > 0 (threshold above mean zeropoint level)"))
    ratio = config.T_window / config.tau_coherence
    if ratio < MIN_WINDOW_RATIO:
        out.append(Diagnostic("window_ratio", ratio, MIN_WINDOW_RATIO,
                              f"T/tau = {ratio:.4g} must be >= {MIN_WINDOW_RATIO:g}"))
    return out
