"""Monte Carlo engine over detection windows.

Per window: vacuum amplitudes -> PDC transform -> filtered fields ->
effective intensity -> detection probability -> Bernoulli clicks.

Two samplers produce the effective intensities:

``mode``
    materialises every amplitude and filtered field; cost O(N) per window.
``intensity``
    draws the element sums directly.  Within one arm the element intensities
    are independent exponentials, so their sum is drawn as a gamma variate
    matched in mean and variance (exact when the element weights are equal).
    Conjugate pairs give Kibble-correlated exponentials; their sums are drawn
    through the Poisson-mixture form of the bivariate gamma,
    K ~ NegBin(k, 1 - r), X_i | K ~ Gamma(k + K, theta_i (1 - r)).

Trials are cut into fixed blocks, each with its own counter-derived streams,
and block accumulators merge exactly, so results do not depend on how many
workers ran the blocks.
"""

from __future__ import annotations

import math
import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np
from scipy.special import ndtr

from . import analytic
from .accum import CoMoments, Moments
from .core import ExperimentConfig, build_mode_grid, derive_params, grid_size
from .detector import detection_probability, effective_intensity, filter_fields
from .field import (AmplitudeSet, apply_pdc, complex_normal, coupled_mask,
                    expected_signal_intensity,
                    intensity_correlation, relative_excess, zpf_grid_intensity,
                    zpf_weight_sums)
from .streams import Role, block_layout, stream

KINDS = ("zpf", "single", "joint")
SAMPLERS = ("auto", "mode", "intensity")
Z_LIMIT = 4.0
MODE_BUDGET = 2e8  # element draws above which "auto" picks the intensity sampler


class ResourceError(RuntimeError):
    pass


@dataclass(frozen=True)
class Scenario:
    kind: str = "single"
    overrides: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        aliases = {"zpf-only": "zpf", "single-arm": "single"}
        object.__setattr__(self, "kind", aliases.get(self.kind, self.kind))
        if self.kind not in KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}")

    def resolve(self, config: ExperimentConfig) -> ExperimentConfig:
        config = config.replace(**self.overrides) if self.overrides else config
        if self.kind == "zpf":
            config = config.replace(g_coupling=0.0)
        return config


@dataclass(frozen=True)
class RateEstimate:
    quantity: str
    mean: float
    std_error: float
    n: int
    seed: int


@dataclass(frozen=True)
class ComparisonRow:
    quantity: str
    mc: RateEstimate
    analytic: float
    z_score: float | None
    passed: bool
    note: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {"quantity": self.quantity, "mean": self.mc.mean,
                "std_error": self.mc.std_error, "n": self.mc.n, "analytic": self.analytic,
                "z": self.z_score, "passed": self.passed, "note": self.note}


# -- run plan -----------------------------------------------------------------

@dataclass(frozen=True)
class _Plan:
    config: ExperimentConfig
    kind: str
    sampler: str
    seed: int
    block_size: int
    m: float
    gamma: float
    s: float
    I0: float
    u_mean: float
    hist_edges: tuple[float, ...] | None = None

    @property
    def joint(self) -> bool:
        return self.kind == "joint"


def _plan(config: ExperimentConfig, scenario: Scenario, n_trials: int, seed: int,
          sampler: str, hist_edges=None) -> _Plan:
    if sampler not in SAMPLERS:
        raise ValueError(f"unknown sampler {sampler!r}")
    cfg = scenario.resolve(config)
    d = derive_params(cfg)
    n = grid_size(cfg)
    if sampler == "auto":
        sampler = "mode" if n * n_trials <= MODE_BUDGET and n <= 100_000 else "intensity"
    block = max(1, min(4096, 2 ** 21 // n)) if sampler == "mode" else 65536
    u_mean = (zpf_grid_intensity(cfg) + expected_signal_intensity(cfg)) / d.I0_bar
    return _Plan(cfg, scenario.kind, sampler, int(seed), block, cfg.I_m_margin,
                 cfg.zeta_gain * d.sigma0, d.s, d.I0_bar, u_mean,
                 None if hist_edges is None else tuple(float(e) for e in hist_edges))


# -- samplers -----------------------------------------------------------------

def _mode_block(plan: _Plan, b: int, count: int):
    cfg = plan.config
    grid = build_mode_grid(cfg)
    g = cfg.g_coupling
    rng1 = stream(plan.seed, Role.BEAM1, b)
    a1 = complex_normal(rng1, (count, grid.n_modes))
    need_beam2 = plan.joint or g != 0.0
    a2 = (complex_normal(stream(plan.seed, Role.BEAM2, b), (count, grid.n_modes))
          if need_beam2 else np.zeros_like(a1))
    mask = coupled_mask(grid.n_modes, cfg.signal_fraction)
    beams = apply_pdc(AmplitudeSet(a1, a2), grid, g, None if mask.all() else mask)
    u1 = effective_intensity(filter_fields(beams, grid, 1, cfg), plan.I0).u
    u2 = effective_intensity(filter_fields(beams, grid, 2, cfg), plan.I0).u if plan.joint else None
    return u1, u2


def _gamma_params(total: float, total_sq: float) -> tuple[float, float]:
    return total * total / total_sq, total_sq / total


def _intensity_block(plan: _Plan, b: int, count: int):
    cfg = plan.config
    g = cfg.g_coupling
    kappa = relative_excess(g)
    rng1 = stream(plan.seed, Role.BEAM1, b)
    rng2 = stream(plan.seed, Role.BEAM2, b)
    rngk = stream(plan.seed, Role.INTENSITY, b)
    uw1, uw2, n_u = zpf_weight_sums(cfg, "uncoupled")
    cw1, cw2, n_c = zpf_weight_sums(cfg, "coupled")
    if g == 0.0:
        uw1, uw2, n_u = zpf_weight_sums(cfg, "all")
        n_c = 0

    def vacuum_part(rng):
        if n_u == 0:
            return np.zeros(count)
        k, th = _gamma_params(uw1, uw2)
        return rng.gamma(k, th, count)

    v1 = vacuum_part(rng1)
    v2 = vacuum_part(rng2) if plan.joint else None
    if n_c:
        k, th = _gamma_params(cw1 * (1 + kappa), cw2 * (1 + kappa) ** 2)
        if plan.joint:
            r = intensity_correlation(g)
            extra = rngk.negative_binomial(k, 1.0 - r, count)
            c1 = rng1.gamma(k + extra, th * (1 - r))
            c2 = rng2.gamma(k + extra, th * (1 - r))
            v2 = v2 + c2
        else:
            c1 = rng1.gamma(k, th, count)
        v1 = v1 + c1
    return v1 / plan.I0, (v2 / plan.I0 if plan.joint else None)


def _run_block(plan: _Plan, b: int, count: int) -> dict:
    try:
        if plan.sampler == "mode":
            u1, u2 = _mode_block(plan, b, count)
        else:
            u1, u2 = _intensity_block(plan, b, count)
        p1 = detection_probability(u1, plan.m, plan.gamma, plan.s)
        p2 = detection_probability(u2, plan.m, plan.gamma, plan.s) if plan.joint else None
        draws = stream(plan.seed, Role.CLICKS, b).random((count, 2))
    except MemoryError as exc:
        raise ResourceError(f"out of memory in block {b}") from exc
    c1 = (draws[:, 0] < p1).astype(float)
    out = {
        "u1": Moments(plan.u_mean).add(u1),
        "c1": Moments().add(c1),
        "u_min": float(u1.min()),
    }
    if plan.joint:
        c2 = (draws[:, 1] < p2).astype(float)
        out["u2"] = Moments(plan.u_mean).add(u2)
        out["c2"] = Moments().add(c2)
        out["c12"] = Moments().add(c1 * c2)
        out["cc"] = CoMoments().add(c1, c2)
        out["uu"] = CoMoments(plan.u_mean, plan.u_mean).add(u1, u2)
        out["u_min"] = min(out["u_min"], float(u2.min()))
    if plan.hist_edges is not None:
        counts, _ = np.histogram(u1, bins=np.asarray(plan.hist_edges))
        out["hist"] = counts.astype(np.int64)
        out["hist_out"] = int(count - counts.sum())
    return out


def _run_block_args(args):
    return _run_block(*args)


def _merge(results: list[dict]) -> dict:
    merged = dict(results[0])
    for r in results[1:]:
        for key, val in r.items():
            if key == "u_min":
                merged[key] = min(merged[key], val)
            elif key in ("hist", "hist_out"):
                merged[key] = merged[key] + val
            else:
                merged[key] = merged[key].merge(val)
    return merged


def _execute(plan: _Plan, n_trials: int, workers: int) -> dict:
    layout = block_layout(n_trials, plan.block_size)
    jobs = [(plan, b, count) for b, _, count in layout]
    if workers == 0:
        workers = os.cpu_count() or 1
    workers = max(1, min(workers, len(jobs)))
    if workers == 1:
        results = [_run_block(*job) for job in jobs]
    else:
        method = "fork" if "fork" in multiprocessing.get_all_start_methods() else "spawn"
        with ProcessPoolExecutor(workers, mp_context=multiprocessing.get_context(method)) as ex:
            results = list(ex.map(_run_block_args, jobs))
    return _merge(results)


# -- public API ---------------------------------------------------------------

@dataclass
class RunResult:
    estimates: list[RateEstimate]
    sampler: str
    u_min: float
    config: ExperimentConfig
    accumulators: dict = field(repr=False, default_factory=dict)

    def get(self, quantity: str) -> RateEstimate:
        for e in self.estimates:
            if e.quantity == quantity:
                return e
        raise KeyError(quantity)


def simulate(config: ExperimentConfig, scenario: Scenario | str = "single",
             n_trials: int | None = None, seed: int | None = None, workers: int = 1,
             sampler: str = "auto") -> RunResult:
    scenario = Scenario(scenario) if isinstance(scenario, str) else scenario
    n_trials = config.n_trials if n_trials is None else int(n_trials)
    seed = config.seed if seed is None else int(seed)
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    plan = _plan(config, scenario, n_trials, seed, sampler)
    acc = _execute(plan, n_trials, workers)
    est = []

    def add(q, mean, se):
        est.append(RateEstimate(q, float(mean), float(se), n_trials, seed))

    for arm in ("1", "2") if plan.joint else ("1",):
        u = acc["u" + arm]
        add(f"u{arm}-mean", u.mean, u.std_error)
        add(f"u{arm}-sd", u.sd, u.sd_std_error)
        c = acc["c" + arm]
        add(f"p{arm}", c.mean, c.std_error)
    if plan.joint:
        add("p12", acc["c12"].mean, acc["c12"].std_error)
        add("p12-excess", acc["cc"].cov, acc["cc"].cov_std_error)
        add("u-cov", acc["uu"].cov, acc["uu"].cov_std_error)
    return RunResult(est, plan.sampler, acc["u_min"], plan.config, acc)


def run_trials(config, scenario="single", n_trials=None, seed=None, workers=1,
               sampler="auto") -> list[RateEstimate]:
    return simulate(config, scenario, n_trials, seed, workers, sampler).estimates


def expected_values(config: ExperimentConfig, scenario: Scenario | str) -> dict[str, float]:
    """Analytic counterpart of every estimator produced for ``scenario``."""
    scenario = Scenario(scenario) if isinstance(scenario, str) else scenario
    cfg = scenario.resolve(config)
    d = derive_params(cfg)
    i_s = expected_signal_intensity(cfg)
    u_mean = (zpf_grid_intensity(cfg) + i_s) / d.I0_bar
    kappa = relative_excess(cfg.g_coupling)
    _, uw2, _ = zpf_weight_sums(cfg, "uncoupled")
    _, cw2, _ = zpf_weight_sums(cfg, "coupled")
    if cfg.g_coupling == 0.0:
        _, uw2, _ = zpf_weight_sums(cfg, "all")
        cw2 = 0.0
    u_sd = math.sqrt(uw2 + cw2 * (1 + kappa) ** 2) / d.I0_bar
    gamma = cfg.zeta_gain * d.sigma0
    sp = analytic.SingleParams(cfg.I_m_margin, i_s / d.sigma0, gamma)
    p1 = analytic.p_dark(sp) if scenario.kind == "zpf" else analytic.p_single_model(sp)
    out = {"u1-mean": u_mean, "u1-sd": u_sd, "p1": p1}
    if scenario.kind == "joint":
        rho = analytic.joint_correlation(cfg)
        p12 = analytic.p_joint_model(analytic.JointParams(sp, sp, rho))
        out.update({"u2-mean": u_mean, "u2-sd": u_sd, "p2": p1, "p12": p12,
                    "p12-excess": p12 - p1 * p1, "u-cov": rho * d.s ** 2})
    return out


def _row(est: RateEstimate, target: float, note: str = "") -> ComparisonRow:
    n = est.n
    if est.std_error > 0:
        z = (est.mean - target) / est.std_error
        return ComparisonRow(est.quantity, est, target, z, abs(z) <= Z_LIMIT, note)
    # no events (or every window clicked): one-sided 95% bound, rule of three
    if est.mean == 0.0:
        bound = 3.0 / n
        return ComparisonRow(est.quantity, est, target, None, target <= bound,
                             (note + "; " if note else "") + f"zero events, upper95={bound:.3g}")
    if est.mean == 1.0:
        bound = 1.0 - 3.0 / n
        return ComparisonRow(est.quantity, est, target, None, target >= bound,
                             (note + "; " if note else "") + f"all events, lower95={bound:.6g}")
    return ComparisonRow(est.quantity, est, target, None, est.mean == target, note)


def compare(config: ExperimentConfig, scenario: Scenario | str = "single",
            n_trials: int | None = None, seed: int | None = None, workers: int = 1,
            sampler: str = "auto") -> list[ComparisonRow]:
    scenario = Scenario(scenario) if isinstance(scenario, str) else scenario
    result = simulate(config, scenario, n_trials, seed, workers, sampler)
    targets = expected_values(config, scenario)
    rows = []
    no_coincidences = scenario.kind == "joint" and result.get("p12").mean == 0.0
    for est in result.estimates:
        note = "vs p_dark" if (scenario.kind == "zpf" and est.quantity == "p1") else ""
        if est.quantity == "p12-excess" and no_coincidences:
            # with no coincidences the covariance is just -p1 p2 and its error
            # estimate is meaningless; fall back to the bound on p12 itself
            bound = 3.0 / est.n
            rows.append(ComparisonRow(est.quantity, est, targets[est.quantity], None,
                                      targets["p12"] <= bound,
                                      f"zero coincidences, p12 upper95={bound:.3g}"))
            continue
        rows.append(_row(est, targets[est.quantity], note))
    return rows


# -- histogram ----------------------------------------------------------------

@dataclass
class Histogram:
    edges: np.ndarray
    density: np.ndarray
    expected_density: np.ndarray
    counts: np.ndarray
    outside: int
    chi2: float
    dof: int
    mean: float
    mean_se: float
    skewness: float
    skewness_limit: float
    n: int

    def rows(self):
        for i in range(len(self.density)):
            yield self.edges[i], self.edges[i + 1], self.density[i], self.expected_density[i]


def histogram_u(config: ExperimentConfig, n_trials: int | None = None, seed: int | None = None,
                bins: int = 50, scenario: Scenario | str = "zpf", workers: int = 1,
                sampler: str = "auto", width: float = 5.0) -> Histogram:
    """Normalised histogram of u with the Gaussian density as reference."""
    if bins < 10:
        raise ValueError("bins must be >= 10")
    scenario = Scenario(scenario) if isinstance(scenario, str) else scenario
    n_trials = config.n_trials if n_trials is None else int(n_trials)
    seed = config.seed if seed is None else int(seed)
    target = expected_values(config, scenario)
    mu, sd = target["u1-mean"], target["u1-sd"]
    edges = np.linspace(mu - width * sd, mu + width * sd, bins + 1)
    plan = _plan(config, scenario, n_trials, seed, sampler, hist_edges=edges)
    acc = _execute(plan, n_trials, workers)
    counts = acc["hist"]
    widths = np.diff(edges)
    density = counts / (n_trials * widths)
    d = derive_params(plan.config)
    x = (mu - 1.0) / d.s
    # bin-averaged reference density of N(1 + x s, s) via the normal cdf
    cdf = ndtr((edges - 1.0 - x * d.s) / d.s)
    expected = np.diff(cdf) / widths
    exp_counts = np.diff(cdf) * n_trials
    ok = exp_counts >= 5
    chi2 = float(np.sum((counts[ok] - exp_counts[ok]) ** 2 / exp_counts[ok]))
    u = acc["u1"]
    return Histogram(edges, density, expected, counts, acc["hist_out"], chi2, int(ok.sum()) - 1,
                     u.mean, u.std_error, u.skewness, 4.0 * math.sqrt(6.0 / n_trials), n_trials)


# -- field-level moments --------------------------------------------------------

def pair_moments(config: ExperimentConfig, n_windows: int, seed: int = 0,
                 block: int = 8192) -> dict[str, RateEstimate]:
    """Second moments of the PDC amplitudes, averaged over element pairs per window.

    Keys: ``conj`` <beta1_j beta2_pair(j)> (real and imaginary part),
    ``occupation`` <|beta1|^2> - 1/2, ``same-normal`` <beta1_j conj(beta1_j+1)>,
    ``same-anomalous`` <beta1_j beta1_j+1>, ``cross-nonconj`` <beta1_j beta2_j+1>
    over pairs with j+1 != pair(j).
    """
    grid = build_mode_grid(config)
    mask = coupled_mask(grid.n_modes, config.signal_fraction)
    pair = grid.pairing
    j = np.arange(grid.n_modes - 1)
    nonconj = j[(j + 1) != pair[j]]
    acc: dict[str, Moments] = {}
    for b, _, count in block_layout(n_windows, block):
        a1 = complex_normal(stream(seed, Role.BEAM1, b), (count, grid.n_modes))
        a2 = complex_normal(stream(seed, Role.BEAM2, b), (count, grid.n_modes))
        beams = apply_pdc(AmplitudeSet(a1, a2), grid, config.g_coupling,
                          None if mask.all() else mask)
        b1, b2 = beams.beta_beam1, beams.beta_beam2
        conj = np.mean(b1[:, mask] * b2[:, pair][:, mask], axis=1)
        samples = {
            "conj-re": conj.real,
            "conj-im": conj.imag,
            "occupation": np.mean(np.abs(b1[:, mask]) ** 2, axis=1) - 0.5,
            "same-normal-re": np.mean(b1[:, j] * np.conj(b1[:, j + 1]), axis=1).real,
            "same-normal-im": np.mean(b1[:, j] * np.conj(b1[:, j + 1]), axis=1).imag,
            "same-anomalous-re": np.mean(b1[:, j] * b1[:, j + 1], axis=1).real,
            "same-anomalous-im": np.mean(b1[:, j] * b1[:, j + 1], axis=1).imag,
            "cross-nonconj-re": np.mean(b1[:, nonconj] * b2[:, nonconj + 1], axis=1).real,
        }
        for key, val in samples.items():
            acc[key] = acc[key].merge(Moments().add(val)) if key in acc else Moments().add(val)
    return {k: RateEstimate(k, m.mean, m.std_error, n_windows, seed) for k, m in acc.items()}


def estimates_to_dicts(estimates):
    return [asdict(e) for e in estimates]


# -- model-point helpers --------------------------------------------------------

def config_for_point(base: ExperimentConfig, m: float, x: float, gamma: float) -> ExperimentConfig:
    """Copy of ``base`` whose coupling, gain and margin realise (m, x, gamma).

    Solves kappa_g = x sigma0 / I0_coupled for g (kappa_g = 2 g^2 + g^4/4) and
    sets zeta = gamma / sigma0.
    """
    d = derive_params(base)
    cfg = base.replace(g_coupling=0.0, I_m_margin=float(m), zeta_gain=gamma / d.sigma0)
    if x == 0:
        return cfg
    kappa = x * d.sigma0 / zpf_grid_intensity(base, coupled_only=True)
    g2 = 2.0 * (math.sqrt(4.0 + kappa) - 2.0)
    return cfg.replace(g_coupling=math.sqrt(g2))


def sample_joint_model(params: "analytic.JointParams", n_samples: int, seed: int = 0,
                       block: int = 1 << 20) -> RateEstimate:
    """Coincidence rate from (y1, y2) drawn from the bivariate model density.

    Each sample draws a correlated Gaussian pair, applies the detection law of
    each arm and makes two independent Bernoulli decisions.
    """
    a, b = params.first, params.second
    rho = params.rho_c
    acc = Moments()
    for blk, _, count in block_layout(n_samples, block):
        rng = stream(seed, Role.INTENSITY, blk)
        z1 = rng.standard_normal(count)
        z2 = rho * z1 + math.sqrt(1.0 - rho * rho) * rng.standard_normal(count)
        y1, y2 = a.x + z1, b.x + z2
        p1 = np.where(y1 > a.m, -np.expm1(-a.gamma * np.maximum(y1, 0.0)), 0.0)
        p2 = np.where(y2 > b.m, -np.expm1(-b.gamma * np.maximum(y2, 0.0)), 0.0)
        draws = stream(seed, Role.CLICKS, blk).random((count, 2))
        acc = acc.merge(Moments().add((draws[:, 0] < p1) & (draws[:, 1] < p2)))
    return RateEstimate("p12", acc.mean, acc.std_error, n_samples, seed)
