import warnings

import pytest
from hypothesis import HealthCheck, settings

from pdclhv.core import ExperimentConfig

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make_config(**kw):
    base = dict(lambda_center=700e-9, delta_lambda=10e-9, T_window=1e-8,
                tau_coherence=1e-12, detector_L=1e-2, detector_R=1e-6)
    base.update(kw)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return ExperimentConfig(**base)


@pytest.fixture
def typical():
    return make_config()


@pytest.fixture
def small():
    """64 elements: cheap enough for mode-level sampling in unit tests."""
    return make_config(T_window=64e-12, g_coupling=0.1, I_m_margin=1.0, zeta_gain=1.0)


ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
