import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sixdma.channel import Scenario, generate_paths, place_users

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# criterion number -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def small_scenario(M=2, N=2, K=2, L=2, tx_dbm=70.0, seed=0, **kw):
    """Scenario with placed users and sampled paths."""
    sc = Scenario(num_aps=M, num_antennas=N, num_users=K, num_paths=L,
                  tx_power=10.0 ** ((tx_dbm - 30.0) / 10.0), **kw)
    rng = np.random.default_rng(seed)
    sc = sc.with_users(place_users("uniform", sc, rng))
    return sc, generate_paths(sc, rng)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tiny():
    return small_scenario()


def random_channel(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
