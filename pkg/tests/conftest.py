import math

import numpy as np
import pytest

from pukcommit import AnalyzerConfig, SetupParams, gen_puk

BASE = dict(N=625, mu=1500.0, tau=0.05, ell_over_L=0.2, eta=0.6, w=8 / math.sqrt(0.6))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def base_setup():
    return SetupParams(**BASE)


@pytest.fixture
def small_config():
    return AnalyzerConfig(SetupParams(**{**BASE, "N": 64}), n=16, M=1000, nu=1)


@pytest.fixture
def small_key(small_config):
    return gen_puk(small_config.n, small_config.setup.N, 0.2, np.random.default_rng(5))


# one status line per acceptance criterion, shown at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
