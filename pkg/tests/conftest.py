import sys

import numpy as np
import pytest

from wpsn import beamforming as bf
from wpsn.geometry import NodePlacement, build_layout, channel_matrix


def random_channel(rng, K, N, scale=1.0):
    return (rng.standard_normal((K, N)) + 1j * rng.standard_normal((K, N))) * scale


def random_budget(rng):
    return bf.PowerBudget(float(rng.uniform(0.05, 0.3)), float(rng.uniform(0.05, 2.0)))


def geometry_channel(kind, azimuths_deg, radius_m=2.0, n_antennas=8, dimension_m=0.21):
    layout = build_layout(kind, n_antennas, dimension_m)
    return channel_matrix(layout, [NodePlacement.from_degrees(radius_m, a) for a in azimuths_deg])


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def default_budget():
    return bf.PowerBudget(0.14, 1.12)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
