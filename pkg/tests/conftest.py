import sys
import warnings
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lbsolve.errors import NoNorthPoleIsland  # noqa: E402
from lbsolve.geometry import (  # noqa: E402
    cap_domain,
    make_domain,
    make_plane_ellipse,
    resample_polyline,
)


def quiet_domain(curves, anchors=None):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NoNorthPoleIsland)
        return make_domain(curves, anchors)


def quiet_caps(caps, n):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NoNorthPoleIsland)
        return cap_domain(caps, n)


THREE_CAPS = [((0.0, 0.0, 1.0), 0.6), ((0.8, 0.0, -0.6), 0.5), ((-0.5, 0.6, -0.4), 0.4)]
FOUR_CAPS = THREE_CAPS + [((0.0, -0.9, 0.1), 0.35)]


def kernel_geometries(n=64):
    """The five kernel-oracle geometries, as named domains."""
    polygon = np.exp(2j * np.pi * np.arange(64) / 64)
    return {
        "equator": quiet_caps([((0.0, 0.0, 1.0), np.pi / 2)], n),
        "latitude_north": quiet_caps([((0.0, 0.0, 1.0), np.pi / 4)], n),
        "latitude_south": quiet_caps([((0.0, 0.0, -1.0), np.pi / 3)], n),
        "plane_ellipse": quiet_domain([make_plane_ellipse(0.0, 2.0, 1.0, 0.0, n)]),
        "polygon64": quiet_domain([resample_polyline(polygon, n)]),
        "three_islands": quiet_domain([
            *cap_domain([((0.0, 0.0, 1.0), 0.6), ((0.8, 0.0, -0.6), 0.5)], n).curves,
            make_plane_ellipse(-0.5 + 0.3j, 0.2, 0.12, 0.4, n),
        ]),
    }


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def three_caps_128():
    return quiet_caps(THREE_CAPS, 128)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
