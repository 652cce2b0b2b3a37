import functools

import numpy as np
import pytest
from hypothesis import settings

from pabn.energy import ElasticConstants
from pabn.experiments import run_single
from pabn.geometry import CellParams, build_geometry

settings.register_profile("repro", derandomize=True)
settings.load_profile("repro")

K_SPLIT = ElasticConstants(4.0, 2.0, 6.0, 0.0)
K_ONE = ElasticConstants(2.0, 2.0, 2.0, 0.0)


@functools.lru_cache(maxsize=None)
def _relaxed(topo, h, k, N):
    return run_single(topo, h, k, N)


@pytest.fixture(scope="session")
def relaxed():
    """Cached ``run_single`` so several tests can share one relaxation."""
    return _relaxed


@functools.lru_cache(maxsize=None)
def _geom(h, N, H=None, substrate="tangent"):
    return build_geometry(CellParams(h=h, N=N, H=H, substrate=substrate))


@pytest.fixture(scope="session")
def geom():
    return _geom


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


_acceptance = {}


def record_acceptance(number, title, ok):
    _acceptance[str(number)] = (title, ok)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance):
        title, ok = _acceptance[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}")
