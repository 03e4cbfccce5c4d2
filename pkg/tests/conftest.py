"""Shared fixtures: all heavy eigensolves go through a disk-backed cache so the
suite only pays for each (g, beta) point once, including across pytest runs.
Set ATOMION_TEST_CACHE to relocate the cache (defaults to .test_cache/)."""

import os
from pathlib import Path

import pytest

from atomion.cache import StateCache
from atomion.grid import make_grid
from atomion.pipeline import GridConfig, h1b_orbitals, solve_cmf, solve_if
from atomion.potentials import default_params


@pytest.fixture(scope="session")
def cache():
    root = os.environ.get("ATOMION_TEST_CACHE",
                          str(Path(__file__).resolve().parent.parent / ".test_cache"))
    return StateCache(root)


@pytest.fixture(scope="session")
def params():
    return default_params()


@pytest.fixture(scope="session")
def grids():
    return GridConfig()


@pytest.fixture(scope="session")
def grid512(grids):
    return grids.rel_grid()


@pytest.fixture(scope="session")
def h1b(params, grid512):
    """(eigenvalues, first four orbitals) of the pinned-ion one-body problem."""
    return h1b_orbitals(params, grid512)


@pytest.fixture(scope="session")
def cmf(params, grid512, cache):
    """cmf(g, beta, k=5) -> (SpectrumRecord, [WaveFn]); disk-cached."""

    def solve(g, beta, k=5):
        p = params.with_(g=float(g), beta=float(beta))
        record, states, _ = solve_cmf(p, grid512, k=k, cache=cache)
        return record, states

    return solve


@pytest.fixture(scope="session")
def cmf1024(params, cache):
    """Grid-halved variant of the cmf fixture (1024 points per axis)."""
    fine = make_grid(4.0, 1024)

    def solve(g, beta, k=5):
        p = params.with_(g=float(g), beta=float(beta))
        record, states, _ = solve_cmf(p, fine, k=k, cache=cache)
        return record, states

    return solve


@pytest.fixture(scope="session")
def ifground(params, grids, cache):
    """ifground(g, beta) -> Ground3DResult on the default 3D grids; disk-cached."""

    def solve(g, beta):
        p = params.with_(g=float(g), beta=float(beta))
        result, _ = solve_if(p, grids.ion_grid(), grids.rel_grid_3d(), cache=cache)
        return result

    return solve
