"""Cached solve orchestration shared by the CLI and the test suite.

Every solve is keyed by (frame, model parameters, grid, solver settings); the
results live in a StateCache directory so observable extraction never repeats
an eigensolve. Warm starts chain neighbouring sweep points.
"""

import os
from dataclasses import dataclass

import numpy as np

from .cache import StateCache
from .eigensolve import (SpectrumRecord, WaveFn, Ground3DResult,
                         ground_state_3d, lowest_eigenstates, solve_1d)
from .grid import Grid1D, make_grid
from .hamiltonians import build_h1b, build_if_hamiltonian, build_relative_cmf
from .potentials import ModelParams

DEFAULT_CACHE_ENV = "ATOMION_CACHE_DIR"

#: default grids: relative/atomic axes cover [-4, 4), the ion axis [-2.5, 2.5)
REL_EXTENT, REL_N = 4.0, 512
ION_EXTENT, ION_N = 2.5, 96
REL_N_3D = 128

SOLVER_TOL_2D = 1e-8
SOLVER_TOL_3D = 1e-7


@dataclass
class GridConfig:
    extent_rel: float = REL_EXTENT
    n_rel: int = REL_N
    extent_ion: float = ION_EXTENT
    n_ion: int = ION_N
    n_rel_3d: int = REL_N_3D

    def rel_grid(self) -> Grid1D:
        return make_grid(self.extent_rel, self.n_rel)

    def ion_grid(self) -> Grid1D:
        return make_grid(self.extent_ion, self.n_ion)

    def rel_grid_3d(self) -> Grid1D:
        return make_grid(self.extent_rel, self.n_rel_3d)


def default_cache_root() -> str:
    return os.environ.get(DEFAULT_CACHE_ENV, os.path.join(os.path.expanduser("~"), ".cache", "atomion"))


def _model_meta(p: ModelParams) -> dict:
    return {"kappa": p.kappa, "v0": p.v0, "gamma": p.gamma, "g": p.g, "beta": p.beta,
            "eta": p.eta, "l_A": p.l_A, "n_atoms": p.n_atoms}


def cmf_meta(p: ModelParams, grid: Grid1D, k: int, tol: float) -> dict:
    return {"frame": "cmf-relative", "model": _model_meta(p),
            "grid": {"extent": grid.extent, "n": grid.n}, "k": k, "tol": tol}


def if_meta(p: ModelParams, grid_ion: Grid1D, grid_rel: Grid1D, tol: float) -> dict:
    return {"frame": "if", "model": _model_meta(p),
            "grid": {"extent_ion": grid_ion.extent, "n_ion": grid_ion.n,
                     "extent_rel": grid_rel.extent, "n_rel": grid_rel.n}, "tol": tol}


def solve_cmf(p: ModelParams, grid: Grid1D | None = None, k: int = 5,
              tol: float = SOLVER_TOL_2D, cache: StateCache | None = None,
              reuse: bool = True, warm_start: dict | None = None):
    """Five (by default) lowest relative-frame states at one (g, beta) point.

    Returns (SpectrumRecord, [WaveFn], cache_hit).
    """
    grid = grid or make_grid(REL_EXTENT, REL_N)
    meta = cmf_meta(p, grid, k, tol)
    if cache is not None and reuse and cache.has(meta):
        arrays, stored = cache.load(meta)
        record = SpectrumRecord(
            params=p,
            eigenvalues=arrays["eigenvalues"].copy(),
            parities=[int(x) for x in arrays["parities"]],
            residuals=arrays["residuals"].copy(),
            iterations=[int(x) for x in arrays["iterations"]],
            grid_meta=stored["grid"] | {"frame": "cmf-relative"},
        )
        states = [
            WaveFn("cmf-relative", (grid, grid), arrays["states"][i],
                   exchange=+1, parity=record.parities[i],
                   energy=float(record.eigenvalues[i]))
            for i in range(k)
        ]
        return record, states, True
    op = build_relative_cmf(grid, p)
    record, states = lowest_eigenstates(op, k=k, tol=tol, warm_start=warm_start)
    if cache is not None:
        cache.store(meta, {
            "eigenvalues": record.eigenvalues,
            "parities": np.array(record.parities, dtype=float),
            "residuals": record.residuals,
            "iterations": np.array(record.iterations, dtype=float),
            "states": np.stack([s.values for s in states]),
        })
    return record, states, False


def solve_if(p: ModelParams, grid_ion: Grid1D | None = None,
             grid_rel: Grid1D | None = None, tol: float = SOLVER_TOL_3D,
             cache: StateCache | None = None, reuse: bool = True):
    """Ion-frame 3D ground state. Returns (Ground3DResult, cache_hit)."""
    grid_ion = grid_ion or make_grid(ION_EXTENT, ION_N)
    grid_rel = grid_rel or make_grid(REL_EXTENT, REL_N_3D)
    meta = if_meta(p, grid_ion, grid_rel, tol)
    if cache is not None and reuse and cache.has(meta):
        arrays, stored = cache.load(meta)
        wf = WaveFn("if", (grid_ion, grid_rel, grid_rel), arrays["psi"].copy(),
                    exchange=+1, parity=+1, energy=float(arrays["energy"][0]))
        result = Ground3DResult(wf, float(arrays["energy"][0]),
                                float(arrays["residual"][0]),
                                list(arrays["history"]), 0)
        return result, True
    op = build_if_hamiltonian(grid_ion, grid_rel, p)
    result = ground_state_3d(op, tol=tol)
    if cache is not None:
        cache.store(meta, {
            "psi": result.wavefn.values,
            "energy": np.array([result.energy]),
            "residual": np.array([result.residual]),
            "history": np.array(result.energy_history),
        })
    return result, False


def h1b_orbitals(p: ModelParams, grid: Grid1D | None = None, k: int = 4):
    """Eigenvalues and the first k orbitals of the pinned-ion one-body problem."""
    grid = grid or make_grid(REL_EXTENT, REL_N)
    op = build_h1b(grid, p.with_(g=0.0, beta=0.0))
    w, v = solve_1d(op)
    return w, v[:, :k]
