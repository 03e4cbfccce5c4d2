import numpy as np
import pytest

from atomion.grid import make_grid
from atomion.meanfield import (effective_atom_potential, effective_ground_orbital,
                               effective_ion_potential, smf_ion_energy,
                               smf_solve_if)
from atomion.observables import Density1D
from atomion.potentials import atom_ion_potential, default_params

GI = make_grid(2.5, 96)
GR = make_grid(4.0, 128)


def _delta_density(grid, at=0.0):
    vals = np.zeros(grid.n)
    vals[np.argmin(np.abs(grid.points - at))] = 1.0 / grid.dz
    return Density1D(grid.points.copy(), vals, grid.dz, "ion")


def test_smf_ion_energy_analytic():
    p = default_params().with_(beta=1.0)
    # ground of -a d^2 + b z^2 is sqrt(ab): here sqrt(3)*4
    assert abs(smf_ion_energy(p) - 4.0 * np.sqrt(3.0)) < 1e-12
    with pytest.raises(ValueError):
        smf_ion_energy(default_params())


def test_smf_ion_energy_vs_grid_diagonalisation():
    p = default_params().with_(beta=1.0)
    smf = smf_solve_if(p, make_grid(4.0, 96), GI)
    assert abs(smf.energy_ion - smf_ion_energy(p)) < 1e-8


def test_smf_ion_factor_independent_of_g():
    p = default_params().with_(beta=1.0)
    a = smf_solve_if(p.with_(g=0.0), make_grid(4.0, 96), GI)
    b = smf_solve_if(p.with_(g=10.0), make_grid(4.0, 96), GI)
    assert np.max(np.abs(a.ion_orbital - b.ion_orbital)) < 1e-10
    assert abs(a.energy_ion - b.energy_ion) < 1e-10
    # the atom factor does depend on g
    assert b.energy_atoms > a.energy_atoms


def test_smf_rejects_pinned_ion():
    with pytest.raises(ValueError, match="mobile"):
        smf_solve_if(default_params(), GR, GI)


def test_effective_atom_potential_delta_identity():
    p = default_params().with_(beta=1.0)
    pot = effective_atom_potential(_delta_density(GI), p, GR, source="delta")
    expect = GR.points**2 / p.l_A**4 + atom_ion_potential(GR.points, p)
    assert np.max(np.abs(pot.values - expect)) < 1e-10


def test_effective_ion_potential_delta_identity():
    p = default_params().with_(beta=1.0)
    a = 0.5
    rho = _delta_density(GR, at=a)
    pot = effective_ion_potential(rho, p, GI, source="delta")
    expect = (GI.points**2 / (p.l_A**4 * p.beta * p.eta**2)
              + p.n_atoms * atom_ion_potential(a - GI.points, p))
    assert np.max(np.abs(pot.values - expect)) < 1e-10
    with pytest.raises(ValueError):
        effective_ion_potential(rho, default_params(), GI)


def test_effective_potential_rejects_unnormalised():
    p = default_params().with_(beta=1.0)
    rho = _delta_density(GI)
    rho.density = rho.density * 1.5
    with pytest.raises(ValueError, match="integrates"):
        effective_atom_potential(rho, p, GR)


def test_effective_potential_parity_and_bound():
    p = default_params().with_(beta=1.0)
    smf = smf_solve_if(p, make_grid(4.0, 96), GI)
    pot = effective_atom_potential(smf.ion_density(), p, GR)
    flipped = np.roll(pot.values[::-1], 1)
    assert np.max(np.abs(pot.values - flipped)) < 1e-9
    vai_min = float(np.min(atom_ion_potential(np.linspace(-4, 4, 4001), p)))
    assert np.min(pot.values) >= vai_min - 1e-9


def test_effective_ground_orbital_pure_trap():
    p = default_params().with_(beta=1.0)
    pot_atom = effective_atom_potential(_delta_density(GI), p, GR, source="delta")
    # overwrite with the bare trap to hit the analytic oscillator
    pot_atom.values = GR.points**2 / p.l_A**4
    phi, e = effective_ground_orbital(pot_atom, p)
    assert abs(e - 4.0) < 1e-8
    assert abs(np.sum(phi**2) * GR.dz - 1.0) < 1e-10
    # ion kinetic coefficient is beta
    pot_ion = effective_ion_potential(_delta_density(GR), p, GI, source="delta")
    pot_ion.values = (p.n_atoms + 1.0 / (p.beta * p.eta**2)) * GI.points**2 / p.l_A**4
    _, e_ion = effective_ground_orbital(pot_ion, p)
    assert abs(e_ion - smf_ion_energy(p)) < 1e-8


def test_smf_lab_atom_density_centre_peaked():
    # beta=1, g=0: the relative marginal keeps the bound-state double hump,
    # but the lab-frame density (ion convolution) is centre-peaked
    p = default_params().with_(beta=1.0)
    smf = smf_solve_if(p, make_grid(4.0, 128), GI)
    rel = smf.atom_relative_density()
    assert abs(abs(rel.axis[np.argmax(rel.density)]) - 0.25) < 0.1
    lab = smf.lab_atom_density()
    assert abs(lab.axis[np.argmax(lab.density)]) < 0.1
    assert abs(lab.integral() - 1.0) < 1e-6
