"""Species-mean-field (SMF) product ansatz in the ion frame and the induced
effective one-body potentials.

At eta = 1 the SMF equations decouple by parity: every parity-symmetric atom
factor gives <z_I> = <d/dz_I> = 0 and vice versa, so the ion factor solves
the bare ion oscillator (independently of g) and the atom factor solves the
atom rows of the ion-frame Hamiltonian. No self-consistency loop is needed;
a fixed-point hook is kept for future unequal-trap work but is disabled by
default.
"""

from dataclasses import dataclass

import numpy as np

from .grid import Grid1D, dense_second_derivative
from .hamiltonians import build_smf_atom_pair
from .eigensolve import WaveFn, _fix_phase, lowest_eigenstates
from .observables import Density1D
from .potentials import ModelParams, atom_ion_potential


@dataclass
class EffectivePotential:
    """A one-body potential induced by the other species' density."""

    grid: Grid1D
    values: np.ndarray
    species: str   # "atom" | "ion"
    source: str    # "smf" | "exact-if" | "delta" ...


@dataclass
class SMFSolution:
    """Product-ansatz factors and their energies (total = atoms + ion)."""

    psi_atoms: WaveFn        # two-atom factor on the relative grid
    ion_orbital: np.ndarray  # 1D ion factor on the ion grid
    ion_grid: Grid1D
    energy_atoms: float
    energy_ion: float

    @property
    def energy_total(self) -> float:
        return self.energy_atoms + self.energy_ion

    def ion_density(self) -> Density1D:
        return Density1D(self.ion_grid.points.copy(), self.ion_orbital**2,
                         self.ion_grid.dz, "ion")

    def atom_relative_density(self) -> Density1D:
        rho1 = np.sum(self.psi_atoms.values**2, axis=1) * self.psi_atoms.grids[1].dz
        return Density1D(self.psi_atoms.grids[0].points.copy(), rho1,
                         self.psi_atoms.grids[0].dz, "atom")

    def lab_atom_density(self) -> Density1D:
        """Laboratory-frame rho_1(z_A) of the product state (ion-density
        convolution of the relative marginal)."""
        from .observables import lab_densities_from_if

        vals = self.ion_orbital[:, None, None] * self.psi_atoms.values[None, :, :]
        product = WaveFn("if", (self.ion_grid,) + self.psi_atoms.grids, vals)
        rho_a, _ = lab_densities_from_if(product)
        return rho_a


def _dense_ground(grid: Grid1D, kinetic_coeff: float, potential: np.ndarray):
    h = -kinetic_coeff * dense_second_derivative(grid) + np.diag(potential)
    w, v = np.linalg.eigh(h)
    phi = v[:, 0] / np.sqrt(grid.dz)
    _fix_phase(phi)
    return float(w[0]), phi


def smf_ion_energy(p: ModelParams) -> float:
    """Analytic ground energy of -beta d^2 + (N + 1/(beta eta^2)) z^2/l_A^4:
    sqrt(beta (N + 1/(beta eta^2))) / l_A^2."""
    if p.beta <= 0:
        raise ValueError("SMF needs a mobile ion (beta > 0)")
    return float(np.sqrt(p.beta * (p.n_atoms + 1.0 / (p.beta * p.eta**2))) / p.l_A**2)


def smf_solve_if(p: ModelParams, grid_rel: Grid1D, grid_ion: Grid1D,
                 tol: float = 1e-8, self_consistent: bool = False) -> SMFSolution:
    """Solve the ion-frame product ansatz psi_A(r_1, r_2) * psi_I(z_I).

    The ion factor is a pure oscillator (grid-diagonalised; the analytic
    energy is available as `smf_ion_energy`). The atom factor is the ground
    state of the atom rows of the ion-frame operator, contact and
    mass-induced derivative coupling included.
    """
    if p.beta <= 0:
        raise ValueError("SMF needs a mobile ion (beta > 0)")
    if self_consistent:
        raise NotImplementedError("fixed-point SMF iteration is reserved for eta != 1")
    v_ion = (p.n_atoms + 1.0 / (p.beta * p.eta**2)) * grid_ion.points**2 / p.l_A**4
    e_ion, phi_ion = _dense_ground(grid_ion, p.beta, v_ion)

    op = build_smf_atom_pair(grid_rel, p)
    record, states = lowest_eigenstates(op, k=1, tol=tol, sectors=(+1,))
    psi_atoms = states[0]
    return SMFSolution(psi_atoms=psi_atoms, ion_orbital=phi_ion, ion_grid=grid_ion,
                       energy_atoms=float(record.eigenvalues[0]), energy_ion=e_ion)


def _convolve_with_density(target: Grid1D, source: Density1D, p: ModelParams) -> np.ndarray:
    """integral V_AI(z - s) rho(s) ds by direct rectangle quadrature (exact for
    the grid measure, handles unequal grids without resampling)."""
    total = source.integral()
    if abs(total - 1.0) > 1e-6:
        raise ValueError(f"source density integrates to {total:.8f}, expected 1")
    diff = target.points[:, None] - source.axis[None, :]
    return (atom_ion_potential(diff, p) * source.density[None, :]).sum(axis=1) * source.spacing


def effective_atom_potential(rho_ion: Density1D, p: ModelParams, grid: Grid1D,
                             source: str = "smf") -> EffectivePotential:
    """Trap plus the ion-density-averaged atom-ion interaction."""
    vals = grid.points**2 / p.l_A**4 + _convolve_with_density(grid, rho_ion, p)
    return EffectivePotential(grid=grid, values=vals, species="atom", source=source)


def effective_ion_potential(rho_atom: Density1D, p: ModelParams, grid: Grid1D,
                            source: str = "smf") -> EffectivePotential:
    """Ion trap plus N times the atom-density-averaged interaction."""
    if p.beta <= 0:
        raise ValueError("no ion trap for beta = 0")
    vals = grid.points**2 / (p.l_A**4 * p.beta * p.eta**2)
    vals = vals + p.n_atoms * _convolve_with_density(grid, rho_atom, p)
    return EffectivePotential(grid=grid, values=vals, species="ion", source=source)


def effective_ground_orbital(pot: EffectivePotential, p: ModelParams):
    """Ground orbital and energy of -c d^2/dz^2 + P_eff, c = 1 (atom) or beta (ion)."""
    if not np.all(np.isfinite(pot.values)):
        raise ValueError("effective potential contains non-finite values")
    coeff = 1.0 if pot.species == "atom" else p.beta
    energy, phi = _dense_ground(pot.grid, coeff, pot.values)
    return phi, energy
