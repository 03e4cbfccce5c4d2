"""atomion: numerically exact spectra and observables for a quasi-1D
two-boson/single-ion hybrid system on Fourier grids (units E*, R*)."""

__version__ = "0.1.0"

from .grid import Grid1D, make_grid, second_derivative, first_derivative, integrate
from .potentials import ModelParams, default_params, atom_ion_potential, contact_diagonal
from .hamiltonians import (
    OperatorSpec, TermFlags, CMSolution, cm_solution,
    build_h1b, build_relative_cmf, build_if_hamiltonian,
    build_smf_atom_pair, build_cm_oscillator, build_coupled_cmf,
)
from .eigensolve import (
    WaveFn, SpectrumRecord, ConvergenceError,
    solve_1d, lowest_eigenstates, ground_state_3d, exchange_project,
)
from .observables import (
    SeparationDist, EnergyBreakdown, OverlapSpectrum, Density1D,
    two_body_density, interatomic_separation_dist, interspecies_separation_dist,
    mean_separations, bunching_probability, lab_energy_components,
    lab_energy_components_if, number_state_overlaps, fidelity,
    lab_densities_from_if, contact_expectation,
)
from .meanfield import (
    EffectivePotential, SMFSolution, smf_solve_if, smf_ion_energy,
    effective_atom_potential, effective_ion_potential, effective_ground_orbital,
)
