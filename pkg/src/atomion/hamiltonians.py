"""Matrix-free Hamiltonians for every frame of the two-atom/one-ion problem.

Each operator is the sum of a Fourier-diagonal kinetic part and a
position-diagonal potential part, so application costs one FFT round trip
plus a pointwise multiply regardless of dimensionality. Mixed derivatives
(the mass-ratio-induced couplings) live in the kinetic symbol as products of
single-axis wavenumbers; position couplings (r_i r_j, z_I r_i) live in the
potential diagonal. Odd powers of k and of z use the sign-disambiguated
arrays from the grid module so every operator commutes exactly with atom
exchange and with total parity on the grid.

Frames
------
lf-1b         single atom against a pinned ion (1 DOF)
cmf-relative  relative part of the centre-of-mass frame at eta=1 (N DOF)
if            ion frame: (z_I, r_1, r_2) (N+1 DOF)
if-atoms      the atom rows of the ion frame, used by the mean-field ansatz
cm            the analytic centre-of-mass oscillator, on a grid for checks
cmf-coupled   full CMF including the R-r coupling rows (eta != 1; untested)
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .grid import Grid1D, grid_norm
from .potentials import ModelParams, atom_ion_potential, contact_diagonal


@dataclass(frozen=True)
class TermFlags:
    """Switches for the operator term groups (all enabled by default)."""

    kinetic: bool = True
    trap: bool = True
    atom_ion: bool = True
    contact: bool = True
    derivative_coupling: bool = True
    positional_coupling: bool = True


@dataclass(frozen=True)
class OperatorSpec:
    """An immutable apply-only Hamiltonian on a tensor-product grid."""

    frame: str
    grids: tuple[Grid1D, ...]
    params: ModelParams
    terms: TermFlags
    ksym: np.ndarray = field(repr=False)   # kinetic symbol, rfftn half-spectrum layout
    vdiag: np.ndarray = field(repr=False)  # potential on the position grid
    exchange_axes: tuple[int, ...] = ()    # axes holding identical atom coordinates

    @property
    def ndof(self) -> int:
        return len(self.grids)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(g.n for g in self.grids)

    @property
    def dvol(self) -> float:
        out = 1.0
        for g in self.grids:
            out *= g.dz
        return out

    def apply(self, psi: np.ndarray) -> np.ndarray:
        """H psi for a real amplitude array of the operator's shape."""
        out = sfft.irfftn(self.ksym * sfft.rfftn(psi), s=self.shape)
        out += self.vdiag * psi
        return out

    def expectation(self, psi: np.ndarray) -> float:
        """<psi|H|psi> under grid quadrature (psi need not be normalised)."""
        nrm2 = np.sum(psi * psi) * self.dvol
        return float(np.sum(psi * self.apply(psi)) * self.dvol / nrm2)

    def residual_norm(self, psi: np.ndarray, energy: float) -> float:
        return grid_norm(self.dvol, self.apply(psi) - energy * psi)


def _half(sym: np.ndarray, last_n: int) -> np.ndarray:
    """Slice a full-spectrum symbol to the rfftn half-spectrum along the last axis."""
    return np.ascontiguousarray(sym[..., : last_n // 2 + 1])


def build_h1b(grid: Grid1D, p: ModelParams, terms: TermFlags = TermFlags()) -> OperatorSpec:
    """One atom in the harmonic trap plus the pinned-ion potential:
    -d^2/dz^2 + z^2/l_A^4 + V_AI(z)."""
    z = grid.points
    k2 = grid.wavenumbers() ** 2
    ksym = k2 if terms.kinetic else np.zeros_like(k2)
    v = np.zeros(grid.n)
    if terms.trap:
        v += z**2 / p.l_A**4
    if terms.atom_ion:
        v += atom_ion_potential(z, p)
    return OperatorSpec("lf-1b", (grid,), p, terms, _half(ksym, grid.n), v)


def _two_atom_operator(frame, grid, p, terms, trap_coeff, positional_coeff):
    """Shared construction for the 2-DOF atom-pair operators (CMF relative / IF atoms)."""
    if p.n_atoms != 2:
        raise ValueError("two-atom operators require n_atoms = 2")
    n = grid.n
    k = grid.wavenumbers()
    ko = grid.wavenumbers(odd_power=True)
    ksym = np.zeros((n, n))
    if terms.kinetic:
        ksym += (1.0 + p.beta) * (k[:, None] ** 2 + k[None, :] ** 2)
        if terms.derivative_coupling:
            # -2 beta d_r1 d_r2 -> +2 beta k1 k2
            ksym += 2.0 * p.beta * ko[:, None] * ko[None, :]
    z = grid.points
    zo = grid.odd_points()
    v = np.zeros((n, n))
    if terms.trap:
        v += trap_coeff * (z[:, None] ** 2 + z[None, :] ** 2) / p.l_A**4
    if terms.atom_ion:
        vai = atom_ion_potential(z, p)
        v += vai[:, None] + vai[None, :]
    if terms.positional_coupling and positional_coeff != 0.0:
        v += positional_coeff * zo[:, None] * zo[None, :]
    if terms.contact and p.g != 0.0:
        idx = np.arange(n)
        v[idx, idx] += contact_diagonal(grid, p.g)
    return OperatorSpec(frame, (grid, grid), p, terms, _half(ksym, n), v, exchange_axes=(0, 1))


def build_relative_cmf(grid: Grid1D, p: ModelParams, terms: TermFlags = TermFlags()) -> OperatorSpec:
    """Relative part of the centre-of-mass-frame Hamiltonian at eta = 1 (N = 2):

        sum_i [ -(1+beta) d^2/dr_i^2 + (1-d) r_i^2/l_A^4 + V_AI(r_i) ]
        + g delta(r_1 - r_2) - 2 beta d_r1 d_r2 - (2d/l_A^4) r_1 r_2.
    """
    if p.beta > 0 and p.eta != 1.0:
        raise ValueError("coupled CM not supported (eta must be 1); see build_coupled_cmf")
    d = p.d
    return _two_atom_operator(
        "cmf-relative", grid, p, terms,
        trap_coeff=1.0 - d,
        positional_coeff=-2.0 * d / p.l_A**4,
    )


def build_smf_atom_pair(grid: Grid1D, p: ModelParams, terms: TermFlags = TermFlags()) -> OperatorSpec:
    """Atom rows of the ion-frame Hamiltonian (unit trap coefficient, no position coupling).

    This is the operator the species-mean-field atom factor solves once the
    ion couplings average to zero by parity.
    """
    return _two_atom_operator("if-atoms", grid, p, terms, trap_coeff=1.0, positional_coeff=0.0)


def build_if_hamiltonian(grid_ion: Grid1D, grid_rel: Grid1D, p: ModelParams,
                         terms: TermFlags = TermFlags(),
                         include_ion_coupling: bool = True) -> OperatorSpec:
    """Full ion-frame Hamiltonian on the (z_I, r_1, r_2) product grid.

    Kinetic symbol: (1+beta)(k_1^2 + k_2^2) + beta k_I^2 + 2 beta k_1 k_2
                    - 2 beta k_I (k_1 + k_2)
    Potential:      traps + V_AI(r_i) + g delta + (2/l_A^4) z_I (r_1 + r_2)

    `include_ion_coupling=False` drops the ion-atom coupling row (both the
    positional and the derivative part), leaving an exactly decoupled
    atoms x ion sum for cross-checks against the mean-field module.
    """
    if p.beta <= 0:
        raise ValueError("ion-frame Hamiltonian needs a mobile ion (beta > 0)")
    if p.n_atoms != 2:
        raise ValueError("ion-frame builder requires n_atoms = 2")
    nI, nr = grid_ion.n, grid_rel.n
    kI = grid_ion.wavenumbers()
    kr = grid_rel.wavenumbers()
    kIo = grid_ion.wavenumbers(odd_power=True)
    kro = grid_rel.wavenumbers(odd_power=True)

    ksym = np.zeros((nI, nr, nr))
    if terms.kinetic:
        ksym += (1.0 + p.beta) * (kr[None, :, None] ** 2 + kr[None, None, :] ** 2)
        ksym += p.beta * kI[:, None, None] ** 2
        if terms.derivative_coupling:
            ksym += 2.0 * p.beta * kro[None, :, None] * kro[None, None, :]
            if include_ion_coupling:
                # +2 beta d_zI d_ri -> -2 beta kI ki
                ksym -= 2.0 * p.beta * kIo[:, None, None] * (kro[None, :, None] + kro[None, None, :])

    zI, zr = grid_ion.points, grid_rel.points
    zIo, zro = grid_ion.odd_points(), grid_rel.odd_points()
    v = np.zeros((nI, nr, nr))
    if terms.trap:
        v += (zr[None, :, None] ** 2 + zr[None, None, :] ** 2) / p.l_A**4
        v += (p.n_atoms + 1.0 / (p.beta * p.eta**2)) * zI[:, None, None] ** 2 / p.l_A**4
    if terms.atom_ion:
        vai = atom_ion_potential(zr, p)
        v += vai[None, :, None] + vai[None, None, :]
    if terms.positional_coupling and include_ion_coupling:
        v += (2.0 / p.l_A**4) * zIo[:, None, None] * (zro[None, :, None] + zro[None, None, :])
    if terms.contact and p.g != 0.0:
        idx = np.arange(nr)
        v[:, idx, idx] += contact_diagonal(grid_rel, p.g)

    return OperatorSpec("if", (grid_ion, grid_rel, grid_rel), p, terms,
                        _half(ksym, nr), v, exchange_axes=(1, 2))


def build_cm_oscillator(grid: Grid1D, p: ModelParams) -> OperatorSpec:
    """The centre-of-mass sub-Hamiltonian -d d^2/dR^2 + R^2/(d l_A^4), for grid checks."""
    if p.beta <= 0:
        raise ValueError("no CM degree of freedom for a pinned ion (beta = 0)")
    d = p.d
    ksym = d * grid.wavenumbers() ** 2
    v = grid.points**2 / (d * p.l_A**4)
    return OperatorSpec("cm", (grid,), p, TermFlags(), _half(ksym, grid.n), v)


def build_coupled_cmf(grid_R: Grid1D, grid_rel: Grid1D, p: ModelParams,
                      terms: TermFlags = TermFlags()) -> OperatorSpec:
    """Full CMF operator on (R, r_1, r_2) including the eta != 1 coupling row.

    Retained for completeness; the tested surface only uses the decoupled
    eta = 1 form (build_relative_cmf plus the analytic CM oscillator).
    """
    if p.beta <= 0:
        raise ValueError("the coupled CMF needs a mobile ion (beta > 0)")
    if p.n_atoms != 2:
        raise ValueError("coupled CMF builder requires n_atoms = 2")
    d = p.d
    nR, nr = grid_R.n, grid_rel.n
    kR = grid_R.wavenumbers()
    kr = grid_rel.wavenumbers()
    kro = grid_rel.wavenumbers(odd_power=True)
    ksym = np.zeros((nR, nr, nr))
    if terms.kinetic:
        ksym += d * kR[:, None, None] ** 2
        ksym += (1.0 + p.beta) * (kr[None, :, None] ** 2 + kr[None, None, :] ** 2)
        if terms.derivative_coupling:
            ksym += 2.0 * p.beta * kro[None, :, None] * kro[None, None, :]

    R, zr = grid_R.points, grid_rel.points
    Ro, zro = grid_R.odd_points(), grid_rel.odd_points()
    v = np.zeros((nR, nr, nr))
    if terms.trap:
        v += (1.0 - d) * (zr[None, :, None] ** 2 + zr[None, None, :] ** 2) / p.l_A**4
        v += (1.0 + p.n_atoms * p.beta * p.eta**2) * R[:, None, None] ** 2 / (p.l_A**4 * p.beta * p.eta**2)
    if terms.atom_ion:
        vai = atom_ion_potential(zr, p)
        v += vai[None, :, None] + vai[None, None, :]
    if terms.positional_coupling:
        v += -(2.0 * d / p.l_A**4) * zro[None, :, None] * zro[None, None, :]
        coup = 2.0 * d * (p.eta**2 - 1.0) / (p.l_A**4 * p.beta * p.eta**2)
        if coup != 0.0:
            v += coup * Ro[:, None, None] * (zro[None, :, None] + zro[None, None, :])
    if terms.contact and p.g != 0.0:
        idx = np.arange(nr)
        v[:, idx, idx] += contact_diagonal(grid_rel, p.g)
    return OperatorSpec("cmf-coupled", (grid_R, grid_rel, grid_rel), p, terms,
                        _half(ksym, nr), v, exchange_axes=(1, 2))


@dataclass(frozen=True)
class CMSolution:
    """Analytic ground state of the CM oscillator (mass 1/2d, frequency 2/l_A^2)."""

    omega: float
    energy: float
    mean_R2: float
    mean_d2R: float  # <-d^2/dR^2>


def cm_solution(p: ModelParams) -> CMSolution:
    """Ground-state data of H_R = -d d^2/dR^2 + R^2/(d l_A^4) at eta = 1.

    E_R = 1/l_A^2 splits evenly between kinetic and potential:
    d * mean_d2R = mean_R2 / (d l_A^4) = E_R / 2.
    """
    if p.beta <= 0:
        raise ValueError("no CM degree of freedom for a pinned ion (beta = 0)")
    d = p.d
    return CMSolution(
        omega=2.0 / p.l_A**2,
        energy=1.0 / p.l_A**2,
        mean_R2=d * p.l_A**2 / 2.0,
        mean_d2R=1.0 / (2.0 * d * p.l_A**2),
    )
