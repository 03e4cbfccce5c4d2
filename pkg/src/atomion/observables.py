"""Eigenstate observables: densities, separations, bunching, energy splits,
number-state overlaps, fidelities, and laboratory-frame one-body densities.

Separation coordinates follow the rotation X = r - r', Y = (r + r')/2; on the
uniform product grid the Y-integration is an offset-diagonal sum, which is
the exact rectangle-rule realisation of that rotation (no interpolation
needed). Laboratory-frame energy components for a mobile ion come from the
chain rule d/dz_Ai = d/dr_i + d*d/dR, d/dz_I = -sum_i d/dr_i + (1-Nd)*d/dR,
with all relative/CM cross terms vanishing by parity of the Gaussian CM
ground state.
"""

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .grid import Grid1D, grid_norm
from .hamiltonians import CMSolution
from .eigensolve import WaveFn
from .potentials import ModelParams, atom_ion_potential


@dataclass
class SeparationDist:
    """A normalised 1D separation distribution on a uniform axis."""

    axis: np.ndarray
    density: np.ndarray
    kind: str          # "atom-atom" | "atom-ion"
    spacing: float

    def integral(self) -> float:
        return float(np.sum(self.density) * self.spacing)

    def mean_abs(self) -> float:
        return float(np.sum(np.abs(self.axis) * self.density) * self.spacing)


@dataclass
class EnergyBreakdown:
    """Laboratory-frame energy components, in E*."""

    K_A: float
    P_A: float
    V_AA: float
    V_AI: float
    K_I: float
    P_I: float

    @property
    def total(self) -> float:
        return self.K_A + self.P_A + self.V_AA + self.V_AI + self.K_I + self.P_I

    def as_dict(self) -> dict:
        return {"K_A": self.K_A, "P_A": self.P_A, "V_AA": self.V_AA,
                "V_AI": self.V_AI, "K_I": self.K_I, "P_I": self.P_I,
                "total": self.total}


@dataclass
class OverlapSpectrum:
    """Weights |<psi|n>|^2 of symmetrised two-boson number states."""

    entries: list  # [((n1, n2, n3, n4), weight), ...]

    def weight(self, label) -> float:
        label = tuple(label)
        for lab, w in self.entries:
            if lab == label:
                return w
        raise KeyError(f"no number state {label}")

    def total(self) -> float:
        return float(sum(w for _, w in self.entries))


# ---------------------------------------------------------------------------
# densities and separations

def two_body_density(psi: WaveFn) -> np.ndarray:
    """rho_2(r, r') = |psi(r, r')|^2 for a relative-frame two-atom state."""
    if psi.values.ndim != 2:
        raise ValueError("two_body_density needs a two-atom wavefunction")
    return psi.values**2


def relative_density2(psi: WaveFn) -> np.ndarray:
    """The (r, r') probability density; integrates out z_I for ion-frame states."""
    if psi.values.ndim == 2:
        return psi.values**2
    if psi.frame == "if":
        return np.sum(psi.values**2, axis=0) * psi.grids[0].dz
    raise ValueError(f"cannot reduce frame {psi.frame!r} to a relative two-body density")


def _rel_grid(psi: WaveFn) -> Grid1D:
    return psi.grids[-1]


def interatomic_separation_dist(rho2: np.ndarray, grid: Grid1D) -> SeparationDist:
    """rho_1^AA(X): distribution of the interatomic distance X = r - r'.

    Offset-diagonal sums realise the (X, Y) rotation exactly on the lattice:
    rho(m dz) = dz * sum_j rho2[j, j-m].
    """
    n = grid.n
    if rho2.shape != (n, n):
        raise ValueError("rho2 must live on the square product of the given grid")
    dz = grid.dz
    offsets = np.arange(-(n - 1), n)
    density = np.empty(offsets.size)
    for i, m in enumerate(offsets):
        density[i] = np.trace(rho2, offset=-m) * dz
    return SeparationDist(axis=offsets * dz, density=density, kind="atom-atom", spacing=dz)


def interspecies_separation_dist(rho2: np.ndarray, grid: Grid1D) -> SeparationDist:
    """rho_1^AI(r): the one-body marginal of the relative coordinate."""
    n = grid.n
    if rho2.shape != (n, n):
        raise ValueError("rho2 must live on the square product of the given grid")
    rho1 = np.sum(rho2, axis=1) * grid.dz
    return SeparationDist(axis=grid.points.copy(), density=rho1, kind="atom-ion", spacing=grid.dz)


def mean_separations(psi: WaveFn) -> tuple[float, float]:
    """(d_AA, d_AI): mean |r - r'| and mean |r| of the relative density."""
    rho2 = relative_density2(psi)
    grid = _rel_grid(psi)
    d_aa = interatomic_separation_dist(rho2, grid).mean_abs()
    d_ai = interspecies_separation_dist(rho2, grid).mean_abs()
    return d_aa, d_ai


def bunching_probability(rho2: np.ndarray, grid: Grid1D) -> float:
    """Probability that both atoms sit on the same side of the ion.

    Sum of the (+,+) and (-,-) quadrants of rho_2; the measure-zero r = 0
    grid line is shared half-half between the sides.
    """
    n = grid.n
    if rho2.shape != (n, n):
        raise ValueError("rho2 must live on the square product of the given grid")
    side = 0.5 * (np.sign(grid.points) + 1.0)  # 0 below, 1/2 at z=0, 1 above
    w_pp = side[:, None] * side[None, :]
    w_mm = (1.0 - side[:, None]) * (1.0 - side[None, :])
    return float(np.sum(rho2 * (w_pp + w_mm)) * grid.dz**2)


# ---------------------------------------------------------------------------
# energy decomposition

def _axis_derivative(f: np.ndarray, grid: Grid1D, axis: int, order: int) -> np.ndarray:
    """Spectral d^order/dz^order along one axis of an ND array."""
    if order == 1:
        k = grid.wavenumbers(odd_power=True)
        sym = 1j * k
    else:
        sym = -(grid.wavenumbers() ** 2)
    shape = [1] * f.ndim
    shape[axis] = grid.n
    return sfft.ifft(sym.reshape(shape) * sfft.fft(f, axis=axis), axis=axis).real


def _quad(psi: WaveFn, arr: np.ndarray) -> float:
    return float(np.sum(arr) * psi.dvol)


def contact_expectation(psi: WaveFn) -> float:
    """<delta(r_1 - r_2)> under the grid-contact convention (g-independent part)."""
    grid = _rel_grid(psi)
    if psi.values.ndim == 2:
        diag2 = np.einsum("ii->i", psi.values**2)
        return float(np.sum(diag2) * grid.dz)
    diag2 = np.einsum("kii->ki", psi.values**2)
    return float(np.sum(diag2) * psi.grids[0].dz * grid.dz)


def lab_energy_components(psi_rel: WaveFn, p: ModelParams,
                          cm: CMSolution | None = None) -> EnergyBreakdown:
    """Laboratory-frame energy components of a relative-frame eigenstate.

    For beta > 0 pass the analytic CM ground-state solution; its second
    moments enter through the chain rule while the cross terms vanish by
    parity. For beta = 0 the ion terms are identically zero and the relative
    coordinates are the laboratory ones.
    """
    if p.beta > 0 and p.eta != 1.0:
        raise ValueError("lab-frame decomposition requires eta = 1")
    if p.beta > 0 and cm is None:
        raise ValueError("mobile ion: supply the CM solution (cm_solution(p))")
    grid = _rel_grid(psi_rel)
    f = psi_rel.values
    if f.ndim != 2:
        raise ValueError("lab_energy_components expects a two-atom relative state")

    d1_0 = _axis_derivative(f, grid, 0, 1)
    d1_1 = _axis_derivative(f, grid, 1, 1)
    t1 = -_quad(psi_rel, f * _axis_derivative(f, grid, 0, 2))
    t2 = -_quad(psi_rel, f * _axis_derivative(f, grid, 1, 2))
    tx = _quad(psi_rel, d1_0 * d1_1)  # <-d_r1 d_r2> after integrating by parts

    z = grid.points
    zo = grid.odd_points()
    rho2 = f**2
    q1 = _quad(psi_rel, rho2 * z[:, None] ** 2)
    q2 = _quad(psi_rel, rho2 * z[None, :] ** 2)
    qx = _quad(psi_rel, rho2 * zo[:, None] * zo[None, :])
    vai = atom_ion_potential(z, p)
    v_ai = _quad(psi_rel, rho2 * (vai[:, None] + vai[None, :]))
    v_aa = p.g * contact_expectation(psi_rel)

    nn = p.n_atoms
    d = p.d
    if p.beta == 0:
        return EnergyBreakdown(K_A=t1 + t2, P_A=(q1 + q2) / p.l_A**4,
                               V_AA=v_aa, V_AI=v_ai, K_I=0.0, P_I=0.0)
    r2_cm, d2_cm = cm.mean_R2, cm.mean_d2R
    s2 = q1 + q2 + 2.0 * qx
    k_a = (t1 + t2) + nn * d**2 * d2_cm
    k_i = p.beta * (t1 + t2 + 2.0 * tx) + p.beta * (1.0 - nn * d) ** 2 * d2_cm
    p_a = (q1 + q2 + (nn * d**2 - 2.0 * d) * s2 + nn * r2_cm) / p.l_A**4
    p_i = (r2_cm + d**2 * s2) / (p.l_A**4 * p.beta * p.eta**2)
    return EnergyBreakdown(K_A=k_a, P_A=p_a, V_AA=v_aa, V_AI=v_ai, K_I=k_i, P_I=p_i)


def lab_energy_components_if(psi: WaveFn, p: ModelParams) -> EnergyBreakdown:
    """The same six components evaluated directly from a 3D ion-frame state."""
    if psi.frame != "if":
        raise ValueError("expects an ion-frame wavefunction")
    gI, gr = psi.grids[0], psi.grids[1]
    f = psi.values
    dI = _axis_derivative(f, gI, 0, 1)
    d1 = _axis_derivative(f, gr, 1, 1)
    d2 = _axis_derivative(f, gr, 2, 1)
    t1 = _quad(psi, d1 * d1)
    t2 = _quad(psi, d2 * d2)
    tI = _quad(psi, dI * dI)
    tI1 = _quad(psi, dI * d1)
    tI2 = _quad(psi, dI * d2)
    t12 = _quad(psi, d1 * d2)

    rho = f**2
    zi = gI.points[:, None, None]
    z1 = gr.points[None, :, None]
    z2 = gr.points[None, None, :]
    k_a = t1 + t2
    k_i = p.beta * (tI + t1 + t2 + 2.0 * t12 - 2.0 * tI1 - 2.0 * tI2)
    p_a = _quad(psi, rho * ((zi + z1) ** 2 + (zi + z2) ** 2)) / p.l_A**4
    p_i = _quad(psi, rho * zi**2) / (p.l_A**4 * p.beta * p.eta**2)
    vai = atom_ion_potential(gr.points, p)
    v_ai = _quad(psi, rho * (vai[None, :, None] + vai[None, None, :]))
    v_aa = p.g * contact_expectation(psi)
    return EnergyBreakdown(K_A=k_a, P_A=p_a, V_AA=v_aa, V_AI=v_ai, K_I=k_i, P_I=p_i)


# ---------------------------------------------------------------------------
# number states, fidelity

TWO_BOSON_LABELS = [
    (2, 0, 0, 0), (1, 1, 0, 0), (0, 2, 0, 0), (1, 0, 1, 0), (1, 0, 0, 1),
    (0, 1, 1, 0), (0, 1, 0, 1), (0, 0, 2, 0), (0, 0, 1, 1), (0, 0, 0, 2),
]


def number_state_wavefunction(label, orbitals: np.ndarray) -> np.ndarray:
    """Symmetrised two-boson product of single-particle orbitals (columns)."""
    occ = [i for i, ni in enumerate(label) for _ in range(ni)]
    if len(occ) != 2:
        raise ValueError(f"label {label} is not a two-boson occupation")
    a, b = occ
    phi_a, phi_b = orbitals[:, a], orbitals[:, b]
    if a == b:
        return np.outer(phi_a, phi_a)
    return (np.outer(phi_a, phi_b) + np.outer(phi_b, phi_a)) / np.sqrt(2.0)


def number_state_overlaps(psi: WaveFn, orbitals: np.ndarray,
                          gram_tol: float = 1e-8) -> OverlapSpectrum:
    """Overlap weights of a two-atom state with the symmetrised number states
    built from the four lowest pinned-ion orbitals."""
    grid = _rel_grid(psi)
    if orbitals.shape != (grid.n, 4):
        raise ValueError("need the four lowest orbitals as columns on the same grid")
    gram = orbitals.T @ orbitals * grid.dz
    if np.max(np.abs(gram - np.eye(4))) > gram_tol:
        raise ValueError("orbital set is not orthonormal under grid quadrature")
    f = psi.values
    entries = []
    for label in TWO_BOSON_LABELS:
        chi = number_state_wavefunction(label, orbitals)
        ov = float(np.sum(chi * f) * psi.dvol)
        entries.append((label, ov**2))
    return OverlapSpectrum(entries=entries)


def fidelity(psi: WaveFn, chi: WaveFn) -> float:
    """Uhlmann fidelity |<chi|psi>|^2 under grid quadrature."""
    if psi.frame != chi.frame:
        raise ValueError(f"frame mismatch: {psi.frame!r} vs {chi.frame!r}")
    if psi.values.shape != chi.values.shape:
        raise ValueError("wavefunctions live on different grids")
    return float(np.sum(psi.values * chi.values) * psi.dvol) ** 2


# ---------------------------------------------------------------------------
# laboratory-frame one-body densities from the ion frame

@dataclass
class Density1D:
    axis: np.ndarray
    density: np.ndarray
    spacing: float
    label: str

    def integral(self) -> float:
        return float(np.sum(self.density) * self.spacing)


def lab_densities_from_if(psi: WaveFn, boundary_tol: float = 1e-8):
    """(rho_1(z_A), rho_1(z_I)) from a 3D ion-frame state.

    The ion density is the plain marginal. The atom density is the
    distribution of z_A = z_I + r, accumulated mass-conservatively onto the
    relative grid with linear (cloud-in-cell) weights; mass falling outside
    that axis must stay below `boundary_tol`.
    """
    if psi.frame != "if":
        raise ValueError("expects an ion-frame wavefunction")
    gI, gr = psi.grids[0], psi.grids[1]
    rho = psi.values**2
    rho_i = np.sum(rho, axis=(1, 2)) * gr.dz**2
    # joint (z_I, r) density of the first atom
    joint = np.sum(rho, axis=2) * gr.dz  # (nI, nr)
    mass = joint * gI.dz * gr.dz
    z_a = gI.points[:, None] + gr.points[None, :]
    pos = (z_a.ravel() + gr.extent) / gr.dz
    idx = np.floor(pos).astype(int)
    frac = pos - idx
    out = np.zeros(gr.n)
    m = mass.ravel()
    ok_lo = (idx >= 0) & (idx < gr.n)
    ok_hi = (idx + 1 >= 0) & (idx + 1 < gr.n)
    np.add.at(out, idx[ok_lo], m[ok_lo] * (1.0 - frac[ok_lo]))
    np.add.at(out, (idx + 1)[ok_hi], m[ok_hi] * frac[ok_hi])
    lost = float(np.sum(m) - np.sum(out))
    if lost > boundary_tol:
        raise ValueError(
            f"{lost:.2e} probability mass falls outside the z_A axis; enlarge the grid")
    rho_a = out / gr.dz
    return (
        Density1D(gr.points.copy(), rho_a, gr.dz, "atom"),
        Density1D(gI.points.copy(), rho_i, gI.dz, "ion"),
    )
