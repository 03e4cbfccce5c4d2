import numpy as np
import pytest

from atomion.eigensolve import WaveFn
from atomion.grid import make_grid
from atomion.hamiltonians import cm_solution
from atomion.observables import (Density1D, bunching_probability,
                                 contact_expectation, fidelity,
                                 interatomic_separation_dist,
                                 interspecies_separation_dist,
                                 lab_densities_from_if, lab_energy_components,
                                 mean_separations, number_state_overlaps,
                                 number_state_wavefunction, relative_density2,
                                 two_body_density, TWO_BOSON_LABELS)
from atomion.potentials import default_params


@pytest.fixture(scope="module")
def product_states(h1b, grid512):
    """Exact g=0, beta=0 eigenstates assembled from the 1D orbitals."""
    _, orbs = h1b

    def make(i, j):
        vals = number_state_wavefunction(_label(i, j), orbs)
        parity = +1 if (i + j) % 2 == 0 else -1
        return WaveFn("cmf-relative", (grid512, grid512), vals, parity=parity)

    return make


def _label(i, j):
    lab = [0, 0, 0, 0]
    lab[i] += 1
    lab[j] += 1
    return tuple(lab)


def test_two_body_density_normalised(product_states):
    wf = product_states(0, 0)
    rho2 = two_body_density(wf)
    assert abs(np.sum(rho2) * wf.dvol - 1.0) < 1e-8
    assert np.all(rho2 >= 0)


def test_two_body_density_product_structure(product_states, h1b, grid512):
    _, orbs = h1b
    rho2 = two_body_density(product_states(0, 0))
    expect = np.outer(orbs[:, 0] ** 2, orbs[:, 0] ** 2)
    assert np.max(np.abs(rho2 - expect)) < 1e-12


def test_first_excited_antidiagonal_cancellation(product_states):
    # phi0 ~ -sign(r) phi1 makes the two-atom state vanish where sign(r) != sign(r')
    wf = product_states(0, 1)
    rho2 = two_body_density(wf)
    anti = np.diag(np.fliplr(rho2))
    assert np.max(anti) / np.max(rho2) < 1e-3


def test_interatomic_distribution_even_and_normalised(product_states, grid512):
    rho2 = two_body_density(product_states(0, 0))
    dist = interatomic_separation_dist(rho2, grid512)
    assert abs(dist.integral() - 1.0) < 1e-6
    assert np.all(dist.density >= -1e-14)
    mid = dist.density[::-1]
    assert np.max(np.abs(dist.density - mid)) < 1e-10


def _local_maxima(x, rho, floor=0.05):
    keep = rho[1:-1] > floor * rho.max()
    up = rho[1:-1] > rho[:-2]
    down = rho[1:-1] >= rho[2:]
    return x[1:-1][keep & up & down]


def test_third_excited_three_humps(product_states, grid512):
    # |1,0,1,0> separation distribution: humps near X=0, X~0.4 and X~1.0;
    # the full (even) axis makes X=0 an interior point
    rho2 = two_body_density(product_states(0, 2))
    dist = interatomic_separation_dist(rho2, grid512)
    peaks = _local_maxima(dist.axis, dist.density)
    peaks = np.unique(np.round(np.abs(peaks), 6))
    assert np.any(np.abs(peaks - 0.0) < 0.1)
    assert np.any(np.abs(peaks - 0.4) < 0.1)
    assert np.any(np.abs(peaks - 1.0) < 0.1)


def test_mean_abs_separation_vs_2d_quadrature(product_states, grid512):
    wf = product_states(0, 2)
    rho2 = two_body_density(wf)
    d_aa = interatomic_separation_dist(rho2, grid512).mean_abs()
    z = grid512.points
    direct = float(np.sum(np.abs(z[:, None] - z[None, :]) * rho2) * grid512.dz**2)
    assert abs(d_aa - direct) < 1e-6


def test_mean_separations_point_mass(grid512):
    # rho2 concentrated at (a, -a): d_AA = 2a, d_AI = a
    a = 0.5
    ia = np.argmin(np.abs(grid512.points - a))
    ima = np.argmin(np.abs(grid512.points + a))
    vals = np.zeros((grid512.n, grid512.n))
    vals[ia, ima] = vals[ima, ia] = 1.0
    wf = WaveFn("cmf-relative", (grid512, grid512), vals)
    wf.values /= wf.norm()
    d_aa, d_ai = mean_separations(wf)
    assert abs(d_aa - 2 * a) < 1e-12
    assert abs(d_ai - a) < 1e-12


def test_bunching_product_state(product_states, grid512):
    rho2 = two_body_density(product_states(0, 0))
    assert abs(bunching_probability(rho2, grid512) - 0.5) < 1e-3


def test_bunching_first_excited(product_states, grid512):
    # near-complete bunching; 0.98905 is the shooting-integrator oracle value
    # (the two bound orbitals differ slightly, so the cancellation of the
    # anti-bunched quadrants is not perfect)
    pb = bunching_probability(two_body_density(product_states(0, 1)), grid512)
    assert pb > 0.95
    assert abs(pb - 0.98905) < 2e-3


def test_bunching_quadrant_convention(grid512):
    # density concentrated on the r = 0 grid line is shared 50/50 exactly
    vals = np.zeros((grid512.n, grid512.n))
    vals[grid512.index_of_zero(), :] = np.exp(-grid512.points**2)
    rho2 = vals / (np.sum(vals) * grid512.dz**2)
    assert abs(bunching_probability(rho2, grid512) - 0.5) < 1e-14


def test_energy_components_static_ground(product_states, h1b, grid512):
    from atomion.grid import second_derivative
    p = default_params()
    w1, orbs = h1b
    wf = product_states(0, 0)
    comp = lab_energy_components(wf, p)
    assert comp.K_I == 0.0 and comp.P_I == 0.0 and comp.V_AA == 0.0
    # 1D orbital oracle
    phi = orbs[:, 0]
    kin1 = -float(np.sum(phi * second_derivative(grid512, phi)) * grid512.dz)
    pot1 = float(np.sum(phi**2 * grid512.points**2) * grid512.dz) / p.l_A**4
    from atomion.potentials import atom_ion_potential
    vai1 = float(np.sum(phi**2 * atom_ion_potential(grid512.points, p)) * grid512.dz)
    assert abs(comp.K_A - 2 * kin1) < 1e-8
    assert abs(comp.P_A - 2 * pot1) < 1e-8
    assert abs(comp.V_AI - 2 * vai1) < 1e-8
    assert abs(comp.total - 2 * w1[0]) < 1e-6


def test_energy_components_oscillator_virial(grid512):
    # pure oscillator ground state: K_A = P_A (each atom carries E/2 = 2)
    p = default_params()
    z = grid512.points
    phi = (np.pi * p.l_A**2) ** (-0.25) * np.exp(-z**2 / (2 * p.l_A**2))
    wf = WaveFn("cmf-relative", (grid512, grid512), np.outer(phi, phi))
    wf.values /= wf.norm()
    comp = lab_energy_components(wf, p)
    assert abs(comp.K_A - comp.P_A) < 1e-6
    assert abs(comp.K_A + comp.P_A - 8.0) < 1e-6


def test_contact_consistency_with_energy_component(product_states):
    # V_AA component equals g * <delta> under the same grid convention
    p5 = default_params().with_(g=5.0)
    wf = product_states(0, 1)
    comp = lab_energy_components(wf, p5)
    diag = np.einsum("ii->i", wf.values**2)
    oracle = 5.0 * float(np.sum(diag) * wf.grids[0].dz)
    assert abs(comp.V_AA - oracle) < 1e-10
    assert abs(contact_expectation(wf) * 5.0 - oracle) < 1e-14


def test_number_state_overlaps_exact_states(product_states, h1b):
    _, orbs = h1b
    spec = number_state_overlaps(product_states(0, 0), orbs)
    assert abs(spec.weight((2, 0, 0, 0)) - 1.0) < 1e-8
    assert spec.total() < 1.0 + 1e-8
    spec1 = number_state_overlaps(product_states(0, 1), orbs)
    assert abs(spec1.weight((1, 1, 0, 0)) - 1.0) < 1e-8
    for lab, w in spec1.entries:
        assert -1e-12 <= w <= 1.0 + 1e-12
        if lab != (1, 1, 0, 0):
            assert w < 1e-8


def test_number_state_overlaps_rejects_bad_orbitals(product_states, h1b):
    _, orbs = h1b
    bad = orbs.copy()
    bad[:, 1] *= 1.01
    with pytest.raises(ValueError, match="orthonormal"):
        number_state_overlaps(product_states(0, 0), bad)


def test_number_state_labels_complete():
    assert len(TWO_BOSON_LABELS) == 10
    assert all(sum(lab) == 2 for lab in TWO_BOSON_LABELS)
    assert len(set(TWO_BOSON_LABELS)) == 10


def test_fidelity_basics(product_states):
    a = product_states(0, 0)
    b = product_states(0, 1)
    assert abs(fidelity(a, a) - 1.0) < 1e-10
    assert fidelity(a, b) < 1e-8


def test_fidelity_frame_mismatch(product_states, grid512):
    a = product_states(0, 0)
    other = WaveFn("if-atoms", (grid512, grid512), a.values.copy())
    with pytest.raises(ValueError, match="frame"):
        fidelity(a, other)


@pytest.fixture()
def analytic_if_state():
    """Separable ion-frame state chi(z_I) phi(r1) phi(r2) with Gaussian factors."""
    gi = make_grid(2.5, 64)
    gr = make_grid(4.0, 96)
    chi = np.exp(-gi.points**2 / (2 * 0.35**2))
    chi /= np.sqrt(np.sum(chi**2) * gi.dz)
    phi = np.exp(-(gr.points - 0.3) ** 2 / (2 * 0.2**2))
    phi /= np.sqrt(np.sum(phi**2) * gr.dz)
    vals = chi[:, None, None] * phi[None, :, None] * phi[None, None, :]
    return WaveFn("if", (gi, gr, gr), vals), chi, phi, gi, gr


def test_lab_densities_from_if(analytic_if_state):
    wf, chi, phi, gi, gr = analytic_if_state
    rho_a, rho_i = lab_densities_from_if(wf)
    assert abs(rho_i.integral() - 1.0) < 1e-6
    assert abs(rho_a.integral() - 1.0) < 1e-6
    assert np.max(np.abs(rho_i.density - chi**2)) < 1e-10
    # oracle: z_A density is the convolution of the ion and relative densities
    target = np.zeros(gr.n)
    for i, zi in enumerate(gi.points):
        target += chi[i] ** 2 * np.interp(gr.points - zi, gr.points, phi**2,
                                          left=0.0, right=0.0) * gi.dz
    assert np.max(np.abs(rho_a.density - target)) < 2e-2 * np.max(target)


def test_lab_densities_out_of_support(analytic_if_state):
    wf, chi, phi, gi, gr = analytic_if_state
    # push weight to the edge of the relative axis: deposits at z_I + r fall
    # outside and must raise
    vals = wf.values.copy()
    vals[:, -1, :] += 0.05 * np.max(vals)
    bad = WaveFn("if", (gi, gr, gr), vals)
    bad.values /= bad.norm()
    with pytest.raises(ValueError, match="outside"):
        lab_densities_from_if(bad)


def test_relative_density2_from_if(analytic_if_state):
    wf, chi, phi, gi, gr = analytic_if_state
    rho2 = relative_density2(wf)
    expect = np.outer(phi**2, phi**2)
    assert np.max(np.abs(rho2 - expect)) < 1e-10


def test_density1d_integral():
    g = make_grid(4.0, 64)
    d = Density1D(g.points.copy(), np.ones(g.n) / 8.0, g.dz, "atom")
    assert abs(d.integral() - 1.0) < 1e-12
