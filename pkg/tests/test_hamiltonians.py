import numpy as np
import pytest

from atomion.eigensolve import lowest_eigenstates, sector_project, solve_1d
from atomion.grid import grid_norm, make_grid
from atomion.hamiltonians import (TermFlags, build_cm_oscillator, build_coupled_cmf,
                                  build_h1b, build_if_hamiltonian,
                                  build_relative_cmf, build_smf_atom_pair,
                                  cm_solution)
from atomion.potentials import default_params


def _rand(op, seed=0):
    rng = np.random.default_rng(seed)
    f = rng.standard_normal(op.shape)
    return f / grid_norm(op.dvol, f)


def _hermiticity_defect(op, seed=0):
    rng = np.random.default_rng(seed)
    f = rng.standard_normal(op.shape)
    h = rng.standard_normal(op.shape)
    f /= grid_norm(op.dvol, f)
    h /= grid_norm(op.dvol, h)
    return abs(float(np.sum(h * op.apply(f)) - np.sum(op.apply(h) * f)) * op.dvol)


def test_h1b_oscillator_limit():
    g = make_grid(4.0, 512)
    op = build_h1b(g, default_params(), TermFlags(atom_ion=False))
    w, _ = solve_1d(op)
    expect = np.array([4.0, 12.0, 20.0, 28.0])
    assert np.max(np.abs(w[:4] - expect) / expect) < 1e-8


def test_h1b_two_bound_states():
    g = make_grid(4.0, 512)
    w, v = solve_1d(build_h1b(g, default_params()))
    assert int(np.sum(w < 0)) == 2
    # molecular-orbital density peaks sit at the paper's +-0.3 window
    for i in (0, 1):
        peak = abs(g.points[np.argmax(v[:, i] ** 2)])
        assert 0.25 <= peak <= 0.35


def test_hermiticity_all_builders():
    p1 = default_params().with_(g=3.0, beta=1.0)
    g64 = make_grid(4.0, 64)
    g32 = make_grid(2.5, 32)
    ops = [
        build_h1b(g64, default_params()),
        build_relative_cmf(g64, p1),
        build_smf_atom_pair(g64, p1),
        build_if_hamiltonian(g32, g64, p1),
        build_cm_oscillator(g64, p1),
        build_coupled_cmf(g32, g64, p1.with_(eta=2.0)),
    ]
    for op in ops:
        assert _hermiticity_defect(op) < 1e-10, op.frame


def test_exchange_and_parity_commutators():
    p = default_params().with_(g=3.0, beta=1.0)
    g64 = make_grid(4.0, 64)
    op = build_relative_cmf(g64, p)
    f = _rand(op)
    swap = np.swapaxes(f, 0, 1)
    defect = grid_norm(op.dvol, op.apply(swap) - np.swapaxes(op.apply(f), 0, 1))
    assert defect < 1e-10
    for parity in (+1, -1):
        fp = sector_project(f, (0, 1), parity)
        hp = op.apply(fp)
        assert grid_norm(op.dvol, sector_project(hp, (0, 1), parity) - hp) < 1e-10


def test_if_commutators():
    p = default_params().with_(g=2.0, beta=1.0)
    op = build_if_hamiltonian(make_grid(2.5, 32), make_grid(4.0, 48), p)
    f = _rand(op)
    swap = np.swapaxes(f, 1, 2)
    defect = grid_norm(op.dvol, op.apply(swap) - np.swapaxes(op.apply(f), 1, 2))
    assert defect < 1e-10
    fp = sector_project(f, (1, 2), +1)
    hp = op.apply(fp)
    assert grid_norm(op.dvol, sector_project(hp, (1, 2), +1) - hp) < 1e-10


def test_static_ion_has_no_couplings():
    p = default_params().with_(g=1.0, beta=0.0)
    g64 = make_grid(4.0, 64)
    op = build_relative_cmf(g64, p)
    off = build_relative_cmf(g64, p, TermFlags(derivative_coupling=False,
                                               positional_coupling=False))
    assert np.array_equal(op.ksym, off.ksym)
    assert np.array_equal(op.vdiag, off.vdiag)


def test_separable_limit_small_grid():
    p = default_params()
    g = make_grid(4.0, 256)
    w1, _ = solve_1d(build_h1b(g, p))
    record, states = lowest_eigenstates(build_relative_cmf(g, p), k=5, tol=1e-9)
    expect = np.sort([2 * w1[0], w1[0] + w1[1], 2 * w1[1], w1[0] + w1[2], w1[0] + w1[3]])
    assert np.max(np.abs(record.eigenvalues - expect)) < 1e-8
    assert record.parities == [1, -1, 1, 1, -1]


def test_relative_cmf_rejects_coupled_cm():
    p = default_params().with_(beta=1.0, eta=2.0)
    with pytest.raises(ValueError, match="coupled CM not supported"):
        build_relative_cmf(make_grid(4.0, 64), p)


def test_if_requires_mobile_ion():
    with pytest.raises(ValueError, match="mobile"):
        build_if_hamiltonian(make_grid(2.5, 32), make_grid(4.0, 48), default_params())


def test_beta_continuity():
    p = default_params()
    g = make_grid(4.0, 256)
    rec0, _ = lowest_eigenstates(build_relative_cmf(g, p), k=5, tol=1e-9)
    rec_eps, _ = lowest_eigenstates(build_relative_cmf(g, p.with_(beta=1e-4)), k=5, tol=1e-9)
    assert np.max(np.abs(rec_eps.eigenvalues - rec0.eigenvalues)) < 1e-2


def test_cm_solution_values():
    p = default_params().with_(beta=1.0)
    cm = cm_solution(p)
    assert cm.omega == 8.0
    assert cm.energy == 4.0
    assert abs(cm.mean_R2 - 1.0 / 24.0) < 1e-15
    assert abs(cm.mean_d2R - 6.0) < 1e-12
    # virial split: potential and kinetic each carry half of E_R
    pot = cm.mean_R2 / (p.d * p.l_A**4)
    kin = p.d * cm.mean_d2R
    assert abs(pot + kin - cm.energy) < 1e-12
    assert abs(pot - kin) < 1e-12


def test_cm_solution_vs_grid_diagonalisation():
    p = default_params().with_(beta=1.0)
    cm = cm_solution(p)
    g = make_grid(2.0, 256)
    w, v = solve_1d(build_cm_oscillator(g, p))
    assert abs(w[0] - cm.energy) < 1e-10
    phi = v[:, 0]
    mean_r2 = float(np.sum(phi**2 * g.points**2) * g.dz)
    assert abs(mean_r2 - cm.mean_R2) < 1e-10
    from atomion.grid import second_derivative
    mean_d2 = -float(np.sum(phi * second_derivative(g, phi)) * g.dz)
    assert abs(mean_d2 - cm.mean_d2R) < 1e-8


def test_cm_solution_rejects_pinned_ion():
    with pytest.raises(ValueError, match="pinned"):
        cm_solution(default_params())


def test_coupled_cmf_decouples_at_equal_traps():
    # at eta=1 the R rows reduce to the analytic oscillator stacked on the
    # relative operator: check on a separable product
    p = default_params().with_(beta=1.0)
    gR = make_grid(2.0, 32)
    gr = make_grid(4.0, 48)
    op3 = build_coupled_cmf(gR, gr, p)
    op2 = build_relative_cmf(gr, p)
    opR = build_cm_oscillator(gR, p)
    rng = np.random.default_rng(2)
    chi = rng.standard_normal(gR.n)
    psi = rng.standard_normal((gr.n, gr.n))
    prod = chi[:, None, None] * psi[None, :, :]
    expect = (opR.apply(chi)[:, None, None] * psi[None, :, :]
              + chi[:, None, None] * op2.apply(psi)[None, :, :])
    assert grid_norm(op3.dvol, op3.apply(prod) - expect) < 1e-9
