"""Symmetry-projected eigensolvers for the 1D, 2D and 3D operators.

The 1D problems are diagonalised densely. The 2D relative problem uses a
preconditioned block solver (LOBPCG with an inverse-kinetic FFT
preconditioner) restricted to the bosonic exchange-symmetric subspace, run
once per parity sector and merged. The 3D ion-frame ground state is obtained
by split-step imaginary-time relaxation followed by a Lanczos (ARPACK)
polish seeded with the relaxed state. All seeds are fixed so repeated runs
are bit-reproducible.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft
from scipy.sparse.linalg import LinearOperator, eigsh, lobpcg

from .grid import Grid1D, dense_second_derivative, grid_norm
from .hamiltonians import OperatorSpec, cm_solution
from .potentials import ModelParams

#: eigenvalue spacing below which states are reported as a degenerate cluster
DEGENERACY_TOL = 1e-9

#: penalty pushing the non-symmetric complement far above the physical window
_SECTOR_PENALTY = 1e7


class ConvergenceError(RuntimeError):
    """Raised when an iterative solve misses its residual target; carries diagnostics."""

    def __init__(self, message, residuals=None, history=None):
        super().__init__(message)
        self.residuals = residuals
        self.history = history


@dataclass
class WaveFn:
    """A real stationary-state amplitude array on a tensor-product grid.

    Normalised to 1 under rectangle quadrature; the global phase is fixed by
    making the largest-magnitude amplitude positive. `exchange` is +1 for
    bosonic states; `parity` is the total-inversion eigenvalue (None when the
    state is not an inversion eigenstate).
    """

    frame: str
    grids: tuple[Grid1D, ...]
    values: np.ndarray
    exchange: int = +1
    parity: int | None = None
    energy: float | None = None

    @property
    def dvol(self) -> float:
        out = 1.0
        for g in self.grids:
            out *= g.dz
        return out

    def norm(self) -> float:
        return grid_norm(self.dvol, self.values)

    def normalize(self) -> "WaveFn":
        nrm = self.norm()
        if nrm < 1e-14:
            raise ValueError("cannot normalise a zero-norm wavefunction")
        self.values = self.values / nrm
        _fix_phase(self.values)
        return self

    def density(self) -> np.ndarray:
        return self.values**2


@dataclass
class SpectrumRecord:
    """Eigenvalues and solver diagnostics for one (g, beta) point."""

    params: ModelParams
    eigenvalues: np.ndarray          # ascending, relative-frame energies in E*
    parities: list[int]
    residuals: np.ndarray
    iterations: list[int]
    grid_meta: dict = field(default_factory=dict)

    @property
    def cm_energy(self) -> float:
        """Ground-state CM offset E_R (zero for a pinned ion)."""
        return cm_solution(self.params).energy if self.params.beta > 0 else 0.0

    @property
    def total_energies(self) -> np.ndarray:
        """Laboratory-frame total energies: relative eigenvalue plus E_R."""
        return self.eigenvalues + self.cm_energy

    def degenerate_clusters(self) -> list[list[int]]:
        clusters, current = [], [0]
        for i in range(1, len(self.eigenvalues)):
            if self.eigenvalues[i] - self.eigenvalues[i - 1] < DEGENERACY_TOL:
                current.append(i)
            else:
                clusters.append(current)
                current = [i]
        clusters.append(current)
        return clusters

    def to_dict(self) -> dict:
        return {
            "g": self.params.g,
            "beta": self.params.beta,
            "eigenvalues": [float(e) for e in self.eigenvalues],
            "total_energies": [float(e) for e in self.total_energies],
            "parities": list(self.parities),
            "residuals": [float(r) for r in self.residuals],
            "iterations": list(self.iterations),
            "grid": self.grid_meta,
        }


def _fix_phase(values: np.ndarray):
    """Make the largest-magnitude amplitude positive (in place)."""
    idx = np.argmax(np.abs(values))
    if values.flat[idx] < 0:
        np.negative(values, out=values)


def _flip_all(arr: np.ndarray) -> np.ndarray:
    """Total inversion on the periodic grid: z_k -> z_{(n-k) mod n} on every axis."""
    out = arr[(slice(None, None, -1),) * arr.ndim]
    for ax in range(arr.ndim):
        out = np.roll(out, 1, axis=ax)
    return out


def exchange_symmetrize(arr: np.ndarray, axes: tuple[int, int]) -> np.ndarray:
    """(arr + P_12 arr)/2 where P_12 swaps the two identical-atom axes."""
    return 0.5 * (arr + np.swapaxes(arr, *axes))


def sector_project(arr: np.ndarray, axes: tuple[int, int], parity: int) -> np.ndarray:
    """Bosonic exchange symmetrisation combined with a total-parity projection."""
    s = arr + np.swapaxes(arr, *axes)
    return 0.25 * (s + parity * _flip_all(s))


def exchange_project(psi: WaveFn) -> WaveFn:
    """Project a wavefunction onto the exchange-symmetric (bosonic) subspace."""
    axes = _atom_axes(psi.frame, psi.values.ndim)
    sym = exchange_symmetrize(psi.values, axes)
    nrm = grid_norm(psi.dvol, sym)
    if nrm < 1e-12 * max(psi.norm(), 1e-300):
        raise ValueError("input is antisymmetric: exchange projection has zero norm")
    out = WaveFn(psi.frame, psi.grids, sym / nrm, exchange=+1, parity=psi.parity)
    _fix_phase(out.values)
    return out


def _atom_axes(frame: str, ndim: int) -> tuple[int, int]:
    if frame in ("cmf-relative", "if-atoms"):
        return (0, 1)
    if frame in ("if", "cmf-coupled"):
        return (1, 2)
    raise ValueError(f"frame {frame!r} has no pair of identical atom axes")


# ---------------------------------------------------------------------------
# 1D dense diagonalisation

def solve_1d(op: OperatorSpec, k: int | None = None):
    """Dense diagonalisation of a 1-DOF operator.

    Returns (eigenvalues, orbitals) with orbitals in columns, orthonormal
    under grid quadrature and phase-fixed. `k` limits the returned count.
    """
    if op.ndof != 1:
        raise ValueError(f"solve_1d needs a 1D operator, got {op.ndof} DOF")
    grid = op.grids[0]
    h = -dense_second_derivative(grid)
    if op.frame == "cm":
        h *= op.params.d
    w, v = np.linalg.eigh(h + np.diag(op.vdiag))
    v = v / np.sqrt(grid.dz)
    for j in range(v.shape[1]):
        _fix_phase(v[:, j])
    if k is not None:
        w, v = w[:k], v[:, :k]
    return w, v


# ---------------------------------------------------------------------------
# 2D sector solver

def _seed_block(op: OperatorSpec, parity: int, m: int, seed: int) -> np.ndarray:
    """Deterministic start block: symmetry-projected Gaussians times low-order
    polynomials, plus a small seeded perturbation."""
    rng = np.random.default_rng(seed)
    n = op.grids[0].n
    z1 = op.grids[0].points[:, None]
    z2 = op.grids[1].points[None, :]
    gau = np.exp(-2.0 * (z1**2 + z2**2))
    even_pows = [(0, 0), (1, 1), (2, 0), (2, 2), (3, 1), (0, 2), (4, 0), (1, 3), (4, 2), (3, 3)]
    odd_pows = [(1, 0), (0, 1), (2, 1), (1, 2), (3, 0), (0, 3), (3, 2), (2, 3), (4, 1), (5, 0)]
    pows = even_pows if parity == +1 else odd_pows
    cols = []
    for (p1, p2) in pows[:m]:
        f = gau * (z1**p1 * z2**p2 + 0.01 * rng.standard_normal((n, n)))
        cols.append(sector_project(f, (0, 1), parity).ravel())
    X, _ = np.linalg.qr(np.array(cols).T)
    return X


def _solve_sector(op: OperatorSpec, parity: int, k: int, tol: float, maxiter: int,
                  seed: int, x0: np.ndarray | None = None, prec_shift: float = 64.0,
                  block_extra: int = 2):
    """k lowest states of one parity sector of the bosonic subspace (2-DOF operator)."""
    n = op.grids[0].n
    npts = n * n
    m = k + block_extra
    axes = (0, 1)
    kpre = 1.0 / (op.ksym + prec_shift)

    def amat(X):
        out = np.empty_like(X)
        for j in range(X.shape[1]):
            xm = X[:, j].reshape(n, n)
            p = sector_project(xm, axes, parity)
            o = sector_project(op.apply(p), axes, parity)
            o += _SECTOR_PENALTY * (xm - p)
            out[:, j] = o.ravel()
        return out

    def pmat(X):
        out = np.empty_like(X)
        for j in range(X.shape[1]):
            o = sfft.irfft2(kpre * sfft.rfft2(X[:, j].reshape(n, n)), s=(n, n))
            out[:, j] = sector_project(o, axes, parity).ravel()
        return out

    A = LinearOperator((npts, npts), matvec=lambda x: amat(x.reshape(-1, 1)).ravel(),
                       matmat=amat, dtype=float)
    M = LinearOperator((npts, npts), matvec=lambda x: pmat(x.reshape(-1, 1)).ravel(),
                       matmat=pmat, dtype=float)

    X = _seed_block(op, parity, m, seed)
    if x0 is not None:
        ncarry = min(x0.shape[1], m)
        X[:, :ncarry] = x0[:, :ncarry]
        X, _ = np.linalg.qr(X)

    w = v = None
    rounds = 0
    res = np.full(k, np.inf)
    for rounds in range(1, 7):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # lobpcg warns when maxiter is hit
            w, v = lobpcg(A, X, M=M, tol=0.25 * tol, maxiter=maxiter, largest=False)
        order = np.argsort(w)
        w, v = w[order], v[:, order]
        res = _sector_residuals(op, v, parity, k)
        if np.max(res) < tol:
            break
        X = v
    vecs, energies, resid = [], [], []
    for i in range(k):
        psi = sector_project(v[:, i].reshape(n, n), axes, parity)
        psi /= grid_norm(op.dvol, psi)
        _fix_phase(psi)
        hpsi = op.apply(psi)
        e = float(np.sum(psi * hpsi) * op.dvol)
        vecs.append(psi)
        energies.append(e)
        resid.append(grid_norm(op.dvol, hpsi - e * psi))
    if max(resid) >= tol:
        raise ConvergenceError(
            f"sector parity={parity:+d} not converged after {rounds} rounds: "
            f"residuals {np.array2string(np.asarray(resid), precision=2)} (target {tol:g})",
            residuals=resid)
    return np.array(energies), vecs, np.array(resid), rounds


def lowest_eigenstates(op: OperatorSpec, k: int = 5, tol: float = 1e-8,
                       maxiter: int = 150, seed: int = 20230817,
                       sectors: tuple[int, ...] = (+1, -1),
                       warm_start: dict | None = None):
    """The k lowest bosonic eigenstates of a two-atom operator, merged over
    the requested parity sectors.

    Returns (SpectrumRecord, [WaveFn]). Each sector is solved for k states,
    so the merged list is complete however the sectors interleave.
    `warm_start` may map parity (+1/-1) to a (npts, m) block of start vectors
    from a neighbouring parameter point.
    """
    if op.ndof != 2:
        raise ValueError("lowest_eigenstates needs a two-atom (2-DOF) operator")
    if not 1 <= k <= 8:
        raise ValueError("k must be between 1 and 8")
    merged = []
    iterations = []
    for parity in sectors:
        x0 = warm_start.get(parity) if warm_start else None
        w, vecs, res, rounds = _solve_sector(op, parity, k, tol, maxiter, seed, x0=x0)
        iterations.append(rounds)
        for i in range(k):
            merged.append((w[i], parity, res[i], vecs[i]))
    merged.sort(key=lambda t: t[0])
    merged = merged[:k]
    record = SpectrumRecord(
        params=op.params,
        eigenvalues=np.array([t[0] for t in merged]),
        parities=[t[1] for t in merged],
        residuals=np.array([t[2] for t in merged]),
        iterations=iterations,
        grid_meta={"frame": op.frame, "extent": op.grids[0].extent, "n": op.grids[0].n},
    )
    wavefns = [
        WaveFn(op.frame, op.grids, t[3], exchange=+1, parity=t[1], energy=float(t[0]))
        for t in merged
    ]
    return record, wavefns


# ---------------------------------------------------------------------------
# 3D ion-frame ground state

@dataclass
class Ground3DResult:
    wavefn: WaveFn
    energy: float
    residual: float
    energy_history: list[float]
    matvecs: int


def _itp_stage(op: OperatorSpec, psi: np.ndarray, tau: float, steps: int,
               parity: int, project_every: int = 50):
    """Strang-split imaginary-time propagation with renormalisation."""
    axes = _atom_axes(op.frame, psi.ndim)
    exp_v = np.exp(-0.5 * tau * op.vdiag)
    exp_k = np.exp(-tau * op.ksym)
    for i in range(steps):
        psi *= exp_v
        psi = sfft.irfftn(exp_k * sfft.rfftn(psi), s=op.shape)
        psi *= exp_v
        if i % project_every == 0:
            psi = sector_project(psi, axes, parity)
        psi /= grid_norm(op.dvol, psi)
    psi = sector_project(psi, axes, parity)
    psi /= grid_norm(op.dvol, psi)
    return psi


def ground_state_3d(op: OperatorSpec, tol: float = 1e-7,
                    schedule: tuple = ((2e-3, 800), (5e-4, 400)),
                    seed: int = 20230817, ncv: int = 36,
                    polish_maxiter: int = 4000) -> Ground3DResult:
    """Ground state of the 3-DOF ion-frame operator.

    Imaginary-time relaxation (energy-monotone within each fixed-step stage)
    produces a seed that a short implicitly-restarted Lanczos run refines to
    the residual target. The state is confined to the exchange-symmetric,
    even-parity sector throughout.
    """
    if op.ndof != 3:
        raise ValueError("ground_state_3d needs the 3-DOF ion-frame operator")
    parity = +1
    axes = _atom_axes(op.frame, 3)
    rng = np.random.default_rng(seed)
    zi = op.grids[0].points[:, None, None]
    z1 = op.grids[1].points[None, :, None]
    z2 = op.grids[2].points[None, None, :]
    psi = np.exp(-2.0 * zi**2 - (z1**2 + z2**2))
    psi += 0.01 * rng.standard_normal(op.shape) * np.exp(-(zi**2 + z1**2 + z2**2))
    psi = sector_project(psi, axes, parity)
    psi /= grid_norm(op.dvol, psi)

    history = [op.expectation(psi)]
    for tau, steps in schedule:
        record_every = max(1, steps // 8)
        done = 0
        while done < steps:
            chunk = min(record_every, steps - done)
            psi = _itp_stage(op, psi, tau, chunk, parity)
            done += chunk
            history.append(op.expectation(psi))

    npts = psi.size

    def mv(x):
        xm = x.reshape(op.shape)
        p = sector_project(xm, axes, parity)
        out = sector_project(op.apply(p), axes, parity)
        out += _SECTOR_PENALTY * (xm - p)
        return out.ravel()

    nmv = [0]

    def mv_counted(x):
        nmv[0] += 1
        return mv(x)

    A = LinearOperator((npts, npts), matvec=mv_counted, dtype=float)
    try:
        w, v = eigsh(A, k=1, which="SA", v0=psi.ravel(), ncv=ncv,
                     tol=1e-11, maxiter=polish_maxiter)
    except Exception as exc:  # ArpackNoConvergence and friends
        raise ConvergenceError(
            f"3D Lanczos polish failed after imaginary-time relaxation: {exc}",
            history=history) from exc
    psi = sector_project(v[:, 0].reshape(op.shape), axes, parity)
    psi /= grid_norm(op.dvol, psi)
    _fix_phase(psi)
    hpsi = op.apply(psi)
    energy = float(np.sum(psi * hpsi) * op.dvol)
    residual = grid_norm(op.dvol, hpsi - energy * psi)
    history.append(energy)
    if residual >= tol:
        raise ConvergenceError(
            f"3D ground state residual {residual:.2e} misses target {tol:g}",
            residuals=[residual], history=history)
    wavefn = WaveFn(op.frame, op.grids, psi, exchange=+1, parity=parity, energy=energy)
    return Ground3DResult(wavefn, energy, residual, history, nmv[0])


def _sector_residuals(op: OperatorSpec, v: np.ndarray, parity: int, k: int) -> np.ndarray:
    n = op.grids[0].n
    res = np.empty(k)
    for i in range(k):
        psi = sector_project(v[:, i].reshape(n, n), (0, 1), parity)
        psi /= grid_norm(op.dvol, psi)
        hpsi = op.apply(psi)
        e = float(np.sum(psi * hpsi) * op.dvol)
        res[i] = grid_norm(op.dvol, hpsi - e * psi)
    return res
