"""Model interactions: the atom-ion potential, traps, and the grid contact term.

Everything is expressed in the characteristic units E*, R* of the atom-ion
polarisation potential. The atom-ion interaction is a Gaussian barrier on top
of a regularised -1/r^4 tail,

    V_AI(r) = v0 exp(-gamma r^2) - 1 / (r^4 + 1/kappa),

which is finite everywhere and supports exactly two bound states for the
default parameters.
"""

from dataclasses import dataclass, replace

import numpy as np

from .grid import Grid1D


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of the model (paper units).

    kappa : short-range cutoff of the attractive tail, in R*^-4
    v0    : barrier height, in E*
    gamma : barrier width parameter, in R*^-2
    g     : atom-atom contact strength, in E*.R*
    beta  : mass ratio m_A/m_I (0 = pinned ion)
    eta   : trap frequency ratio omega_A/omega_I
    l_A   : atom oscillator length, in R*
    n_atoms : number of bosonic atoms
    """

    kappa: float = 80.0
    v0: float = 240.0
    gamma: float = 4.0 * np.sqrt(800.0)
    g: float = 0.0
    beta: float = 0.0
    eta: float = 1.0
    l_A: float = 0.5
    n_atoms: int = 2

    def __post_init__(self):
        if self.kappa <= 0 or self.v0 <= 0 or self.gamma <= 0 or self.l_A <= 0:
            raise ValueError("kappa, v0, gamma and l_A must all be positive")
        if self.n_atoms < 1:
            raise ValueError("need at least one atom")
        if self.g < 0:
            raise ValueError("attractive contact (g < 0) is out of scope")
        if self.beta < 0:
            raise ValueError("mass ratio beta must be non-negative")
        if self.beta > 0 and self.eta <= 0:
            raise ValueError("trap ratio eta must be positive for a mobile ion")

    @property
    def d(self) -> float:
        """Mass-ratio combination beta / (1 + N beta); always derived, never stored."""
        return self.beta / (1.0 + self.n_atoms * self.beta)

    def with_(self, **kw) -> "ModelParams":
        """Copy with selected fields replaced."""
        return replace(self, **kw)


def default_params() -> ModelParams:
    """Model parameters used throughout: kappa=80, v0=3*kappa, gamma=4*sqrt(10*kappa),
    l_A=0.5, eta=1, N=2, non-interacting atoms and a pinned ion."""
    return ModelParams()


def atom_ion_potential(r, p: ModelParams):
    """V_AI(r): Gaussian barrier plus regularised polarisation tail. Accepts scalars or arrays.

    Built from r^2 = square(r) so the evenness V(r) = V(-r) holds exactly in
    floating point.
    """
    r2 = np.square(np.asarray(r, dtype=float))
    v = p.v0 * np.exp(-p.gamma * r2) - 1.0 / (r2 * r2 + 1.0 / p.kappa)
    return v.item() if v.ndim == 0 else v


def contact_diagonal(grid: Grid1D, g: float) -> float:
    """Per-point coupling g/dz representing g*delta(r_i - r_j) on the product-grid diagonal.

    Lowest-order DVR contact: the delta distribution carries weight 1/dz on
    the single diagonal where r_i = r_j. Converges slowly in dz for strong
    coupling, which is why strongly interacting observables carry loose
    tolerances downstream.
    """
    if g < 0:
        raise ValueError("attractive contact (g < 0) is out of scope")
    return g / grid.dz


def trap_potential(z, l_A: float):
    """Harmonic trap z^2 / l_A^4 (the kinetic prefactor is 1 in these units)."""
    z = np.asarray(z, dtype=float)
    return z**2 / l_A**4
