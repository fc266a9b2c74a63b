"""Prolate symmetric-top spectroscopy in the |J,K,M> basis.

Field-free rotational energies with centrifugal distortion, and the
matrix elements of the direction cosine cos(theta) between the molecular
axis and the lab polarization axis.  A linearly polarized field conserves
both K and M, so the full problem decomposes into independent (K, M)
blocks in which the Hamiltonian and cos(theta) are real symmetric
tridiagonal in J.  :func:`build_block` materializes one such block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import units


@dataclass(frozen=True)
class RotorConstants:
    """Rotational and centrifugal constants, all in cm^-1.

    Defaults are the CH3I ground-state values used throughout the
    package.  The prolate convention A_e > B_e is enforced.
    """

    B_e: float = 0.25098
    A_e: float = 5.173949
    D_J: float = 2.1040012e-7
    D_JK: float = 3.2944780e-6
    D_K: float = 8.7632195e-5

    def __post_init__(self):
        if self.B_e <= 0.0 or self.A_e <= 0.0:
            raise ValueError("rotational constants B_e and A_e must be > 0")
        if self.A_e <= self.B_e:
            raise ValueError("prolate top requires A_e > B_e")


@dataclass(frozen=True)
class MoleculeSpec:
    """A molecule: rotational constants plus permanent dipole (debye)."""

    constants: RotorConstants = field(default_factory=RotorConstants)
    dipole_mu0: float = 1.6406

    def __post_init__(self):
        if self.dipole_mu0 <= 0.0:
            raise ValueError("dipole_mu0 must be > 0")


CH3I = MoleculeSpec()


@dataclass(frozen=True, order=True)
class BasisState:
    """One |J,K,M> label."""

    J: int
    K: int
    M: int

    def __post_init__(self):
        if self.J < 0:
            raise ValueError(f"J must be >= 0, got {self.J}")
        if abs(self.K) > self.J or abs(self.M) > self.J:
            raise ValueError(
                f"|K| and |M| must not exceed J, got (J={self.J}, "
                f"K={self.K}, M={self.M})"
            )


def energy(constants, J, K):
    """Field-free energy E(J, K) in cm^-1.

    B_e J(J+1) + (A_e - B_e) K^2 - D_J J^2(J+1)^2 - D_JK J(J+1) K^2
    - D_K K^4.  Even in K.
    """
    if abs(K) > J:
        raise ValueError(f"|K| must not exceed J, got (J={J}, K={K})")
    jj = J * (J + 1)
    k2 = K * K
    c = constants
    return (
        c.B_e * jj
        + (c.A_e - c.B_e) * k2
        - c.D_J * jj * jj
        - c.D_JK * jj * k2
        - c.D_K * k2 * k2
    )


def _check_jkm(J, K, M):
    if J < 0 or abs(K) > J or abs(M) > J:
        raise ValueError(f"invalid basis labels (J={J}, K={K}, M={M})")


def cos_theta_coupling(J, K, M):
    """<J+1,K,M| cos(theta) |J,K,M>.

    sqrt(((J+1)^2 - K^2) ((J+1)^2 - M^2)) / ((J+1) sqrt((2J+1)(2J+3))).
    Non-negative, even under K -> -K and M -> -M.
    """
    _check_jkm(J, K, M)
    jp = J + 1
    num = (jp * jp - K * K) * (jp * jp - M * M)
    return math.sqrt(num) / (jp * math.sqrt((2 * J + 1) * (2 * J + 3)))


def cos_theta_diagonal(J, K, M):
    """<J,K,M| cos(theta) |J,K,M> = K M / (J (J+1)); zero for J = 0.

    Antisymmetric under K -> -K and under M -> -M separately.
    """
    _check_jkm(J, K, M)
    if J == 0:
        return 0.0
    return (K * M) / (J * (J + 1))


@dataclass(frozen=True)
class BlockOperators:
    """H0 and cos(theta) restricted to one fixed-(K, M) block.

    The block spans J = j_min .. j_max with j_min = max(|K|, |M|).
    ``energies`` is the H0 diagonal in atomic units, ``coupling`` the
    super/sub-diagonal of cos(theta) (length dim-1) and ``diagonal`` its
    diagonal.  Arrays are read-only; blocks are safe to share.
    """

    K: int
    M: int
    j_min: int
    j_max: int
    energies: np.ndarray
    coupling: np.ndarray
    diagonal: np.ndarray

    @property
    def dim(self):
        return self.j_max - self.j_min + 1

    def j_index(self, J):
        """Row index of angular momentum J within the block."""
        if not self.j_min <= J <= self.j_max:
            raise ValueError(f"J={J} outside block range "
                             f"[{self.j_min}, {self.j_max}]")
        return J - self.j_min


def build_block(molecule, K, M, J_max):
    """Build the (K, M) block operators up to J_max (inclusive).

    Energies are evaluated in cm^-1 and converted once to atomic units.
    """
    j_min = max(abs(K), abs(M))
    if J_max < j_min:
        raise ValueError(
            f"J_max={J_max} smaller than max(|K|,|M|)={j_min}"
        )
    js = np.arange(j_min, J_max + 1, dtype=np.float64)
    jj = js * (js + 1.0)
    k2 = float(K * K)
    c = molecule.constants
    e_cm = (c.B_e * jj + (c.A_e - c.B_e) * k2 - c.D_J * jj * jj
            - c.D_JK * jj * k2 - c.D_K * k2 * k2)
    energies = units.to_atomic(e_cm, "energy_wavenumber")
    jp = js[:-1] + 1.0
    coupling = (np.sqrt((jp * jp - K * K) * (jp * jp - M * M))
                / (jp * np.sqrt((2.0 * js[:-1] + 1.0)
                                * (2.0 * js[:-1] + 3.0))))
    with np.errstate(divide="ignore", invalid="ignore"):
        diagonal = np.where(jj > 0.0, (K * M) / jj, 0.0)
    for arr in (energies, coupling, diagonal):
        arr.setflags(write=False)
    return BlockOperators(
        K=K, M=M, j_min=j_min, j_max=J_max,
        energies=energies, coupling=coupling, diagonal=diagonal,
    )
