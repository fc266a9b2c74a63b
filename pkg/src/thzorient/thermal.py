"""Thermal initial ensemble over |J,K,M> states.

The canonical density operator at temperature T is diagonal in the
field-free basis with Boltzmann weights exp(-E(J,K)/kT)/Z, the weight of
every state being independent of M.  Because the block operators are
invariant under the joint sign flip (K, M) -> (-K, -M), only K >= 0
members are enumerated, K > 0 members carrying multiplicity 2.

All Boltzmann arithmetic is done in cm^-1 (energies and k_B*T share the
unit, so no conversion enters the weights).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import units
from .rotor import BasisState, energy


class TruncationError(ValueError):
    """J_max too small for the requested temperature.

    ``required_j_max`` is the smallest basis size whose top-J shell
    contributes less than the tolerance, or None if the search cap was
    reached.
    """

    def __init__(self, message, required_j_max=None):
        super().__init__(message)
        self.required_j_max = required_j_max


@dataclass(frozen=True)
class EnsembleSpec:
    """Temperature (K), basis truncation and relative weight cutoff."""

    temperature: float = 298.0
    J_max: int = 90
    weight_cutoff: float = 1e-8

    def __post_init__(self):
        if self.temperature <= 0.0:
            raise ValueError(
                f"temperature must be > 0, got {self.temperature}"
            )
        if self.J_max < 0:
            raise ValueError(f"J_max must be >= 0, got {self.J_max}")
        if not 0.0 <= self.weight_cutoff < 1.0:
            raise ValueError(
                f"weight_cutoff must be in [0, 1), got {self.weight_cutoff}"
            )


@dataclass(frozen=True)
class EnsembleMember:
    """One initial basis state with its normalized Boltzmann weight.

    ``multiplicity`` counts the symmetry-folded copies this member
    stands for (2 for K > 0, else 1).
    """

    state: BasisState
    weight: float
    multiplicity: int


def _shell_sums(molecule, temperature, j_max):
    """Per-J sums (2J+1) * sum_K exp(-E/kT), J = 0..j_max."""
    kt = units.BOLTZMANN_WAVENUMBER * temperature
    shells = np.empty(j_max + 1)
    for j in range(j_max + 1):
        ks = np.arange(-j, j + 1)
        e = np.array([energy(molecule.constants, j, int(k)) for k in ks])
        shells[j] = (2 * j + 1) * np.exp(-e / kt).sum()
    return shells

# Default ceiling on the relative weight of the top-J shell.  The
# 298 K / J_max=90 working point leaves a relative tail near 1e-5, so a
# much tighter default would reject the standard configuration.
SHELL_TOLERANCE = 1e-4

_REQUIRED_J_SEARCH_CAP = 400


def _required_j_max(molecule, temperature, j_start, shells, tol):
    """Smallest J_max whose top shell drops below tol, or None."""
    kt = units.BOLTZMANN_WAVENUMBER * temperature
    z = shells.sum()
    j = j_start
    while j < _REQUIRED_J_SEARCH_CAP:
        j += 1
        ks = np.arange(-j, j + 1)
        e = np.array([energy(molecule.constants, j, int(k)) for k in ks])
        shell = (2 * j + 1) * np.exp(-e / kt).sum()
        z += shell
        if shell / z < tol:
            return j
    return None


def partition_function(molecule, spec, shell_tolerance=SHELL_TOLERANCE):
    """Partition function Z = sum over (J,K,M) of exp(-E(J,K)/kT).

    The M sum contributes a (2J+1) factor per (J,K).  Raises
    :class:`TruncationError` when the J = J_max shell carries more than
    ``shell_tolerance`` of Z, reporting the J_max that would suffice.
    """
    shells = _shell_sums(molecule, spec.temperature, spec.J_max)
    z = float(shells.sum())
    if spec.J_max > 0 and shells[-1] / z >= shell_tolerance:
        required = _required_j_max(
            molecule, spec.temperature, spec.J_max, shells, shell_tolerance
        )
        hint = (f"J_max >= {required}" if required is not None
                else f"J_max > {_REQUIRED_J_SEARCH_CAP}")
        raise TruncationError(
            f"J_max={spec.J_max} truncates the thermal ensemble at "
            f"T={spec.temperature} K: top shell carries "
            f"{shells[-1] / z:.3e} of Z (tolerance {shell_tolerance:g}); "
            f"need {hint}",
            required_j_max=required,
        )
    return z


def enumerate_members(molecule, spec, shell_tolerance=SHELL_TOLERANCE):
    """Enumerate ensemble members above the relative weight cutoff.

    Only K >= 0 states are emitted (multiplicity 2 for K > 0); weights
    are renormalized after the cutoff so that
    sum(weight * multiplicity) == 1.
    """
    z = partition_function(molecule, spec, shell_tolerance)
    kt = units.BOLTZMANN_WAVENUMBER * spec.temperature
    # max weight is the ground state's; cutoff relative to it
    threshold = spec.weight_cutoff * (1.0 / z)
    members = []
    total = 0.0
    for j in range(spec.J_max + 1):
        for k in range(0, j + 1):
            w = math.exp(-energy(molecule.constants, j, k) / kt) / z
            if w < threshold:
                continue
            mult = 2 if k > 0 else 1
            for m in range(-j, j + 1):
                members.append(
                    EnsembleMember(BasisState(j, k, m), w, mult)
                )
                total += w * mult
    members = [
        EnsembleMember(m.state, m.weight / total, m.multiplicity)
        for m in members
    ]
    return members


def write_csv(members, path):
    """Dump the ensemble table as CSV (J,K,M,weight,multiplicity)."""
    with open(path, "w") as fh:
        fh.write("J,K,M,weight,multiplicity\n")
        for m in members:
            fh.write(
                f"{m.state.J},{m.state.K},{m.state.M},"
                f"{m.weight:.17g},{m.multiplicity}\n"
            )
