"""Physical constants and unit conversions.

Single authority for every conversion used in the package: all other
modules compute in atomic units and convert at the boundary.  Constants
are CODATA-2018 literals, frozen here on purpose (no scipy.constants
import, so results cannot drift with the installed CODATA table).

Supported quantity kinds for :func:`to_atomic` / :func:`from_atomic`:

    energy_wavenumber   cm^-1            <-> hartree
    time_ps             picoseconds      <-> atomic time units
    field_kV_per_cm     kV/cm            <-> atomic field units
    dipole_debye        debye            <-> e*a0
    temperature_K       kelvin           <-> k_B*T in hartree
"""

from __future__ import annotations

from dataclasses import dataclass

# CODATA-2018 literals
SPEED_OF_LIGHT_CM_S = 2.99792458e10        # cm/s (exact)
PLANCK_J_S = 6.62607015e-34                # J s (exact)
BOLTZMANN_J_K = 1.380649e-23               # J/K (exact)
AU_TIME_S = 2.4188843265857e-17            # s per atomic time unit
AU_FIELD_V_CM = 5.14220674763e9            # V/cm per atomic field unit
AU_DIPOLE_C_M = 8.4783536255e-30           # C m per e*a0
WAVENUMBER_PER_HARTREE = 2.1947463136320e5 # cm^-1 per hartree
ATM_PER_BAR = 1.0 / 1.01325                # exact definition of the atm

# debye in C m: 1 D = 1e-21 / c[m/s] C m
DEBYE_C_M = 1.0e-21 / 2.99792458e8
DEBYE_PER_AU = AU_DIPOLE_C_M / DEBYE_C_M

# k_B/(h c) in cm^-1 per kelvin
BOLTZMANN_WAVENUMBER = BOLTZMANN_J_K / (PLANCK_J_S * SPEED_OF_LIGHT_CM_S)


@dataclass(frozen=True)
class PhysicalConstants:
    """Immutable bundle of the conversion constants."""

    speed_of_light: float = SPEED_OF_LIGHT_CM_S      # cm/s
    boltzmann_wavenumber: float = BOLTZMANN_WAVENUMBER  # cm^-1 / K
    au_time: float = AU_TIME_S                       # s per atomic time unit
    au_field: float = AU_FIELD_V_CM                  # V/cm per atomic field unit
    debye_per_au: float = DEBYE_PER_AU
    wavenumber_per_hartree: float = WAVENUMBER_PER_HARTREE
    atm_per_bar: float = ATM_PER_BAR

    def __post_init__(self):
        for name, value in vars(self).items():
            if not value > 0.0:
                raise ValueError(f"constant {name} must be > 0, got {value}")


CODATA2018 = PhysicalConstants()

# atomic units per unit of each supported kind
_AU_PER_UNIT = {
    "energy_wavenumber": 1.0 / CODATA2018.wavenumber_per_hartree,
    "time_ps": 1.0e-12 / CODATA2018.au_time,
    "field_kV_per_cm": 1.0e3 / CODATA2018.au_field,
    "dipole_debye": 1.0 / CODATA2018.debye_per_au,
    # k_B*T: kelvin -> cm^-1 -> hartree
    "temperature_K": CODATA2018.boltzmann_wavenumber
    / CODATA2018.wavenumber_per_hartree,
}

QUANTITY_KINDS = frozenset(_AU_PER_UNIT)


def _factor(kind):
    try:
        return _AU_PER_UNIT[kind]
    except KeyError:
        raise ValueError(
            f"unsupported quantity kind {kind!r}; "
            f"expected one of {sorted(_AU_PER_UNIT)}"
        ) from None


def to_atomic(value, kind):
    """Convert ``value`` of the given quantity kind to atomic units.

    ``temperature_K`` returns the thermal energy k_B*T in hartree.
    """
    return value * _factor(kind)


def from_atomic(value, kind):
    """Exact inverse of :func:`to_atomic` for the same kind."""
    return value / _factor(kind)
