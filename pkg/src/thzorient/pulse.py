"""Analytic single-cycle THz pulse built from Hermite polynomials.

The field is

    E(t) = (E1/2) exp(-(t-t0)^2 / 2 sigma^2)
           * [-3 D3 H2((t-t0)/sigma) + D1 H0((t-t0)/sigma)]

with D_n = (2^n n! sqrt(pi))^(-1/2), H2(u) = 4u^2 - 2 and H0(u) = 1.
The duration parameter tau fixes sigma through 16 ln(2) sigma^2 = tau^2.
Changing tau only stretches the waveform in time; the amplitude enters
strictly linearly through E1.

Outside |t - t0| > support_half_width * sigma the field is clamped to
exactly zero, which gives the propagator a finite interaction window
(the Gaussian tail beyond 6 sigma is below 2e-8 of the peak).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

D1 = (2.0 * math.sqrt(math.pi)) ** -0.5
D3 = (48.0 * math.sqrt(math.pi)) ** -0.5


def sigma_from_tau(tau):
    """Width sigma (ps) from the duration parameter tau (ps)."""
    if tau <= 0.0:
        raise ValueError(f"pulse tau must be > 0, got {tau}")
    return tau / math.sqrt(16.0 * math.log(2.0))


@dataclass(frozen=True)
class PulseSpec:
    """Pulse parameters: amplitude E1 (kV/cm), duration tau (ps),
    center t0 (ps) and the hard support cutoff in units of sigma."""

    E1: float = 100.0
    tau: float = 1.0
    t0: float = 0.0
    support_half_width: float = 6.0

    def __post_init__(self):
        if self.tau <= 0.0:
            raise ValueError(f"pulse tau must be > 0, got {self.tau}")
        if self.support_half_width < 5.0:
            raise ValueError(
                f"support_half_width must be >= 5, got "
                f"{self.support_half_width}"
            )

    @property
    def sigma(self):
        """Derived width (ps); never stored independently."""
        return sigma_from_tau(self.tau)

    @property
    def support(self):
        """(start, end) of the nonzero field window, in ps."""
        half = self.support_half_width * self.sigma
        return (self.t0 - half, self.t0 + half)


def field_at(spec, t):
    """Field (kV/cm) at time t (ps, scalar or array)."""
    u = (np.asarray(t, dtype=float) - spec.t0) / spec.sigma
    envelope = np.exp(-0.5 * u * u)
    shape = -3.0 * D3 * (4.0 * u * u - 2.0) + D1
    out = 0.5 * spec.E1 * envelope * shape
    out = np.where(np.abs(u) > spec.support_half_width, 0.0, out)
    if np.ndim(t) == 0:
        return float(out)
    return out


def sample(spec, grid):
    """Field samples on a strictly increasing time grid (ps)."""
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty time grid")
    if grid.size > 1 and not np.all(np.diff(grid) > 0.0):
        raise ValueError("time grid must be strictly increasing")
    return field_at(spec, grid)


def peak_to_peak(spec, n=20001):
    """Peak-to-peak amplitude (kV/cm) on a dense internal grid."""
    lo, hi = spec.support
    values = field_at(spec, np.linspace(lo, hi, n))
    return float(values.max() - values.min())


def amplitude_for_peak_to_peak(target, tau=1.0, t0=0.0):
    """E1 that yields the requested peak-to-peak amplitude (kV/cm).

    The field is linear in E1, so one reference evaluation suffices.
    """
    if target <= 0.0:
        raise ValueError(f"target peak-to-peak must be > 0, got {target}")
    ref = peak_to_peak(PulseSpec(E1=1.0, tau=tau, t0=t0))
    return target / ref


def write_csv(spec, grid, path):
    """Export samples as two-column CSV (t_ps, field_kV_cm)."""
    values = sample(spec, grid)
    data = np.column_stack([np.asarray(grid, dtype=float), values])
    np.savetxt(path, data, delimiter=",", header="t_ps,field_kV_cm",
               comments="", fmt="%.17g")
