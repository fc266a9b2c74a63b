"""Free-induction-decay field emitted by the transiently oriented gas.

At first order in optical depth the field after the sample is the
incident pulse minus a term proportional to the time derivative of the
degree of orientation:

    E(t) = E0(t) - alpha * d<cos theta>/dt

with alpha a positive scalar absorbing propagation depth and number
density (and, for comparisons against detector traces, the detection
scale).  :func:`spectral_derivative_check` validates the Fourier
identity behind that derivative form on an actual trace, and
:func:`exponential_propagation_deviation` compares the first-order
field against full exponential propagation of the susceptibility, which
must agree to second order in the optical depth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import pulse as pulse_mod
from . import units


@dataclass(frozen=True)
class FidSpec:
    """FID strength alpha (kV cm^-1 ps) and incident-field switch."""

    alpha: float = 1.0
    include_incident: bool = False

    def __post_init__(self):
        if self.alpha < 0.0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")


class Signal:
    """A sampled field: time grid (ps) and values (kV/cm or detector
    units)."""

    def __init__(self, grid, values):
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=float)
        if grid.ndim != 1 or grid.size == 0:
            raise ValueError("signal grid must be a non-empty 1-d array")
        if grid.size > 1 and not np.all(np.diff(grid) > 0.0):
            raise ValueError("signal grid must be strictly increasing")
        if values.shape != grid.shape:
            raise ValueError("signal values must match the grid length")
        for arr in (grid, values):
            arr.setflags(write=False)
        self.grid = grid
        self.values = values

    def __len__(self):
        return self.grid.size


def write_csv(signal, path, value_label="field_kV_per_cm"):
    data = np.column_stack([signal.grid, signal.values])
    np.savetxt(path, data, delimiter=",",
               header=f"time_ps,{value_label}", comments="", fmt="%.17g")


def fid_signal(trace, spec, pulse=None):
    """Detected field on the trace grid.

    values = [E0(t) if include_incident else 0] - alpha * d<cos>/dt.
    """
    deriv = getattr(trace, "d_cos_theta_dt", None)
    if deriv is None:
        raise ValueError("trace carries no derivative channel")
    values = -spec.alpha * deriv
    if spec.include_incident:
        if pulse is None:
            raise ValueError(
                "include_incident requires the pulse specification"
            )
        values = values + pulse_mod.field_at(pulse, trace.grid)
    return Signal(trace.grid, values)


def _check_uniform_decayed(grid, values, end_tolerance=1e-6):
    if grid.size < 16:
        raise ValueError("need at least 16 samples for spectral checks")
    h = float(grid[1] - grid[0])
    if not np.allclose(np.diff(grid), h, rtol=1e-9, atol=0.0):
        raise ValueError("spectral checks require a uniform grid")
    peak = float(np.max(np.abs(values)))
    if peak > 0.0:
        edge = max(abs(float(values[0])), abs(float(values[-1])))
        if edge > end_tolerance * peak:
            raise ValueError(
                f"trace endpoints carry {edge / peak:.2e} of the peak; "
                f"spectral checks need a decayed window "
                f"(< {end_tolerance:g})"
            )
    return h


def spectral_derivative_check(trace):
    """Max relative deviation of F[df/dt] from (i w) F[f].

    Validates, on the sampled trace, the Fourier-derivative identity
    that turns the frequency-domain polarization response into the
    time-derivative form of the detected field.  Requires a uniform
    grid decayed below 1e-6 of the peak at both ends.
    """
    h = _check_uniform_decayed(trace.grid, trace.cos_theta)
    f_hat = np.fft.rfft(trace.cos_theta)
    df_hat = np.fft.rfft(trace.d_cos_theta_dt)
    omega = 2.0 * math.pi * np.fft.rfftfreq(trace.grid.size, d=h)
    target = 1j * omega * f_hat
    scale = float(np.max(np.abs(target)))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(df_hat - target)) / scale)


def echo_spacing(molecule):
    """Predicted FID echo period 1/(2 c B_e) in ps.

    Centrifugal distortion neglected: successive J -> J+1 absorption
    lines are spaced by 4 pi c B_e in angular frequency, and a periodic
    spectral comb produces time-domain replicas at the inverse spacing.
    """
    b = molecule.constants.B_e
    if b <= 0.0:
        raise ValueError("B_e must be > 0")
    return 1.0e12 / (2.0 * units.SPEED_OF_LIGHT_CM_S * b)


# CODATA-2018
VACUUM_PERMITTIVITY_F_M = 8.8541878128e-12


def alpha_from_depth(x_cm, pressure_bar, temperature_K, molecule):
    """First-order FID strength x N mu0 / (2 c eps0 V) in kV cm^-1 ps.

    Ideal-gas number density at the given pressure and temperature.
    Detector response is *not* included; comparisons against recorded
    traces still need a fitted overall scale.
    """
    if x_cm < 0.0 or pressure_bar < 0.0 or temperature_K <= 0.0:
        raise ValueError("depth and pressure must be >= 0, temperature > 0")
    n_density = pressure_bar * 1.0e5 / (units.BOLTZMANN_J_K * temperature_K)
    mu_si = molecule.dipole_mu0 * units.DEBYE_C_M
    alpha_si = (x_cm * 1.0e-2) * n_density * mu_si / (
        2.0 * (units.SPEED_OF_LIGHT_CM_S * 1.0e-2)
        * VACUUM_PERMITTIVITY_F_M
    )
    # V s / m  ->  kV cm^-1 ps
    return alpha_si * 1.0e7


def exponential_propagation_deviation(trace, pulse, alpha,
                                      band_floor=1e-3):
    """Gap between first-order and full exponential propagation.

    Builds the sample response from the simulated orientation spectrum,
    applies the full phase factor exp(theta) with
    theta(w) = -i w alpha F[<cos>] / E0(w), and returns the maximum
    time-domain difference from the linearized field E0 (1 + theta),
    relative to the peak FID amplitude.  Shrinks quadratically with
    alpha while the first-order term shrinks linearly, so halving alpha
    must reduce the result fourfold.

    Frequencies where the incident spectrum is below ``band_floor`` of
    its maximum carry no measurable response and are excluded.
    """
    if alpha <= 0.0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    h = _check_uniform_decayed(trace.grid, trace.cos_theta)
    lo, hi = pulse.support
    if trace.grid[0] > lo or trace.grid[-1] < hi:
        raise ValueError("trace grid must cover the pulse support")
    e0 = pulse_mod.field_at(pulse, trace.grid)
    e0_hat = np.fft.rfft(e0)
    cos_hat = np.fft.rfft(trace.cos_theta)
    omega = 2.0 * math.pi * np.fft.rfftfreq(trace.grid.size, d=h)
    band = np.abs(e0_hat) >= band_floor * np.max(np.abs(e0_hat))
    theta = np.zeros_like(e0_hat)
    theta[band] = (-1j * omega[band] * alpha * cos_hat[band]
                   / e0_hat[band])
    full = np.fft.irfft(e0_hat * np.exp(theta), n=trace.grid.size)
    first = np.fft.irfft(e0_hat * (1.0 + theta), n=trace.grid.size)
    fid_peak = float(np.max(np.abs(alpha * trace.d_cos_theta_dt)))
    if fid_peak == 0.0:
        return 0.0
    return float(np.max(np.abs(full - first)) / fid_peak)


def write_spectral_report(trace, path):
    """JSON report of the spectral-derivative identity check."""
    import json

    deviation = spectral_derivative_check(trace)
    report = {
        "max_relative_deviation": deviation,
        "n_samples": int(trace.grid.size),
        "dt_ps": float(trace.grid[1] - trace.grid[0]),
        "t_start_ps": float(trace.grid[0]),
        "t_end_ps": float(trace.grid[-1]),
    }
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report
