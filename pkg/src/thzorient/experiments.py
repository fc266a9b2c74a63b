"""Parameter scans, revival detection and trace fitting.

High-level drivers over :func:`thzorient.dynamics.ensemble_orientation`:
amplitude and duration scans extracting the peak orientation at delay
zero and at the first two revivals, peak detection with parabolic
refinement, and the affine least-squares match of a simulated signal
against a recorded one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import fid
from .dynamics import RelaxationSpec, ensemble_orientation
from .pulse import PulseSpec
from .rotor import MoleculeSpec
from .thermal import EnsembleSpec

CHANNELS = ("delay_zero", "first_revival", "second_revival")


@dataclass(frozen=True)
class Setup:
    """Everything one simulation run needs besides the scanned knob."""

    molecule: MoleculeSpec
    ensemble: EnsembleSpec
    pulse: PulseSpec
    relaxation: RelaxationSpec | None
    grid: tuple
    dt: float = 2.5e-4
    j_window: int | None = None

    def run(self, pulse=None):
        return ensemble_orientation(
            self.molecule, self.ensemble, pulse or self.pulse,
            self.relaxation, np.asarray(self.grid), dt=self.dt,
            j_window=self.j_window,
        )


@dataclass(frozen=True)
class ScanResult:
    parameter: str
    values: tuple
    delay_zero: tuple
    first_revival: tuple
    second_revival: tuple
    fits: dict | None = None       # channel -> (slope, r_squared)
    argmax: dict | None = None     # channel -> parameter value

    def channel(self, name):
        return np.asarray(getattr(self, name))

    def to_dict(self):
        out = {
            "parameter": self.parameter,
            "values": list(self.values),
            "channels": {c: list(getattr(self, c)) for c in CHANNELS},
        }
        if self.fits is not None:
            out["fits"] = {
                c: {"slope": s, "r_squared": r}
                for c, (s, r) in self.fits.items()
            }
        if self.argmax is not None:
            out["argmax"] = dict(self.argmax)
        return out


@dataclass(frozen=True)
class FitResult:
    scale: float
    offset: float
    residual_rms: float
    time_shift: float = 0.0

    def to_dict(self):
        return {
            "scale": self.scale,
            "offset": self.offset,
            "residual_rms": self.residual_rms,
            "time_shift_ps": self.time_shift,
        }


def _parabolic_peak(grid, mags, i):
    """Refine the discrete maximum at index i with a 3-point parabola."""
    if 0 < i < mags.size - 1:
        y0, y1, y2 = mags[i - 1], mags[i], mags[i + 1]
        denom = y0 - 2.0 * y1 + y2
        if denom < 0.0:
            delta = 0.5 * (y0 - y2) / denom
            h = grid[min(i + 1, grid.size - 1)] - grid[i]
            t = grid[i] + delta * h
            m = y1 - 0.25 * (y0 - y2) * delta
            return float(t), float(m)
    return float(grid[i]), float(mags[i])


def _window_peak(grid, values, t_lo, t_hi):
    """Refined (time, |value|) extremum within [t_lo, t_hi], or None."""
    sel = np.nonzero((grid >= t_lo) & (grid <= t_hi))[0]
    if sel.size == 0:
        return None
    mags = np.abs(values)
    i = sel[int(np.argmax(mags[sel]))]
    return _parabolic_peak(grid, mags, int(i))


def detect_revivals(signal_or_trace, expected_period, n,
                    noise_floor=0.0, t0=0.0):
    """Refined revival peaks of |values| in windows k*period +/- period/4.

    Works on an orientation trace (uses the cos channel) or any sampled
    signal.  A window that lies outside the grid, or whose extremum
    falls below ``noise_floor``, yields None for that revival.
    """
    if expected_period <= 0.0:
        raise ValueError("expected_period must be > 0")
    if n < 0:
        raise ValueError("n must be >= 0")
    values = getattr(signal_or_trace, "cos_theta", None)
    if values is None:
        values = signal_or_trace.values
    grid = signal_or_trace.grid
    peaks = []
    for k in range(1, n + 1):
        center = t0 + k * expected_period
        found = _window_peak(grid, values,
                             center - expected_period / 4.0,
                             center + expected_period / 4.0)
        if found is None or found[1] < noise_floor:
            peaks.append(None)
        else:
            peaks.append(found)
    return peaks


def _channel_peaks(setup, trace):
    period = fid.echo_spacing(setup.molecule)
    t0 = setup.pulse.t0
    quarter = period / 4.0
    out = {}
    dz = _window_peak(trace.grid, trace.cos_theta, t0 - quarter,
                      t0 + quarter)
    out["delay_zero"] = dz[1] if dz else math.nan
    for name, k in (("first_revival", 1), ("second_revival", 2)):
        pk = _window_peak(trace.grid, trace.cos_theta,
                          t0 + k * period - quarter,
                          t0 + k * period + quarter)
        out[name] = pk[1] if pk else math.nan
    return out


def _origin_line_fit(x, y):
    """Least-squares slope through the origin and conventional R^2."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope = float(np.sum(x * y) / np.sum(x * x))
    if x.size < 2:
        return slope, math.nan
    ss_res = float(np.sum((y - slope * x) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        return slope, math.nan
    return slope, 1.0 - ss_res / ss_tot


def scan_amplitude(setup, amplitudes, on_trace=None):
    """Peak orientation per channel as a function of the amplitude E1.

    Reports a through-origin linear fit (slope, R^2) per channel.
    ``on_trace(i, value, trace)`` is invoked after each value completes.
    """
    amplitudes = [float(a) for a in amplitudes]
    if not amplitudes:
        raise ValueError("amplitude list is empty")
    if any(a <= 0.0 for a in amplitudes):
        raise ValueError("amplitudes must be > 0")
    if any(b <= a for a, b in zip(amplitudes, amplitudes[1:])):
        raise ValueError("amplitudes must be strictly increasing")
    rows = []
    for i, e1 in enumerate(amplitudes):
        trace = setup.run(replace(setup.pulse, E1=e1))
        rows.append(_channel_peaks(setup, trace))
        if on_trace is not None:
            on_trace(i, e1, trace)
    fits = {
        c: _origin_line_fit(amplitudes, [r[c] for r in rows])
        for c in CHANNELS
    }
    return ScanResult(
        parameter="amplitude_kV_per_cm",
        values=tuple(amplitudes),
        delay_zero=tuple(r["delay_zero"] for r in rows),
        first_revival=tuple(r["first_revival"] for r in rows),
        second_revival=tuple(r["second_revival"] for r in rows),
        fits=fits,
    )


def scan_tau(setup, taus, on_trace=None):
    """Peak orientation per channel as a function of the duration tau.

    Reports the argmax tau per channel; the dependence is nonlinear,
    unlike the amplitude scan.
    """
    taus = [float(t) for t in taus]
    if not taus:
        raise ValueError("tau list is empty")
    if any(t <= 0.0 for t in taus):
        raise ValueError("taus must be > 0")
    if any(b <= a for a, b in zip(taus, taus[1:])):
        raise ValueError("taus must be strictly increasing")
    rows = []
    for i, tau in enumerate(taus):
        trace = setup.run(replace(setup.pulse, tau=tau))
        rows.append(_channel_peaks(setup, trace))
        if on_trace is not None:
            on_trace(i, tau, trace)
    argmax = {
        c: taus[int(np.nanargmax([r[c] for r in rows]))] for c in CHANNELS
    }
    return ScanResult(
        parameter="tau_ps",
        values=tuple(taus),
        delay_zero=tuple(r["delay_zero"] for r in rows),
        first_revival=tuple(r["first_revival"] for r in rows),
        second_revival=tuple(r["second_revival"] for r in rows),
        argmax=argmax,
    )


def _affine_fit(model_vals, data_vals):
    mv = model_vals - model_vals.mean()
    var = float(np.sum(mv * mv))
    if var == 0.0:
        raise ValueError("model signal has zero variance; fit is degenerate")
    scale = float(np.sum(mv * (data_vals - data_vals.mean())) / var)
    offset = float(data_vals.mean() - scale * model_vals.mean())
    resid = scale * model_vals + offset - data_vals
    return scale, offset, float(np.sqrt(np.mean(resid ** 2)))


def _resampled(model, data, shift):
    lo = max(model.grid[0], data.grid[0] + shift)
    hi = min(model.grid[-1], data.grid[-1] + shift)
    sel = (model.grid >= lo) & (model.grid <= hi)
    if int(sel.sum()) < 8:
        raise ValueError(
            "fewer than 8 overlapping samples between model and data"
        )
    t = model.grid[sel]
    return model.values[sel], np.interp(t, data.grid + shift, data.values)


def fit_trace(model, data, allow_time_shift=False, shift_bound=2.0):
    """Affine least-squares match of data against a simulated signal.

    Data are linearly resampled onto the model grid over the
    overlapping window; scale and offset come from the closed-form
    normal equations.  With ``allow_time_shift`` a golden-section
    search over +/- ``shift_bound`` ps minimizes the residual before
    the linear fit (delay-stage zero offset); disabled by default.
    """

    def residual_at(shift):
        mv, dv = _resampled(model, data, shift)
        return _affine_fit(mv, dv)[2]

    shift = 0.0
    if allow_time_shift:
        invphi = (math.sqrt(5.0) - 1.0) / 2.0
        a, b = -shift_bound, shift_bound
        c = b - invphi * (b - a)
        d = a + invphi * (b - a)
        fc, fd = residual_at(c), residual_at(d)
        for _ in range(60):
            if fc < fd:
                b, d, fd = d, c, fc
                c = b - invphi * (b - a)
                fc = residual_at(c)
            else:
                a, c, fc = c, d, fd
                d = a + invphi * (b - a)
                fd = residual_at(d)
        shift = (a + b) / 2.0
    mv, dv = _resampled(model, data, shift)
    scale, offset, rms = _affine_fit(mv, dv)
    return FitResult(scale=scale, offset=offset, residual_rms=rms,
                     time_shift=shift)
