"""Time propagation of the thermal ensemble and the orientation trace.

During the finite pulse window each ensemble member is integrated with
fixed-step classical RK4 on its (K, M) block (see :mod:`._kernel`).
After the window the field is exactly zero and every member evolves
analytically: populations freeze and each J/J+1 coherence rotates at its
level-spacing frequency, so

    <cos>(t) = sum_J |c_J|^2 d_J
             + 2 sum_J Re[c_J* c_{J+1} exp(-i w_J (t - t_end))] q_J

with the exact derivative obtained by weighting each coherence with its
frequency.  The ensemble trace groups all member coherences by (J, K)
(their frequencies do not depend on M) which makes hundreds of
picoseconds of revivals cheap.

Collisional decoherence multiplies the non-dissipative trace by
exp(-(t - t0) P/T2) with the pressure converted to atm; the derivative
channel includes the decay factor's own derivative (product rule).

Determinism: members are processed in a canonical (K, M, J) order with
fixed chunk boundaries, per-member kernel outputs are reduced serially,
and the compiled kernels never reduce across threads, so identical
configurations produce bit-identical traces for any thread count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import pulse as pulse_mod
from . import units
from ._kernel import accumulate_free_evolution, propagate_members
from .rotor import BlockOperators, build_block, energy as _energy
from .thermal import EnsembleSpec, enumerate_members

DEFAULT_DT_PS = 2.5e-4      # 0.25 fs during the pulse
NORM_DRIFT_LIMIT = 1e-8
_EDGE_AMPLITUDE_TARGET = 1e-15
_MIN_WINDOW = 6
_MIN_PULSE_STEPS = 200

_AU_PER_PS = units.to_atomic(1.0, "time_ps")


@dataclass(frozen=True)
class RelaxationSpec:
    """Pressure-normalized coherence decay: rate = P/T2 (P in atm)."""

    T2: float = 23.0       # ps * atm
    pressure: float = 0.35  # bar; 0 disables relaxation

    def __post_init__(self):
        if self.T2 <= 0.0:
            raise ValueError(f"relaxation T2 must be > 0, got {self.T2}")
        if self.pressure < 0.0:
            raise ValueError(
                f"pressure must be >= 0, got {self.pressure}"
            )

    @property
    def rate_per_ps(self):
        return self.pressure * units.ATM_PER_BAR / self.T2


@dataclass(frozen=True)
class BlockState:
    """Amplitudes over the J index of one block at a fixed time (ps).

    Amplitudes are stored with the member's initial energy removed as a
    global phase; all observables are invariant under that choice.
    """

    block: BlockOperators
    amplitudes: np.ndarray
    time: float

    @property
    def norm_error(self):
        return abs(float(np.sum(np.abs(self.amplitudes) ** 2)) - 1.0)


class OrientationTrace:
    """Time grid (ps), <cos theta>(t) and its derivative (1/ps)."""

    def __init__(self, grid, cos_theta, d_cos_theta_dt):
        grid = np.asarray(grid, dtype=float)
        cos_theta = np.asarray(cos_theta, dtype=float)
        d_cos = np.asarray(d_cos_theta_dt, dtype=float)
        if grid.ndim != 1 or grid.size == 0:
            raise ValueError("trace grid must be a non-empty 1-d array")
        if grid.size > 1 and not np.all(np.diff(grid) > 0.0):
            raise ValueError("trace grid must be strictly increasing")
        if cos_theta.shape != grid.shape or d_cos.shape != grid.shape:
            raise ValueError("trace channels must match the grid length")
        if np.max(np.abs(cos_theta)) > 1.0 + 1e-12:
            raise ValueError("|<cos theta>| must not exceed 1")
        for arr in (grid, cos_theta, d_cos):
            arr.setflags(write=False)
        self.grid = grid
        self.cos_theta = cos_theta
        self.d_cos_theta_dt = d_cos

    def __len__(self):
        return self.grid.size


def write_csv(trace, path):
    """Export a trace as CSV (time_ps, cos_theta, dcos_dt_per_ps)."""
    data = np.column_stack(
        [trace.grid, trace.cos_theta, trace.d_cos_theta_dt]
    )
    np.savetxt(path, data, delimiter=",",
               header="time_ps,cos_theta,dcos_dt_per_ps",
               comments="", fmt="%.17g")


def _pulse_window_au(spec):
    lo, hi = spec.support
    return units.to_atomic(lo, "time_ps"), units.to_atomic(hi, "time_ps")


def window_halfwidth(molecule, spec, target=_EDGE_AMPLITUDE_TARGET):
    """J window half-width from a Dyson-series ladder bound.

    Reaching J0 +/- k requires at least k interactions, so the edge
    amplitude is bounded by S^k / k! with S = q_max * mu0 * int |E| dt
    (atomic units, q_max = 1/sqrt(3)).  Returns the smallest half-width
    whose bound drops below ``target``, plus a safety margin.
    """
    lo, hi = spec.support
    t = np.linspace(lo, hi, 8192)
    e_au = units.to_atomic(np.abs(pulse_mod.field_at(spec, t)),
                           "field_kV_per_cm")
    area = np.trapezoid(e_au, units.to_atomic(t, "time_ps"))
    s = (1.0 / math.sqrt(3.0)) \
        * units.to_atomic(molecule.dipole_mu0, "dipole_debye") * area
    w = 1
    bound = s
    while bound >= target and w < 10_000:
        w += 1
        bound *= s / w
    return max(_MIN_WINDOW, w + 2)


def _field_au_at_ps(spec, t_ps):
    return units.to_atomic(pulse_mod.field_at(spec, t_ps),
                           "field_kV_per_cm")


def _propagation_setup(molecule, spec, dt_ps):
    """Step sizes, times and sampled drive for the pulse window.

    Full steps of dt plus one final partial step landing exactly on
    the support edge, so the end time does not depend on dt.
    """
    if dt_ps <= 0.0:
        raise ValueError(f"propagation dt must be > 0, got {dt_ps}")
    lo_ps, hi_ps = spec.support
    span = hi_ps - lo_ps
    nfull = int(math.floor(span / dt_ps))
    last = span - nfull * dt_ps
    if last > 1e-9 * dt_ps:
        step_dt_ps = np.concatenate([np.full(nfull, dt_ps), [last]])
    else:
        step_dt_ps = np.full(nfull, dt_ps)
    nsteps = step_dt_ps.size
    if nsteps < _MIN_PULSE_STEPS:
        raise ValueError(
            f"dt={dt_ps} ps resolves the pulse with only {nsteps} steps; "
            f"need at least {_MIN_PULSE_STEPS} across the support window"
        )
    # drive at the stage times of every step
    starts = lo_ps + dt_ps * np.arange(nsteps)
    half_times_ps = np.empty(2 * nsteps + 1)
    half_times_ps[0::2][:nsteps] = starts
    half_times_ps[1::2] = starts + 0.5 * step_dt_ps
    half_times_ps[-1] = starts[-1] + step_dt_ps[-1]
    mu_au = units.to_atomic(molecule.dipole_mu0, "dipole_debye")
    g_half = -mu_au * _field_au_at_ps(spec, half_times_ps)
    step_dt_au = units.to_atomic(step_dt_ps, "time_ps")
    t_start_au = units.to_atomic(lo_ps, "time_ps")
    t_end_au = units.to_atomic(hi_ps, "time_ps")
    return step_dt_au, t_start_au, t_end_au, g_half, mu_au


_EMPTY_I8 = np.empty(0, dtype=np.int64)
_EMPTY_F8 = np.empty(0, dtype=np.float64)


def propagate_member(member, block, pulse, molecule, dt=DEFAULT_DT_PS):
    """RK4-propagate one member through the pulse on its full block.

    The initial state is the unit vector at J = member J; the returned
    :class:`BlockState` holds the amplitudes at the end of the pulse
    window (global phase of the initial energy removed).
    """
    j0 = block.j_index(member.state.J)
    step_dt, _t0, t_end_au, g_half, _mu = _propagation_setup(
        molecule, pulse, dt
    )
    nw = block.dim
    amps_re = np.empty(nw)
    amps_im = np.empty(nw)
    norm_err = np.empty(1)
    propagate_members(
        block.energies, block.coupling, block.diagonal,
        np.zeros(1, dtype=np.int64), np.zeros(1, dtype=np.int64),
        np.zeros(1, dtype=np.int64), np.array([j0], dtype=np.int64),
        np.zeros(1, dtype=np.int64), np.array([nw - 1], dtype=np.int64),
        np.array([block.energies[j0]]),
        g_half, step_dt,
        _EMPTY_I8, _EMPTY_F8, _EMPTY_F8, _EMPTY_F8,
        amps_re, amps_im, np.zeros(1, dtype=np.int64),
        np.empty((1, 0)), norm_err,
    )
    if norm_err[0] > NORM_DRIFT_LIMIT:
        raise ValueError(
            f"norm drift {norm_err[0]:.3e} exceeds {NORM_DRIFT_LIMIT:g} "
            f"for member (J={member.state.J}, K={member.state.K}, "
            f"M={member.state.M}); retry with dt <= {dt / 2:g} ps"
        )
    return BlockState(
        block=block,
        amplitudes=amps_re + 1j * amps_im,
        time=units.from_atomic(t_end_au, "time_ps"),
    )


def free_evolution_trace(state, block, grid):
    """Field-free <cos theta>(t) of one block state, with derivative.

    No ODE integration: populations are frozen and each coherence
    rotates at its exact level-spacing frequency.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0 or (grid.size > 1 and not np.all(np.diff(grid) > 0)):
        raise ValueError("grid must be non-empty and strictly increasing")
    if grid[0] < state.time - 1e-12:
        raise ValueError(
            f"grid starts at {grid[0]} ps, before the state time "
            f"{state.time} ps"
        )
    c = state.amplitudes
    pops = np.abs(c) ** 2
    static = float(np.sum(pops * block.diagonal))
    p = np.conj(c[:-1]) * c[1:]            # coherences c_J* c_{J+1}
    omega = np.diff(block.energies)        # au
    t_rel = units.to_atomic(grid - state.time, "time_ps")
    phase = omega[:, None] * t_rel[None, :]
    cosph = np.cos(phase)
    sinph = np.sin(phase)
    qre = block.coupling * p.real
    qim = block.coupling * p.imag
    values = static + 2.0 * (qre @ cosph + qim @ sinph)
    deriv_au = 2.0 * ((omega * qim) @ cosph - (omega * qre) @ sinph)
    return OrientationTrace(grid, values, deriv_au * _AU_PER_PS)


def _member_arrays(members):
    """Canonically ordered (K, M, J) arrays for the ensemble."""
    n = len(members)
    j0 = np.empty(n, dtype=np.int64)
    kk = np.empty(n, dtype=np.int64)
    mm = np.empty(n, dtype=np.int64)
    wt = np.empty(n)
    for i, m in enumerate(members):
        j0[i] = m.state.J
        kk[i] = m.state.K
        mm[i] = m.state.M
        wt[i] = m.weight * m.multiplicity
    order = np.lexsort((j0, mm, kk))
    return j0[order], kk[order], mm[order], wt[order]


def _fd_derivative(values, h, idx):
    """Fourth-order finite-difference derivative at the given indices."""
    n = values.size
    out = np.empty(idx.size)
    for k, i in enumerate(idx):
        if 2 <= i <= n - 3:
            out[k] = (values[i - 2] - 8.0 * values[i - 1]
                      + 8.0 * values[i + 1] - values[i + 2]) / (12.0 * h)
        elif i <= 1:
            j = i
            out[k] = (-25.0 * values[j] + 48.0 * values[j + 1]
                      - 36.0 * values[j + 2] + 16.0 * values[j + 3]
                      - 3.0 * values[j + 4]) / (12.0 * h) if j == 0 else \
                     (-3.0 * values[0] - 10.0 * values[1]
                      + 18.0 * values[2] - 6.0 * values[3]
                      + values[4]) / (12.0 * h)
        else:
            j = n - 1 - i
            out[k] = (25.0 * values[i] - 48.0 * values[i - 1]
                      + 36.0 * values[i - 2] - 16.0 * values[i - 3]
                      + 3.0 * values[i - 4]) / (12.0 * h) if j == 0 else \
                     (3.0 * values[n - 1] + 10.0 * values[n - 2]
                      - 18.0 * values[n - 3] + 6.0 * values[n - 4]
                      - values[n - 5]) / (12.0 * h)
    return out


def _chunk_size(n_out):
    """Members per kernel call; fixed by the grid, not by threads."""
    return max(1024, min(16384, int(6.0e7 / (8 * max(n_out, 1)))))


def _nd_ensemble_trace(molecule, members, j_max, pulse, grid_ps,
                       dt_ps, j_window):
    """Non-dissipative ensemble trace (values, derivative per ps)."""
    grid_ps = np.asarray(grid_ps, dtype=float)
    if grid_ps.size == 0 or (grid_ps.size > 1
                             and not np.all(np.diff(grid_ps) > 0)):
        raise ValueError("grid must be non-empty and strictly increasing")
    if j_window is None:
        j_window = window_halfwidth(molecule, pulse)

    j0, kk, mm, wt = _member_arrays(members)
    nm = j0.size

    # unique (K, M) blocks, concatenated operator arrays
    km = np.stack([kk, mm])
    uniq, blk_of_member = np.unique(km, axis=1, return_inverse=True)
    blk_of_member = blk_of_member.astype(np.int64).ravel()
    nblk = uniq.shape[1]
    blocks = []
    dims = np.empty(nblk, dtype=np.int64)
    for b in range(nblk):
        blk = build_block(molecule, int(uniq[0, b]), int(uniq[1, b]), j_max)
        blocks.append(blk)
        dims[b] = blk.dim
    blk_off_n = np.zeros(nblk, dtype=np.int64)
    blk_off_n[1:] = np.cumsum(dims)[:-1]
    blk_off_q = blk_off_n - np.arange(nblk, dtype=np.int64)
    blk_h0 = np.concatenate([b.energies for b in blocks])
    blk_q = np.concatenate([b.coupling if b.dim > 1 else np.empty(0)
                            for b in blocks]) if nblk else _EMPTY_F8
    blk_d = np.concatenate([b.diagonal for b in blocks])
    jmin_of_block = np.array([b.j_min for b in blocks], dtype=np.int64)

    # per-member window within its block
    j0_idx = j0 - jmin_of_block[blk_of_member]
    mem_lo = np.maximum(j0_idx - j_window, 0)
    mem_hi = np.minimum(j0_idx + j_window, dims[blk_of_member] - 1)
    mem_eref = blk_h0[blk_off_n[blk_of_member] + j0_idx]

    step_dt, t_start_au, t_end_au, g_half, mu_au = \
        _propagation_setup(molecule, pulse, dt_ps)
    nsteps = step_dt.size
    dt_au = step_dt[0]

    # classify grid points against the pulse support
    grid_au = units.to_atomic(grid_ps, "time_ps")
    sup_lo_au, sup_hi_au = _pulse_window_au(pulse)
    pre_mask = grid_au <= sup_lo_au
    in_mask = (grid_au > sup_lo_au) & (grid_au < sup_hi_au)
    post_mask = grid_au >= sup_hi_au
    in_idx = np.nonzero(in_mask)[0]
    n_out = in_idx.size

    # schedule the in-pulse observable evaluations
    if n_out:
        t_out = grid_au[in_idx]
        step_f = np.floor((t_out - t_start_au) / dt_au)
        out_step = np.clip(step_f, 0, nsteps - 1).astype(np.int64)
        out_delta = t_out - (t_start_au + out_step * dt_au)
        t_mid_ps = units.from_atomic(t_out - 0.5 * out_delta, "time_ps")
        t_end_ps = units.from_atomic(t_out, "time_ps")
        g_out_mid = -mu_au * _field_au_at_ps(pulse, t_mid_ps)
        g_out_end = -mu_au * _field_au_at_ps(pulse, t_end_ps)
    else:
        out_step, out_delta = _EMPTY_I8, _EMPTY_F8
        g_out_mid = g_out_end = _EMPTY_F8

    # coherence buckets: (J_low, K); frequencies are M-independent
    kmax = int(kk.max()) if nm else 0
    nbucket = max(j_max, 1) * (kmax + 1)
    acc_re = np.zeros(nbucket)
    acc_im = np.zeros(nbucket)
    static_total = 0.0
    inpulse_total = np.zeros(n_out)
    pre_value = 0.0
    worst_norm = 0.0
    worst_member = None

    chunk = _chunk_size(n_out)
    for start in range(0, nm, chunk):
        sl = slice(start, min(start + chunk, nm))
        c_blk = blk_of_member[sl]
        c_lo = mem_lo[sl]
        c_hi = mem_hi[sl]
        c_nw = c_hi - c_lo + 1
        c_n = c_nw.sum()
        c_off = np.zeros(c_nw.size, dtype=np.int64)
        c_off[1:] = np.cumsum(c_nw)[:-1]
        amps_re = np.empty(c_n)
        amps_im = np.empty(c_n)
        inpulse = np.empty((c_nw.size, n_out))
        norm_err = np.empty(c_nw.size)

        propagate_members(
            blk_h0, blk_q, blk_d, blk_off_n, blk_off_q,
            c_blk, j0_idx[sl], c_lo, c_hi, mem_eref[sl],
            g_half, step_dt,
            out_step, out_delta, g_out_mid, g_out_end,
            amps_re, amps_im, c_off,
            inpulse, norm_err,
        )

        w = wt[sl]
        i_worst = int(np.argmax(norm_err))
        if norm_err[i_worst] > worst_norm:
            worst_norm = float(norm_err[i_worst])
            g = start + i_worst
            worst_member = (int(j0[g]), int(kk[g]), int(mm[g]))
        if n_out:
            inpulse_total += w @ inpulse

        # flatten member windows into per-position arrays
        mem_id = np.repeat(np.arange(c_nw.size), c_nw)
        within = np.arange(c_n) - c_off[mem_id]
        pos_j = jmin_of_block[c_blk[mem_id]] + c_lo[mem_id] + within
        pos_d = blk_d[blk_off_n[c_blk[mem_id]] + c_lo[mem_id] + within]
        prob = amps_re ** 2 + amps_im ** 2
        static_total += float(np.sum(w[mem_id] * pos_d * prob))
        pre_value += float(np.sum(
            w * blk_d[blk_off_n[c_blk] + c_lo + (j0_idx[sl] - c_lo)]
        ))

        pair_ok = within < (c_nw[mem_id] - 1)
        pid = np.nonzero(pair_ok)[0]
        p_re = amps_re[pid] * amps_re[pid + 1] + amps_im[pid] * amps_im[pid + 1]
        p_im = amps_re[pid] * amps_im[pid + 1] - amps_im[pid] * amps_re[pid + 1]
        q_pos = blk_q[blk_off_q[c_blk[mem_id[pid]]] + c_lo[mem_id[pid]]
                      + within[pid]]
        wq = w[mem_id[pid]] * q_pos
        bucket = pos_j[pid] * (kmax + 1) + kk[sl][mem_id[pid]]
        acc_re += np.bincount(bucket, weights=wq * p_re, minlength=nbucket)
        acc_im += np.bincount(bucket, weights=wq * p_im, minlength=nbucket)

    if worst_norm > NORM_DRIFT_LIMIT:
        raise ValueError(
            f"norm drift {worst_norm:.3e} exceeds {NORM_DRIFT_LIMIT:g} for "
            f"member (J={worst_member[0]}, K={worst_member[1]}, "
            f"M={worst_member[2]}); retry with dt <= {dt_ps / 2:g} ps"
        )

    # frequencies per bucket
    used = np.nonzero((acc_re != 0.0) | (acc_im != 0.0))[0]
    b_j = used // (kmax + 1)
    b_k = used % (kmax + 1)
    omega = np.array([
        units.to_atomic(
            _energy(molecule.constants, int(j) + 1, int(k))
            - _energy(molecule.constants, int(j), int(k)),
            "energy_wavenumber",
        )
        for j, k in zip(b_j, b_k)
    ]) if used.size else _EMPTY_F8

    values = np.empty(grid_ps.size)
    deriv = np.empty(grid_ps.size)
    values[pre_mask] = pre_value
    deriv[pre_mask] = 0.0
    if n_out:
        values[in_idx] = inpulse_total
    n_post = int(post_mask.sum())
    if n_post:
        t_rel = grid_au[post_mask] - t_end_au
        post_val = np.empty(n_post)
        post_der = np.empty(n_post)
        accumulate_free_evolution(omega, acc_re[used], acc_im[used],
                                  t_rel, post_val, post_der)
        values[post_mask] = static_total + post_val
        deriv[post_mask] = post_der * _AU_PER_PS
    if n_out:
        if grid_ps.size < 5:
            raise ValueError(
                "grid too short to differentiate through the pulse window; "
                "need at least 5 points"
            )
        h = float(grid_ps[1] - grid_ps[0])
        if not np.allclose(np.diff(grid_ps), h, rtol=1e-9, atol=0.0):
            raise ValueError(
                "in-pulse derivative needs a uniform grid through the "
                "pulse window"
            )
        deriv[in_idx] = _fd_derivative(values, h, in_idx)
    return values, deriv


def _relax(grid_ps, values, deriv, relaxation, t0_ps):
    if relaxation is None or relaxation.rate_per_ps == 0.0:
        return values, deriv
    gamma = relaxation.rate_per_ps
    dt_rel = np.maximum(grid_ps - t0_ps, 0.0)
    decay = np.exp(-gamma * dt_rel)
    gam = np.where(grid_ps >= t0_ps, gamma, 0.0)
    return values * decay, decay * (deriv - gam * values)


@lru_cache(maxsize=8)
def _nd_trace_cached(molecule, spec, pulse, grid_key, dt_ps, j_window):
    members = enumerate_members(molecule, spec)
    grid = np.asarray(grid_key, dtype=float)
    return _nd_ensemble_trace(molecule, members, spec.J_max, pulse, grid,
                              dt_ps, j_window)


def ensemble_orientation(molecule, ensemble, pulse, relaxation, grid,
                         dt=DEFAULT_DT_PS, j_window=None, j_max=None):
    """Ensemble-averaged orientation trace with collisional decay.

    ``ensemble`` is either an :class:`~thzorient.thermal.EnsembleSpec`
    (members enumerated internally, heavy results cached per process) or
    an explicit member sequence, in which case ``j_max`` bounds the
    basis (default: largest member J plus the propagation window).
    """
    grid = np.asarray(grid, dtype=float)
    if isinstance(ensemble, EnsembleSpec):
        values, deriv = _nd_trace_cached(
            molecule, ensemble, pulse, tuple(grid.tolist()), dt, j_window
        )
    else:
        members = list(ensemble)
        if not members:
            raise ValueError("ensemble has no members")
        if j_max is None:
            w = j_window if j_window is not None \
                else window_halfwidth(molecule, pulse)
            j_max = max(m.state.J for m in members) + w
        values, deriv = _nd_ensemble_trace(
            molecule, members, j_max, pulse, grid, dt, j_window
        )
    values, deriv = _relax(grid, values, deriv, relaxation, pulse.t0)
    return OrientationTrace(grid, values, deriv)


def clear_trace_cache():
    """Drop cached non-dissipative ensemble traces."""
    _nd_trace_cached.cache_clear()
