"""Self-check oracles: independent routes to the core quantities.

Every check here avoids the production code path it validates:

* direction-cosine matrix elements are recomputed by brute-force
  quadrature of Wigner d-function products over the polar angle,
  with the d-functions built from the factorial sum formula;
* the RK4 propagator is compared against itself at half step
  (Richardson) and against exact free evolution;
* the Fourier-derivative identity is exercised on a synthetic
  waveform with a known transform pair;
* the partition-function truncation guard is probed on both a healthy
  and an undersized basis.

:func:`run_all` powers the command-line ``check`` subcommand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import fid, thermal, units
from .dynamics import free_evolution_trace, propagate_member
from .pulse import PulseSpec
from .rotor import (BasisState, MoleculeSpec, RotorConstants, build_block,
                    cos_theta_coupling, cos_theta_diagonal)
from .thermal import EnsembleMember, EnsembleSpec, TruncationError


@lru_cache(maxsize=None)
def _d_terms(J, M, K):
    """Coefficients of the Wigner d^J_{MK} factorial sum."""
    pref = math.sqrt(
        math.factorial(J + M) * math.factorial(J - M)
        * math.factorial(J + K) * math.factorial(J - K)
    )
    terms = []
    for s in range(max(0, K - M), min(J + K, J - M) + 1):
        coeff = ((-1) ** (s - K + M)) * pref / (
            math.factorial(J + K - s) * math.factorial(s)
            * math.factorial(J - s - M) * math.factorial(s - K + M)
        )
        terms.append((coeff, 2 * J - 2 * s + K - M, 2 * s - K + M))
    return tuple(terms)


def wigner_d(J, M, K, beta):
    """d^J_{MK}(beta) from the factorial sum; beta scalar or array."""
    beta = np.asarray(beta, dtype=float)
    c = np.cos(0.5 * beta)
    s = np.sin(0.5 * beta)
    out = np.zeros_like(beta)
    for coeff, pc, ps in _d_terms(J, M, K):
        out = out + coeff * c ** pc * s ** ps
    return out


_QUAD_NODES = 64


def _quadrature_element(J1, J2, K, M):
    """<J1,K,M| cos(theta) |J2,K,M> by Gauss-Legendre quadrature."""
    x, w = np.polynomial.legendre.leggauss(_QUAD_NODES)
    beta = np.arccos(x)
    integrand = wigner_d(J1, M, K, beta) * x * wigner_d(J2, M, K, beta)
    norm = math.sqrt((2 * J1 + 1) * (2 * J2 + 1)) / 2.0
    return norm * float(np.sum(w * integrand))


def quadrature_coupling(J, K, M):
    """Oracle for <J+1,K,M| cos(theta) |J,K,M>."""
    return _quadrature_element(J + 1, J, K, M)


def quadrature_diagonal(J, K, M):
    """Oracle for <J,K,M| cos(theta) |J,K,M>."""
    return _quadrature_element(J, J, K, M)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    measured: float
    threshold: float
    detail: str = ""

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        extra = f" ({self.detail})" if self.detail else ""
        return (f"{status}  {self.name}: measured {self.measured:.3e}, "
                f"threshold {self.threshold:.3e}{extra}")


def check_cos_matrix_elements(j_top=6, tolerance=1e-12):
    """Closed-form direction-cosine elements vs the quadrature oracle."""
    worst = 0.0
    for j in range(j_top + 1):
        for k in range(-j, j + 1):
            for m in range(-j, j + 1):
                dev = abs(cos_theta_coupling(j, k, m)
                          - quadrature_coupling(j, k, m))
                worst = max(worst, dev)
                dev = abs(cos_theta_diagonal(j, k, m)
                          - quadrature_diagonal(j, k, m))
                worst = max(worst, dev)
    return CheckResult(
        name=f"cos(theta) matrix elements (J <= {j_top}) vs quadrature",
        passed=worst < tolerance, measured=worst, threshold=tolerance,
    )


def check_rk4_convergence(molecule=None, pulse=None, dt=2.5e-4,
                          tolerance=1e-9):
    """Richardson step-halving on a representative member."""
    molecule = molecule or MoleculeSpec()
    pulse = pulse or PulseSpec()
    member = EnsembleMember(BasisState(3, 1, 1), 1.0, 1)
    block = build_block(molecule, 1, 1, 16)
    coarse = propagate_member(member, block, pulse, molecule, dt=dt)
    fine = propagate_member(member, block, pulse, molecule, dt=dt / 2)
    change = float(np.max(np.abs(coarse.amplitudes - fine.amplitudes)))
    return CheckResult(
        name=f"RK4 step-halving at dt={dt:g} ps",
        passed=change < tolerance, measured=change, threshold=tolerance,
        detail=f"norm drift {coarse.norm_error:.1e}",
    )


def check_spectral_identity(tolerance=1e-8):
    """Fourier-derivative identity on a known transform pair."""
    t = np.linspace(0.0, 200.0, 40001)
    tc, width, omega = 100.0, 12.0, 1.7
    env = np.exp(-((t - tc) / width) ** 2)
    f = env * np.cos(omega * (t - tc))
    df = env * (-2.0 * (t - tc) / width ** 2 * np.cos(omega * (t - tc))
                - omega * np.sin(omega * (t - tc)))
    from .dynamics import OrientationTrace
    trace = OrientationTrace(t, f * 1e-3, df * 1e-3)
    dev = fid.spectral_derivative_check(trace)
    return CheckResult(
        name="spectral derivative identity (damped cosine)",
        passed=dev < tolerance, measured=dev, threshold=tolerance,
    )


def check_partition_truncation(molecule=None, ensemble=None):
    """Truncation guard accepts the configured basis."""
    molecule = molecule or MoleculeSpec()
    ensemble = ensemble or EnsembleSpec()
    try:
        thermal.partition_function(molecule, ensemble)
    except TruncationError as err:
        return CheckResult(
            name=f"partition truncation at J_max={ensemble.J_max}, "
                 f"T={ensemble.temperature} K",
            passed=False, measured=math.inf,
            threshold=thermal.SHELL_TOLERANCE, detail=str(err),
        )
    shells = thermal._shell_sums(molecule, ensemble.temperature,
                                 ensemble.J_max)
    frac = float(shells[-1] / shells.sum())
    return CheckResult(
        name=f"partition truncation at J_max={ensemble.J_max}, "
             f"T={ensemble.temperature} K",
        passed=True, measured=frac, threshold=thermal.SHELL_TOLERANCE,
    )


def check_rigid_rotor_periodicity(tolerance=1e-9):
    """With centrifugal terms zeroed, free evolution repeats after
    the echo spacing 1/(2 c B_e)."""
    rigid = MoleculeSpec(constants=RotorConstants(
        B_e=0.25098, A_e=5.173949, D_J=0.0, D_JK=0.0, D_K=0.0))
    member = EnsembleMember(BasisState(1, 0, 0), 1.0, 1)
    block = build_block(rigid, 0, 0, 12)
    state = propagate_member(member, block, PulseSpec(E1=50.0), rigid)
    period = fid.echo_spacing(rigid)
    t = state.time + np.linspace(0.0, 10.0, 401)
    first = free_evolution_trace(state, block, t)
    second = free_evolution_trace(state, block, t + period)
    dev = float(np.max(np.abs(first.cos_theta - second.cos_theta)))
    scale = float(np.max(np.abs(first.cos_theta)))
    rel = dev / scale if scale else 0.0
    return CheckResult(
        name="rigid-rotor revival periodicity vs echo spacing",
        passed=rel < tolerance, measured=rel, threshold=tolerance,
    )


def run_all(molecule=None, ensemble=None, pulse=None, dt=2.5e-4):
    """All checks, in a fixed order."""
    return [
        check_cos_matrix_elements(),
        check_rk4_convergence(molecule, pulse, dt),
        check_spectral_identity(),
        check_partition_truncation(molecule, ensemble),
        check_rigid_rotor_periodicity(),
    ]
