"""Orientation of a thermal symmetric-top gas by a single-cycle THz
pulse, and the free-induction-decay field it re-emits.

The library propagates every thermally populated |J,K,M> state through
the pulse (RK4 on tridiagonal (K, M) blocks), evolves the ensemble
analytically afterwards, and turns the resulting <cos theta>(t) into
the detected field via its time derivative.  See the demos/ directory
for narrative walkthroughs and the ``thzorient`` command for the CLI.
"""

from ._version import __version__
from .rotor import (BasisState, BlockOperators, CH3I, MoleculeSpec,
                    RotorConstants, build_block, cos_theta_coupling,
                    cos_theta_diagonal, energy)
from .pulse import (PulseSpec, amplitude_for_peak_to_peak, field_at,
                    peak_to_peak, sample, sigma_from_tau)
from .thermal import (EnsembleMember, EnsembleSpec, TruncationError,
                      enumerate_members, partition_function)
from .dynamics import (BlockState, OrientationTrace, RelaxationSpec,
                       ensemble_orientation, free_evolution_trace,
                       propagate_member)
from .fid import (FidSpec, Signal, alpha_from_depth, echo_spacing,
                  exponential_propagation_deviation, fid_signal,
                  spectral_derivative_check)
from .experiments import (FitResult, ScanResult, Setup, detect_revivals,
                          fit_trace, scan_amplitude, scan_tau)

__all__ = [
    "__version__",
    "BasisState", "BlockOperators", "CH3I", "MoleculeSpec",
    "RotorConstants", "build_block", "cos_theta_coupling",
    "cos_theta_diagonal", "energy",
    "PulseSpec", "amplitude_for_peak_to_peak", "field_at",
    "peak_to_peak", "sample", "sigma_from_tau",
    "EnsembleMember", "EnsembleSpec", "TruncationError",
    "enumerate_members", "partition_function",
    "BlockState", "OrientationTrace", "RelaxationSpec",
    "ensemble_orientation", "free_evolution_trace", "propagate_member",
    "FidSpec", "Signal", "alpha_from_depth", "echo_spacing",
    "exponential_propagation_deviation", "fid_signal",
    "spectral_derivative_check",
    "FitResult", "ScanResult", "Setup", "detect_revivals", "fit_trace",
    "scan_amplitude", "scan_tau",
]
