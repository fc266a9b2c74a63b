"""Run configuration: defaults, file parsing and validation.

The config format is flat ``section.key = value`` text, one assignment
per line, ``#`` starting a comment.  Every key overrides exactly one
parameter; unknown keys are rejected.  The same dotted keys are used by
the command line ``--set key=value`` overrides and recorded verbatim in
run manifests, so a manifest fully determines a rerun.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ._version import __version__
from .dynamics import RelaxationSpec
from .experiments import Setup
from .fid import FidSpec
from .pulse import PulseSpec
from .rotor import MoleculeSpec, RotorConstants
from .thermal import EnsembleSpec


class ConfigError(ValueError):
    """Invalid configuration input (maps to exit code 2)."""


def _boolean(text):
    t = str(text).strip().lower()
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> (default, caster, requirement predicate, requirement text)
SCHEMA = {
    "molecule.B_e": (0.25098, float, lambda v: v > 0, "must be > 0"),
    "molecule.A_e": (5.173949, float, lambda v: v > 0, "must be > 0"),
    "molecule.D_J": (2.1040012e-7, float, None, ""),
    "molecule.D_JK": (3.2944780e-6, float, None, ""),
    "molecule.D_K": (8.7632195e-5, float, None, ""),
    "molecule.mu0": (1.6406, float, lambda v: v > 0, "must be > 0"),
    "ensemble.temperature": (298.0, float, lambda v: v > 0, "must be > 0"),
    "ensemble.j_max": (90, int, lambda v: v >= 0, "must be >= 0"),
    "ensemble.weight_cutoff": (1e-8, float, lambda v: 0 <= v < 1,
                               "must be in [0, 1)"),
    "pulse.E1": (100.0, float, lambda v: v >= 0, "must be >= 0"),
    "pulse.tau": (1.0, float, lambda v: v > 0, "must be > 0"),
    "pulse.t0": (0.0, float, None, ""),
    "pulse.support_half_width": (6.0, float, lambda v: v >= 5,
                                 "must be >= 5"),
    "relaxation.T2": (23.0, float, lambda v: v > 0, "must be > 0"),
    "relaxation.pressure": (0.35, float, lambda v: v >= 0, "must be >= 0"),
    "grid.t_start": (0.0, float, None, ""),
    "grid.t_end": (160.0, float, None, ""),
    "grid.dt_out": (0.01, float, lambda v: v > 0, "must be > 0"),
    "fid.alpha": (1.0, float, lambda v: v >= 0, "must be >= 0"),
    "fid.include_incident": (False, _boolean, None, ""),
    "propagation.dt": (2.5e-4, float, lambda v: v > 0, "must be > 0"),
    "propagation.j_window": (0, int, lambda v: v >= 0,
                             "must be >= 0 (0 selects automatic sizing)"),
    "run.threads": (0, int, lambda v: v >= 0,
                    "must be >= 0 (0 keeps the default)"),
    "output.dir": ("thzorient_out", str, None, ""),
}


@dataclass(frozen=True)
class RunConfig:
    """A fully resolved configuration (dotted keys -> values)."""

    entries: tuple  # ((key, value), ...) in SCHEMA order

    def __getitem__(self, key):
        for k, v in self.entries:
            if k == key:
                return v
        raise KeyError(key)

    def as_dict(self):
        return dict(self.entries)

    @property
    def molecule(self):
        return MoleculeSpec(
            constants=RotorConstants(
                B_e=self["molecule.B_e"], A_e=self["molecule.A_e"],
                D_J=self["molecule.D_J"], D_JK=self["molecule.D_JK"],
                D_K=self["molecule.D_K"],
            ),
            dipole_mu0=self["molecule.mu0"],
        )

    @property
    def ensemble(self):
        return EnsembleSpec(
            temperature=self["ensemble.temperature"],
            J_max=self["ensemble.j_max"],
            weight_cutoff=self["ensemble.weight_cutoff"],
        )

    @property
    def pulse(self):
        return PulseSpec(
            E1=self["pulse.E1"], tau=self["pulse.tau"],
            t0=self["pulse.t0"],
            support_half_width=self["pulse.support_half_width"],
        )

    @property
    def relaxation(self):
        return RelaxationSpec(
            T2=self["relaxation.T2"],
            pressure=self["relaxation.pressure"],
        )

    @property
    def fid(self):
        return FidSpec(
            alpha=self["fid.alpha"],
            include_incident=self["fid.include_incident"],
        )

    @property
    def grid(self):
        t0, t1 = self["grid.t_start"], self["grid.t_end"]
        dt = self["grid.dt_out"]
        n = int(np.floor((t1 - t0) / dt + 1e-9)) + 1
        return t0 + dt * np.arange(n)

    @property
    def j_window(self):
        w = self["propagation.j_window"]
        return None if w == 0 else w

    def setup(self):
        return Setup(
            molecule=self.molecule, ensemble=self.ensemble,
            pulse=self.pulse, relaxation=self.relaxation,
            grid=tuple(self.grid.tolist()),
            dt=self["propagation.dt"], j_window=self.j_window,
        )

    def manifest(self, command, outputs=()):
        return {
            "tool": "thzorient",
            "version": __version__,
            "constants": "CODATA-2018",
            "command": command,
            "config": self.as_dict(),
            "outputs": list(outputs),
        }


def _validate(key, raw):
    if key not in SCHEMA:
        raise ConfigError(f"unknown config key '{key}'")
    default, caster, predicate, requirement = SCHEMA[key]
    try:
        value = caster(raw) if not isinstance(raw, str) or caster is str \
            else caster(raw.strip())
    except (TypeError, ValueError):
        raise ConfigError(
            f"{key}: cannot parse {raw!r} as {caster.__name__}"
        ) from None
    if predicate is not None and not predicate(value):
        raise ConfigError(f"{key} {requirement}")
    return value


def build_config(overrides=None):
    """Resolved config from defaults plus dotted-key overrides."""
    values = {k: v[0] for k, v in SCHEMA.items()}
    for key, raw in (overrides or {}).items():
        values[key] = _validate(key, raw)
    if values["grid.t_end"] <= values["grid.t_start"]:
        raise ConfigError("grid.t_end must be > grid.t_start")
    return RunConfig(entries=tuple((k, values[k]) for k in SCHEMA))


def parse_config_text(text):
    """Dotted-key overrides from config file text."""
    overrides = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(
                f"line {lineno}: expected 'key = value', got {line!r}"
            )
        key, raw = body.split("=", 1)
        overrides[key.strip()] = raw.strip()
    return overrides


def load_config(path=None, set_overrides=()):
    """Config from an optional file plus repeatable key=value sets."""
    overrides = {}
    if path is not None:
        with open(path) as fh:
            overrides.update(parse_config_text(fh.read()))
    for item in set_overrides:
        if "=" not in item:
            raise ConfigError(
                f"--set expects key=value, got {item!r}"
            )
        key, raw = item.split("=", 1)
        overrides[key.strip()] = raw.strip()
    return build_config(overrides)


def write_manifest(manifest, path):
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
