"""Command-line front end.

Subcommands::

    simulate   run one orientation simulation, write trace/FID CSVs
    scan       sweep pulse amplitude or duration, write a JSON summary
    fit        affine-match the simulated FID against a recorded trace
    check      run the self-check oracle suite

Common flags: ``--config PATH`` (flat ``section.key = value`` file),
``--set key=value`` (repeatable override), ``--out DIR``,
``--threads N``.  Exit codes: 0 success, 1 runtime failure, 2 invalid
input.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import diagnostics, dynamics, experiments, fid, pulse
from .config import ConfigError, load_config, write_manifest
from .thermal import TruncationError


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="thzorient",
        description="THz-driven symmetric-top orientation simulator",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="configuration file")
    common.add_argument("--set", action="append", default=[],
                        metavar="KEY=VALUE", dest="overrides",
                        help="override one config key (repeatable)")
    common.add_argument("--out", metavar="DIR",
                        help="output directory (default from config)")
    common.add_argument("--threads", type=int, default=None, metavar="N",
                        help="cap worker threads")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common],
                   help="run one simulation and export CSVs")
    p_scan = sub.add_parser("scan", parents=[common],
                            help="sweep a pulse parameter")
    p_scan.add_argument("--parameter", choices=("amplitude", "tau"),
                        required=True)
    p_scan.add_argument("--values", required=True, metavar="V1,V2,...",
                        help="comma-separated scan values")
    p_scan.add_argument("--save-traces", action="store_true",
                        help="write the orientation trace per value")
    p_fit = sub.add_parser("fit", parents=[common],
                           help="fit the model FID to a data CSV")
    p_fit.add_argument("--data", required=True, metavar="CSV",
                       help="two-column file: delay_ps, signal")
    p_fit.add_argument("--allow-time-shift", action="store_true",
                       help="search a +/-2 ps delay offset")
    sub.add_parser("check", parents=[common],
                   help="run the oracle self-checks")
    return parser


def _apply_threads(args, cfg):
    n = args.threads if args.threads is not None else cfg["run.threads"]
    if n:
        import numba
        numba.set_num_threads(n)


def _out_dir(args, cfg):
    out = Path(args.out) if args.out else Path(cfg["output.dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _run_trace(cfg):
    setup = cfg.setup()
    return setup, setup.run()


def cmd_simulate(args):
    cfg = load_config(args.config, args.overrides)
    _apply_threads(args, cfg)
    out = _out_dir(args, cfg)
    _setup, trace = _run_trace(cfg)
    signal = fid.fid_signal(trace, cfg.fid,
                            cfg.pulse if cfg.fid.include_incident else None)
    trace_path = out / "trace.csv"
    fid_path = out / "fid.csv"
    dynamics.write_csv(trace, trace_path)
    fid.write_csv(signal, fid_path)
    manifest = cfg.manifest("simulate", [trace_path.name, fid_path.name])
    write_manifest(manifest, out / "manifest.json")
    print(f"wrote {trace_path}, {fid_path}, {out / 'manifest.json'}")
    return 0


def cmd_scan(args):
    cfg = load_config(args.config, args.overrides)
    _apply_threads(args, cfg)
    out = _out_dir(args, cfg)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse scan values {args.values!r}")
    if not values:
        raise ConfigError("scan needs at least one value")
    setup = cfg.setup()
    total = len(values)

    def progress(i, value):
        print(f"[{i + 1}/{total}] {args.parameter} = {value:g}",
              file=sys.stderr, flush=True)

    runner = (experiments.scan_amplitude if args.parameter == "amplitude"
              else experiments.scan_tau)

    written = []

    def on_trace(i, value, trace):
        progress(i, value)
        if args.save_traces:
            path = out / f"trace_{args.parameter}_{value:g}.csv"
            dynamics.write_csv(trace, path)
            written.append(path.name)

    result = runner(setup, values, on_trace=on_trace)
    scan_path = out / "scan.json"
    with open(scan_path, "w") as fh:
        json.dump(result.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    manifest = cfg.manifest(
        f"scan:{args.parameter}:{args.values}",
        [scan_path.name, *written],
    )
    write_manifest(manifest, out / "manifest.json")
    print(f"wrote {scan_path}")
    return 0


def _read_data_csv(path):
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.strip()
            if not body:
                continue
            parts = body.split(",")
            if len(parts) < 2:
                raise ConfigError(
                    f"{path}: line {lineno}: expected two comma-separated "
                    f"columns, got {line!r}"
                )
            try:
                rows.append((float(parts[0]), float(parts[1])))
            except ValueError:
                if lineno == 1:
                    continue  # header row
                raise ConfigError(
                    f"{path}: line {lineno}: non-numeric row {line!r}"
                ) from None
    if len(rows) < 2:
        raise ConfigError(f"{path}: fewer than 2 data rows")
    data = np.asarray(rows)
    order = np.argsort(data[:, 0], kind="stable")
    return data[order, 0], data[order, 1]


def cmd_fit(args):
    cfg = load_config(args.config, args.overrides)
    _apply_threads(args, cfg)
    out = _out_dir(args, cfg)
    t, v = _read_data_csv(args.data)
    data = fid.Signal(t, v)
    _setup, trace = _run_trace(cfg)
    model = fid.fid_signal(trace, cfg.fid,
                           cfg.pulse if cfg.fid.include_incident else None)
    result = experiments.fit_trace(model, data,
                                   allow_time_shift=args.allow_time_shift)
    fit_path = out / "fit.json"
    with open(fit_path, "w") as fh:
        json.dump(result.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    # overlay on the overlapping window of the model grid
    lo = max(model.grid[0], data.grid[0] + result.time_shift)
    hi = min(model.grid[-1], data.grid[-1] + result.time_shift)
    sel = (model.grid >= lo) & (model.grid <= hi)
    tg = model.grid[sel]
    scaled = result.scale * model.values[sel] + result.offset
    resampled = np.interp(tg, data.grid + result.time_shift, data.values)
    overlay_path = out / "fit_overlay.csv"
    np.savetxt(overlay_path,
               np.column_stack([tg, scaled, resampled]),
               delimiter=",", header="time_ps,model_scaled,data",
               comments="", fmt="%.17g")
    manifest = cfg.manifest(f"fit:{args.data}",
                            [fit_path.name, overlay_path.name])
    write_manifest(manifest, out / "manifest.json")
    print(f"scale={result.scale:.6g} offset={result.offset:.6g} "
          f"residual_rms={result.residual_rms:.6g} "
          f"time_shift={result.time_shift:.6g} ps")
    return 0


def cmd_check(args):
    cfg = load_config(args.config, args.overrides)
    _apply_threads(args, cfg)
    results = diagnostics.run_all(
        molecule=cfg.molecule, ensemble=cfg.ensemble, pulse=cfg.pulse,
        dt=cfg["propagation.dt"],
    )
    ok = True
    for r in results:
        print(r.line())
        ok = ok and r.passed
    return 0 if ok else 1


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    handler = {
        "simulate": cmd_simulate,
        "scan": cmd_scan,
        "fit": cmd_fit,
        "check": cmd_check,
    }[args.command]
    try:
        return handler(args)
    except (ConfigError, TruncationError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
