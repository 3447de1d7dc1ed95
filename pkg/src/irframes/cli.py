"""Command-line front end.

Every command writes a JSON report (``report.json`` or a command specific
name) into ``--out``.  Reports carry ``schema_version`` and keep the
non-deterministic timestamp on a single ``generated_at`` line, so reruns
with the same seed differ only there.  The exit status is 0 when every
certificate of the run passed, 1 when one failed and 2 on input or
domain errors.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime
import inspect
import json
import os
import sys

import numpy as np

from .atoms import analysis, coefficients_from_csv, coefficients_to_csv, frame_ratios, predicted_bounds
from .errors import FrameError
from .gallery import ENTRIES, INFLATE, _jsonable, export_plot_data, get_entry, level_lower_bounds
from .geometry import Box, PointSet, covering_index, gap, lower_density, separation, upper_density
from .reconstruct import (
    level_duals,
    read_grid_binary,
    read_grid_csv,
    reconstruct_full,
    write_grid_binary,
    write_grid_csv,
)

SCHEMA_VERSION = "1.0"


# ---------------------------------------------------------------------------
# helpers


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _entry_from_args(args):
    """Gallery entry from a name or a JSON file ``{"entry": ..., "params": {...}}``."""
    name, params = args.entry, {}
    if name.endswith(".json") and os.path.isfile(name):
        with open(name, encoding="utf-8") as fh:
            cfg = json.load(fh)
        name, params = cfg["entry"], dict(cfg.get("params", {}))
    for item in args.param or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"--param expects key=value, got {item!r}")
        params[key] = _parse_value(value)
    if args.j_min is not None or args.j_max is not None:
        if name not in ENTRIES:
            get_entry(name)
        default = params.get("j_range") or inspect.signature(ENTRIES[name]).parameters["j_range"].default
        params["j_range"] = (args.j_min if args.j_min is not None else default[0],
                             args.j_max if args.j_max is not None else default[1])
    entry = get_entry(name, **params)
    if args.probe_step is not None:
        if args.probe_step <= 0:
            raise argparse.ArgumentTypeError("--probe-step must be positive")
        entry = dataclasses.replace(entry, probe_step=args.probe_step)
    return entry


def _ensemble_kw(args):
    if args.ensemble is not None and args.ensemble <= 0:
        raise argparse.ArgumentTypeError("--ensemble must be positive")
    return {"size": args.ensemble, "seed": args.seed}


def _write_report(path, command, body):
    # generated_at stays on its own line; everything else is deterministic
    stamp = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    doc = {"schema_version": SCHEMA_VERSION, "generated_at": stamp, "command": command}
    doc.update(_jsonable(body))
    text = json.dumps(doc, indent=2, sort_keys=False, allow_nan=False) + "\n"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return doc


def _read_signal(path, grid):
    with open(path, "rb") as fh:
        magic = fh.read(8)
    if magic == b"IRFGRID1":
        g, values = read_grid_binary(path)
        if g.shape != grid.shape or g.step != grid.step or not np.allclose(g.lo, grid.lo):
            raise FrameError(f"signal grid {g.to_dict()} does not match the entry grid {grid.to_dict()}")
        return values
    return read_grid_csv(path, grid)


def _summary_line(name, passed, detail=""):
    print(f"{'PASS' if passed else 'FAIL'} {name}{': ' + detail if detail else ''}")


# ---------------------------------------------------------------------------
# commands


def cmd_density(args):
    pts = PointSet.read_csv(args.points)
    sep = separation(pts)
    lo, hi = pts.points.min(axis=0) + args.r, pts.points.max(axis=0) - args.r
    probe_step = args.probe_step or (sep / 8 if np.isfinite(sep) else args.r / 50)
    body = {
        "n_points": len(pts), "dim": pts.dim, "r": args.r,
        "lower_density": lower_density(pts, args.r, args.step),
        "upper_density": upper_density(pts, args.r, args.step),
        "gap": gap(pts, Box(lo, hi), probe_step), "gap_domain": [lo.tolist(), hi.tolist()],
        "probe_step": probe_step, "separation": sep, "passed": True,
    }
    _write_report(os.path.join(args.out, "density.json"), "density", body)
    for key in ("lower_density", "upper_density", "gap", "separation"):
        print(f"{key} {body[key]:.10g}")
    return True


def cmd_covering(args):
    entry = _entry_from_args(args)
    closed = covering_index(entry.tiles, entry.probe, entry.probe_step, mode="closed")
    ae = covering_index(entry.tiles, entry.probe, entry.probe_step, mode="ae")
    passed = ae >= 1
    body = {"entry": entry.name, "probe": entry.probe, "probe_step": entry.probe_step,
            "covering_index_closed": closed, "covering_index_ae": ae, "passed": passed}
    _write_report(os.path.join(args.out, "covering.json"), "covering", body)
    _summary_line(entry.name, passed, f"covering index {ae} (closed tiles {closed})")
    return passed


def cmd_rpu_check(args):
    entry = _entry_from_args(args)
    system = entry.build()
    p, P = system.rpu_bounds["p_hat"], system.rpu_bounds["P_hat"]
    passed = 0 < p <= P < np.inf
    body = {"entry": entry.name, "rpu_bounds": system.rpu_bounds,
            "levels": [str(j) for j in system.indices], "passed": passed}
    _write_report(os.path.join(args.out, "rpu.json"), "rpu-check", body)
    _summary_line(entry.name, passed, f"p_hat={p:.6g} P_hat={P:.6g}")
    return passed


def cmd_frame_bounds(args):
    entry = _entry_from_args(args)
    system = entry.build()
    kw = _ensemble_kw(args)
    F = entry.signals(system, kw["size"], kw["seed"])
    coeffs = analysis(system, F)
    ratios = frame_ratios(system, F, coeffs)
    lower = level_lower_bounds(system, F, coeffs)
    pred = predicted_bounds(system, lower, **entry.expected.get("gluing", {}))
    lo, hi = pred.m * (1 - INFLATE), pred.M * (1 + INFLATE)
    passed = bool(np.all((ratios >= lo) & (ratios <= hi)))
    levels = [{"j": str(l.index), "K": l.K, "kappa": l.kappa, "exp_bounds": l.exp_bounds,
               "lower_used": lower[l.index]} for l in system.levels]
    with open(os.path.join(args.out, "ratios.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["function", "ratio"])
        for i, r in enumerate(ratios):
            w.writerow([i, repr(float(r))])
    body = {"entry": entry.name, "n_functions": len(ratios),
            "empirical": [float(ratios.min()), float(ratios.max())],
            "predicted": pred, "inflate": INFLATE, "levels": levels, "passed": passed}
    _write_report(os.path.join(args.out, "frame_bounds.json"), "frame-bounds", body)
    _summary_line(entry.name, passed, f"ratios [{ratios.min():.6g}, {ratios.max():.6g}] "
                                      f"within [{pred.m:.6g}, {pred.M:.6g}]" if passed else "outside prediction")
    return passed


def _validate_entry(entry, args, outdir):
    kw = _ensemble_kw(args)
    cert, data = entry.validate(kw["size"], kw["seed"])
    os.makedirs(outdir, exist_ok=True)
    body = {"entry": entry.name, "passed": cert.passed, "checks": cert.checks,
            "levels": [{"j": str(l.index), "K": l.K, "kappa": l.kappa, "exp_bounds": l.exp_bounds}
                       for l in data["system"].levels],
            "predicted": data["predicted"], "reconstruction": data["report"].to_dict()}
    _write_report(os.path.join(outdir, "report.json"), "validate", body)
    for name, t in cert.timings.items():
        print(f"  time {name} {t:.2f}s", file=sys.stderr)
    _summary_line(entry.name, cert.passed, ", ".join(cert.failed()))
    return cert, data


def cmd_build(args):
    entry = _entry_from_args(args)
    outdir = args.out
    cert, data = _validate_entry(entry, args, outdir)
    system = data["system"]
    _write_report(os.path.join(outdir, "manifest.json"), "build", entry.manifest(system))
    write_grid_binary(system.grid, data["F"][0], os.path.join(outdir, "example_signal.grid"))
    first = {j: np.asarray(c)[:, 0] for j, c in data["coeffs"].items()}
    coefficients_to_csv(first, os.path.join(outdir, "example_coefficients.csv"))
    export_plot_data(entry, system, data["coeffs"], outdir)
    return cert.passed


def cmd_analyze(args):
    entry = _entry_from_args(args)
    system = entry.build()
    F = _read_signal(args.signal, system.grid)
    coeffs = analysis(system, F)
    coefficients_to_csv(coeffs, os.path.join(args.out, "coefficients.csv"))
    body = {"entry": entry.name, "signal": os.path.basename(args.signal), "n_atoms": system.n_atoms,
            "energy": float(sum(np.sum(np.abs(c) ** 2) for c in coeffs.values())),
            "signal_norm2": float(system.grid.norm2(F)[0]), "passed": True}
    _write_report(os.path.join(args.out, "analyze.json"), "analyze", body)
    _summary_line(entry.name, True, f"{system.n_atoms} coefficients")
    return True


def cmd_reconstruct(args):
    entry = _entry_from_args(args)
    system = entry.build()
    coeffs = coefficients_from_csv(args.coefficients)
    missing = [str(j) for j in system.indices if j not in coeffs]
    if missing:
        raise FrameError(f"coefficient file lacks levels {missing}")
    for l in system.levels:
        if len(coeffs[l.index]) != l.K:
            raise FrameError(f"level {l.index}: {len(coeffs[l.index])} coefficients, expected {l.K}")
    truth = _read_signal(args.truth, system.grid) if args.truth else None
    F, report = reconstruct_full(system, coeffs, level_duals(system, args.dual), pathway=args.pathway,
                                 truth=truth)
    write_grid_binary(system.grid, F, os.path.join(args.out, "reconstruction.grid"))
    write_grid_csv(system.grid, F, os.path.join(args.out, "reconstruction.csv"))
    passed = True
    if truth is not None:
        err = report.relative_error[0]
        passed = err < entry.tolerance
        detail = f"relative error {err:.3g} (tolerance {entry.tolerance:g})"
    else:
        detail = "no reference signal"
    body = {"entry": entry.name, "tolerance": entry.tolerance, "report": report.to_dict(), "passed": passed}
    _write_report(os.path.join(args.out, "reconstruct.json"), "reconstruct", body)
    _summary_line(entry.name, passed, detail)
    return passed


def cmd_validate(args):
    if args.all:
        names = sorted(ENTRIES)
    elif args.entry:
        names = [args.entry]
    else:
        raise argparse.ArgumentTypeError("validate needs an entry or --all")
    ok = True
    for name in names:
        args.entry = name
        entry = _entry_from_args(args)
        outdir = os.path.join(args.out, entry.name) if args.all else args.out
        cert, _ = _validate_entry(entry, args, outdir)
        ok &= cert.passed
    return ok


# ---------------------------------------------------------------------------
# parser


def _add_entry_options(p, optional=False):
    if optional:
        p.add_argument("entry", nargs="?", help="gallery entry name or JSON config file")
    else:
        p.add_argument("entry", help="gallery entry name or JSON config file")
    p.add_argument("--param", action="append", metavar="KEY=VALUE",
                   help="builder override; VALUE is parsed as JSON when possible")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--seed", type=int, default=None, help="ensemble seed")
    common.add_argument("--probe-step", type=float, default=None)
    common.add_argument("--ensemble", type=int, default=None, help="ensemble size")
    common.add_argument("--j-min", type=int, default=None)
    common.add_argument("--j-max", type=int, default=None)

    parser = argparse.ArgumentParser(prog="irframes", description="Frames on irregular grids.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("density", parents=[common], help="densities, gap and separation of a point set")
    p.add_argument("--points", required=True, help="CSV with one point per row")
    p.add_argument("--r", type=float, required=True, help="window half-width")
    p.add_argument("--step", type=float, default=None, help="window centre spacing")
    p.set_defaults(func=cmd_density)

    for name, func, text in [("covering", cmd_covering, "covering index of the entry tiles"),
                             ("rpu-check", cmd_rpu_check, "partition bounds on the grid"),
                             ("frame-bounds", cmd_frame_bounds, "empirical and predicted frame bounds"),
                             ("build", cmd_build, "certificate, manifest and plot data")]:
        p = sub.add_parser(name, parents=[common], help=text)
        _add_entry_options(p)
        p.set_defaults(func=func)

    p = sub.add_parser("analyze", parents=[common], help="frame coefficients of a signal")
    _add_entry_options(p)
    p.add_argument("--signal", required=True, help="binary grid file or grid CSV")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("reconstruct", parents=[common], help="signal from frame coefficients")
    _add_entry_options(p)
    p.add_argument("--coefficients", required=True)
    p.add_argument("--truth", default=None, help="reference signal for the error report")
    p.add_argument("--dual", default="auto", choices=["auto", "canonical", "cg", "tight"])
    p.add_argument("--pathway", default="smooth", choices=["smooth", "raw"])
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("validate", parents=[common], help="consolidated certificate")
    _add_entry_options(p, optional=True)
    p.add_argument("--all", action="store_true", help="every gallery entry")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        os.makedirs(args.out, exist_ok=True)
        ok = args.func(args)
    except (FrameError, argparse.ArgumentTypeError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
