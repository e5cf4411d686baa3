"""Command-line interface.

Subcommands: generate, tortuosity, constrictivity, profile, convergence.
Exit codes: 0 success, 2 bad arguments or config, 3 input format error,
4 estimator undefined (empty phase).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from . import harness
from .constrict import constrictivity, intrusion_volume_profile
from .grid import (
    PhaseVolume,
    UndefinedEstimateError,
    VolumeFormatError,
    VoxelGrid,
    load_volume,
    save_volume,
)
from .morph import opening_volume_profile
from .rngmodel import Box, generate_multiphase
from .tortuosity import tortuosity_estimate

TORTUOSITY_CSV_HEADER = "N,alpha,l,h,tau_hat,connected_inlets,total_inlets"
CONSTRICTIVITY_CSV_HEADER = "N,alpha,p_hat,r_min,r_max,beta"


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, float) else str(x)


def _load_phase(path: str, phase: int) -> VoxelGrid:
    volume = load_volume(path)
    if isinstance(volume, PhaseVolume):
        return volume.select_phase(phase)
    if phase != 1:
        raise ValueError(f"binary volume has only phase 1, got --phase {phase}")
    return volume


def _analysis_window(grid: VoxelGrid, l: float, n_lateral: int, alpha: float,
                     margin_below: int | None = None):
    n_height = harness.height_slices(l, grid.h)
    margin = harness.margin_voxels(n_lateral, alpha)
    return harness.centered_window(grid.dims, n_height, n_lateral, margin, margin_below)


def cmd_generate(args) -> int:
    box_vals = [float(v) for v in args.box.split(",")]
    if len(box_vals) != 6:
        raise ValueError("--box expects x0,y0,z0,x1,y1,z1")
    box = Box(lo=tuple(box_vals[:3]), hi=tuple(box_vals[3:]))
    result = generate_multiphase(
        (args.lambda1, args.lambda2), box, args.h, args.seed,
        point_margin=args.point_margin,
    )
    save_volume(result.volume, args.out)
    if args.graphs:
        for i, g in enumerate(result.graphs, start=1):
            with open(f"{args.graphs}.phase{i}.vertices.csv", "w", newline="") as fh:
                fh.write("id,x,y,z\n")
                for vid, (x, y, z) in enumerate(g.vertices):
                    fh.write(f"{vid},{x!r},{y!r},{z!r}\n")
            with open(f"{args.graphs}.phase{i}.edges.csv", "w", newline="") as fh:
                fh.write("a,b\n")
                for a, b in g.edges:
                    fh.write(f"{a},{b}\n")
    return 0


def cmd_tortuosity(args) -> int:
    grid = _load_phase(args.infile, args.phase)
    w = _analysis_window(grid, args.l, args.N, args.alpha, args.margin_below)
    res = tortuosity_estimate(grid, w)
    print(TORTUOSITY_CSV_HEADER)
    row = (args.N, args.alpha, res.l, res.h, res.tau_hat,
           res.connected_inlet_count, res.inlet_count)
    print(",".join(_fmt(v) for v in row))
    return 0


def cmd_constrictivity(args) -> int:
    grid = _load_phase(args.infile, args.phase)
    w = _analysis_window(grid, args.l, args.N, args.alpha)
    res = constrictivity(grid, w)
    print(CONSTRICTIVITY_CSV_HEADER)
    row = (args.N, args.alpha, res.p_hat, res.r_min_hat, res.r_max_hat, res.beta_hat)
    print(",".join(_fmt(v) for v in row))
    return 0


def cmd_profile(args) -> int:
    grid = _load_phase(args.infile, args.phase)
    radii = [float(v) for v in args.radii.split(",")]
    from .grid import full_grid_window

    w = full_grid_window(grid.dims)
    if args.mode == "opening":
        profile = opening_volume_profile(grid, w, radii)
    else:
        profile = intrusion_volume_profile(grid, w, radii)
    sys.stdout.write(profile.to_csv())
    return 0


def cmd_convergence(args) -> int:
    with open(args.config) as fh:
        config = harness.RunConfig.from_json(fh.read())
    if args.out:
        config = dataclasses.replace(config, out_csv=args.out)
    if config.out_csv is None:
        raise ValueError("no output CSV path: pass --out or set out_csv in the config")
    rows = harness.run_convergence(config)
    report = harness.stabilization_metric(rows, k=min(3, len(config.n_values)))
    for name in ("tau_hat", "r_min", "r_max"):
        worst = max(report.rel_change[name].values())
        print(
            f"{name}: last-{report.k} max relative change {worst:.4g}, "
            f"cross-alpha spread {report.spread[name]:.4g}",
            file=sys.stderr,
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geotort",
        description="Geodesic tortuosity / constrictivity analysis and RNG-model generation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a 2-phase RNG-model volume (MV1)")
    p.add_argument("--lambda1", type=float, required=True)
    p.add_argument("--lambda2", type=float, required=True)
    p.add_argument("--box", required=True, help="x0,y0,z0,x1,y1,z1 physical corners")
    p.add_argument("--h", type=float, default=1.0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--graphs", default=None, help="prefix for vertex/edge CSV dumps")
    p.add_argument("--point-margin", dest="point_margin", type=float, default=50.0)
    p.set_defaults(handler=cmd_generate)

    p = sub.add_parser("tortuosity", help="mean geodesic tortuosity of one phase")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--phase", type=int, default=1)
    p.add_argument("--l", type=float, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--margin-below", dest="margin_below", type=int, default=None)
    p.set_defaults(handler=cmd_tortuosity)

    p = sub.add_parser("constrictivity", help="constrictivity of one phase")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--phase", type=int, default=1)
    p.add_argument("--l", type=float, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.set_defaults(handler=cmd_constrictivity)

    p = sub.add_parser("profile", help="opening/intrusion volume-vs-radius profile")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--phase", type=int, default=1)
    p.add_argument("--mode", choices=("opening", "intrusion"), required=True)
    p.add_argument("--radii", required=True, help="comma-separated physical radii")
    p.set_defaults(handler=cmd_profile)

    p = sub.add_parser("convergence", help="window-growth convergence study")
    p.add_argument("--config", required=True, help="JSON file with RunConfig fields")
    p.add_argument("--out", default=None, help="output CSV (overrides config out_csv)")
    p.set_defaults(handler=cmd_convergence)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except VolumeFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except UndefinedEstimateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
