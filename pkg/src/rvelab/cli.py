"""Command-line interface.

Subcommands: pack, draw, voxelize, solve, expansion-check, autocorr, and
the study group (run / summarize / reference / vf).  Study exit codes:
0 success, 2 partial (some realizations failed), 1 fatal.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import expansion, stats, study
from .geometry import Cell, Species, save_configuration, load_configuration
from .packing import PackingParams, mcm_pack, rsa_pack, sam_pack, species_for_count
from .raster import load_grid, measured_volume_fraction, save_grid, voxelize
from .sampling import ProtocolSpec, draw
from .solver import MaterialPair, SolverSettings, apparent_tensor


def _add_pack(sub):
    p = sub.add_parser("pack", help="generate one packed configuration")
    p.add_argument("--shape", required=True,
                   choices=["disk", "sphere", "spherocylinder"])
    p.add_argument("--phi", type=float, required=True)
    p.add_argument("--isolation", type=float, default=1.2)
    p.add_argument("--count", type=int, help="particle count (disks/spheres)")
    p.add_argument("--cell", type=float, default=1.0, help="cell edge length")
    p.add_argument("--aspect", type=float, default=20.0,
                   help="fiber aspect ratio (spherocylinders)")
    p.add_argument("--method", choices=["mcm", "rsa", "sam"], default=None,
                   help="defaults to mcm (disks/spheres) or sam (fibers)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)


def _run_pack(args) -> int:
    params = PackingParams(target_phi=args.phi, isolation_factor=args.isolation,
                           seed=args.seed)
    method = args.method or ("sam" if args.shape == "spherocylinder" else "mcm")
    if args.shape == "spherocylinder":
        if method != "sam":
            print("fibers pack via sam", file=sys.stderr)
            return 1
        # unit fiber length; the cell edge is measured in fiber lengths
        nominal = Species("spherocylinder", 0.5 / args.aspect, length=1.0)
        config, report = sam_pack(Cell(3, args.cell), nominal, params)
    else:
        if not args.count:
            print("--count is required for disks/spheres", file=sys.stderr)
            return 1
        species = species_for_count(args.shape, args.phi, args.count, args.cell)
        packer = mcm_pack if method == "mcm" else rsa_pack
        config, report = packer(Cell(species.dim, args.cell), species, params)
    save_configuration(config, args.out)
    status = "ok" if report.success else f"FAILED: {report.failure_reason}"
    print(f"pack {status}: {len(config)} particles, "
          f"energy={report.final_energy:.3e}, wrote {args.out}")
    return 0 if report.success else 2


def _add_draw(sub):
    p = sub.add_parser("draw", help="draw one protocol realization")
    p.add_argument("--protocol", required=True,
                   choices=["periodized", "snapshot", "poisson"])
    p.add_argument("--shape", default="sphere",
                   choices=["disk", "sphere", "spherocylinder"])
    p.add_argument("--K", type=int, required=True,
                   help="size index (K, or L/l for fibers)")
    p.add_argument("--phi", type=float, default=0.30)
    p.add_argument("--isolation", type=float, default=1.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)


def _run_draw(args) -> int:
    spec = ProtocolSpec(protocol=args.protocol, shape=args.shape, size=args.K,
                        phi=args.phi, isolation=args.isolation)
    config = draw(spec, args.seed)
    save_configuration(config, args.out)
    print(f"draw ok: {len(config)} particles on cell edge "
          f"{config.cell.edge}, wrote {args.out}")
    return 0


def _add_voxelize(sub):
    p = sub.add_parser("voxelize", help="rasterize a configuration")
    p.add_argument("--config", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True, help="output stem (.raw + .json)")


def _run_voxelize(args) -> int:
    config = load_configuration(args.config)
    grid = voxelize(config, args.n)
    raw, sidecar = save_grid(grid, args.out)
    print(f"voxelize ok: n={grid.n}^{grid.dim}, "
          f"phi_measured={measured_volume_fraction(grid):.6f}, "
          f"wrote {raw} {sidecar}")
    return 0


def _add_solve(sub):
    p = sub.add_parser("solve", help="apparent conductivity of a voxel grid")
    p.add_argument("--grid", required=True, help="grid stem/.raw/.json path")
    p.add_argument("--alpha1", type=float, default=1.2,
                   help="inclusion conductivity")
    p.add_argument("--alpha2", type=float, default=0.2,
                   help="matrix conductivity")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--metric", choices=["update", "residual"], default="update")
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--out", required=True)


def _run_solve(args) -> int:
    grid = load_grid(args.grid)
    settings = SolverSettings(tolerance=args.tol, metric=args.metric,
                              max_iters=args.max_iters)
    t0 = time.perf_counter()
    result = apparent_tensor(grid, MaterialPair(args.alpha1, args.alpha2), settings)
    wall = time.perf_counter() - t0
    payload = {
        "tensor": result.tensor.tolist(),
        "a_bar": result.a_bar,
        "iterations": result.iterations,
        "residual": result.residual,
        "converged": result.converged,
        "asymmetry": result.asymmetry,
        "phi_measured": measured_volume_fraction(grid),
        "wall_time_s": wall,
    }
    Path(args.out).write_text(json.dumps(payload, indent=2))
    print(f"solve {'ok' if result.converged else 'NOT CONVERGED'}: "
          f"a_bar={result.a_bar:.6f}, iters={result.iterations}, "
          f"residual={result.residual:.2e}, wrote {args.out}")
    return 0 if result.converged else 2


def _add_expansion(sub):
    p = sub.add_parser("expansion-check",
                       help="solver-vs-first-order deviation table")
    p.add_argument("--grid", help="voxel grid stem (defaults to a K=2 sphere draw)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rho0", type=float, default=0.2)
    p.add_argument("--halvings", type=int, default=3)
    p.add_argument("--out", required=True)


def _run_expansion(args) -> int:
    if args.grid:
        grid = load_grid(args.grid)
    else:
        spec = ProtocolSpec(protocol="periodized", shape="sphere", size=2, phi=0.30)
        grid = voxelize(draw(spec, args.seed), 32)
    rows = expansion.verify_expansion_order(grid, rho0=args.rho0,
                                            halvings=args.halvings)
    stats.write_curve_csv(args.out, rows,
                          ["rho", "a_solver", "a_first_order", "deviation"])
    ratios = [rows[i + 1]["deviation"] / rows[i]["deviation"]
              for i in range(len(rows) - 1)]
    print(f"expansion-check ok: deviation ratios {['%.3f' % r for r in ratios]}, "
          f"wrote {args.out}")
    return 0


def _add_autocorr(sub):
    p = sub.add_parser("autocorr", help="radial autocorrelation of one draw")
    p.add_argument("--shape", default="sphere",
                   choices=["disk", "sphere", "spherocylinder"])
    p.add_argument("--protocol", default="periodized",
                   choices=["periodized", "snapshot", "poisson"])
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--phi", type=float, default=0.30)
    p.add_argument("--voxels-per-K", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)


def _run_autocorr(args) -> int:
    cfg = study.StudyConfig(
        shape=args.shape, phi=args.phi, sizes=[args.K],
        protocols=[args.protocol],
        resolution_rule={"voxels_per_K": args.voxels_per_K},
        output_dir=".")
    study.emit_autocorrelation_csv(cfg, args.protocol, args.K, args.seed, args.out)
    print(f"autocorr ok: wrote {args.out}")
    return 0


def _add_study(sub):
    p = sub.add_parser("study", help="Monte-Carlo studies")
    ss = p.add_subparsers(dest="study_command", required=True)
    run = ss.add_parser("run", help="run a study config (.json or .toml)")
    run.add_argument("config")
    summ = ss.add_parser("summarize", help="recompute summaries of a study dir")
    summ.add_argument("dir")
    summ.add_argument("--reference", type=float, default=None)
    ref = ss.add_parser("reference", help="compute the reference value")
    ref.add_argument("config")
    ref.add_argument("--size", type=int, default=None)
    ref.add_argument("--realizations", type=int, default=None)
    vf = ss.add_parser("vf", help="geometry-only volume-fraction sweep")
    vf.add_argument("config")


def _run_study(args) -> int:
    if args.study_command == "run":
        config = study.load_config(args.config)
        out, failures = study.run_study(config)
        print(f"study run: wrote {out}, failures={failures}")
        return 2 if failures else 0
    if args.study_command == "summarize":
        rows = study.summarize_study(args.dir, args.reference)
        print(f"study summarize: {len(rows)} summary rows")
        return 0
    if args.study_command == "reference":
        config = study.load_config(args.config)
        summary = study.compute_reference(config, args.size, args.realizations)
        print(f"study reference: {stats.format_summary(summary)} "
              f"(N={summary.n})")
        return 0
    config = study.load_config(args.config)
    out, failures = study.run_vf_sweep(config)
    print(f"study vf: wrote {out}, failures={failures}")
    return 2 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rvelab",
        description="Random composite microstructures, FFT conductivity "
                    "solves, and homogenization-error statistics.")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_pack(sub)
    _add_draw(sub)
    _add_voxelize(sub)
    _add_solve(sub)
    _add_expansion(sub)
    _add_autocorr(sub)
    _add_study(sub)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "pack": _run_pack,
        "draw": _run_draw,
        "voxelize": _run_voxelize,
        "solve": _run_solve,
        "expansion-check": _run_expansion,
        "autocorr": _run_autocorr,
        "study": _run_study,
    }
    try:
        return handlers[args.command](args)
    except Exception as err:  # noqa: BLE001 - CLI boundary
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
