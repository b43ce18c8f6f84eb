"""Command-line interface: generate / perturb / optimize / report.

Exit codes: 0 success, 1 input error, 2 optimization did not converge.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from . import fixtures, io, optimizer, quality
from .mesh import MeshError, classify_boundary_vertices, extract_boundary

log = logging.getLogger("hexfit")

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_NOT_CONVERGED = 2


@dataclass
class RunConfig:
    """Optimization run settings; defaults follow the published pipeline
    constants (theta step 0.01, history 15, rho0 1e-8, c1 1e-4, floor 1e-8)."""

    tri: str
    hex: str
    features: str | None = None
    out: str | None = None
    report: str | None = None
    convergence_log: str | None = None
    theta_step: float = 0.01
    history: int = 15
    rho0: float = 1e-8
    c1: float = 1e-4
    eta: float = 0.5
    step_floor: float = 1e-8
    residual_tol: float = 1e-8
    smooth_period: int = 100
    budget: int = 20000
    method: str = "lbfgs"
    seed: int = 0

    def optimizer_config(self) -> optimizer.OptimizeConfig:
        return optimizer.OptimizeConfig(
            theta_step=self.theta_step, history=self.history, rho0=self.rho0,
            c1=self.c1, eta=self.eta, step_floor=self.step_floor,
            residual_tol=self.residual_tol, smooth_period=self.smooth_period,
            level_budget=self.budget, method=self.method)


def _load_problem(tri_path, hex_path, features_path):
    surface = io.read_tri_obj(tri_path)
    hexmesh = io.read_hex_vtk(hex_path)
    if features_path:
        sidecar = io.read_features(features_path)
    else:
        sidecar = io.FeatureSidecar()
    surface, bindings = io.apply_features(surface, sidecar)
    boundary = extract_boundary(hexmesh)
    binding = classify_boundary_vertices(hexmesh, boundary, surface, bindings)
    return surface, hexmesh, boundary, binding


def cmd_optimize(config: RunConfig) -> int:
    try:
        surface, hexmesh, boundary, binding = _load_problem(
            config.tri, config.hex, config.features)
    except (OSError, io.ParseError, MeshError) as e:
        print(f"hexfit: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR

    pre = quality.quality_report(hexmesh, surface, binding)
    result = optimizer.optimize(hexmesh, surface, binding,
                                config.optimizer_config(), boundary)
    post = result.report
    status = "converged" if result.converged else "failed"

    if config.out:
        io.write_hex_vtk(config.out, result.mesh)
    if config.report:
        io.write_report(config.report, [("pre", pre), ("post", post)], status=status)
    if config.convergence_log:
        io.write_convergence(config.convergence_log, result.convergence_log)

    ok = result.converged and post.min_sj > 0.0 and post.max_dist <= config.residual_tol
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


def cmd_report(tri, hex_path, features, report_path) -> int:
    try:
        surface, hexmesh, _, binding = _load_problem(tri, hex_path, features)
    except (OSError, io.ParseError, MeshError) as e:
        print(f"hexfit: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    rep = quality.quality_report(hexmesh, surface, binding)
    io.write_report(report_path, [("post", rep)])
    return EXIT_OK


def cmd_perturb(hex_path, out_path, magnitude, seed) -> int:
    try:
        hexmesh = io.read_hex_vtk(hex_path)
    except (OSError, io.ParseError, MeshError) as e:
        print(f"hexfit: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    perturbed = fixtures.perturb_interior(hexmesh, magnitude, seed)
    io.write_hex_vtk(out_path, perturbed)
    return EXIT_OK


def cmd_generate(name, resolution, out_dir) -> int:
    try:
        generator = fixtures.GENERATORS[name]
    except KeyError:
        print(f"hexfit: unknown fixture {name!r}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    surface, hexmesh, sidecar = generator(resolution)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_tri_obj(out / f"{name}.obj", surface)
    io.write_hex_vtk(out / f"{name}.vtk", hexmesh)
    io.write_features(out / f"{name}.features", sidecar)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hexfit",
        description="All-hex mesh quality optimization with exact surface fitting")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a named test fixture")
    gen.add_argument("fixture", choices=sorted(fixtures.GENERATORS))
    gen.add_argument("--resolution", type=int, default=3)
    gen.add_argument("--out-dir", default=".")

    per = sub.add_parser("perturb", help="randomly tangle interior vertices")
    per.add_argument("--hex", required=True)
    per.add_argument("--out", required=True)
    per.add_argument("--magnitude", type=float, default=0.5,
                     help="displacement bound as a fraction of the local mean edge length")
    per.add_argument("--seed", type=int, default=0)

    opt = sub.add_parser("optimize", help="run the full optimization pipeline")
    opt.add_argument("--tri", required=True)
    opt.add_argument("--hex", required=True)
    opt.add_argument("--features")
    opt.add_argument("--out", help="optimized mesh (VTK)")
    opt.add_argument("--report", help="pre/post quality report (CSV)")
    opt.add_argument("--log", help="convergence log (CSV)")
    opt.add_argument("--theta-step", type=float, default=0.01)
    opt.add_argument("--optimizer", choices=["lbfgs", "gd"], default="lbfgs")
    opt.add_argument("--history", type=int, default=15)
    opt.add_argument("--eta", type=float, default=0.5)
    opt.add_argument("--budget", type=int, default=20000)
    opt.add_argument("--seed", type=int, default=0)

    rep = sub.add_parser("report", help="evaluate quality without optimizing")
    rep.add_argument("--tri", required=True)
    rep.add_argument("--hex", required=True)
    rep.add_argument("--features")
    rep.add_argument("--report", required=True)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="hexfit: %(message)s")
    args = build_parser().parse_args(argv)
    if args.command == "generate":
        return cmd_generate(args.fixture, args.resolution, args.out_dir)
    if args.command == "perturb":
        return cmd_perturb(args.hex, args.out, args.magnitude, args.seed)
    if args.command == "report":
        return cmd_report(args.tri, args.hex, args.features, args.report)
    config = RunConfig(
        tri=args.tri, hex=args.hex, features=args.features, out=args.out,
        report=args.report, convergence_log=args.log,
        theta_step=args.theta_step, history=args.history, eta=args.eta,
        budget=args.budget, method=args.optimizer, seed=args.seed)
    return cmd_optimize(config)


if __name__ == "__main__":
    sys.exit(main())
