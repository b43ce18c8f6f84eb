"""Constrained optimization loop: augmented Lagrangian, L-BFGS, Armijo,
multiplier/penalty updates, smart Laplacian smoothing, and the threshold
schedule with warm starts.

The threshold starts at 0 and is raised by a fixed step each time the mesh
reaches the level (every hex at or above the threshold, all boundary
residuals below tolerance). The last level that satisfied both conditions is
the returned result.
"""

from __future__ import annotations

import logging
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import projection, quality
from .mesh import (
    CLASS_CORNER, CLASS_FACE, CLASS_SHARP_EDGE,
    BoundarySurface, HexMesh, SurfaceBinding, TriSurface,
    vertex_hexes, vertex_neighbors,
)

log = logging.getLogger(__name__)

CURVATURE_FALLBACK = 1e8
CURVATURE_SKIP_REL = 1e-12
SJ_LEVEL_TOL = 1e-12
RESJ_SUM_TOL_PER_HEX = 1e-12
# Penalty ceiling: beyond ~1e8 the quadratic term drowns the quality term in
# double precision and the Armijo step required for stability falls under the
# step floor. The multipliers finish driving the residuals below tolerance
# once the ceiling is reached.
RHO_MAX = 1e8


@dataclass
class ALParams:
    """State of the augmented-Lagrangian reformulation."""

    theta: float
    rho: float
    lam: np.ndarray              # (N_s, 3) multipliers, boundary-vertex order
    c1: float = 1e-4
    eta: float = 0.5
    step_floor: float = 1e-8

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must be in [0, 1]")
        if not 0.0 < self.c1 < 1.0:
            raise ValueError("c1 must be in (0, 1)")


class LbfgsHistory:
    """Ring buffer of (s, y, rho) curvature pairs, newest last.

    Also tracks gamma = s.y / y.y from the most recent well-conditioned pair:
    the initial Hessian scaling of the two-loop recursion. It belongs to the
    update, not the buffer, so it survives clear() and is maintained even with
    m = 0 (where the recursion degenerates to scaled gradient descent).
    """

    def __init__(self, m: int = 15):
        self.m = m
        self.pairs: deque[tuple[np.ndarray, np.ndarray, float]] = deque(maxlen=max(m, 1))
        self.gamma = 1.0

    def __len__(self) -> int:
        return len(self.pairs)

    def clear(self) -> None:
        self.pairs.clear()

    def push(self, s: np.ndarray, y: np.ndarray) -> None:
        ys = float(np.dot(y, s))
        if ys <= CURVATURE_SKIP_REL * np.linalg.norm(y) * np.linalg.norm(s):
            rho = CURVATURE_FALLBACK
        else:
            rho = 1.0 / ys
            yy = float(np.dot(y, y))
            if yy > 0.0:
                self.gamma = ys / yy
        if self.m > 0:
            self.pairs.append((s.copy(), y.copy(), rho))


@dataclass
class LogRecord:
    iteration: int
    energy: float
    min_sj: float
    max_dist: float
    step: float
    theta: float
    rho: float
    wall_time: float


@dataclass
class ConvergenceLog:
    records: list[LogRecord] = field(default_factory=list)

    def append(self, rec: LogRecord) -> None:
        if self.records and rec.iteration <= self.records[-1].iteration:
            raise ValueError("iteration indices must be strictly increasing")
        self.records.append(rec)


def al_energy_and_gradient(vertices: np.ndarray, hexes: np.ndarray,
                           binding: SurfaceBinding, params: ALParams,
                           spread_gradient: bool = False,
                           with_gradient: bool = True):
    """Augmented-Lagrangian value and gradient over all vertex coordinates.

    L = -sum rehqj + sum_i [lam_i . r_i + rho/2 |r_i|^2] with r_i the
    boundary residual against the (fixed) targets.
    """
    from . import _kernels

    energy, grad = _kernels.rehqj_energy_gradient(
        vertices, hexes, params.theta, spread_gradient=spread_gradient,
        with_gradient=with_gradient)
    residuals = vertices[binding.boundary_vertices] - binding.targets
    value = (-energy
             + float((params.lam * residuals).sum())
             + 0.5 * params.rho * float((residuals ** 2).sum()))
    if not with_gradient:
        return value, None
    total = -grad
    total[binding.boundary_vertices] += params.lam + params.rho * residuals
    return value, total


def al_energy(vertices: np.ndarray, hexes: np.ndarray, binding: SurfaceBinding,
              params: ALParams) -> float:
    """Energy-only evaluation (used inside the line search)."""
    from . import _kernels

    energy, _ = _kernels.rehqj_energy_gradient(vertices, hexes, params.theta,
                                               with_gradient=False)
    residuals = vertices[binding.boundary_vertices] - binding.targets
    return (-energy
            + float((params.lam * residuals).sum())
            + 0.5 * params.rho * float((residuals ** 2).sum()))


def lbfgs_direction(gradient: np.ndarray, history: LbfgsHistory) -> np.ndarray:
    """Descent direction from the two-loop recursion applied to -gradient.

    Empty history yields steepest descent. Non-finite intermediates reset the
    history and fall back to steepest descent.
    """
    q = gradient.copy()
    pairs = list(history.pairs)
    alphas = []
    for s, y, rho in reversed(pairs):
        alpha = rho * float(np.dot(s, q))
        q -= alpha * y
        alphas.append(alpha)
    r = history.gamma * q
    for (s, y, rho), alpha in zip(pairs, reversed(alphas)):
        beta = rho * float(np.dot(y, r))
        r += s * (alpha - beta)
    if not np.all(np.isfinite(r)):
        log.warning("non-finite two-loop intermediate; resetting history")
        history.clear()
        return -gradient
    return -r


@dataclass
class ArmijoResult:
    step: float
    sufficient: bool             # Armijo inequality satisfied at the step
    evaluations: int


def armijo_search(energy_fn, value0: float, slope0: float, params: ALParams) -> ArmijoResult:
    """Backtracking line search for the sufficient-decrease condition.

    energy_fn(a) evaluates the objective at the trial step a; slope0 is the
    directional derivative d . grad at the current point (must be < 0 for a
    true descent direction). When the step falls to the floor it is accepted
    regardless, with a warning, to keep the multiplier dynamics progressing.
    """
    a = 1.0
    evals = 0
    while True:
        evals += 1
        trial = energy_fn(a)
        if np.isfinite(trial) and trial - value0 <= params.c1 * a * slope0:
            return ArmijoResult(a, True, evals)
        a *= params.eta
        if a <= params.step_floor:
            log.debug("line search hit the step floor (%g)", a)
            return ArmijoResult(a, False, evals)


def update_multipliers_and_penalty(params: ALParams, binding: SurfaceBinding,
                                   hexmesh: HexMesh) -> ALParams:
    """lam_i += rho * r_i; rho doubles when every hex has reached the threshold."""
    residuals = hexmesh.vertices[binding.boundary_vertices] - binding.targets
    params.lam = params.lam + params.rho * residuals
    n_h = len(hexmesh.hexes)
    resj_sum = quality.mesh_resj_sum(hexmesh, params.theta)
    if abs(resj_sum - n_h * params.theta) <= RESJ_SUM_TOL_PER_HEX * n_h:
        params.rho = min(params.rho * 2.0, RHO_MAX)
    return params


class _SmoothingContext:
    """Precomputed adjacency for repeated smoothing sweeps."""

    def __init__(self, hexmesh: HexMesh, binding: SurfaceBinding,
                 surface: TriSurface, bvh: projection.TriangleBVH):
        self.hexes = hexmesh.hexes
        self.neighbors = vertex_neighbors(hexmesh)
        self.incident = vertex_hexes(hexmesh)
        self.binding = binding
        self.surface = surface
        self.bvh = bvh
        self.row = {int(v): i for i, v in enumerate(binding.boundary_vertices)}

    def project_to_feature(self, vertex: int, point: np.ndarray) -> np.ndarray:
        row = self.row[vertex]
        cls = self.binding.classes[row]
        if cls == CLASS_CORNER:
            return self.surface.vertices[self.binding.corner_index[row]].copy()
        if cls == CLASS_SHARP_EDGE:
            best = None
            for ci in self.binding.curve_sets[row]:
                q, d2, _ = projection.closest_point_on_curve(
                    point, self.surface.curve_points(ci))
                if best is None or d2 < best[1]:
                    best = (q, d2)
            return best[0]
        _, q, _ = self.bvh.query(point)
        return q


def smart_laplacian_smoothing(vertices: np.ndarray, ctx: _SmoothingContext) -> int:
    """One sweep of accept-if-not-worse centroid smoothing, in index order.

    Boundary candidates are projected back to their bound feature before the
    quality test. Returns the number of accepted moves. The minimum scaled
    Jacobian over any hex never decreases.
    """
    from . import _kernels

    accepted = 0
    for v in range(len(vertices)):
        nbrs = ctx.neighbors.get(v)
        if nbrs is None:
            continue
        candidate = vertices[nbrs].mean(axis=0)
        if v in ctx.row:
            candidate = ctx.project_to_feature(v, candidate)
        if np.array_equal(candidate, vertices[v]):
            continue
        cells = ctx.hexes[ctx.incident[v]]
        _, sj_before, _, _ = _kernels.hex_quality_samples(vertices, cells)
        old = vertices[v].copy()
        vertices[v] = candidate
        _, sj_after, _, _ = _kernels.hex_quality_samples(vertices, cells)
        if sj_after.min() >= sj_before.min():
            accepted += 1
        else:
            vertices[v] = old
    return accepted


@dataclass
class OptimizeConfig:
    theta_step: float = 0.01
    history: int = 15
    rho0: float = 1e-8
    c1: float = 1e-4
    eta: float = 0.5
    step_floor: float = 1e-8
    residual_tol: float = 1e-8
    smooth_period: int = 100
    level_budget: int = 20000
    method: str = "lbfgs"        # "lbfgs" or "gd"
    reset_multipliers: bool = False
    spread_gradient: bool = False
    theta_max: float = 1.0

    def __post_init__(self):
        for name in ("theta_step", "rho0", "c1", "eta", "step_floor", "residual_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.method not in ("lbfgs", "gd"):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass
class OptimizeResult:
    mesh: HexMesh
    converged: bool              # at least the first threshold level succeeded
    completed_levels: list[int]  # successful levels, units of theta_step
    final_theta: float
    total_iterations: int
    convergence_log: ConvergenceLog
    report: quality.QualityReport
    armijo_floor_steps: int      # accepted steps at the floor
    smoothing_violations: int    # sweeps that lowered the mesh-wide min SJ


def optimize(hexmesh: HexMesh, surface: TriSurface, binding: SurfaceBinding,
             config: OptimizeConfig | None = None,
             boundary: BoundarySurface | None = None) -> OptimizeResult:
    """Full pipeline: per-level inner loop, then threshold increment with a
    warm start; returns the last level snapshot meeting both exit conditions.
    """
    config = config or OptimizeConfig()
    working = hexmesh.copy()
    hexes = working.hexes
    verts = working.vertices
    n_h = len(hexes)
    bvh = projection.TriangleBVH(surface)
    ctx = _SmoothingContext(working, binding, surface, bvh)
    diag = surface.bbox_diagonal

    params = ALParams(
        theta=0.0, rho=config.rho0,
        lam=np.zeros((len(binding.boundary_vertices), 3)),
        c1=config.c1, eta=config.eta, step_floor=config.step_floor)
    history = LbfgsHistory(config.history if config.method == "lbfgs" else 0)
    clog = ConvergenceLog()
    t0 = time.perf_counter()

    snapshot = None
    completed: list[int] = []
    armijo_floor = 0
    smoothing_violations = 0
    global_iter = 0
    level = 0
    max_level = int(round(config.theta_max / config.theta_step))

    while level <= max_level:
        theta = level * config.theta_step
        params.theta = theta
        history.clear()
        if config.reset_multipliers:
            params.lam = np.zeros_like(params.lam)
            params.rho = config.rho0
        converged_level = False
        level_floor_start = armijo_floor

        for k in range(config.level_budget):
            projection.compute_targets(binding, verts, surface, bvh)
            residuals = verts[binding.boundary_vertices] - binding.targets
            max_res = float(np.linalg.norm(residuals, axis=1).max())
            _, sj, _, _ = quality.mesh_quality_samples(working)
            min_sj = float(sj.min(axis=1).min())
            if max_res <= config.residual_tol and min_sj >= theta - SJ_LEVEL_TOL:
                converged_level = True
                break

            value, grad = al_energy_and_gradient(
                verts, hexes, binding, params,
                spread_gradient=config.spread_gradient)
            if not np.isfinite(value):
                raise FloatingPointError("non-finite energy; corrupt input mesh?")

            g = grad.reshape(-1)
            d = lbfgs_direction(g, history)
            slope = float(np.dot(d, g))
            if slope >= 0.0:
                d = -g
                slope = -float(np.dot(g, g))

            direction = d.reshape(-1, 3)

            def trial_energy(a):
                return al_energy(verts + a * direction, hexes, binding, params)

            result = armijo_search(trial_energy, value, slope, params)
            if not result.sufficient:
                # Numerical breakdown: accept the floored step but drop the
                # (evidently unreliable) curvature history.
                armijo_floor += 1
                history.clear()
            verts += result.step * direction

            if result.sufficient:
                # Curvature pair from the same objective (targets and
                # multipliers fixed), so y.s reflects true curvature. With
                # m = 0 this only refreshes the gamma scaling.
                _, grad_new = al_energy_and_gradient(
                    verts, hexes, binding, params,
                    spread_gradient=config.spread_gradient)
                history.push(result.step * d, grad_new.reshape(-1) - g)

            update_multipliers_and_penalty(params, binding, working)

            if k % config.smooth_period == 0:
                _, sj_pre, _, _ = quality.mesh_quality_samples(working)
                smart_laplacian_smoothing(verts, ctx)
                _, sj_post, _, _ = quality.mesh_quality_samples(working)
                if sj_post.min(axis=1).min() < sj_pre.min(axis=1).min():
                    smoothing_violations += 1

            clog.append(LogRecord(
                iteration=global_iter, energy=value, min_sj=min_sj,
                max_dist=max_res / diag, step=result.step, theta=theta,
                rho=params.rho, wall_time=time.perf_counter() - t0))
            global_iter += 1
        level_floor = armijo_floor - level_floor_start
        if level_floor:
            log.warning("threshold %.2f: %d floored line-search steps",
                        theta, level_floor)
        if converged_level:
            snapshot = (verts.copy(), level)
            completed.append(level)
            level += 1
        else:
            break

    if snapshot is None:
        final_mesh = working
        converged = False
        final_theta = 0.0
    else:
        final_mesh = HexMesh(snapshot[0], hexes.copy())
        converged = True
        final_theta = snapshot[1] * config.theta_step

    projection.compute_targets(binding, final_mesh.vertices, surface, bvh)
    report = quality.quality_report(final_mesh, surface, binding)
    return OptimizeResult(
        mesh=final_mesh, converged=converged, completed_levels=completed,
        final_theta=final_theta, total_iterations=global_iter,
        convergence_log=clog, report=report,
        armijo_floor_steps=armijo_floor,
        smoothing_violations=smoothing_violations)
