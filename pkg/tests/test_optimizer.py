"""Constrained optimization loop: objective, L-BFGS, Armijo, multipliers,
smoothing, and the threshold schedule."""

import numpy as np
import pytest

from hexfit import fixtures, optimizer, projection, quality
from hexfit.optimizer import (
    ALParams, ArmijoResult, LbfgsHistory, OptimizeConfig, al_energy,
    al_energy_and_gradient, armijo_search, lbfgs_direction, optimize,
    smart_laplacian_smoothing, update_multipliers_and_penalty,
)

from conftest import load_problem


def make_params(n_boundary, theta=0.0, rho=2.0):
    return ALParams(theta=theta, rho=rho, lam=np.zeros((n_boundary, 3)))


class TestALParams:
    def test_rejects_nonpositive_rho(self):
        with pytest.raises(ValueError):
            ALParams(theta=0.0, rho=0.0, lam=np.zeros((1, 3)))

    def test_rejects_theta_out_of_range(self):
        with pytest.raises(ValueError):
            ALParams(theta=1.5, rho=1.0, lam=np.zeros((1, 3)))

    def test_rejects_bad_c1(self):
        with pytest.raises(ValueError):
            ALParams(theta=0.0, rho=1.0, lam=np.zeros((1, 3)), c1=1.0)


class TestALObjective:
    def test_penalty_only_gradient(self, cube_problem):
        # lam = 0, clamped quality (theta=0, all SJ positive): the boundary
        # gradient is exactly rho * residual
        surface, hexmesh, _, binding = cube_problem
        params = make_params(len(binding.boundary_vertices), rho=2.0)
        verts = hexmesh.vertices.copy()
        shift = np.array([0.0, 0.0, 0.01])
        verts[binding.boundary_vertices[0]] += shift
        _, grad = al_energy_and_gradient(verts, hexmesh.hexes, binding, params)
        residual = verts[binding.boundary_vertices[0]] - binding.targets[0]
        assert np.allclose(grad[binding.boundary_vertices[0]],
                           params.rho * residual, atol=1e-12)

    def test_interior_gradient_zero_when_clamped(self, cube_problem):
        surface, hexmesh, boundary, binding = cube_problem
        params = make_params(len(binding.boundary_vertices))
        _, grad = al_energy_and_gradient(
            hexmesh.vertices, hexmesh.hexes, binding, params)
        interior = sorted(set(range(len(hexmesh.vertices)))
                          - set(boundary.boundary_vertices.tolist()))
        assert np.all(grad[interior] == 0.0)

    def test_energy_only_matches_full(self, cube_problem):
        surface, hexmesh, _, binding = cube_problem
        params = make_params(len(binding.boundary_vertices), theta=0.7, rho=3.0)
        params.lam += 0.1
        verts = hexmesh.vertices + 0.01
        full, _ = al_energy_and_gradient(verts, hexmesh.hexes, binding, params)
        only = al_energy(verts, hexmesh.hexes, binding, params)
        assert only == pytest.approx(full, rel=1e-14)


class TestLbfgs:
    def test_empty_history_is_scaled_steepest_descent(self):
        hist = LbfgsHistory(5)
        g = np.array([1.0, -2.0, 3.0])
        assert np.allclose(lbfgs_direction(g, hist), -g)

    def test_single_pair_matches_closed_form_bfgs(self):
        rng = np.random.default_rng(41)
        n = 6
        s = rng.standard_normal(n)
        y = rng.standard_normal(n)
        if np.dot(s, y) < 0:
            y = -y
        g = rng.standard_normal(n)
        hist = LbfgsHistory(5)
        hist.push(s, y)
        rho = 1.0 / np.dot(y, s)
        gamma = np.dot(s, y) / np.dot(y, y)
        eye = np.eye(n)
        h = ((eye - rho * np.outer(s, y)) @ (gamma * eye)
             @ (eye - rho * np.outer(y, s)) + rho * np.outer(s, s))
        assert np.allclose(lbfgs_direction(g, hist), -h @ g, atol=1e-12)

    def test_quadratic_termination_with_exact_line_search(self):
        rng = np.random.default_rng(42)
        n = 10
        m_half = rng.standard_normal((n, n))
        a = m_half @ m_half.T + n * np.eye(n)
        b = rng.standard_normal(n)
        x = rng.standard_normal(n)
        hist = LbfgsHistory(15)
        for it in range(10):
            g = a @ x - b
            if np.linalg.norm(g) < 1e-8:
                break
            d = lbfgs_direction(g, hist)
            step = -float(g @ d) / float(d @ a @ d)
            x_new = x + step * d
            g_new = a @ x_new - b
            hist.push(x_new - x, g_new - g)
            x = x_new
        assert np.linalg.norm(a @ x - b) < 1e-8

    def test_curvature_fallback_on_flat_pair(self):
        hist = LbfgsHistory(5)
        s = np.array([1.0, 0.0])
        y = np.array([0.0, 1.0])          # y.s = 0 -> fallback scalar
        hist.push(s, y)
        assert hist.pairs[-1][2] == optimizer.CURVATURE_FALLBACK

    def test_history_ring_buffer_limit(self):
        hist = LbfgsHistory(3)
        for i in range(5):
            hist.push(np.ones(2) * (i + 1), np.ones(2))
        assert len(hist) == 3

    def test_gamma_survives_clear(self):
        hist = LbfgsHistory(3)
        hist.push(np.array([2.0, 0.0]), np.array([1.0, 0.0]))
        gamma = hist.gamma
        hist.clear()
        assert len(hist) == 0
        assert hist.gamma == gamma

    def test_m_zero_keeps_gamma_scaling(self):
        hist = LbfgsHistory(0)
        hist.push(np.array([2.0, 0.0]), np.array([1.0, 0.0]))
        assert len(hist) == 0
        g = np.array([1.0, 1.0])
        assert np.allclose(lbfgs_direction(g, hist), -hist.gamma * g)


class TestArmijo:
    def test_quadratic_accepts_unit_step(self):
        params = make_params(1)
        energy = lambda a: (1.0 - a) ** 2
        result = armijo_search(energy, 1.0, -2.0, params)
        assert result.sufficient
        assert result.step == 1.0

    def test_backtracks_on_steep_quadratic(self):
        params = make_params(1)
        energy = lambda a: (1.0 - 10.0 * a) ** 2 / 10.0
        result = armijo_search(energy, 0.1, -2.0, params)
        assert result.sufficient
        assert result.step < 1.0
        # accepted step satisfies the sufficient-decrease inequality
        assert energy(result.step) - 0.1 <= params.c1 * result.step * -2.0

    def test_floor_reached_reports_insufficient(self):
        params = make_params(1)
        result = armijo_search(lambda a: 1.0 + a, 1.0, -1.0, params)
        assert not result.sufficient
        assert result.step <= 2.0 * params.step_floor

    def test_nonfinite_trial_not_accepted(self):
        params = make_params(1)
        result = armijo_search(lambda a: np.nan, 0.0, -1.0, params)
        assert not result.sufficient

    def test_eta_controls_backtracking(self):
        params = make_params(1)
        params.eta = 0.25
        energy = lambda a: (1.0 - 10.0 * a) ** 2 / 10.0
        result = armijo_search(energy, 0.1, -2.0, params)
        assert result.sufficient
        log2 = np.log(result.step) / np.log(0.25)
        assert log2 == pytest.approx(round(log2))


class TestMultiplierUpdate:
    def test_lambda_telescopes(self, cube_problem):
        surface, hexmesh, _, binding = cube_problem
        mesh = hexmesh.copy()
        mesh.vertices[binding.boundary_vertices[0]] += [0.0, 0.0, 0.01]
        params = make_params(len(binding.boundary_vertices), theta=0.5, rho=2.0)
        for _ in range(3):
            update_multipliers_and_penalty(params, binding, mesh)
        # theta=0.5 > min SJ is false here (all SJ=1 except near the moved
        # vertex) so rho may double; lambda itself telescopes: lam = sum rho_t r
        assert np.allclose(params.lam[0][:2], 0.0)
        assert params.lam[0][2] != 0.0

    def test_lambda_update_formula(self, cube_problem):
        surface, hexmesh, _, binding = cube_problem
        mesh = hexmesh.copy()
        mesh.vertices[binding.boundary_vertices[0]] += [0.0, 0.0, 0.01]
        params = make_params(len(binding.boundary_vertices), theta=0.0, rho=2.0)
        residual = (mesh.vertices[binding.boundary_vertices]
                    - binding.targets)
        update_multipliers_and_penalty(params, binding, mesh)
        assert np.allclose(params.lam, 2.0 * residual, atol=1e-15)

    def test_rho_doubles_only_at_quality_termination(self, cube_problem):
        surface, hexmesh, _, binding = cube_problem
        mesh = hexmesh.copy()
        # perfect grid: SJ = 1 everywhere -> condition met for theta = 0.5
        params = make_params(len(binding.boundary_vertices), theta=0.5, rho=1.0)
        update_multipliers_and_penalty(params, binding, mesh)
        assert params.rho == 2.0
        # one hex pushed below the threshold -> no doubling
        squashed = mesh.copy()
        interior = 1 + 4 + 16  # vertex (1,1,1) of the 4^3 lattice
        squashed.vertices[interior] += [0.2, 0.2, 0.2]
        _, sj, _, _ = quality.mesh_quality_samples(squashed)
        assert sj.min() < 0.5
        params2 = make_params(len(binding.boundary_vertices), theta=0.5, rho=1.0)
        update_multipliers_and_penalty(params2, binding, squashed)
        assert params2.rho == 1.0

    def test_rho_capped(self, cube_problem):
        surface, hexmesh, _, binding = cube_problem
        params = make_params(len(binding.boundary_vertices), theta=0.5,
                             rho=optimizer.RHO_MAX)
        update_multipliers_and_penalty(params, binding, hexmesh.copy())
        assert params.rho == optimizer.RHO_MAX


class TestSmoothing:
    def _context(self, problem):
        surface, hexmesh, boundary, binding = problem
        bvh = projection.TriangleBVH(surface)
        return optimizer._SmoothingContext(hexmesh, binding, surface, bvh)

    def test_uniform_grid_is_fixed_point(self, cube_problem):
        surface, hexmesh, _, _ = cube_problem
        ctx = self._context(cube_problem)
        verts = hexmesh.vertices.copy()
        smart_laplacian_smoothing(verts, ctx)
        assert np.allclose(verts, hexmesh.vertices, atol=1e-12)

    def test_displaced_interior_vertex_improves(self):
        surface, hexmesh, sidecar = fixtures.cube_grid(3)
        _, boundary, binding = load_problem(surface, hexmesh, sidecar)
        mesh = hexmesh.copy()
        interior = sorted(set(range(len(mesh.vertices)))
                          - set(boundary.boundary_vertices.tolist()))
        v = interior[0]
        mesh.vertices[v] += [0.11, -0.07, 0.05]
        before = quality.mesh_quality_samples(mesh)[1].min()
        bvh = projection.TriangleBVH(surface)
        ctx = optimizer._SmoothingContext(mesh, binding, surface, bvh)
        moved = smart_laplacian_smoothing(mesh.vertices, ctx)
        after = quality.mesh_quality_samples(mesh)[1].min()
        assert moved >= 1
        assert after > before

    def test_never_decreases_min_sj(self):
        rng = np.random.default_rng(51)
        surface, hexmesh, sidecar = fixtures.cube_grid(3)
        _, _, binding = load_problem(surface, hexmesh, sidecar)
        bvh = projection.TriangleBVH(surface)
        for trial in range(5):
            mesh = fixtures.perturb_interior(hexmesh, 0.4, trial)
            ctx = optimizer._SmoothingContext(mesh, binding, surface, bvh)
            for _ in range(3):
                before = quality.mesh_quality_samples(mesh)[1].min()
                smart_laplacian_smoothing(mesh.vertices, ctx)
                after = quality.mesh_quality_samples(mesh)[1].min()
                assert after >= before

    def test_boundary_candidates_stay_on_features(self, cube_problem):
        surface, hexmesh, boundary, binding = cube_problem
        mesh = fixtures.perturb_interior(hexmesh, 0.3, 3)
        bvh = projection.TriangleBVH(surface)
        ctx = optimizer._SmoothingContext(mesh, binding, surface, bvh)
        smart_laplacian_smoothing(mesh.vertices, ctx)
        targets = projection.target_points(binding, mesh.vertices, surface, bvh)
        residuals = mesh.vertices[binding.boundary_vertices] - targets
        assert np.abs(residuals).max() < 1e-12


class TestOptimize:
    def test_perfect_cube_converges_immediately_per_level(self, cube_problem):
        surface, hexmesh, boundary, binding = cube_problem
        config = OptimizeConfig(level_budget=50)
        result = optimize(hexmesh, surface, binding, config, boundary)
        assert result.converged
        # SJ = 1 everywhere: every level below 1.0 verifies with no iterations
        assert result.final_theta == pytest.approx(1.0)
        assert result.total_iterations == 0

    def test_levels_increase_in_exact_steps(self, cube_problem):
        surface, hexmesh, boundary, binding = cube_problem
        mesh = fixtures.perturb_interior(hexmesh, 0.3, 7)
        config = OptimizeConfig(level_budget=500)
        result = optimize(mesh, surface, binding, config, boundary)
        assert result.converged
        assert result.completed_levels == list(range(len(result.completed_levels)))

    def test_untangles_and_fits(self, sphere_problem):
        surface, hexmesh, boundary, binding = sphere_problem
        mesh = fixtures.perturb_interior(hexmesh, 0.4, 11)
        assert quality.mesh_quality_samples(mesh)[1].min() < 0.0
        config = OptimizeConfig(level_budget=1000)
        result = optimize(mesh, surface, binding, config, boundary)
        assert result.converged
        assert result.report.min_sj > 0.0
        assert result.report.max_dist <= 1e-8
        assert result.smoothing_violations == 0

    def test_gd_method_converges(self, sphere_problem):
        surface, hexmesh, boundary, binding = sphere_problem
        mesh = fixtures.perturb_interior(hexmesh, 0.3, 11)
        config = OptimizeConfig(level_budget=1000, method="gd")
        result = optimize(mesh, surface, binding, config, boundary)
        assert result.converged
        assert result.report.max_dist <= 1e-8

    def test_returned_snapshot_meets_last_level(self, sphere_problem):
        surface, hexmesh, boundary, binding = sphere_problem
        mesh = fixtures.perturb_interior(hexmesh, 0.3, 5)
        config = OptimizeConfig(level_budget=500)
        result = optimize(mesh, surface, binding, config, boundary)
        assert result.converged
        _, sj, _, _ = quality.mesh_quality_samples(result.mesh)
        assert sj.min(axis=1).min() >= result.final_theta - 1e-12

    def test_budget_starved_run_reports_failure(self, sphere_problem):
        surface, hexmesh, boundary, binding = sphere_problem
        mesh = fixtures.perturb_interior(hexmesh, 0.4, 11)
        config = OptimizeConfig(level_budget=1)
        result = optimize(mesh, surface, binding, config, boundary)
        assert not result.converged
        assert result.completed_levels == []
        assert result.final_theta == 0.0

    def test_log_iterations_strictly_increasing(self, sphere_problem):
        surface, hexmesh, boundary, binding = sphere_problem
        mesh = fixtures.perturb_interior(hexmesh, 0.3, 2)
        config = OptimizeConfig(level_budget=300)
        result = optimize(mesh, surface, binding, config, boundary)
        its = [r.iteration for r in result.convergence_log.records]
        assert its == sorted(set(its))

    def test_reset_multipliers_flag(self, sphere_problem):
        surface, hexmesh, boundary, binding = sphere_problem
        mesh = fixtures.perturb_interior(hexmesh, 0.2, 3)
        config = OptimizeConfig(level_budget=500, reset_multipliers=True)
        result = optimize(mesh, surface, binding, config, boundary)
        assert result.converged

    def test_rejects_unknown_method(self):
        with pytest.raises(ValueError):
            OptimizeConfig(method="newton")
