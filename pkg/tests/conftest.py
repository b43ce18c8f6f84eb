"""Shared fixtures and small helpers for the test suite."""

import numpy as np
import pytest

from hexfit import fixtures
from hexfit.io import apply_features
from hexfit.mesh import classify_boundary_vertices, extract_boundary

UNIT_CUBE = np.array([
    [0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 1.0], [0.0, 1.0, 1.0],
])


def load_problem(surface, hexmesh, sidecar):
    """(annotated surface, boundary, binding) for a generated fixture triple."""
    annotated, bindings = apply_features(surface, sidecar)
    boundary = extract_boundary(hexmesh)
    binding = classify_boundary_vertices(hexmesh, boundary, annotated, bindings)
    return annotated, boundary, binding


@pytest.fixture
def cube_problem():
    surface, hexmesh, sidecar = fixtures.cube_grid(3)
    annotated, boundary, binding = load_problem(surface, hexmesh, sidecar)
    return annotated, hexmesh, boundary, binding


@pytest.fixture
def sphere_problem():
    surface, hexmesh, sidecar = fixtures.sphere(3)
    annotated, boundary, binding = load_problem(surface, hexmesh, sidecar)
    return annotated, hexmesh, boundary, binding


def random_rotation(rng):
    """Uniform-ish random proper rotation matrix."""
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q
