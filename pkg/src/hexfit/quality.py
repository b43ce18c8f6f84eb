"""Algebraic hex quality metrics, their gradients, and mesh-level reporting.

Each hex is sampled at its 8 corners and the body center. Corner frames use
the fixed neighbor table from `mesh`; the body-center frame uses the three
vectors between opposite face centers. A hex's J(h) / SJ(h) is the minimum
over the nine samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .mesh import HexMesh, SurfaceBinding, TriSurface

HISTOGRAM_BINS = 20


@dataclass
class SampleFrame:
    """Three edge vectors of one sample point (corner 0..7 or body center 8)."""

    e0: np.ndarray
    e1: np.ndarray
    e2: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        return np.column_stack([self.e0, self.e1, self.e2])


@dataclass
class HexQuality:
    """Nine-sample quality evaluation of one hex."""

    j_samples: np.ndarray        # (9,)
    sj_samples: np.ndarray       # (9,)
    degenerate: np.ndarray       # (9,) bool
    avg_edge_length: float

    @property
    def j(self) -> float:
        return float(self.j_samples.min())

    @property
    def sj(self) -> float:
        return float(self.sj_samples.min())

    @property
    def j_argmin(self) -> int:
        return int(self.j_samples.argmin())

    @property
    def sj_argmin(self) -> int:
        return int(self.sj_samples.argmin())


@dataclass
class QualityReport:
    min_sj: float
    max_sj: float
    histogram: np.ndarray        # (20,) int, SJ(h) bins over [-1, 1]
    inverted: int                # hexes with J(h) <= 0
    max_dist: float              # max boundary deviation / bbox diagonal of T


def sample_frames(hex_points: np.ndarray) -> list[SampleFrame]:
    """The 9 sample frames of a single hex given its (8, 3) corner points."""
    frames = _kernels._py._sample_frames(np.asarray(hex_points, dtype=np.float64)[None])[0]
    return [SampleFrame(*f) for f in frames]


def jacobian(frame: SampleFrame) -> float:
    return float(np.linalg.det(frame.matrix))


def scaled_jacobian(frame: SampleFrame) -> float:
    """Determinant of the column-normalized frame, clipped to [-1, 1].

    A collapsed edge (below the degeneracy floor) yields 0.
    """
    norms = [np.linalg.norm(e) for e in (frame.e0, frame.e1, frame.e2)]
    if min(norms) < _kernels.DEGENERATE_EDGE:
        return 0.0
    value = np.linalg.det(frame.matrix) / (norms[0] * norms[1] * norms[2])
    return float(np.clip(value, -1.0, 1.0))


def hex_quality(hex_points: np.ndarray) -> HexQuality:
    """Nine-sample evaluation of one hex from its (8, 3) corner points."""
    hex_points = np.asarray(hex_points, dtype=np.float64)
    verts = hex_points
    cells = np.arange(8, dtype=np.int64)[None]
    j, sj, ebar, degen = _kernels.hex_quality_samples(verts, cells)
    return HexQuality(j[0], sj[0], degen[0], float(ebar[0]))


def mesh_quality_samples(hexmesh: HexMesh):
    """(J (M, 9), SJ (M, 9), ebar (M,), degenerate (M, 9)) for a whole mesh."""
    return _kernels.hex_quality_samples(hexmesh.vertices, hexmesh.hexes)


def resj(hq: HexQuality, theta: float) -> float:
    """Scaled Jacobian clamped from above at the threshold."""
    return min(hq.sj, theta)


def rehj(hq: HexQuality, theta: float) -> float:
    """Jacobian in the inverted region, clamped scaled Jacobian otherwise."""
    if hq.j <= 0.0:
        return hq.j
    return min(hq.sj, theta)


def rehqj(hq: HexQuality, theta: float) -> float:
    """Hybrid metric with both branches rescaled to quadratic measures.

    The average edge length acts as a fixed normalizer: J/ebar below zero,
    SJ*ebar^2 up to the threshold, then the constant threshold.
    """
    if hq.j <= 0.0:
        return hq.j / hq.avg_edge_length
    if hq.sj <= theta:
        return hq.sj * hq.avg_edge_length ** 2
    return theta


def rehqj_gradient(hex_points: np.ndarray, theta: float) -> np.ndarray:
    """Analytic d(rehqj)/d(vertex) for one hex, (8, 3).

    The gradient is routed through the argmin sample of the active branch
    (lowest sample index on ties); the clamp branch is constant. The average
    edge length contributes no gradient.
    """
    hex_points = np.asarray(hex_points, dtype=np.float64)
    cells = np.arange(8, dtype=np.int64)[None]
    _, grad = _kernels.rehqj_energy_gradient(hex_points, cells, theta)
    return grad


def mesh_energy(hexmesh: HexMesh, theta: float) -> float:
    """Sum of rehqj over all hexes (fixed accumulation order)."""
    energy, _ = _kernels.rehqj_energy_gradient(
        hexmesh.vertices, hexmesh.hexes, theta, with_gradient=False)
    return energy


def mesh_energy_gradient(vertices: np.ndarray, hexes: np.ndarray, theta: float,
                         spread_gradient: bool = False):
    """(sum of rehqj, gradient (N, 3)) over a whole mesh."""
    return _kernels.rehqj_energy_gradient(
        vertices, hexes, theta, spread_gradient=spread_gradient)


def mesh_resj_sum(hexmesh: HexMesh, theta: float) -> float:
    """Sum of clamped scaled Jacobians; equals N_h * theta at termination."""
    _, sj, _, _ = mesh_quality_samples(hexmesh)
    return float(np.minimum(sj.min(axis=1), theta).sum())


def sj_histogram(sj_values: np.ndarray) -> np.ndarray:
    """20 uniform bins over [-1, 1], right-exclusive except the last."""
    bins = np.linspace(-1.0, 1.0, HISTOGRAM_BINS + 1)
    idx = np.clip(np.floor((sj_values + 1.0) * (HISTOGRAM_BINS / 2.0)), 0,
                  HISTOGRAM_BINS - 1).astype(np.int64)
    return np.bincount(idx, minlength=HISTOGRAM_BINS).astype(np.int64)


def quality_report(hexmesh: HexMesh, surface: TriSurface,
                   binding: SurfaceBinding) -> QualityReport:
    from . import projection

    j, sj, _, _ = mesh_quality_samples(hexmesh)
    j_h = j.min(axis=1)
    sj_h = sj.min(axis=1)
    targets = projection.target_points(binding, hexmesh.vertices, surface)
    residuals = hexmesh.vertices[binding.boundary_vertices] - targets
    max_dist = float(np.linalg.norm(residuals, axis=1).max() / surface.bbox_diagonal)
    return QualityReport(
        min_sj=float(sj_h.min()),
        max_sj=float(sj_h.max()),
        histogram=sj_histogram(sj_h),
        inverted=int((j_h <= 0.0).sum()),
        max_dist=max_dist,
    )
