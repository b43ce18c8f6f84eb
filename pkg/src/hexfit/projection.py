"""Closest-point queries onto the constraint surface and target computation.

Face-vertex targets are the globally closest points on the triangle surface;
the BVH prunes with exact box distances, so its answer is identical to a
full traversal over every triangle.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .mesh import CLASS_CORNER, CLASS_FACE, CLASS_SHARP_EDGE, SurfaceBinding, TriSurface

LEAF_SIZE = 4


def closest_point_on_segment(p: np.ndarray, a: np.ndarray, b: np.ndarray):
    """(closest point, squared distance, parameter t in [0, 1])."""
    ab = b - a
    denom = float(np.dot(ab, ab))
    if denom == 0.0:
        d = p - a
        return a.copy(), float(np.dot(d, d)), 0.0
    t = float(np.dot(p - a, ab)) / denom
    t = min(1.0, max(0.0, t))
    q = a + t * ab
    d = p - q
    return q, float(np.dot(d, d)), t


def closest_point_on_triangle(p: np.ndarray, tri: np.ndarray):
    """Exact closest point on a triangle by region decomposition.

    tri: (3, 3) vertex array. Returns (point, squared distance). A degenerate
    (zero-area) triangle is treated as its longest edge segment.
    """
    a, b, c = tri
    ab = b - a
    ac = c - a
    n = np.cross(ab, ac)
    if float(np.dot(n, n)) == 0.0:
        pairs = ((a, b), (b, c), (c, a))
        lengths = [np.dot(v - u, v - u) for u, v in pairs]
        u, v = pairs[int(np.argmax(lengths))]
        q, d2, _ = closest_point_on_segment(p, u, v)
        return q, d2

    ap = p - a
    d1 = float(np.dot(ab, ap))
    d2_ = float(np.dot(ac, ap))
    if d1 <= 0.0 and d2_ <= 0.0:
        q = a.copy()
    else:
        bp = p - b
        d3 = float(np.dot(ab, bp))
        d4 = float(np.dot(ac, bp))
        cp = p - c
        d5 = float(np.dot(ab, cp))
        d6 = float(np.dot(ac, cp))
        vc = d1 * d4 - d3 * d2_
        vb = d5 * d2_ - d1 * d6
        va = d3 * d6 - d5 * d4
        if d3 >= 0.0 and d4 <= d3:
            q = b.copy()
        elif vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
            q = a + (d1 / (d1 - d3)) * ab
        elif d6 >= 0.0 and d5 <= d6:
            q = c.copy()
        elif vb <= 0.0 and d2_ >= 0.0 and d6 <= 0.0:
            q = a + (d2_ / (d2_ - d6)) * ac
        elif va <= 0.0 and d4 - d3 >= 0.0 and d5 - d6 >= 0.0:
            q = b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b)
        else:
            inv = 1.0 / (va + vb + vc)
            q = a + (vb * inv) * ab + (vc * inv) * ac
    d = p - q
    return q, float(np.dot(d, d))


def closest_point_on_curve(p: np.ndarray, curve: np.ndarray):
    """Closest point over all segments of a polyline (ties: lowest segment).

    curve: (k, 3) with k >= 2. Returns (point, squared distance, segment idx).
    """
    best = None
    for s in range(len(curve) - 1):
        q, d2, _ = closest_point_on_segment(p, curve[s], curve[s + 1])
        if best is None or d2 < best[1]:
            best = (q, d2, s)
    return best


@dataclass
class _Node:
    lo: np.ndarray
    hi: np.ndarray
    left: int = -1
    right: int = -1
    start: int = 0
    count: int = 0


class TriangleBVH:
    """Axis-aligned BVH over a triangle surface, median split, leaf size <= 4.

    Queries return exactly the closest point a brute-force traversal would:
    boxes at the current best distance are still visited and ties resolve to
    the lowest triangle index.
    """

    def __init__(self, surface: TriSurface, leaf_size: int = LEAF_SIZE):
        self.surface = surface
        self.tri_points = surface.triangle_points()
        self.leaf_size = leaf_size
        t = len(self.tri_points)
        self.order = np.arange(t, dtype=np.int64)
        self._lo = self.tri_points.min(axis=1)
        self._hi = self.tri_points.max(axis=1)
        self.nodes: list[_Node] = []
        if t:
            self._build(0, t)

    def _build(self, start: int, end: int) -> int:
        idx = self.order[start:end]
        lo = self._lo[idx].min(axis=0)
        hi = self._hi[idx].max(axis=0)
        node = _Node(lo, hi, start=start, count=end - start)
        node_id = len(self.nodes)
        self.nodes.append(node)
        if end - start > self.leaf_size:
            centers = 0.5 * (self._lo[idx] + self._hi[idx])
            axis = int(np.argmax(hi - lo))
            split = np.argsort(centers[:, axis], kind="stable")
            self.order[start:end] = idx[split]
            mid = start + (end - start) // 2
            node.count = 0
            node.left = self._build(start, mid)
            node.right = self._build(mid, end)
        return node_id

    @staticmethod
    def _box_dist2(p, lo, hi) -> float:
        d = np.maximum(lo - p, 0.0) + np.maximum(p - hi, 0.0)
        return float(np.dot(d, d))

    def query(self, p: np.ndarray):
        """(triangle index, closest point, squared distance) for one point."""
        p = np.asarray(p, dtype=np.float64)
        best_d2 = np.inf
        best_tri = -1
        best_pt = None
        heap = [(self._box_dist2(p, self.nodes[0].lo, self.nodes[0].hi), 0)]
        while heap:
            box_d2, node_id = heapq.heappop(heap)
            if box_d2 > best_d2:
                continue
            node = self.nodes[node_id]
            if node.count:
                for tri_idx in self.order[node.start:node.start + node.count]:
                    q, d2 = closest_point_on_triangle(p, self.tri_points[tri_idx])
                    if d2 < best_d2 or (d2 == best_d2 and tri_idx < best_tri):
                        best_d2, best_tri, best_pt = d2, int(tri_idx), q
            else:
                for child in (node.left, node.right):
                    cd2 = self._box_dist2(p, self.nodes[child].lo, self.nodes[child].hi)
                    if cd2 <= best_d2:
                        heapq.heappush(heap, (cd2, child))
        return best_tri, best_pt, best_d2

    def query_many(self, points: np.ndarray):
        """Batch closest-point query.

        Agrees with per-point `query` up to floating-point roundoff; exact
        ties between triangles may resolve to a different (equally close)
        primitive.
        """
        points = np.ascontiguousarray(points, dtype=np.float64)
        return _kernels.closest_on_triangles(points, self.tri_points)


def target_points(binding: SurfaceBinding, vertices: np.ndarray,
                  surface: TriSurface, bvh: TriangleBVH | None = None) -> np.ndarray:
    """Feature-aware target x_i^t for every boundary vertex (pure)."""
    if bvh is None:
        bvh = TriangleBVH(surface)
    targets = np.empty((len(binding.boundary_vertices), 3))

    face_rows = np.where(binding.classes == CLASS_FACE)[0]
    if len(face_rows):
        pts = vertices[binding.boundary_vertices[face_rows]]
        _, closest, _ = bvh.query_many(pts)
        targets[face_rows] = closest

    for row in np.where(binding.classes == CLASS_CORNER)[0]:
        targets[row] = surface.vertices[binding.corner_index[row]]

    for row in np.where(binding.classes == CLASS_SHARP_EDGE)[0]:
        p = vertices[binding.boundary_vertices[row]]
        best = None
        for ci in binding.curve_sets[row]:
            q, d2, _ = closest_point_on_curve(p, surface.curve_points(ci))
            if best is None or d2 < best[1]:
                best = (q, d2)
        targets[row] = best[0]
    return targets


def compute_targets(binding: SurfaceBinding, vertices: np.ndarray,
                    surface: TriSurface, bvh: TriangleBVH) -> SurfaceBinding:
    """Refresh binding.targets in place and return the binding."""
    binding.targets = target_points(binding, vertices, surface, bvh)
    return binding


def max_relative_distance(binding: SurfaceBinding, vertices: np.ndarray,
                          surface: TriSurface) -> float:
    """Largest ||x_i - x_i^t|| over boundary vertices, relative to T's diagonal."""
    residuals = vertices[binding.boundary_vertices] - binding.targets
    return float(np.linalg.norm(residuals, axis=1).max() / surface.bbox_diagonal)
