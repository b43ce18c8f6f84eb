"""Mesh data structures, validation, boundary extraction and feature classification.

Hex corner ordering follows the common unstructured-grid convention: the
bottom quad counterclockwise seen from outside (below), then the top quad::

        7--------6
       /|       /|
      4--------5 |          z
      | |      | |          | y
      | 3------|-2          |/
      |/       |/           +---x
      0--------1

All corner/edge/face index tables in this package derive from this diagram.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# For corner c, CORNER_NEIGHBORS[c] lists the three edge-connected corners
# (a, b, d) such that det(x_a - x_c, x_b - x_c, x_d - x_c) > 0 on a
# right-handed hex.
CORNER_NEIGHBORS = np.array(
    [
        [1, 3, 4],
        [2, 0, 5],
        [3, 1, 6],
        [0, 2, 7],
        [7, 5, 0],
        [4, 6, 1],
        [5, 7, 2],
        [6, 4, 3],
    ],
    dtype=np.int64,
)

# The 12 hex edges (local corner index pairs).
HEX_EDGES = np.array(
    [
        [0, 1], [1, 2], [2, 3], [3, 0],
        [4, 5], [5, 6], [6, 7], [7, 4],
        [0, 4], [1, 5], [2, 6], [3, 7],
    ],
    dtype=np.int64,
)

# The 6 quad faces, outward oriented.
HEX_FACES = np.array(
    [
        [0, 3, 2, 1],   # bottom
        [4, 5, 6, 7],   # top
        [0, 1, 5, 4],   # front
        [1, 2, 6, 5],   # right
        [2, 3, 7, 6],   # back
        [3, 0, 4, 7],   # left
    ],
    dtype=np.int64,
)

# Opposite face-center pairs defining the body-center sample frame, one
# (plus-face, minus-face) quad pair per axis.
BODY_FACE_PAIRS = np.array(
    [
        [[1, 2, 6, 5], [0, 3, 7, 4]],   # x
        [[2, 3, 7, 6], [1, 0, 4, 5]],   # y
        [[4, 5, 6, 7], [0, 1, 2, 3]],   # z
    ],
    dtype=np.int64,
)

ON_SURFACE_TOL = 1e-12

# Feature classes for boundary vertices.
CLASS_CORNER = 0
CLASS_SHARP_EDGE = 1
CLASS_FACE = 2


class MeshError(ValueError):
    """Raised for structurally invalid mesh input."""


@dataclass
class TriSurface:
    """Watertight triangle mesh with optional sharp-feature annotation."""

    vertices: np.ndarray                 # (n, 3) float64
    triangles: np.ndarray                # (m, 3) int64
    sharp_corners: frozenset[int] = frozenset()
    sharp_curves: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64)
        self.sharp_corners = frozenset(int(c) for c in self.sharp_corners)
        self.sharp_curves = [np.asarray(c, dtype=np.int64) for c in self.sharp_curves]

    @property
    def bbox_diagonal(self) -> float:
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return float(np.linalg.norm(hi - lo))

    def triangle_points(self) -> np.ndarray:
        """All triangles as an (m, 3, 3) coordinate array."""
        return self.vertices[self.triangles]

    def curve_points(self, curve_index: int) -> np.ndarray:
        return self.vertices[self.sharp_curves[curve_index]]


@dataclass
class HexMesh:
    """All-hex volume mesh: coordinates plus 8-index connectivity."""

    vertices: np.ndarray                 # (n, 3) float64
    hexes: np.ndarray                    # (m, 8) int64

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.hexes = np.ascontiguousarray(self.hexes, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise MeshError("vertex array must be (n, 3)")
        if self.hexes.ndim != 2 or self.hexes.shape[1] != 8:
            raise MeshError("hex connectivity must be (m, 8)")
        if len(self.vertices) == 0 or len(self.hexes) == 0:
            raise MeshError("vertex and element counts must be positive")
        if self.hexes.min() < 0 or self.hexes.max() >= len(self.vertices):
            raise MeshError("hex vertex index out of range")
        for h, cell in enumerate(self.hexes):
            if len(set(cell.tolist())) != 8:
                raise MeshError(f"hex {h} repeats a vertex index")

    def copy(self) -> "HexMesh":
        return HexMesh(self.vertices.copy(), self.hexes.copy())


@dataclass
class BoundarySurface:
    """Quad surface of a hex mesh plus boundary-vertex bookkeeping."""

    quads: np.ndarray                    # (q, 4) int64, vertex indices into the HexMesh
    boundary_vertices: np.ndarray        # sorted unique vertex indices
    vertex_quads: dict[int, list[int]]   # boundary vertex -> incident quad indices

    @property
    def num_vertices(self) -> int:
        return len(self.boundary_vertices)


@dataclass
class SurfaceBinding:
    """Per-boundary-vertex feature class and current projection target."""

    boundary_vertices: np.ndarray        # sorted vertex indices, defines row order
    classes: np.ndarray                  # (Nb,) int8, CLASS_* codes
    corner_index: np.ndarray             # (Nb,) int64, surface corner vertex or -1
    curve_sets: list[tuple[int, ...]]    # per row: candidate sharp-curve indices
    targets: np.ndarray                  # (Nb, 3) float64, current x_i^t

    def row_of(self, vertex: int) -> int:
        i = int(np.searchsorted(self.boundary_vertices, vertex))
        if i >= len(self.boundary_vertices) or self.boundary_vertices[i] != vertex:
            raise KeyError(f"vertex {vertex} is not a boundary vertex")
        return i


def validate_tri_surface(surface: TriSurface) -> list[str]:
    """Check TriSurface invariants; returns a list of violation messages."""
    violations = []
    nv = len(surface.vertices)
    tris = surface.triangles

    if tris.size and (tris.min() < 0 or tris.max() >= nv):
        bad = np.where((tris < 0) | (tris >= nv))[0]
        for t in np.unique(bad):
            violations.append(f"triangle {t}: vertex index out of range")

    for t, (a, b, c) in enumerate(tris):
        if a == b or b == c or a == c:
            violations.append(f"triangle {t}: repeated vertex index (degenerate)")
            continue
        if max(a, b, c) >= nv or min(a, b, c) < 0:
            continue
        pa, pb, pc = surface.vertices[[a, b, c]]
        cross = np.cross(pb - pa, pc - pa)
        longest2 = max(np.dot(pb - pa, pb - pa), np.dot(pc - pa, pc - pa),
                       np.dot(pc - pb, pc - pb))
        if np.dot(cross, cross) <= (1e-12 * longest2) ** 2:
            violations.append(f"triangle {t}: zero area (degenerate)")

    edge_count: dict[tuple[int, int], int] = {}
    for a, b, c in tris:
        for u, v in ((a, b), (b, c), (c, a)):
            key = (min(u, v), max(u, v))
            edge_count[key] = edge_count.get(key, 0) + 1
    for (u, v), n in sorted(edge_count.items()):
        if n != 2:
            violations.append(f"edge ({u}, {v}): referenced by {n} triangles, expected 2")

    for c in sorted(surface.sharp_corners):
        if c < 0 or c >= nv:
            violations.append(f"sharp corner {c}: index out of range")
    for ci, chain in enumerate(surface.sharp_curves):
        if len(chain) < 2:
            violations.append(f"sharp curve {ci}: fewer than two vertices")
            continue
        if chain.min() < 0 or chain.max() >= nv:
            violations.append(f"sharp curve {ci}: vertex index out of range")
            continue
        for u, v in zip(chain[:-1], chain[1:]):
            key = (min(u, v), max(u, v))
            if key not in edge_count:
                violations.append(
                    f"sharp curve {ci}: segment ({u}, {v}) is not a triangle edge")
    return violations


def extract_boundary(hexmesh: HexMesh) -> BoundarySurface:
    """Collect hex faces whose sorted 4-index key occurs exactly once."""
    face_count: dict[tuple, list] = {}
    for cell in hexmesh.hexes:
        for face in HEX_FACES:
            quad = cell[face]
            key = tuple(sorted(quad.tolist()))
            entry = face_count.get(key)
            if entry is None:
                face_count[key] = [1, quad]
            else:
                entry[0] += 1
                if entry[0] > 2:
                    raise MeshError(
                        f"non-manifold hex connectivity: face {key} shared by "
                        f"{entry[0]} hexes")

    quads = [entry[1] for key, entry in sorted(face_count.items()) if entry[0] == 1]
    quads = np.array(quads, dtype=np.int64) if quads else np.empty((0, 4), np.int64)
    boundary_vertices = np.unique(quads)
    vertex_quads: dict[int, list[int]] = {int(v): [] for v in boundary_vertices}
    for qi, quad in enumerate(quads):
        for v in quad:
            vertex_quads[int(v)].append(qi)
    return BoundarySurface(quads, boundary_vertices, vertex_quads)


@dataclass
class FeatureBindings:
    """Explicit user-specified map between surface features and hex vertices."""

    corners: list[tuple[int, int]]            # (surface corner vertex, hex vertex)
    curves: list[tuple[int, ...]]             # per sharp curve: bound hex vertices


def classify_boundary_vertices(
    hexmesh: HexMesh,
    boundary: BoundarySurface,
    surface: TriSurface,
    bindings: FeatureBindings,
) -> SurfaceBinding:
    """Assign Corner/SharpEdge/Face classes from explicit feature bindings.

    Targets are initialized by one projection pass over the result.
    """
    from . import projection

    bset = set(int(v) for v in boundary.boundary_vertices)
    nb = len(boundary.boundary_vertices)
    classes = np.full(nb, CLASS_FACE, dtype=np.int8)
    corner_index = np.full(nb, -1, dtype=np.int64)
    curve_sets: list[tuple[int, ...]] = [() for _ in range(nb)]

    bound_corners = {}
    for surf_corner, hex_vertex in bindings.corners:
        if surf_corner not in surface.sharp_corners:
            raise MeshError(f"vertex {surf_corner} is not an annotated sharp corner")
        if hex_vertex not in bset:
            raise MeshError(f"corner bound to non-boundary vertex {hex_vertex}")
        if hex_vertex in bound_corners:
            raise MeshError(f"boundary vertex {hex_vertex} bound to two corners")
        bound_corners[hex_vertex] = surf_corner

    missing = surface.sharp_corners - {c for c, _ in bindings.corners}
    if missing:
        raise MeshError(f"sharp corners without a binding: {sorted(missing)}")
    if len(bindings.curves) != len(surface.sharp_curves):
        raise MeshError(
            f"{len(surface.sharp_curves)} sharp curves but "
            f"{len(bindings.curves)} curve bindings")

    order = {int(v): i for i, v in enumerate(boundary.boundary_vertices)}
    for hex_vertex, surf_corner in bound_corners.items():
        row = order[hex_vertex]
        classes[row] = CLASS_CORNER
        corner_index[row] = surf_corner

    per_vertex_curves: dict[int, list[int]] = {}
    for ci, bound in enumerate(bindings.curves):
        if len(bound) == 0:
            raise MeshError(f"sharp curve {ci} has zero bound vertices")
        for hex_vertex in bound:
            if hex_vertex not in bset:
                raise MeshError(
                    f"curve {ci} bound to non-boundary vertex {hex_vertex}")
            if hex_vertex in bound_corners:
                raise MeshError(
                    f"vertex {hex_vertex} bound to both a corner and curve {ci}")
            per_vertex_curves.setdefault(int(hex_vertex), []).append(ci)

    for hex_vertex, curves in per_vertex_curves.items():
        row = order[hex_vertex]
        classes[row] = CLASS_SHARP_EDGE
        curve_sets[row] = tuple(curves)

    binding = SurfaceBinding(
        boundary_vertices=boundary.boundary_vertices.copy(),
        classes=classes,
        corner_index=corner_index,
        curve_sets=curve_sets,
        targets=np.zeros((nb, 3)),
    )
    bvh = projection.TriangleBVH(surface)
    projection.compute_targets(binding, hexmesh.vertices, surface, bvh)
    return binding


def vertex_hexes(hexmesh: HexMesh) -> dict[int, list[int]]:
    """Vertex index -> incident hex indices."""
    out: dict[int, list[int]] = {}
    for h, cell in enumerate(hexmesh.hexes):
        for v in cell:
            out.setdefault(int(v), []).append(h)
    return out


def vertex_neighbors(hexmesh: HexMesh) -> dict[int, np.ndarray]:
    """Vertex index -> edge-connected neighbor vertices (sorted)."""
    nbrs: dict[int, set[int]] = {}
    for cell in hexmesh.hexes:
        for a, b in HEX_EDGES:
            u, v = int(cell[a]), int(cell[b])
            nbrs.setdefault(u, set()).add(v)
            nbrs.setdefault(v, set()).add(u)
    return {v: np.array(sorted(s), dtype=np.int64) for v, s in nbrs.items()}


def grid_hex_mesh(shape: tuple[int, int, int],
                  origin=(0.0, 0.0, 0.0),
                  spacing=(1.0, 1.0, 1.0)) -> HexMesh:
    """Axis-aligned a x b x c grid of unit-style hexes."""
    a, b, c = shape
    nx, ny, nz = a + 1, b + 1, c + 1

    def vid(i, j, k):
        return (k * ny + j) * nx + i

    xs = origin[0] + spacing[0] * np.arange(nx)
    ys = origin[1] + spacing[1] * np.arange(ny)
    zs = origin[2] + spacing[2] * np.arange(nz)
    gx, gy, gz = np.meshgrid(xs, ys, zs, indexing="ij")
    verts = np.stack([gx, gy, gz], axis=-1).transpose(2, 1, 0, 3).reshape(-1, 3)

    cells = []
    for k in range(c):
        for j in range(b):
            for i in range(a):
                cells.append([
                    vid(i, j, k), vid(i + 1, j, k),
                    vid(i + 1, j + 1, k), vid(i, j + 1, k),
                    vid(i, j, k + 1), vid(i + 1, j, k + 1),
                    vid(i + 1, j + 1, k + 1), vid(i, j + 1, k + 1),
                ])
    return HexMesh(verts, np.array(cells, dtype=np.int64))
