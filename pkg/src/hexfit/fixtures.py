"""Generated desk-scale test fixtures: cube grid, sphere, and L-bracket.

Each generator returns (TriSurface with features, HexMesh, FeatureSidecar);
the sidecar bindings are derived geometrically from the constructed meshes.
"""

from __future__ import annotations

import numpy as np

from . import mesh as meshmod
from .io import FeatureSidecar
from .mesh import HexMesh, TriSurface, extract_boundary, grid_hex_mesh
from .projection import closest_point_on_curve

BIND_TOL = 1e-9

_CUBE_CORNERS = np.array([
    [0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
    [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1],
], dtype=float)

_CUBE_EDGES = meshmod.HEX_EDGES


def _quad_fan(quad):
    a, b, c, d = quad
    return [[a, b, c], [a, c, d]]


def geometric_bindings(hexmesh: HexMesh, surface: TriSurface) -> FeatureSidecar:
    """Bind features to hex boundary vertices by exact geometric coincidence."""
    boundary = extract_boundary(hexmesh)
    bverts = boundary.boundary_vertices
    pts = hexmesh.vertices[bverts]

    corner_rows = set()
    corners = []
    for sv in sorted(surface.sharp_corners):
        target = surface.vertices[sv]
        dist = np.linalg.norm(pts - target, axis=1)
        row = int(np.argmin(dist))
        if dist[row] > BIND_TOL:
            raise ValueError(f"no boundary vertex coincides with sharp corner {sv}")
        corners.append((sv, int(bverts[row])))
        corner_rows.add(row)

    curves = []
    for ci, chain in enumerate(surface.sharp_curves):
        poly = surface.vertices[chain]
        bound = []
        for row, p in enumerate(pts):
            if row in corner_rows:
                continue
            _, d2, _ = closest_point_on_curve(p, poly)
            if d2 <= BIND_TOL ** 2:
                bound.append(int(bverts[row]))
        if not bound:
            raise ValueError(f"sharp curve {ci} has no coincident boundary vertices")
        curves.append((chain.tolist(), bound))
    return FeatureSidecar(corners, curves)


def cube_grid(resolution: int):
    """Unit cube surface (12 triangles, 8 corners, 12 sharp edges) with an
    axis-aligned resolution^3 hex grid."""
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    hexmesh = grid_hex_mesh((resolution,) * 3, spacing=(1.0 / resolution,) * 3)

    triangles = []
    for quad in meshmod.HEX_FACES:
        triangles.extend(_quad_fan(quad.tolist()))
    surface = TriSurface(
        _CUBE_CORNERS, np.array(triangles, dtype=np.int64),
        sharp_corners=frozenset(range(8)),
        sharp_curves=[np.array(e) for e in _CUBE_EDGES.tolist()])
    sidecar = geometric_bindings(hexmesh, surface)
    return surface, hexmesh, sidecar


def icosphere(subdivisions: int = 2, radius: float = 1.0) -> TriSurface:
    """Subdivided icosahedron with vertices on the sphere."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=float)
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]
    verts = [v for v in verts]
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = new_faces
    return TriSurface(radius * np.array(verts), np.array(faces, dtype=np.int64))


def sphere(resolution: int, subdivisions: int = 2):
    """Cube grid on [-1, 1]^3 mapped radially so each nested cube shell lands
    on the sphere of its Chebyshev radius; surface is an icosphere, no features."""
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    hexmesh = grid_hex_mesh((resolution,) * 3, origin=(-1.0,) * 3,
                            spacing=(2.0 / resolution,) * 3)
    v = hexmesh.vertices
    cheb = np.abs(v).max(axis=1)
    norm = np.linalg.norm(v, axis=1)
    scale = np.divide(cheb, norm, out=np.zeros_like(norm), where=norm > 0)
    hexmesh.vertices = v * scale[:, None]
    surface = icosphere(subdivisions)
    return surface, hexmesh, FeatureSidecar()


def l_bracket(resolution: int):
    """L-shaped prism ([0,2]^2 footprint minus the (1,2)^2 quadrant, unit
    height) with all prism edges sharp, including the concave vertical edge."""
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    r = resolution
    h = 1.0 / r

    vid: dict[tuple[int, int, int], int] = {}
    verts = []

    def vertex(i, j, k):
        key = (i, j, k)
        if key not in vid:
            vid[key] = len(verts)
            verts.append([i * h, j * h, k * h])
        return vid[key]

    cells = []
    for k in range(r):
        for j in range(2 * r):
            for i in range(2 * r):
                if i >= r and j >= r:
                    continue
                cells.append([
                    vertex(i, j, k), vertex(i + 1, j, k),
                    vertex(i + 1, j + 1, k), vertex(i, j + 1, k),
                    vertex(i, j, k + 1), vertex(i + 1, j, k + 1),
                    vertex(i + 1, j + 1, k + 1), vertex(i, j + 1, k + 1),
                ])
    hexmesh = HexMesh(np.array(verts), np.array(cells, dtype=np.int64))

    footprint = [(0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)]
    bottom = [[x, y, 0.0] for x, y in footprint]
    top = [[x, y, 1.0] for x, y in footprint]
    sverts = np.array(bottom + top, dtype=float)
    tris = []
    cap_fan = [[0, 1, 2], [0, 2, 3], [0, 3, 4], [0, 4, 5]]
    tris += cap_fan
    tris += [[a + 6, b + 6, c + 6] for a, b, c in cap_fan]
    for i in range(6):
        j = (i + 1) % 6
        tris += _quad_fan([i, j, j + 6, i + 6])
    curves = [np.array([i, (i + 1) % 6]) for i in range(6)]
    curves += [np.array([i + 6, (i + 1) % 6 + 6]) for i in range(6)]
    curves += [np.array([i, i + 6]) for i in range(6)]
    surface = TriSurface(sverts, np.array(tris, dtype=np.int64),
                         sharp_corners=frozenset(range(12)),
                         sharp_curves=curves)
    sidecar = geometric_bindings(hexmesh, surface)
    return surface, hexmesh, sidecar


GENERATORS = {
    "cube-grid": cube_grid,
    "sphere": sphere,
    "l-bracket": l_bracket,
}


def perturb_interior(hexmesh: HexMesh, magnitude: float, seed: int) -> HexMesh:
    """Displace interior vertices by uniform random vectors of length at most
    magnitude times the mean incident edge length; boundary stays untouched."""
    if magnitude < 0:
        raise ValueError("magnitude must be >= 0")
    out = hexmesh.copy()
    boundary = set(int(v) for v in extract_boundary(hexmesh).boundary_vertices)

    edge_sum = np.zeros(len(out.vertices))
    edge_count = np.zeros(len(out.vertices))
    for cell in out.hexes:
        for a, b in meshmod.HEX_EDGES:
            u, v = int(cell[a]), int(cell[b])
            length = float(np.linalg.norm(out.vertices[u] - out.vertices[v]))
            edge_sum[u] += length
            edge_sum[v] += length
            edge_count[u] += 1
            edge_count[v] += 1
    local_scale = edge_sum / np.maximum(edge_count, 1)

    rng = np.random.default_rng(seed)
    for v in range(len(out.vertices)):
        # draw for every vertex so the stream is independent of which are interior
        direction = rng.standard_normal(3)
        radius = rng.random() ** (1.0 / 3.0)
        if v in boundary or magnitude == 0.0:
            continue
        n = np.linalg.norm(direction)
        if n == 0.0:
            continue
        out.vertices[v] += (magnitude * local_scale[v] * radius / n) * direction
    return out
