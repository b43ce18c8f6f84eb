"""Readers and writers for every on-disk format.

Formats (byte-level grammar in docs/formats.md):
  - triangle surfaces: Wavefront OBJ (v/f records, fans for polygons)
  - hex meshes: legacy-ASCII VTK unstructured grid, cell type 12 only
  - feature sidecar: line-oriented text (corner / curve records)
  - quality reports and convergence logs: comma-delimited text with a header
"""

from __future__ import annotations

import numpy as np

from .mesh import FeatureBindings, HexMesh, MeshError, TriSurface
from .optimizer import ConvergenceLog
from .quality import QualityReport

COORD_FMT = "%.17g"


class ParseError(ValueError):
    """Malformed input file; message carries path and line number."""

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


# ---------------------------------------------------------------- OBJ

def read_tri_obj(path) -> TriSurface:
    """Triangle surface from an OBJ file; polygons are fan-triangulated.

    Normals/texcoords are ignored. The result carries no feature annotation
    (see read_features).
    """
    vertices = []
    triangles = []
    with open(path) as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise ParseError(path, line_no, "vertex record needs 3 coordinates")
                try:
                    vertices.append([float(x) for x in parts[1:4]])
                except ValueError as e:
                    raise ParseError(path, line_no, f"bad coordinate: {e}") from None
            elif tag == "f":
                refs = parts[1:]
                if len(refs) < 3:
                    raise ParseError(path, line_no,
                                     f"face with {len(refs)} vertices; need >= 3")
                idx = []
                for ref in refs:
                    head = ref.split("/")[0]
                    try:
                        i = int(head)
                    except ValueError:
                        raise ParseError(path, line_no,
                                         f"bad face index {ref!r}") from None
                    if i == 0:
                        raise ParseError(path, line_no, "face index 0 (indices are 1-based)")
                    idx.append(i - 1 if i > 0 else len(vertices) + i)
                for a, b in zip(idx[1:-1], idx[2:]):
                    triangles.append([idx[0], a, b])
            # other records (vn, vt, o, g, s, usemtl, mtllib, l) are ignored
    if not vertices or not triangles:
        raise ParseError(path, 0, "no vertices or faces found")
    tris = np.array(triangles, dtype=np.int64)
    if tris.min() < 0 or tris.max() >= len(vertices):
        bad = int(np.argmax((tris < 0) | (tris >= len(vertices))))
        raise ParseError(path, 0, f"face {bad} references a missing vertex")
    return TriSurface(np.array(vertices), tris)


def write_tri_obj(path, surface: TriSurface) -> None:
    with open(path, "w") as f:
        for v in surface.vertices:
            f.write("v %s %s %s\n" % tuple(COORD_FMT % x for x in v))
        for t in surface.triangles:
            f.write("f %d %d %d\n" % tuple(int(i) + 1 for i in t))


# ---------------------------------------------------------------- VTK

def _vtk_tokens(path):
    """(token, line_no) stream, skipping the 2-line header and comments."""
    with open(path) as f:
        for line_no, raw in enumerate(f, start=1):
            if line_no == 2:        # free-form title line
                continue
            if raw.startswith("#"):
                continue
            for tok in raw.split():
                yield tok, line_no


def read_hex_vtk(path) -> HexMesh:
    """Legacy-ASCII unstructured grid with hexahedron (type 12) cells only."""
    toks = _vtk_tokens(path)

    def expect(what, convert=str):
        try:
            tok, line_no = next(toks)
        except StopIteration:
            raise ParseError(path, -1, f"unexpected end of file, wanted {what}") from None
        try:
            return convert(tok), line_no
        except ValueError:
            raise ParseError(path, line_no, f"bad {what}: {tok!r}") from None

    def expect_keyword(word):
        tok, line_no = expect(word)
        if tok.upper() != word:
            raise ParseError(path, line_no, f"expected {word}, got {tok!r}")
        return line_no

    expect_keyword("ASCII")
    expect_keyword("DATASET")
    tok, line_no = expect("dataset type")
    if tok.upper() != "UNSTRUCTURED_GRID":
        raise ParseError(path, line_no, f"unsupported dataset {tok!r}")
    expect_keyword("POINTS")
    n_points, _ = expect("point count", int)
    expect("point scalar type")
    coords = np.empty(3 * n_points)
    for i in range(3 * n_points):
        coords[i], _ = expect("coordinate", float)

    expect_keyword("CELLS")
    n_cells, _ = expect("cell count", int)
    n_ints, _ = expect("cell record size", int)
    if n_ints != 9 * n_cells:
        raise ParseError(path, line_no,
                         f"CELLS record size {n_ints} != 9 * {n_cells}")
    cells = np.empty((n_cells, 8), dtype=np.int64)
    for c in range(n_cells):
        arity, line_no = expect("cell arity", int)
        if arity != 8:
            raise ParseError(path, line_no, f"cell {c} has {arity} vertices, not 8")
        for j in range(8):
            cells[c, j], _ = expect("cell vertex index", int)

    expect_keyword("CELL_TYPES")
    n_types, line_no = expect("cell type count", int)
    if n_types != n_cells:
        raise ParseError(path, line_no,
                         f"CELL_TYPES count {n_types} != CELLS count {n_cells}")
    for c in range(n_cells):
        ctype, line_no = expect("cell type", int)
        if ctype != 12:
            raise ParseError(path, line_no,
                             f"cell {c} has type {ctype}; only hexahedra (12) supported")
    try:
        return HexMesh(coords.reshape(-1, 3), cells)
    except MeshError as e:
        raise ParseError(path, 0, str(e)) from None


def write_hex_vtk(path, hexmesh: HexMesh, title="hexfit mesh") -> None:
    """Coordinates are printed with 17 significant digits (exact round trip)."""
    with open(path, "w") as f:
        f.write("# vtk DataFile Version 3.0\n")
        f.write(title + "\n")
        f.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
        f.write(f"POINTS {len(hexmesh.vertices)} double\n")
        for v in hexmesh.vertices:
            f.write("%s %s %s\n" % tuple(COORD_FMT % x for x in v))
        n = len(hexmesh.hexes)
        f.write(f"CELLS {n} {9 * n}\n")
        for cell in hexmesh.hexes:
            f.write("8 " + " ".join(str(int(i)) for i in cell) + "\n")
        f.write(f"CELL_TYPES {n}\n")
        for _ in range(n):
            f.write("12\n")


# ------------------------------------------------------- feature sidecar

class FeatureSidecar:
    """Parsed sidecar: sharp corners and sharp curves with their bindings.

    corners: list of (surface vertex, hex vertex) pairs.
    curves: list of (surface-vertex chain, bound hex vertices) pairs.
    """

    def __init__(self, corners=None, curves=None):
        self.corners: list[tuple[int, int]] = list(corners or [])
        self.curves: list[tuple[list[int], list[int]]] = list(curves or [])


def read_features(path) -> FeatureSidecar:
    """Parse a sidecar without validating against any mesh (see apply_features)."""
    sidecar = FeatureSidecar()
    seen_corners = set()
    with open(path) as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.split("#")[0].strip()
            if not line:
                continue
            parts = line.split()
            tag = parts[0]
            if tag == "corner":
                if len(parts) != 3:
                    raise ParseError(path, line_no,
                                     "corner record needs: corner SURF_V HEX_V")
                try:
                    sv, hv = int(parts[1]), int(parts[2])
                except ValueError:
                    raise ParseError(path, line_no, "corner indices must be integers") from None
                if sv in seen_corners:
                    raise ParseError(path, line_no, f"corner {sv} listed twice")
                seen_corners.add(sv)
                sidecar.corners.append((sv, hv))
            elif tag == "curve":
                if ":" not in parts:
                    raise ParseError(path, line_no,
                                     "curve record needs: curve CHAIN... : BOUND...")
                sep = parts.index(":")
                try:
                    chain = [int(x) for x in parts[1:sep]]
                    bound = [int(x) for x in parts[sep + 1:]]
                except ValueError:
                    raise ParseError(path, line_no, "curve indices must be integers") from None
                if len(chain) < 2:
                    raise ParseError(path, line_no, "curve chain needs >= 2 vertices")
                if not bound:
                    raise ParseError(path, line_no, "curve with no bound vertices")
                sidecar.curves.append((chain, bound))
            else:
                raise ParseError(path, line_no, f"unknown record {tag!r}")
    return sidecar


def write_features(path, sidecar: FeatureSidecar) -> None:
    with open(path, "w") as f:
        for sv, hv in sidecar.corners:
            f.write(f"corner {sv} {hv}\n")
        for chain, bound in sidecar.curves:
            f.write("curve " + " ".join(str(i) for i in chain) + " : "
                    + " ".join(str(i) for i in bound) + "\n")


def apply_features(surface: TriSurface, sidecar: FeatureSidecar):
    """Annotate a surface with the sidecar's features and build the bindings.

    Returns (annotated TriSurface, FeatureBindings). Index-range validation
    against the hex mesh happens in classify_boundary_vertices.
    """
    nv = len(surface.vertices)
    for sv, _ in sidecar.corners:
        if not 0 <= sv < nv:
            raise MeshError(f"sidecar corner {sv} out of surface range")
    for ci, (chain, _) in enumerate(sidecar.curves):
        for v in chain:
            if not 0 <= v < nv:
                raise MeshError(f"sidecar curve {ci} vertex {v} out of surface range")
    annotated = TriSurface(
        surface.vertices, surface.triangles,
        sharp_corners=frozenset(sv for sv, _ in sidecar.corners),
        sharp_curves=[np.array(chain, dtype=np.int64) for chain, _ in sidecar.curves])
    bindings = FeatureBindings(
        corners=list(sidecar.corners),
        curves=[tuple(bound) for _, bound in sidecar.curves])
    return annotated, bindings


# ----------------------------------------------------- reports and logs

REPORT_FIELDS = ["phase", "min_sj", "max_sj", "inverted", "max_dist"] + \
    [f"bin_{i:02d}" for i in range(20)]


def write_report(path, reports: list[tuple[str, QualityReport]],
                 status: str | None = None) -> None:
    """Comma-delimited report, one row per phase; optional status comment."""
    with open(path, "w") as f:
        if status is not None:
            f.write(f"# status: {status}\n")
        f.write(",".join(REPORT_FIELDS) + "\n")
        for phase, r in reports:
            row = [phase, COORD_FMT % r.min_sj, COORD_FMT % r.max_sj,
                   str(r.inverted), COORD_FMT % r.max_dist]
            row += [str(int(c)) for c in r.histogram]
            f.write(",".join(row) + "\n")


def read_report(path) -> tuple[str | None, list[dict]]:
    """(status, rows) from a report file; numeric fields parsed as floats."""
    status = None
    rows = []
    header = None
    with open(path) as f:
        for raw in f:
            line = raw.strip()
            if line.startswith("# status:"):
                status = line.split(":", 1)[1].strip()
                continue
            if not line:
                continue
            if header is None:
                header = line.split(",")
                continue
            values = line.split(",")
            row = {"phase": values[0]}
            row.update({k: float(v) for k, v in zip(header[1:], values[1:])})
            rows.append(row)
    return status, rows


CONVERGENCE_FIELDS = ["iteration", "energy", "min_sj", "max_dist",
                      "step", "theta", "rho"]


def write_convergence(path, log: ConvergenceLog) -> None:
    """Per-iteration records. Wall time is kept in memory only so that runs
    with identical configuration produce byte-identical files."""
    with open(path, "w") as f:
        f.write(",".join(CONVERGENCE_FIELDS) + "\n")
        for r in log.records:
            f.write(",".join([
                str(r.iteration), COORD_FMT % r.energy, COORD_FMT % r.min_sj,
                COORD_FMT % r.max_dist, COORD_FMT % r.step,
                COORD_FMT % r.theta, COORD_FMT % r.rho]) + "\n")
