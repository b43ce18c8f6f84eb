"""Pure-numpy fallback kernels.

Mirrors the compiled extension in `_core.pyx`; keep formulas and branch
structure in sync so both backends agree to floating-point roundoff.
"""

from __future__ import annotations

import numpy as np

from ..mesh import BODY_FACE_PAIRS, CORNER_NEIGHBORS, HEX_EDGES

NAME = "python"

DEGENERATE_EDGE = 1e-30


def _sample_frames(points: np.ndarray):
    """Edge-vector frames for the 9 sample points of each hex.

    points: (M, 8, 3). Returns frames (M, 9, 3, 3) with frames[m, s, i] = e_i.
    """
    m = points.shape[0]
    frames = np.empty((m, 9, 3, 3))
    frames[:, :8] = points[:, CORNER_NEIGHBORS] - points[:, :, None, :]
    plus = points[:, BODY_FACE_PAIRS[:, 0]].mean(axis=2)    # (M, 3, 3)
    minus = points[:, BODY_FACE_PAIRS[:, 1]].mean(axis=2)
    frames[:, 8] = plus - minus
    return frames


def _det3(frames: np.ndarray) -> np.ndarray:
    """det(e0, e1, e2) over the last two axes, written out explicitly."""
    e0 = frames[..., 0, :]
    e1 = frames[..., 1, :]
    e2 = frames[..., 2, :]
    c = np.cross(e1, e2)
    return np.einsum("...i,...i->...", e0, c)


def hex_quality_samples(vertices: np.ndarray, hexes: np.ndarray):
    """Per-hex sample Jacobians.

    Returns (J (M, 9), SJ (M, 9), ebar (M,), degenerate (M, 9) bool).
    SJ is clipped to [-1, 1]; degenerate samples (an edge below the
    degeneracy floor) report SJ = 0.
    """
    points = vertices[hexes]
    frames = _sample_frames(points)
    jac = _det3(frames)
    norms = np.linalg.norm(frames, axis=-1)                 # (M, 9, 3)
    degenerate = (norms < DEGENERATE_EDGE).any(axis=-1)
    denom = np.where(degenerate, 1.0, norms.prod(axis=-1))
    sj = np.clip(jac / denom, -1.0, 1.0)
    sj[degenerate] = 0.0

    edges = points[:, HEX_EDGES[:, 1]] - points[:, HEX_EDGES[:, 0]]
    ebar = np.linalg.norm(edges, axis=-1).mean(axis=-1)
    return jac, sj, ebar, degenerate


def _scatter_sample_gradient(grad, hexes, sel, samples, g0, g1, g2):
    """Scatter per-sample edge-vector gradients (g_i = d/de_i) to vertices."""
    corner = samples < 8
    if corner.any():
        hs = hexes[sel[corner]]
        sc = samples[corner]
        nbr = CORNER_NEIGHBORS[sc]                           # (K, 3)
        for i, gi in enumerate((g0, g1, g2)):
            np.add.at(grad, hs[np.arange(len(hs)), nbr[:, i]], gi[corner])
        np.add.at(grad, hs[np.arange(len(hs)), sc],
                  -(g0[corner] + g1[corner] + g2[corner]))
    body = ~corner
    if body.any():
        hs = hexes[sel[body]]
        for i, gi in enumerate((g0, g1, g2)):
            quarter = 0.25 * gi[body]
            for v in BODY_FACE_PAIRS[i, 0]:
                np.add.at(grad, hs[:, v], quarter)
            for v in BODY_FACE_PAIRS[i, 1]:
                np.add.at(grad, hs[:, v], -quarter)


def rehqj_energy_gradient(vertices: np.ndarray, hexes: np.ndarray, theta: float,
                          spread_gradient: bool = False, with_gradient: bool = True):
    """Sum of the rectified hybrid quadratic Jacobian and its vertex gradient.

    The average edge length is held constant during differentiation. By
    default the gradient flows through the argmin sample only (lowest index
    on ties); `spread_gradient` routes it through every sample on the active
    side of the branch instead.
    """
    points = vertices[hexes]
    frames = _sample_frames(points)
    jac = _det3(frames)
    norms = np.linalg.norm(frames, axis=-1)
    degenerate = (norms < DEGENERATE_EDGE).any(axis=-1)
    denom = np.where(degenerate, 1.0, norms.prod(axis=-1))
    sj = np.clip(jac / denom, -1.0, 1.0)
    sj[degenerate] = 0.0
    edges = points[:, HEX_EDGES[:, 1]] - points[:, HEX_EDGES[:, 0]]
    ebar = np.linalg.norm(edges, axis=-1).mean(axis=-1)

    j_h = jac.min(axis=1)
    sj_h = sj.min(axis=1)
    neg = j_h <= 0.0
    qsj = ~neg & (sj_h <= theta)

    values = np.where(neg, j_h / ebar, np.where(qsj, sj_h * ebar ** 2, theta))
    energy = float(values.sum())
    if not with_gradient:
        return energy, None

    grad = np.zeros_like(vertices)

    def jac_gradient(sel, samples, weight):
        f = frames[sel, samples]
        g0 = np.cross(f[:, 1], f[:, 2]) * weight[:, None]
        g1 = np.cross(f[:, 2], f[:, 0]) * weight[:, None]
        g2 = np.cross(f[:, 0], f[:, 1]) * weight[:, None]
        _scatter_sample_gradient(grad, hexes, sel, samples, g0, g1, g2)

    def sj_gradient(sel, samples, weight):
        ok = ~degenerate[sel, samples]
        sel, samples, weight = sel[ok], samples[ok], weight[ok]
        f = frames[sel, samples]
        n = norms[sel, samples]
        d = denom[sel, samples]
        s = sj[sel, samples]
        gs = []
        cofs = (np.cross(f[:, 1], f[:, 2]),
                np.cross(f[:, 2], f[:, 0]),
                np.cross(f[:, 0], f[:, 1]))
        for i in range(3):
            gi = cofs[i] / d[:, None] - (s / n[:, i] ** 2)[:, None] * f[:, i]
            gs.append(gi * weight[:, None])
        _scatter_sample_gradient(grad, hexes, sel, samples, gs[0], gs[1], gs[2])

    if spread_gradient:
        for s in range(9):
            col = np.full(1, s)
            sel = np.where(neg & (jac[:, s] <= 0.0))[0]
            if len(sel):
                jac_gradient(sel, np.repeat(col, len(sel)), 1.0 / ebar[sel])
            sel = np.where(qsj & (sj[:, s] <= theta))[0]
            if len(sel):
                sj_gradient(sel, np.repeat(col, len(sel)), ebar[sel] ** 2)
    else:
        sel = np.where(neg)[0]
        if len(sel):
            jac_gradient(sel, jac[sel].argmin(axis=1), 1.0 / ebar[sel])
        sel = np.where(qsj)[0]
        if len(sel):
            sj_gradient(sel, sj[sel].argmin(axis=1), ebar[sel] ** 2)
    return energy, grad


def _closest_on_triangle_batch(p: np.ndarray, a, b, c):
    """Closest points of p (K, 3) on triangles (a, b, c) (K, 3), Ericson-style.

    Vectorized with masks; branch order matches the scalar version in
    `projection.closest_point_on_triangle`.
    """
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)

    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    out = np.empty_like(p)
    done = np.zeros(len(p), dtype=bool)

    def take(mask, value):
        mask = mask & ~done
        out[mask] = value[mask] if value.ndim == 2 else value
        done[mask] = True

    take((d1 <= 0.0) & (d2 <= 0.0), a)
    take((d3 >= 0.0) & (d4 <= d3), b)
    with np.errstate(divide="ignore", invalid="ignore"):
        v_ab = d1 / (d1 - d3)
        take((vc <= 0.0) & (d1 >= 0.0) & (d3 <= 0.0), a + v_ab[:, None] * ab)
        take((d6 >= 0.0) & (d5 <= d6), c)
        w_ac = d2 / (d2 - d6)
        take((vb <= 0.0) & (d2 >= 0.0) & (d6 <= 0.0), a + w_ac[:, None] * ac)
        w_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        take((va <= 0.0) & (d4 - d3 >= 0.0) & (d5 - d6 >= 0.0),
             b + w_bc[:, None] * (c - b))
        inv = 1.0 / (va + vb + vc)
        v = vb * inv
        w = vc * inv
        take(np.ones(len(p), dtype=bool), a + v[:, None] * ab + w[:, None] * ac)
    return out


def closest_on_triangles(points: np.ndarray, tri_points: np.ndarray):
    """Exhaustive closest-point scan over all triangles for each query point.

    points: (K, 3); tri_points: (T, 3, 3).
    Returns (tri index (K,), closest point (K, 3), squared distance (K,)).
    Ties pick the lowest triangle index.
    """
    k = len(points)
    t = len(tri_points)
    best_d2 = np.full(k, np.inf)
    best_idx = np.zeros(k, dtype=np.int64)
    best_pt = np.zeros((k, 3))

    a = tri_points[:, 0]
    b = tri_points[:, 1]
    c = tri_points[:, 2]
    # Chunk over triangles to bound the K x T intermediate.
    chunk = max(1, int(4e6) // max(k, 1))
    for t0 in range(0, t, chunk):
        t1 = min(t, t0 + chunk)
        n = t1 - t0
        pk = np.repeat(points, n, axis=0)
        ak = np.tile(a[t0:t1], (k, 1))
        bk = np.tile(b[t0:t1], (k, 1))
        ck = np.tile(c[t0:t1], (k, 1))
        q = _closest_on_triangle_batch(pk, ak, bk, ck).reshape(k, n, 3)
        d2 = ((points[:, None, :] - q) ** 2).sum(axis=-1)
        local = d2.argmin(axis=1)
        local_d2 = d2[np.arange(k), local]
        better = local_d2 < best_d2
        best_d2[better] = local_d2[better]
        best_idx[better] = local[better] + t0
        best_pt[better] = q[np.arange(k), local][better]
    return best_idx, best_pt, best_d2
