# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels: hex sample Jacobians, rectified energy/gradient, and
exhaustive closest-point scans. Mirrors `_py.py`; keep both in sync."""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, sqrt

cnp.import_array()

NAME = "compiled"

cdef double DEGENERATE_EDGE = 1e-30

cdef int[8][3] CORNER_NEIGHBORS = [
    [1, 3, 4], [2, 0, 5], [3, 1, 6], [0, 2, 7],
    [7, 5, 0], [4, 6, 1], [5, 7, 2], [6, 4, 3],
]

cdef int[12][2] HEX_EDGES = [
    [0, 1], [1, 2], [2, 3], [3, 0],
    [4, 5], [5, 6], [6, 7], [7, 4],
    [0, 4], [1, 5], [2, 6], [3, 7],
]

# (axis, plus-face, minus-face) quads for the body-center frame.
cdef int[3][2][4] BODY_FACE_PAIRS = [
    [[1, 2, 6, 5], [0, 3, 7, 4]],
    [[2, 3, 7, 6], [1, 0, 4, 5]],
    [[4, 5, 6, 7], [0, 1, 2, 3]],
]


cdef inline void _cross(double* a, double* b, double* out) noexcept nogil:
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]


cdef inline double _dot(double* a, double* b) noexcept nogil:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


cdef void _load_frames(double* pts, double* frames) noexcept nogil:
    """pts: 8x3, frames: 9x3x3 edge vectors (frames[s*9 + i*3 + j])."""
    cdef int s, i, j, v
    cdef double fp, fm
    for s in range(8):
        for i in range(3):
            v = CORNER_NEIGHBORS[s][i]
            for j in range(3):
                frames[(s * 3 + i) * 3 + j] = pts[v * 3 + j] - pts[s * 3 + j]
    for i in range(3):
        for j in range(3):
            fp = 0.0
            fm = 0.0
            for v in range(4):
                fp += pts[BODY_FACE_PAIRS[i][0][v] * 3 + j]
                fm += pts[BODY_FACE_PAIRS[i][1][v] * 3 + j]
            frames[(8 * 3 + i) * 3 + j] = 0.25 * fp - 0.25 * fm


cdef void _sample_eval(double* frames, double* jac, double* sj,
                       unsigned char* degen) noexcept nogil:
    cdef int s, i
    cdef double n0, n1, n2, d
    cdef double c0[3]
    cdef double* e
    for s in range(9):
        e = frames + s * 9
        _cross(e + 3, e + 6, c0)
        jac[s] = _dot(e, c0)
        n0 = sqrt(_dot(e, e))
        n1 = sqrt(_dot(e + 3, e + 3))
        n2 = sqrt(_dot(e + 6, e + 6))
        if n0 < DEGENERATE_EDGE or n1 < DEGENERATE_EDGE or n2 < DEGENERATE_EDGE:
            degen[s] = 1
            sj[s] = 0.0
        else:
            degen[s] = 0
            d = jac[s] / (n0 * n1 * n2)
            if d > 1.0:
                d = 1.0
            elif d < -1.0:
                d = -1.0
            sj[s] = d


cdef double _avg_edge_length(double* pts) noexcept nogil:
    cdef int e, j
    cdef double total = 0.0, d, acc
    for e in range(12):
        acc = 0.0
        for j in range(3):
            d = pts[HEX_EDGES[e][1] * 3 + j] - pts[HEX_EDGES[e][0] * 3 + j]
            acc += d * d
        total += sqrt(acc)
    return total / 12.0


def hex_quality_samples(vertices, hexes):
    cdef double[:, ::1] V = np.ascontiguousarray(vertices, dtype=np.float64)
    cdef cnp.int64_t[:, ::1] H = np.ascontiguousarray(hexes, dtype=np.int64)
    cdef Py_ssize_t m = H.shape[0]
    jac_arr = np.empty((m, 9))
    sj_arr = np.empty((m, 9))
    ebar_arr = np.empty(m)
    degen_arr = np.empty((m, 9), dtype=np.uint8)
    cdef double[:, ::1] jac = jac_arr
    cdef double[:, ::1] sj = sj_arr
    cdef double[::1] ebar = ebar_arr
    cdef unsigned char[:, ::1] degen = degen_arr
    cdef double pts[24]
    cdef double frames[81]
    cdef Py_ssize_t h
    cdef int v, j
    with nogil:
        for h in range(m):
            for v in range(8):
                for j in range(3):
                    pts[v * 3 + j] = V[H[h, v], j]
            _load_frames(pts, frames)
            _sample_eval(frames, &jac[h, 0], &sj[h, 0], &degen[h, 0])
            ebar[h] = _avg_edge_length(pts)
    return jac_arr, sj_arr, ebar_arr, degen_arr.astype(bool)


cdef void _scatter(double[:, ::1] grad, cnp.int64_t[:, ::1] H, Py_ssize_t h,
                   int sample, double* g0, double* g1, double* g2) noexcept nogil:
    """Scatter d/de_i gradients of one sample into the vertex gradient."""
    cdef int i, j, v
    cdef double* gs[3]
    gs[0] = g0
    gs[1] = g1
    gs[2] = g2
    if sample < 8:
        for i in range(3):
            v = CORNER_NEIGHBORS[sample][i]
            for j in range(3):
                grad[H[h, v], j] += gs[i][j]
        for j in range(3):
            grad[H[h, sample], j] -= g0[j] + g1[j] + g2[j]
    else:
        for i in range(3):
            for v in range(4):
                for j in range(3):
                    grad[H[h, BODY_FACE_PAIRS[i][0][v]], j] += 0.25 * gs[i][j]
                    grad[H[h, BODY_FACE_PAIRS[i][1][v]], j] -= 0.25 * gs[i][j]


def rehqj_energy_gradient(vertices, hexes, double theta,
                          bint spread_gradient=False, bint with_gradient=True):
    if spread_gradient:
        raise NotImplementedError("spread gradient uses the python backend")
    cdef double[:, ::1] V = np.ascontiguousarray(vertices, dtype=np.float64)
    cdef cnp.int64_t[:, ::1] H = np.ascontiguousarray(hexes, dtype=np.int64)
    cdef Py_ssize_t m = H.shape[0]
    grad_arr = np.zeros((V.shape[0], 3)) if with_gradient else None
    cdef double[:, ::1] grad
    if with_gradient:
        grad = grad_arr

    cdef double pts[24]
    cdef double frames[81]
    cdef double jac[9]
    cdef double sj[9]
    cdef unsigned char degen[9]
    cdef double energy = 0.0
    cdef double ebar, jmin, sjmin, weight, d, s
    cdef int jarg, sjarg, i, j, v, sample
    cdef Py_ssize_t h
    cdef double* e
    cdef double cof[3][3]
    cdef double g0[3]
    cdef double g1[3]
    cdef double g2[3]
    cdef double n0, n1, n2, denom

    with nogil:
        for h in range(m):
            for v in range(8):
                for j in range(3):
                    pts[v * 3 + j] = V[H[h, v], j]
            _load_frames(pts, frames)
            _sample_eval(frames, jac, sj, degen)
            ebar = _avg_edge_length(pts)
            jmin = jac[0]
            jarg = 0
            sjmin = sj[0]
            sjarg = 0
            for i in range(1, 9):
                if jac[i] < jmin:
                    jmin = jac[i]
                    jarg = i
                if sj[i] < sjmin:
                    sjmin = sj[i]
                    sjarg = i
            if jmin <= 0.0:
                energy += jmin / ebar
                if with_gradient:
                    sample = jarg
                    e = frames + sample * 9
                    _cross(e + 3, e + 6, cof[0])
                    _cross(e + 6, e, cof[1])
                    _cross(e, e + 3, cof[2])
                    weight = 1.0 / ebar
                    for j in range(3):
                        g0[j] = cof[0][j] * weight
                        g1[j] = cof[1][j] * weight
                        g2[j] = cof[2][j] * weight
                    _scatter(grad, H, h, sample, g0, g1, g2)
            elif sjmin <= theta:
                energy += sjmin * ebar * ebar
                sample = sjarg
                if with_gradient and not degen[sample]:
                    e = frames + sample * 9
                    _cross(e + 3, e + 6, cof[0])
                    _cross(e + 6, e, cof[1])
                    _cross(e, e + 3, cof[2])
                    n0 = sqrt(_dot(e, e))
                    n1 = sqrt(_dot(e + 3, e + 3))
                    n2 = sqrt(_dot(e + 6, e + 6))
                    denom = n0 * n1 * n2
                    s = sj[sample]
                    weight = ebar * ebar
                    for j in range(3):
                        g0[j] = (cof[0][j] / denom - s / (n0 * n0) * e[j]) * weight
                        g1[j] = (cof[1][j] / denom - s / (n1 * n1) * e[3 + j]) * weight
                        g2[j] = (cof[2][j] / denom - s / (n2 * n2) * e[6 + j]) * weight
                    _scatter(grad, H, h, sample, g0, g1, g2)
            else:
                energy += theta
    return energy, grad_arr


cdef double _closest_on_tri(double* p, double* a, double* b, double* c,
                            double* q) noexcept nogil:
    """Closest point q on a non-degenerate triangle; returns squared distance."""
    cdef double ab[3]
    cdef double ac[3]
    cdef double ap[3]
    cdef double bp[3]
    cdef double cp[3]
    cdef double diff[3]
    cdef double d1, d2, d3, d4, d5, d6, va, vb, vc, t, inv, v, w
    cdef int j
    for j in range(3):
        ab[j] = b[j] - a[j]
        ac[j] = c[j] - a[j]
        ap[j] = p[j] - a[j]
    d1 = _dot(ab, ap)
    d2 = _dot(ac, ap)
    if d1 <= 0.0 and d2 <= 0.0:
        for j in range(3):
            q[j] = a[j]
    else:
        for j in range(3):
            bp[j] = p[j] - b[j]
            cp[j] = p[j] - c[j]
        d3 = _dot(ab, bp)
        d4 = _dot(ac, bp)
        d5 = _dot(ab, cp)
        d6 = _dot(ac, cp)
        vc = d1 * d4 - d3 * d2
        vb = d5 * d2 - d1 * d6
        va = d3 * d6 - d5 * d4
        if d3 >= 0.0 and d4 <= d3:
            for j in range(3):
                q[j] = b[j]
        elif vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
            t = d1 / (d1 - d3)
            for j in range(3):
                q[j] = a[j] + t * ab[j]
        elif d6 >= 0.0 and d5 <= d6:
            for j in range(3):
                q[j] = c[j]
        elif vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
            t = d2 / (d2 - d6)
            for j in range(3):
                q[j] = a[j] + t * ac[j]
        elif va <= 0.0 and d4 - d3 >= 0.0 and d5 - d6 >= 0.0:
            t = (d4 - d3) / ((d4 - d3) + (d5 - d6))
            for j in range(3):
                q[j] = b[j] + t * (c[j] - b[j])
        else:
            inv = 1.0 / (va + vb + vc)
            v = vb * inv
            w = vc * inv
            for j in range(3):
                q[j] = a[j] + v * ab[j] + w * ac[j]
    for j in range(3):
        diff[j] = p[j] - q[j]
    return _dot(diff, diff)


def closest_on_triangles(points, tri_points):
    cdef double[:, ::1] P = np.ascontiguousarray(points, dtype=np.float64)
    cdef double[:, :, ::1] T = np.ascontiguousarray(tri_points, dtype=np.float64)
    cdef Py_ssize_t k = P.shape[0]
    cdef Py_ssize_t t = T.shape[0]
    idx_arr = np.zeros(k, dtype=np.int64)
    pt_arr = np.zeros((k, 3))
    d2_arr = np.full(k, np.inf)
    cdef cnp.int64_t[::1] idx = idx_arr
    cdef double[:, ::1] pt = pt_arr
    cdef double[::1] d2 = d2_arr
    cdef double p[3]
    cdef double q[3]
    cdef double best, d
    cdef Py_ssize_t i, tri
    cdef int j
    with nogil:
        for i in range(k):
            for j in range(3):
                p[j] = P[i, j]
            best = INFINITY
            for tri in range(t):
                d = _closest_on_tri(p, &T[tri, 0, 0], &T[tri, 1, 0],
                                    &T[tri, 2, 0], q)
                if d < best:
                    best = d
                    idx[i] = tri
                    for j in range(3):
                        pt[i, j] = q[j]
            d2[i] = best
    return idx_arr, pt_arr, d2_arr
