"""Hot numerical kernels with backend selection at import.

The compiled Cython extension is used when available; set HEXFIT_PURE_PYTHON=1
to force the numpy fallback. Both backends implement the same contracts and
agree to floating-point roundoff (see tests/test_kernels.py and
benchmarks/bench_kernels.py).
"""

from __future__ import annotations

import os

from . import _py

DEGENERATE_EDGE = _py.DEGENERATE_EDGE

if os.environ.get("HEXFIT_PURE_PYTHON"):
    backend = _py
else:
    try:
        from . import _core as backend  # type: ignore[no-redef]
    except ImportError:
        backend = _py

BACKEND = backend.NAME


def hex_quality_samples(vertices, hexes):
    return backend.hex_quality_samples(vertices, hexes)


def rehqj_energy_gradient(vertices, hexes, theta, spread_gradient=False,
                          with_gradient=True):
    if spread_gradient and backend is not _py:
        # Non-default gradient routing is only implemented in the fallback.
        return _py.rehqj_energy_gradient(vertices, hexes, theta,
                                         spread_gradient=True,
                                         with_gradient=with_gradient)
    return backend.rehqj_energy_gradient(vertices, hexes, theta,
                                         spread_gradient=spread_gradient,
                                         with_gradient=with_gradient)


def closest_on_triangles(points, tri_points):
    return backend.closest_on_triangles(points, tri_points)
