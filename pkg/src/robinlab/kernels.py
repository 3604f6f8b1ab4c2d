"""Hot numeric kernels, each with a numba body and a numpy twin.

The public functions dispatch on :func:`robinlab._accel.backend`.  Both paths
compute the same sums in the same order of magnitude of rounding; the
benchmark in ``benchmarks/bench_kernels.py`` times one against the other.
"""

from __future__ import annotations

import math

import numpy as np

from . import _accel
from ._accel import njit, prange

_CHUNK = 2048


# ---------------------------------------------------------------------------
# normalized associated Legendre functions
# ---------------------------------------------------------------------------

@njit
def _legendre_table_numba(x, lmax):
    n = x.shape[0]
    out = np.zeros((lmax + 1, lmax + 1, n))
    sint = np.sqrt(np.maximum(0.0, 1.0 - x * x))
    inv4pi = 1.0 / math.sqrt(4.0 * math.pi)
    for i in range(n):
        pmm = inv4pi
        for m in range(lmax + 1):
            if m > 0:
                pmm = pmm * math.sqrt((2.0 * m + 1.0) / (2.0 * m)) * sint[i]
            out[m, m, i] = pmm
            if m + 1 <= lmax:
                out[m, m + 1, i] = math.sqrt(2.0 * m + 3.0) * x[i] * pmm
            for l in range(m + 2, lmax + 1):
                a = math.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
                b = math.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
                out[m, l, i] = a * (x[i] * out[m, l - 1, i] - b * out[m, l - 2, i])
    return out


def _legendre_table_numpy(x, lmax):
    x = np.asarray(x, dtype=float)
    out = np.zeros((lmax + 1, lmax + 1, x.size))
    sint = np.sqrt(np.maximum(0.0, 1.0 - x * x))
    pmm = np.full(x.size, 1.0 / math.sqrt(4.0 * math.pi))
    for m in range(lmax + 1):
        if m > 0:
            pmm = pmm * math.sqrt((2.0 * m + 1.0) / (2.0 * m)) * sint
        out[m, m] = pmm
        if m + 1 <= lmax:
            out[m, m + 1] = math.sqrt(2.0 * m + 3.0) * x * pmm
        for l in range(m + 2, lmax + 1):
            a = math.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = math.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
            out[m, l] = a * (x * out[m, l - 1] - b * out[m, l - 2])
    return out


def legendre_table(x, lmax: int) -> np.ndarray:
    """Orthonormal associated Legendre values ``P[m, l, i]`` (zero for l < m).

    Normalized so that ``P[m, l] * cos(m phi) * sqrt(2 - delta_m0)`` is a unit
    spherical harmonic on the unit sphere.  No Condon-Shortley phase.
    """
    x = np.ascontiguousarray(x, dtype=float)
    if _accel.backend() == "numba":
        return _legendre_table_numba(x, int(lmax))
    return _legendre_table_numpy(x, int(lmax))


# ---------------------------------------------------------------------------
# ball masses on the sphere
# ---------------------------------------------------------------------------

@njit(parallel=True)
def _sphere_ball_masses_numba(points, mass, cos_radius):
    n = points.shape[0]
    out = np.zeros(n)
    for i in prange(n):
        px = points[i, 0]
        py = points[i, 1]
        pz = points[i, 2]
        acc = 0.0
        for j in range(n):
            if px * points[j, 0] + py * points[j, 1] + pz * points[j, 2] > cos_radius:
                acc += mass[j]
        out[i] = acc
    return out


def _sphere_ball_masses_numpy(points, mass, cos_radius):
    n = points.shape[0]
    out = np.empty(n)
    for start in range(0, n, _CHUNK):
        dots = points[start:start + _CHUNK] @ points.T
        out[start:start + _CHUNK] = np.where(dots > cos_radius, mass[None, :], 0.0).sum(axis=1)
    return out


def sphere_ball_masses(points, mass, cos_radius: float) -> np.ndarray:
    """For every point p_i, the sum of ``mass[j]`` over points with <p_i, p_j> > cos_radius."""
    points = np.ascontiguousarray(points, dtype=float)
    mass = np.ascontiguousarray(mass, dtype=float)
    if _accel.backend() == "numba":
        return _sphere_ball_masses_numba(points, mass, float(cos_radius))
    return _sphere_ball_masses_numpy(points, mass, float(cos_radius))


# ---------------------------------------------------------------------------
# off-diagonal log-distance energy in the plane
# ---------------------------------------------------------------------------

@njit(parallel=True)
def _log_pair_sum_numba(xy, a):
    n = xy.shape[0]
    rows = np.zeros(n)
    for i in prange(n):
        xi = xy[i, 0]
        yi = xy[i, 1]
        acc = 0.0
        for j in range(n):
            if j != i:
                dx = xi - xy[j, 0]
                dy = yi - xy[j, 1]
                acc += a[j] * 0.5 * math.log(dx * dx + dy * dy)
        rows[i] = a[i] * acc
    return rows.sum()


def _log_pair_sum_numpy(xy, a):
    n = xy.shape[0]
    total = 0.0
    for start in range(0, n, _CHUNK):
        blk = xy[start:start + _CHUNK]
        d2 = (blk[:, 0:1] - xy[None, :, 0]) ** 2 + (blk[:, 1:2] - xy[None, :, 1]) ** 2
        idx = np.arange(blk.shape[0])
        d2[idx, start + idx] = 1.0
        total += float(a[start:start + _CHUNK] @ (0.5 * np.log(d2)) @ a)
    return total


def log_pair_sum(xy, a) -> float:
    """``sum_{i != j} a_i a_j log|x_i - x_j|`` for planar points ``xy``."""
    xy = np.ascontiguousarray(xy, dtype=float)
    a = np.ascontiguousarray(a, dtype=float)
    if _accel.backend() == "numba":
        return float(_log_pair_sum_numba(xy, a))
    return _log_pair_sum_numpy(xy, a)
