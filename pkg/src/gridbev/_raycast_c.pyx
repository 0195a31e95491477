# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled ray casting kernels: slab clipping + DDA grid traversal.

Mirrors _raycast_py arithmetic operation for operation so both backends
produce bit-identical accumulators.
"""

from libc.math cimport floor, sqrt, INFINITY

import numpy as np
cimport numpy as cnp

cnp.import_array()

IS_COMPILED = True


cdef struct Walk:
    double t0
    double t1
    double length
    int iu
    int iv
    int step_u
    int step_v
    double t_max_u
    double t_max_v
    double t_delta_u
    double t_delta_v
    bint end_inside
    bint empty


cdef inline void _setup(double ox, double oy, double ex, double ey,
                        int nu, int nv, double cell, Walk* w) nogil:
    cdef double du = ex - ox
    cdef double dv = ey - oy
    cdef double uhi = nu * cell
    cdef double vhi = nv * cell
    cdef double t0 = 0.0, t1 = 1.0, ta, tb, pu, pv

    w.empty = True
    w.length = sqrt(du * du + dv * dv)
    if w.length == 0.0:
        return
    if du != 0.0:
        ta = (0.0 - ox) / du
        tb = (uhi - ox) / du
        if ta > tb:
            ta, tb = tb, ta
        if ta > t0: t0 = ta
        if tb < t1: t1 = tb
    elif ox < 0.0 or ox > uhi:
        return
    if dv != 0.0:
        ta = (0.0 - oy) / dv
        tb = (vhi - oy) / dv
        if ta > tb:
            ta, tb = tb, ta
        if ta > t0: t0 = ta
        if tb < t1: t1 = tb
    elif oy < 0.0 or oy > vhi:
        return
    if t1 <= t0:
        return

    w.t0 = t0
    w.t1 = t1
    w.end_inside = t1 >= 1.0

    pu = ox + du * t0
    pv = oy + dv * t0
    w.iu = <int>floor(pu / cell)
    if w.iu < 0: w.iu = 0
    if w.iu > nu - 1: w.iu = nu - 1
    w.iv = <int>floor(pv / cell)
    if w.iv < 0: w.iv = 0
    if w.iv > nv - 1: w.iv = nv - 1
    if du < 0.0 and pu == w.iu * cell and w.iu > 0:
        w.iu -= 1
    if dv < 0.0 and pv == w.iv * cell and w.iv > 0:
        w.iv -= 1

    if du > 0.0:
        w.step_u = 1
        w.t_max_u = ((w.iu + 1) * cell - ox) / du
        w.t_delta_u = cell / du
    elif du < 0.0:
        w.step_u = -1
        w.t_max_u = (w.iu * cell - ox) / du
        w.t_delta_u = -cell / du
    else:
        w.step_u = 0
        w.t_max_u = INFINITY
        w.t_delta_u = INFINITY
    if dv > 0.0:
        w.step_v = 1
        w.t_max_v = ((w.iv + 1) * cell - oy) / dv
        w.t_delta_v = cell / dv
    elif dv < 0.0:
        w.step_v = -1
        w.t_max_v = (w.iv * cell - oy) / dv
        w.t_delta_v = -cell / dv
    else:
        w.step_v = 0
        w.t_max_v = INFINITY
        w.t_delta_v = INFINITY
    w.empty = False


def traverse_ray(double ox, double oy, double ex, double ey,
                 int nu, int nv, double cell):
    """Single-ray traversal; returns (iu, iv, d, end_inside) like the fallback."""
    cdef Walk w
    if ex == ox and ey == oy:
        raise ValueError("zero-length ray")
    _setup(ox, oy, ex, ey, nu, nv, cell, &w)
    empty = (np.empty(0, np.int64), np.empty(0, np.int64),
             np.empty(0, np.float64), False)
    if w.empty:
        return empty

    cdef cnp.ndarray[cnp.int64_t, ndim=1] out_iu = np.empty(nu + nv + 2, np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out_iv = np.empty(nu + nv + 2, np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_d = np.empty(nu + nv + 2, np.float64)
    cdef Py_ssize_t m = 0
    cdef double t = w.t0, tn, d

    while True:
        tn = w.t_max_u if w.t_max_u < w.t_max_v else w.t_max_v
        if tn > w.t1:
            tn = w.t1
        d = (tn - t) * w.length
        if d > 0.0:
            out_iu[m] = w.iu
            out_iv[m] = w.iv
            out_d[m] = d
            m += 1
        if tn >= w.t1:
            break
        if w.t_max_u <= w.t_max_v:
            w.iu += w.step_u
            w.t_max_u += w.t_delta_u
            if w.iu < 0 or w.iu >= nu:
                break
        else:
            w.iv += w.step_v
            w.t_max_v += w.t_delta_v
            if w.iv < 0 or w.iv >= nv:
                break
        t = tn
    if m == 0:
        return empty
    return out_iu[:m].copy(), out_iv[:m].copy(), out_d[:m].copy(), bool(w.end_inside)


def accumulate_rays(double ox, double oy,
                    double[:, ::1] ends, double[::1] z, double[::1] intensity,
                    int nu, int nv, double cell,
                    long long[::1] det, long long[::1] obs, double[::1] trav,
                    double[::1] isum, double[::1] zmin, double[::1] zmax):
    """Accumulate a chunk of rays into flat per-cell buffers (index iu*nv + iv)."""
    cdef Py_ssize_t n = ends.shape[0]
    cdef Py_ssize_t r
    cdef Walk w
    cdef double t, tn, d, eu, ev
    cdef long long idx, last_idx
    cdef bint any_cell

    with nogil:
        for r in range(n):
            eu = ends[r, 0]
            ev = ends[r, 1]
            if eu == ox and ev == oy:
                continue
            _setup(ox, oy, eu, ev, nu, nv, cell, &w)
            if w.empty:
                continue
            t = w.t0
            last_idx = -1
            any_cell = False
            while True:
                tn = w.t_max_u if w.t_max_u < w.t_max_v else w.t_max_v
                if tn > w.t1:
                    tn = w.t1
                d = (tn - t) * w.length
                if d > 0.0:
                    idx = <long long>w.iu * nv + w.iv
                    obs[idx] += 1
                    trav[idx] += d
                    last_idx = idx
                    any_cell = True
                if tn >= w.t1:
                    break
                if w.t_max_u <= w.t_max_v:
                    w.iu += w.step_u
                    w.t_max_u += w.t_delta_u
                    if w.iu < 0 or w.iu >= nu:
                        break
                else:
                    w.iv += w.step_v
                    w.t_max_v += w.t_delta_v
                    if w.iv < 0 or w.iv >= nv:
                        break
                t = tn
            if any_cell and w.end_inside:
                det[last_idx] += 1
                isum[last_idx] += intensity[r]
                if z[r] < zmin[last_idx]:
                    zmin[last_idx] = z[r]
                if z[r] > zmax[last_idx]:
                    zmax[last_idx] = z[r]
