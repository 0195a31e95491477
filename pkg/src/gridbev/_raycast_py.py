"""Pure-Python ray casting kernels (fallback for the compiled extension).

Coordinates here are grid-local: u in [0, nu*cell], v in [0, nv*cell].
The segment is first clipped to the grid rectangle with the slab method,
then walked cell to cell with an incremental (DDA) traversal that yields
the exact crossing length per cell.
"""

from __future__ import annotations

import math

import numpy as np

IS_COMPILED = False


def _clip_to_grid(ox, oy, ex, ey, uhi, vhi):
    """Slab-clip segment (o -> e) to [0, uhi] x [0, vhi]; returns (t0, t1) or None."""
    du = ex - ox
    dv = ey - oy
    t0, t1 = 0.0, 1.0
    for o, d, hi in ((ox, du, uhi), (oy, dv, vhi)):
        if d != 0.0:
            ta = (0.0 - o) / d
            tb = (hi - o) / d
            if ta > tb:
                ta, tb = tb, ta
            if ta > t0:
                t0 = ta
            if tb < t1:
                t1 = tb
        elif o < 0.0 or o > hi:
            return None
    if t1 <= t0:
        return None
    return t0, t1


def traverse_ray(ox, oy, ex, ey, nu, nv, cell):
    """Traverse segment (o -> e) through the cell grid.

    Returns (iu, iv, d, end_inside): int64 arrays of visited cell indices,
    float64 crossing lengths (meters), and whether the endpoint lies inside
    the grid (so the last visited cell is the endpoint cell).
    """
    du = ex - ox
    dv = ey - oy
    length = math.sqrt(du * du + dv * dv)
    if length == 0.0:
        raise ValueError("zero-length ray")
    uhi = nu * cell
    vhi = nv * cell
    span = _clip_to_grid(ox, oy, ex, ey, uhi, vhi)
    empty = (np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0, np.float64), False)
    if span is None:
        return empty
    t0, t1 = span
    end_inside = t1 >= 1.0

    pu = ox + du * t0
    pv = oy + dv * t0
    iu = min(max(int(math.floor(pu / cell)), 0), nu - 1)
    iv = min(max(int(math.floor(pv / cell)), 0), nv - 1)
    # Entry exactly on a boundary while moving negative: start in the lower cell.
    if du < 0.0 and pu == iu * cell and iu > 0:
        iu -= 1
    if dv < 0.0 and pv == iv * cell and iv > 0:
        iv -= 1

    if du > 0.0:
        step_u, t_max_u, t_delta_u = 1, ((iu + 1) * cell - ox) / du, cell / du
    elif du < 0.0:
        step_u, t_max_u, t_delta_u = -1, (iu * cell - ox) / du, -cell / du
    else:
        step_u, t_max_u, t_delta_u = 0, math.inf, math.inf
    if dv > 0.0:
        step_v, t_max_v, t_delta_v = 1, ((iv + 1) * cell - oy) / dv, cell / dv
    elif dv < 0.0:
        step_v, t_max_v, t_delta_v = -1, (iv * cell - oy) / dv, -cell / dv
    else:
        step_v, t_max_v, t_delta_v = 0, math.inf, math.inf

    out_iu, out_iv, out_d = [], [], []
    t = t0
    while True:
        tn = t_max_u if t_max_u < t_max_v else t_max_v
        if tn > t1:
            tn = t1
        d = (tn - t) * length
        if d > 0.0:
            out_iu.append(iu)
            out_iv.append(iv)
            out_d.append(d)
        if tn >= t1:
            break
        if t_max_u <= t_max_v:
            iu += step_u
            t_max_u += t_delta_u
            if iu < 0 or iu >= nu:
                break
        else:
            iv += step_v
            t_max_v += t_delta_v
            if iv < 0 or iv >= nv:
                break
        t = tn
    if not out_iu:
        return empty
    return (np.array(out_iu, np.int64), np.array(out_iv, np.int64),
            np.array(out_d, np.float64), end_inside)


def accumulate_rays(ox, oy, ends, z, intensity, nu, nv, cell,
                    det, obs, trav, isum, zmin, zmax):
    """Accumulate a chunk of rays into flat per-cell buffers (index iu*nv + iv).

    Per traversed cell: obs += 1, trav += crossing length. Per ray whose
    endpoint is inside the grid: det/intensity/z stats on the last traversed
    cell. Buffers are mutated in place.
    """
    n = ends.shape[0]
    for r in range(n):
        eu = ends[r, 0]
        ev = ends[r, 1]
        if eu == ox and ev == oy:
            continue
        ius, ivs, ds, end_inside = traverse_ray(ox, oy, eu, ev, nu, nv, cell)
        m = ius.shape[0]
        if m == 0:
            continue
        idx = ius * nv + ivs
        for k in range(m):
            obs[idx[k]] += 1
            trav[idx[k]] += ds[k]
        if end_inside:
            i = idx[m - 1]
            det[i] += 1
            isum[i] += intensity[r]
            if z[r] < zmin[i]:
                zmin[i] = z[r]
            if z[r] > zmax[i]:
                zmax[i] = z[r]
