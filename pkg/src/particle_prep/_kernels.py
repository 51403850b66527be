"""Numba-compiled inner loops for geometry pair queries.

Pure element-wise math over pair lists; all reductions stay outside so
results are bit-identical to the plain numpy path.
"""

import numba as nb
import numpy as np


@nb.njit(cache=True)
def seg_closest_pairs(p, a, b):
    n = p.shape[0]
    dist = np.empty(n)
    closest = np.empty((n, 2))
    for i in range(n):
        ex = b[i, 0] - a[i, 0]
        ey = b[i, 1] - a[i, 1]
        ee = ex * ex + ey * ey
        if ee > 0.0:
            t = ((p[i, 0] - a[i, 0]) * ex + (p[i, 1] - a[i, 1]) * ey) / ee
            if t < 0.0:
                t = 0.0
            elif t > 1.0:
                t = 1.0
        else:
            t = 0.0
        cx = a[i, 0] + t * ex
        cy = a[i, 1] + t * ey
        closest[i, 0] = cx
        closest[i, 1] = cy
        dx = p[i, 0] - cx
        dy = p[i, 1] - cy
        dist[i] = np.sqrt(dx * dx + dy * dy)
    return dist, closest


@nb.njit(cache=True)
def tri_closest_pairs(p, va, vb, vc):
    # Ericson's closest point on triangle, scalar per pair
    n = p.shape[0]
    dist = np.empty(n)
    closest = np.empty((n, 3))
    for i in range(n):
        ax, ay, az = va[i, 0], va[i, 1], va[i, 2]
        bx, by, bz = vb[i, 0], vb[i, 1], vb[i, 2]
        cx, cy, cz = vc[i, 0], vc[i, 1], vc[i, 2]
        px, py, pz = p[i, 0], p[i, 1], p[i, 2]
        abx, aby, abz = bx - ax, by - ay, bz - az
        acx, acy, acz = cx - ax, cy - ay, cz - az
        apx, apy, apz = px - ax, py - ay, pz - az
        d1 = abx * apx + aby * apy + abz * apz
        d2 = acx * apx + acy * apy + acz * apz
        if d1 <= 0.0 and d2 <= 0.0:
            qx, qy, qz = ax, ay, az
        else:
            bpx, bpy, bpz = px - bx, py - by, pz - bz
            d3 = abx * bpx + aby * bpy + abz * bpz
            d4 = acx * bpx + acy * bpy + acz * bpz
            if d3 >= 0.0 and d4 <= d3:
                qx, qy, qz = bx, by, bz
            else:
                vcw = d1 * d4 - d3 * d2
                if vcw <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
                    t = d1 / (d1 - d3)
                    qx, qy, qz = ax + t * abx, ay + t * aby, az + t * abz
                else:
                    cpx, cpy, cpz = px - cx, py - cy, pz - cz
                    d5 = abx * cpx + aby * cpy + abz * cpz
                    d6 = acx * cpx + acy * cpy + acz * cpz
                    if d6 >= 0.0 and d5 <= d6:
                        qx, qy, qz = cx, cy, cz
                    else:
                        vbw = d5 * d2 - d1 * d6
                        if vbw <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
                            t = d2 / (d2 - d6)
                            qx, qy, qz = ax + t * acx, ay + t * acy, az + t * acz
                        else:
                            vaw = d3 * d6 - d5 * d4
                            if vaw <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
                                t = (d4 - d3) / ((d4 - d3) + (d5 - d6))
                                qx = bx + t * (cx - bx)
                                qy = by + t * (cy - by)
                                qz = bz + t * (cz - bz)
                            else:
                                den = 1.0 / (vaw + vbw + vcw)
                                v = vbw * den
                                w = vcw * den
                                qx = ax + abx * v + acx * w
                                qy = ay + aby * v + acy * w
                                qz = az + abz * v + acz * w
        closest[i, 0] = qx
        closest[i, 1] = qy
        closest[i, 2] = qz
        dx, dy, dz = px - qx, py - qy, pz - qz
        dist[i] = np.sqrt(dx * dx + dy * dy + dz * dz)
    return dist, closest


@nb.njit(cache=True)
def ray_tri_hits(p, tri, ux, uy, uz):
    n = p.shape[0]
    hits = np.zeros(n, dtype=np.int64)
    for i in range(n):
        v0x, v0y, v0z = tri[i, 0, 0], tri[i, 0, 1], tri[i, 0, 2]
        e1x = tri[i, 1, 0] - v0x
        e1y = tri[i, 1, 1] - v0y
        e1z = tri[i, 1, 2] - v0z
        e2x = tri[i, 2, 0] - v0x
        e2y = tri[i, 2, 1] - v0y
        e2z = tri[i, 2, 2] - v0z
        pvx = uy * e2z - uz * e2y
        pvy = uz * e2x - ux * e2z
        pvz = ux * e2y - uy * e2x
        det = e1x * pvx + e1y * pvy + e1z * pvz
        if det == 0.0:
            continue
        inv = 1.0 / det
        tvx = p[i, 0] - v0x
        tvy = p[i, 1] - v0y
        tvz = p[i, 2] - v0z
        bu = (tvx * pvx + tvy * pvy + tvz * pvz) * inv
        if bu < 0.0 or bu > 1.0:
            continue
        qvx = tvy * e1z - tvz * e1y
        qvy = tvz * e1x - tvx * e1z
        qvz = tvx * e1y - tvy * e1x
        bv = (qvx * ux + qvy * uy + qvz * uz) * inv
        if bv < 0.0 or bu + bv > 1.0:
            continue
        t = (e2x * qvx + e2y * qvy + e2z * qvz) * inv
        if t > 0.0:
            hits[i] = 1
    return hits


@nb.njit(cache=True)
def ray_seg_hits(p, a, b, ux, uy):
    n = p.shape[0]
    hits = np.zeros(n, dtype=np.int64)
    for i in range(n):
        # half-open side test: rays through shared vertices count once
        sa = ux * (a[i, 1] - p[i, 1]) - uy * (a[i, 0] - p[i, 0])
        sb = ux * (b[i, 1] - p[i, 1]) - uy * (b[i, 0] - p[i, 0])
        if (sa > 0.0) == (sb > 0.0):
            continue
        ex = b[i, 0] - a[i, 0]
        ey = b[i, 1] - a[i, 1]
        den = ux * ey - uy * ex
        if den == 0.0:
            continue
        apx = a[i, 0] - p[i, 0]
        apy = a[i, 1] - p[i, 1]
        t = (apx * ey - apy * ex) / den
        if t > 0.0:
            hits[i] = 1
    return hits
