"""Independent reference implementations used only by the tests.

Deliberately different algorithms from the package: containment via
winding numbers (angle sum in 2D, solid angles in 3D) instead of ray
parity; distances via dense surface sampling instead of element-exact
search; integrals via brute-force quadrature.
"""

import numpy as np


def winding_sign_2d(segments, p):
    """-1 inside, +1 outside by total signed angle around p."""
    a = segments[:, 0] - p
    b = segments[:, 1] - p
    ang = np.arctan2(
        a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0],
        (a * b).sum(axis=1),
    )
    winding = ang.sum() / (2.0 * np.pi)
    return -1 if abs(round(winding)) >= 1 else 1


def winding_sign_3d(triangles, p):
    """-1 inside, +1 outside by summed signed solid angles
    (Van Oosterom & Strackee)."""
    r = triangles - p  # (M,3,3)
    r1, r2, r3 = r[:, 0], r[:, 1], r[:, 2]
    n1 = np.linalg.norm(r1, axis=1)
    n2 = np.linalg.norm(r2, axis=1)
    n3 = np.linalg.norm(r3, axis=1)
    num = np.einsum("ij,ij->i", r1, np.cross(r2, r3))
    den = (
        n1 * n2 * n3
        + np.einsum("ij,ij->i", r1, r2) * n3
        + np.einsum("ij,ij->i", r1, r3) * n2
        + np.einsum("ij,ij->i", r2, r3) * n1
    )
    omega = 2.0 * np.arctan2(num, den)
    total = omega.sum() / (4.0 * np.pi)
    return -1 if abs(total) > 0.5 else 1


def sample_surface(geom, n_total, seed=7):
    """~n_total points sampled uniformly over the surface elements."""
    rng = np.random.default_rng(seed)
    elems = geom.elements
    if geom.dimension == 2:
        lengths = np.linalg.norm(elems[:, 1] - elems[:, 0], axis=1)
        weights = lengths / lengths.sum()
        counts = np.maximum(1, np.round(weights * n_total).astype(int))
        pts = []
        for e, k in zip(elems, counts):
            t = rng.uniform(0, 1, k)[:, None]
            pts.append(e[0] + t * (e[1] - e[0]))
        return np.concatenate(pts)
    areas = 0.5 * np.linalg.norm(
        np.cross(elems[:, 1] - elems[:, 0], elems[:, 2] - elems[:, 0]), axis=1
    )
    weights = areas / areas.sum()
    counts = np.maximum(1, np.round(weights * n_total).astype(int))
    pts = []
    for e, k in zip(elems, counts):
        u = rng.uniform(0, 1, k)
        v = rng.uniform(0, 1, k)
        flip = u + v > 1
        u[flip] = 1 - u[flip]
        v[flip] = 1 - v[flip]
        pts.append(e[0] + u[:, None] * (e[1] - e[0]) + v[:, None] * (e[2] - e[0]))
    return np.concatenate(pts)


def sampled_signed_distance(geom, pts, n_samples=100_000, seed=7):
    """Brute-force signed distance: min distance to a dense surface sample,
    sign from the winding number."""
    from scipy.spatial import cKDTree

    cloud = sample_surface(geom, n_samples, seed=seed)
    tree = cKDTree(cloud)
    d, _ = tree.query(pts)
    signs = np.array(
        [
            winding_sign_2d(geom.elements, p)
            if geom.dimension == 2
            else winding_sign_3d(geom.elements, p)
            for p in np.atleast_2d(pts)
        ]
    )
    return signs * d


def fd_gradient(fn, p, h=1e-6):
    """Central-difference gradient of a scalar function of a point."""
    p = np.asarray(p, dtype=float)
    g = np.zeros_like(p)
    for ax in range(len(p)):
        e = np.zeros_like(p)
        e[ax] = h
        g[ax] = (fn(p + e) - fn(p - e)) / (2 * h)
    return g


def halfplane_cell_fraction(normal, offset, cell_size):
    """Exact area fraction of the square cell [0,s]^2 on the positive side
    of the line {x . n = offset} (shapely polygon clipping)."""
    from shapely.geometry import Polygon

    s = cell_size
    cell = Polygon([(0, 0), (s, 0), (s, s), (0, s)])
    n = np.asarray(normal) / np.linalg.norm(normal)
    # big polygon covering the positive half-plane within the cell's area
    c = np.array([s / 2, s / 2])
    t = np.array([-n[1], n[0]])
    base = n * offset
    big = 10 * s
    half = Polygon(
        [
            tuple(base + t * big),
            tuple(base - t * big),
            tuple(base - t * big + n * big),
            tuple(base + t * big + n * big),
        ]
    )
    return cell.intersection(half).area / (s * s)


def completion_quadrature(kernel, depth, step, exterior_normal=(0.0, 1.0)):
    """Sharp-interface integral of grad_a W over the exterior half-support
    of a flat surface, for a point `depth` below the surface (2D)."""
    n = np.asarray(exterior_normal, dtype=float)
    n /= np.linalg.norm(n)
    a = -depth * n
    r_c = kernel.r_c
    m = int(np.ceil(2 * r_c / step))
    xs = (np.arange(m) + 0.5) * step - r_c
    X, Y = np.meshgrid(xs + a[0], xs + a[1], indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    rvec = a - pts
    r = np.linalg.norm(rvec, axis=1)
    outside = pts @ n > 0.0
    sel = outside & (r < r_c) & (r > 0)
    g = np.zeros_like(rvec)
    g[sel] = (kernel.dwdr(r[sel]) / r[sel])[:, None] * rvec[sel]
    return g.sum(axis=0) * step * step


def zero_crossings_on_line(field, start, stop, n=800):
    """Positions of sign changes of probe_phi along the segment, located by
    linear interpolation; used to track interface motion."""
    from particle_prep.levelset import probe_phi

    start = np.asarray(start, dtype=float)
    stop = np.asarray(stop, dtype=float)
    t = np.linspace(0.0, 1.0, n)
    pts = start + t[:, None] * (stop - start)
    phi = probe_phi(field, pts)
    idx = np.flatnonzero(np.diff(np.signbit(phi)))
    out = []
    for i in idx:
        frac = phi[i] / (phi[i] - phi[i + 1])
        out.append(t[i] + frac * (t[i + 1] - t[i]))
    return np.asarray(out) * np.linalg.norm(stop - start)


def thickness_profile(field, xs, ylo, yhi, n=1200):
    """Vertical extent between the outermost zero crossings per column."""
    ys = np.linspace(ylo, yhi, n)
    from particle_prep.levelset import probe_phi

    out = []
    for x in xs:
        pts = np.stack([np.full(n, x), ys], axis=1)
        phi = probe_phi(field, pts)
        s = np.flatnonzero(np.diff(np.signbit(phi)))
        if len(s) >= 2:
            y0 = ys[s[0]] + (0 - phi[s[0]]) * (ys[s[0] + 1] - ys[s[0]]) / (
                phi[s[0] + 1] - phi[s[0]]
            )
            y1 = ys[s[-1]] + (0 - phi[s[-1]]) * (ys[s[-1] + 1] - ys[s[-1]]) / (
                phi[s[-1] + 1] - phi[s[-1]]
            )
            out.append(y1 - y0)
        else:
            out.append(0.0)
    return np.asarray(out)


def longest_thin_run(xs, thickness, threshold):
    """Longest x-extent of consecutive columns with 0 < thickness < threshold."""
    thin = (thickness > 0) & (thickness < threshold)
    best = 0.0
    start = None
    for i, t in enumerate(thin):
        if t and start is None:
            start = i
        if not t and start is not None:
            best = max(best, xs[i - 1] - xs[start])
            start = None
    if start is not None:
        best = max(best, xs[-1] - xs[start])
    return best
