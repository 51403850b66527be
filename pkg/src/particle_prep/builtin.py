"""Procedurally generated test geometries.

These are desk-scale analogs of typical dirty-CAD inputs: a tapered wedge
with an optional internal slit (sharp trailing edge), detached blobs,
a block carrying a thin pole, and a tube with thin branches, plus the
clean reference shapes (circle, sphere, box).
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError
from .geometry import SurfaceGeometry, surface_from_loops

BUILTIN_NAMES = (
    "circle",
    "sphere",
    "box",
    "wedge",
    "wedge-with-slit",
    "block-with-pole",
    "tube-with-branches",
    "blobs",
)


def builtin_geometry(name: str, params: dict | None = None) -> SurfaceGeometry:
    """Construct a named builtin geometry. Unknown names or out-of-range
    parameters raise ConfigurationError."""
    params = dict(params or {})
    try:
        fn = _BUILDERS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown builtin geometry {name!r}; choose from {BUILTIN_NAMES}"
        ) from None
    try:
        return fn(**params)
    except TypeError as exc:
        raise ConfigurationError(f"builtin {name!r}: {exc}") from None


def _circle_loop(center, radius, segments):
    theta = 2.0 * np.pi * np.arange(segments) / segments
    return np.stack(
        [center[0] + radius * np.cos(theta), center[1] + radius * np.sin(theta)],
        axis=1,
    )


def circle(radius=1.0, center=(0.0, 0.0), segments=512):
    if radius <= 0 or int(segments) < 8:
        raise ConfigurationError("circle needs radius > 0 and segments >= 8")
    return surface_from_loops([_circle_loop(center, radius, int(segments))])


def sphere(radius=1.0, center=(0.0, 0.0, 0.0), subdivisions=4):
    """Icosphere: icosahedron subdivided and projected onto the sphere."""
    subdivisions = int(subdivisions)
    if radius <= 0 or not (0 <= subdivisions <= 7):
        raise ConfigurationError("sphere needs radius > 0 and subdivisions in 0..7")
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=np.float64,
    )
    verts /= np.linalg.norm(verts, axis=1)[:, None]
    faces = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ]
    )
    for _ in range(subdivisions):
        edge_mid = {}
        new_faces = []
        verts_list = [v for v in verts]

        def midpoint(i, j):
            key = (i, j) if i < j else (j, i)
            if key not in edge_mid:
                m = verts_list[i] + verts_list[j]
                m /= np.linalg.norm(m)
                edge_mid[key] = len(verts_list)
                verts_list.append(m)
            return edge_mid[key]

        for a, b, c in faces:
            ab = midpoint(a, b)
            bc = midpoint(b, c)
            ca = midpoint(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        verts = np.asarray(verts_list)
        faces = np.asarray(new_faces)
    tris = verts[faces] * radius + np.asarray(center)[None, None, :]
    return SurfaceGeometry(tris)


def box(size=(1.0, 1.0, 1.0), origin=None):
    """Axis-aligned box; len(size) == 2 gives a rectangle polyline,
    len(size) == 3 the classic 12-triangle cuboid."""
    size = tuple(float(s) for s in np.atleast_1d(size))
    if any(s <= 0 for s in size) or len(size) not in (2, 3):
        raise ConfigurationError("box needs 2 or 3 positive extents")
    o = np.zeros(len(size)) if origin is None else np.asarray(origin, dtype=float)
    if len(size) == 2:
        sx, sy = size
        loop = np.array(
            [[0, 0], [sx, 0], [sx, sy], [0, sy]], dtype=np.float64
        ) + o
        return surface_from_loops([loop])
    sx, sy, sz = size
    corners = (
        np.array(
            [
                [0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
                [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1],
            ],
            dtype=np.float64,
        )
        * np.array(size)
        + o
    )
    # outward-oriented quads, each split into two triangles
    quads = [
        [0, 3, 2, 1],  # z = 0
        [4, 5, 6, 7],  # z = sz
        [0, 1, 5, 4],  # y = 0
        [2, 3, 7, 6],  # y = sy
        [0, 4, 7, 3],  # x = 0
        [1, 2, 6, 5],  # x = sx
    ]
    tris = []
    for a, b, c, d in quads:
        tris.append(corners[[a, b, c]])
        tris.append(corners[[a, c, d]])
    return SurfaceGeometry(np.asarray(tris))


def wedge(length=1.5, height=0.2, tip=0.0, segments_per_edge=1):
    """Horizontal taper from a blunt base (x=0, thickness `height`) to a
    trailing tip of thickness `tip` at x=`length`, centered on y=0."""
    if length <= 0 or height <= 0 or tip < 0 or tip >= height:
        raise ConfigurationError("wedge needs length,height > 0 and 0 <= tip < height")
    n = max(1, int(segments_per_edge))
    xs = np.linspace(0.0, length, n + 1)

    def half(x):
        return 0.5 * (height + (tip - height) * x / length)

    bottom = np.stack([xs, -half(xs)], axis=1)
    top = np.stack([xs[::-1], half(xs[::-1])], axis=1)
    loop = np.concatenate([bottom, top])
    return surface_from_loops([loop])


def wedge_with_slit(
    length=1.5,
    height=0.2,
    tip=0.0,
    slit_x=0.5,
    slit_width=0.01,
    slit_depth=0.06,
):
    """Wedge plus a thin slit cut into the top edge at x=slit_x."""
    if not (0 < slit_x < length) or slit_width <= 0 or slit_depth <= 0:
        raise ConfigurationError("slit must lie strictly inside the wedge")
    if slit_width >= length / 4:
        raise ConfigurationError("slit_width too large for the wedge")

    def half(x):
        return 0.5 * (height + (tip - height) * x / length)

    x0, x1 = slit_x - slit_width / 2.0, slit_x + slit_width / 2.0
    if half(x1) <= slit_depth:
        raise ConfigurationError("slit_depth exceeds local wedge thickness")
    loop = [
        (0.0, -half(0.0)),
        (length, -half(length)),
        (length, half(length)),
        (x1, half(x1)),
        (x1, half(x1) - slit_depth),
        (x0, half(x0) - slit_depth),
        (x0, half(x0)),
        (0.0, half(0.0)),
    ]
    return surface_from_loops([np.asarray(loop)])


def block_with_pole(
    block=(1.0, 1.0, 1.0), pole_width=0.05, pole_height=0.5
):
    """Cuboid with a thin square pole standing on its top face, meshed as a
    single watertight surface (the top face carries a square hole ringed
    with triangles, continuing into the pole shaft)."""
    bx, by, bz = (float(v) for v in block)
    w = float(pole_width)
    hp = float(pole_height)
    if min(bx, by, bz, w, hp) <= 0 or w >= min(bx, by) / 2:
        raise ConfigurationError("pole must be thinner than half the block")
    cx, cy = bx / 2.0, by / 2.0
    x0, x1 = cx - w / 2.0, cx + w / 2.0
    y0, y1 = cy - w / 2.0, cy + w / 2.0
    zt = bz
    zp = bz + hp

    tris = []

    def quad(a, b, c, d):
        tris.append([a, b, c])
        tris.append([a, c, d])

    # block shell except the top face
    quad((0, 0, 0), (0, by, 0), (bx, by, 0), (bx, 0, 0))          # bottom
    quad((0, 0, 0), (bx, 0, 0), (bx, 0, zt), (0, 0, zt))          # y = 0
    quad((bx, by, 0), (0, by, 0), (0, by, zt), (bx, by, zt))      # y = by
    quad((0, by, 0), (0, 0, 0), (0, 0, zt), (0, by, zt))          # x = 0
    quad((bx, 0, 0), (bx, by, 0), (bx, by, zt), (bx, 0, zt))      # x = bx
    # top face ring around the pole hole (4 trapezoids, fan-triangulated)
    outer = [(0, 0, zt), (bx, 0, zt), (bx, by, zt), (0, by, zt)]
    inner = [(x0, y0, zt), (x1, y0, zt), (x1, y1, zt), (x0, y1, zt)]
    for k in range(4):
        a, b = outer[k], outer[(k + 1) % 4]
        c, d = inner[(k + 1) % 4], inner[k]
        quad(a, b, c, d)
    # pole shaft (outward normals) and cap
    shaft_bottom = inner
    shaft_top = [(x0, y0, zp), (x1, y0, zp), (x1, y1, zp), (x0, y1, zp)]
    for k in range(4):
        a, b = shaft_bottom[k], shaft_bottom[(k + 1) % 4]
        c, d = shaft_top[(k + 1) % 4], shaft_top[k]
        quad(a, b, c, d)
    quad(*shaft_top)
    return SurfaceGeometry(np.asarray(tris, dtype=np.float64), check_watertight=True)


def tube_with_branches(
    length=2.0,
    diameter=0.4,
    branches=3,
    branch_width=0.02,
    branch_length=0.3,
):
    """2D analog of a vessel: a horizontal strip with thin vertical branches
    sprouting from its top side, traced as one closed polyline."""
    branches = int(branches)
    if min(length, diameter, branch_width, branch_length) <= 0 or branches < 0:
        raise ConfigurationError("tube parameters must be positive")
    if branches * 3 * branch_width >= length:
        raise ConfigurationError("too many/too wide branches for the tube length")
    y0, y1 = -diameter / 2.0, diameter / 2.0
    pts = [(0.0, y0), (length, y0), (length, y1)]
    xs = np.linspace(length, 0.0, branches + 2)[1:-1]  # right to left along the top
    for xc in xs:
        xr = xc + branch_width / 2.0
        xl = xc - branch_width / 2.0
        pts += [
            (xr, y1),
            (xr, y1 + branch_length),
            (xl, y1 + branch_length),
            (xl, y1),
        ]
    pts.append((0.0, y1))
    return surface_from_loops([np.asarray(pts)])


def blobs(main_radius=1.0, fragments=(), segments=512):
    """A main circle plus detached circular fragments.

    fragments: sequence of (x, y, radius) triples; each must be disjoint
    from the main body and from the others.
    """
    if main_radius <= 0:
        raise ConfigurationError("main_radius must be positive")
    loops = [_circle_loop((0.0, 0.0), main_radius, int(segments))]
    frags = [tuple(float(v) for v in f) for f in fragments]
    for i, (x, y, r) in enumerate(frags):
        if r <= 0:
            raise ConfigurationError(f"fragment {i}: radius must be positive")
        if np.hypot(x, y) <= main_radius + r:
            raise ConfigurationError(f"fragment {i} overlaps the main body")
        for j, (x2, y2, r2) in enumerate(frags[:i]):
            if np.hypot(x - x2, y - y2) <= r + r2:
                raise ConfigurationError(f"fragments {j} and {i} overlap")
        nseg = max(16, int(np.ceil(int(segments) * r / main_radius)))
        loops.append(_circle_loop((x, y), r, nseg))
    return surface_from_loops(loops)


_BUILDERS = {
    "circle": circle,
    "sphere": sphere,
    "box": box,
    "wedge": wedge,
    "wedge-with-slit": wedge_with_slit,
    "block-with-pole": block_with_pole,
    "tube-with-branches": tube_with_branches,
    "blobs": blobs,
}
