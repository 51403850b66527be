"""Surface ingestion and exact signed-distance queries.

A surface is a closed polyline (2D) or an oriented triangle soup (3D).
Distance queries are exact nearest-element searches accelerated by a
centroid KD-tree; the inside/outside sign comes from ray-casting parity
along three fixed pseudo-random directions with majority vote.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from ._kernels import ray_seg_hits, ray_tri_hits, seg_closest_pairs, tri_closest_pairs
from .errors import (
    EmptyInputError,
    MalformedInputError,
    ParticlePrepError,
    TopologyError,
)

SURFACE_FORMATS = ("stl-ascii", "stl-binary", "obj", "polyline-csv")

# Fixed pseudo-random ray directions; majority vote over the three parities
# tolerates rays grazing edges or vertices.
_RAY_RNG = np.random.default_rng(161803398)
_RAY_DIRS_2D = _RAY_RNG.standard_normal((3, 2))
_RAY_DIRS_2D /= np.linalg.norm(_RAY_DIRS_2D, axis=1)[:, None]
_RAY_DIRS_3D = _RAY_RNG.standard_normal((3, 3))
_RAY_DIRS_3D /= np.linalg.norm(_RAY_DIRS_3D, axis=1)[:, None]

_WATERTIGHT_PROBES = 1024
_WATERTIGHT_SEED = 271828182

_QUERY_CHUNK = 65536


class SurfaceGeometry:
    """Immutable closed surface with exact distance and containment queries.

    elements has shape (M, 2, 2) for 2D segments or (M, 3, 3) for 3D
    triangles (vertex triples, outward orientation taken as given).
    """

    def __init__(self, elements: np.ndarray, check_watertight: bool = False):
        elements = np.asarray(elements, dtype=np.float64)
        if elements.ndim != 3 or elements.shape[1] not in (2, 3):
            raise ValueError("elements must be (M,2,2) segments or (M,3,3) triangles")
        self.dimension = elements.shape[2]
        if elements.shape[1] != self.dimension:
            raise ValueError("segment/triangle vertex count must match dimension")
        if not np.isfinite(elements).all():
            raise MalformedInputError("non-finite vertex coordinate in surface")
        if elements.shape[0] == 0:
            raise EmptyInputError("surface contains no elements")
        min_elems = 3 if self.dimension == 2 else 4
        if elements.shape[0] < min_elems:
            raise TopologyError(
                f"need at least {min_elems} elements in {self.dimension}D, "
                f"got {elements.shape[0]}"
            )
        self.elements = elements
        self.elements.flags.writeable = False
        verts = elements.reshape(-1, self.dimension)
        self.bbox = np.stack([verts.min(axis=0), verts.max(axis=0)])
        self.bbox_diagonal = float(np.linalg.norm(self.bbox[1] - self.bbox[0]))

        self._centroids = elements.mean(axis=1)
        self._elem_radius = float(
            np.linalg.norm(elements - self._centroids[:, None, :], axis=2).max()
        )
        self._tree = cKDTree(self._centroids)
        self._ray_dirs = _RAY_DIRS_2D if self.dimension == 2 else _RAY_DIRS_3D
        cls = _RayGrid2D if self.dimension == 2 else _RayGrid3D
        self._ray_grids = [cls(self, u) for u in self._ray_dirs]

        if check_watertight and self.dimension == 3:
            self._check_watertight()

    def __repr__(self):
        return (
            f"SurfaceGeometry(dim={self.dimension}, elements={len(self.elements)}, "
            f"bbox={self.bbox[0].tolist()}..{self.bbox[1].tolist()})"
        )

    # -- queries ----------------------------------------------------------

    def signed_distance(self, points):
        """Signed Euclidean distance to the surface, negative inside."""
        pts, scalar = _as_points(points, self.dimension)
        dist, _ = self._nearest(pts)
        sgn = self._containment_sign(pts)
        out = sgn * dist
        return float(out[0]) if scalar else out

    def contains(self, points):
        """-1 for inside, +1 for outside (majority parity over three rays)."""
        pts, scalar = _as_points(points, self.dimension)
        sgn = self._containment_sign(pts)
        return int(sgn[0]) if scalar else sgn

    def unsigned_distance(self, points):
        pts, scalar = _as_points(points, self.dimension)
        dist, _ = self._nearest(pts)
        return float(dist[0]) if scalar else dist

    def nearest_point(self, points):
        """Closest point on the surface for each query point."""
        pts, scalar = _as_points(points, self.dimension)
        _, closest = self._nearest(pts)
        return closest[0] if scalar else closest

    def distance_within(self, points, cutoff):
        """Exact unsigned distance wherever it can be <= cutoff, +inf elsewhere.

        Cheap screen via the centroid tree (distance to nearest centroid
        minus the largest element radius is a valid lower bound); lets mass
        callers tag far points without paying for an exact far distance.
        """
        pts, _ = _as_points(points, self.dimension)
        d_cent, _ = self._tree.query(pts)
        out = np.full(len(pts), np.inf)
        near = np.flatnonzero(d_cent - self._elem_radius <= cutoff)
        if len(near):
            dist, _ = self._nearest(pts[near])
            out[near] = dist
        return out

    # -- internals --------------------------------------------------------

    def _nearest(self, pts):
        n = len(pts)
        dist = np.empty(n)
        closest = np.empty((n, self.dimension))
        for lo in range(0, n, _QUERY_CHUNK):
            hi = min(lo + _QUERY_CHUNK, n)
            d, c = self._nearest_chunk(pts[lo:hi])
            dist[lo:hi] = d
            closest[lo:hi] = c
        return dist, closest

    def _nearest_chunk(self, pts):
        # Exact nearest element: take the k nearest centroids, get an exact
        # upper bound from them, and certify that no element outside the k
        # can beat it (its centroid would have to lie within d_ub + R of the
        # point). Uncertified points fall back to a ball query.
        n = len(pts)
        k = min(4, len(self.elements))
        dk, idx = self._tree.query(pts, k=k)
        dk = np.atleast_2d(dk)
        idx = np.atleast_2d(idx)
        owner = np.repeat(np.arange(n), k)
        d_pairs, c_pairs = _element_distance(pts[owner], self.elements[idx.ravel()])
        d_pairs = d_pairs.reshape(n, k)
        c_pairs = c_pairs.reshape(n, k, self.dimension)
        best = np.argmin(d_pairs, axis=1)
        dist = d_pairs[np.arange(n), best]
        closest = c_pairs[np.arange(n), best]
        uncertain = np.flatnonzero(dk[:, -1] <= dist + self._elem_radius)
        if len(uncertain):
            d_u, c_u = self._nearest_ball(pts[uncertain], dist[uncertain])
            dist[uncertain] = d_u
            closest[uncertain] = c_u
        return dist, closest

    def _nearest_ball(self, pts, d_ub):
        # exhaustive scan of every element whose centroid lies within
        # d_ub + R of the point; exact by the triangle inequality
        cand_lists = self._tree.query_ball_point(
            pts, d_ub + self._elem_radius + 1e-12
        )
        lens = np.fromiter((len(c) for c in cand_lists), dtype=np.int64, count=len(pts))
        flat = np.fromiter(
            (i for c in cand_lists for i in c), dtype=np.int64, count=int(lens.sum())
        )
        owner = np.repeat(np.arange(len(pts)), lens)
        d_flat, c_flat = _element_distance(pts[owner], self.elements[flat])
        offsets = np.concatenate(([0], np.cumsum(lens)[:-1]))
        dist = np.minimum.reduceat(d_flat, offsets)
        is_min = d_flat <= dist[owner]
        hit_owner = owner[is_min]
        hit_pos = np.flatnonzero(is_min)
        keep = np.ones(len(hit_owner), dtype=bool)
        keep[1:] = hit_owner[1:] != hit_owner[:-1]
        first = np.empty(len(pts), dtype=np.int64)
        first[hit_owner[keep]] = hit_pos[keep]
        return dist, c_flat[first]

    def _containment_sign(self, pts):
        votes = np.zeros(len(pts), dtype=np.int64)
        for grid in self._ray_grids:
            votes += grid.parity(pts)
        return np.where(votes >= 2, -1, 1).astype(np.int64)

    def _ray_parities(self, pts):
        return np.stack([g.parity(pts) for g in self._ray_grids], axis=1)

    def _check_watertight(self):
        rng = np.random.default_rng(_WATERTIGHT_SEED)
        pad = 0.05 * (self.bbox[1] - self.bbox[0])
        probes = rng.uniform(
            self.bbox[0] - pad, self.bbox[1] + pad, size=(_WATERTIGHT_PROBES, 3)
        )
        par = self._ray_parities(probes)
        disagree = int(((par != par[:, :1]).any(axis=1)).sum())
        if disagree / _WATERTIGHT_PROBES > 0.001:
            raise TopologyError(
                f"mesh is not watertight: ray parity disagrees on {disagree} of "
                f"{_WATERTIGHT_PROBES} probe points"
            )


class _RayGrid:
    """Uniform bins over the projection plane (or axis) perpendicular to a
    fixed ray direction; maps a query point to the candidate elements its
    ray can intersect."""

    def __init__(self, geom: SurfaceGeometry, direction: np.ndarray):
        self.u = direction
        self.elements = geom.elements
        elems = geom.elements
        if geom.dimension == 2:
            e1 = np.array([-direction[1], direction[0]])
            self.basis = e1[None, :]
        else:
            e1 = np.zeros(3)
            e1[np.argmin(np.abs(direction))] = 1.0
            e1 = e1 - direction * (e1 @ direction)
            e1 /= np.linalg.norm(e1)
            e2 = np.cross(direction, e1)
            self.basis = np.stack([e1, e2])
        proj = elems @ self.basis.T  # (M, nverts, k)
        lo = proj.min(axis=1)
        hi = proj.max(axis=1)
        self.lo = lo.min(axis=0)
        self.hi = hi.max(axis=0)
        m = len(elems)
        k = self.basis.shape[0]
        nbins = max(4, int(np.ceil(m ** (1.0 / k))))
        self.nbins = np.full(k, nbins, dtype=np.int64)
        self.width = np.maximum((self.hi - self.lo) / self.nbins, 1e-300)
        b_lo = self._bin_of(lo, clip=True)
        b_hi = self._bin_of(hi, clip=True)
        # register each element in every bin its projected AABB overlaps
        counts = (b_hi - b_lo + 1).prod(axis=1)
        owner = np.repeat(np.arange(m), counts)
        local = np.arange(len(owner)) - np.repeat(np.cumsum(counts) - counts, counts)
        cell = np.empty((len(owner), k), dtype=np.int64)
        rem = local
        for ax in range(k - 1, -1, -1):
            span = (b_hi - b_lo + 1)[owner, ax]
            cell[:, ax] = b_lo[owner, ax] + rem % span
            rem = rem // span
        flat = self._flatten(cell)
        order = np.argsort(flat, kind="stable")
        self.items = owner[order]
        nflat = int(self.nbins.prod())
        self.starts = np.searchsorted(flat[order], np.arange(nflat + 1))

    def _bin_of(self, coords, clip=False):
        b = np.floor((coords - self.lo) / self.width).astype(np.int64)
        if clip:
            b = np.clip(b, 0, self.nbins - 1)
        return b

    def _flatten(self, cell):
        flat = cell[:, 0]
        for ax in range(1, cell.shape[1]):
            flat = flat * self.nbins[ax] + cell[:, ax]
        return flat

    def parity(self, pts):
        proj = pts @ self.basis.T
        b = self._bin_of(proj)
        inside_grid = ((b >= 0) & (b < self.nbins)).all(axis=1)
        out = np.zeros(len(pts), dtype=np.int64)
        idx = np.flatnonzero(inside_grid)
        if len(idx) == 0:
            return out
        flat = self._flatten(b[idx])
        starts = self.starts[flat]
        lens = self.starts[flat + 1] - starts
        owner = np.repeat(idx, lens)
        pos = np.arange(int(lens.sum())) - np.repeat(np.cumsum(lens) - lens, lens)
        cand = self.items[starts.repeat(lens) + pos]
        if len(cand) == 0:
            return out
        crossings = self._count_crossings(pts[owner], cand)
        np.add.at(out, owner, crossings)
        return out & 1

    def _count_crossings(self, p, cand):
        raise NotImplementedError


class _RayGrid2D(_RayGrid):
    def _count_crossings(self, p, cand):
        return ray_seg_hits(
            np.ascontiguousarray(p),
            np.ascontiguousarray(self.elements[cand, 0]),
            np.ascontiguousarray(self.elements[cand, 1]),
            float(self.u[0]),
            float(self.u[1]),
        )


class _RayGrid3D(_RayGrid):
    def _count_crossings(self, p, cand):
        # Moeller-Trumbore; edge grazing is resolved by the majority vote
        return ray_tri_hits(
            np.ascontiguousarray(p),
            np.ascontiguousarray(self.elements[cand]),
            float(self.u[0]),
            float(self.u[1]),
            float(self.u[2]),
        )


def _as_points(points, dim):
    pts = np.asarray(points, dtype=np.float64)
    scalar = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[1] != dim:
        raise ValueError(f"expected {dim}-component points, got shape {pts.shape}")
    if not np.isfinite(pts).all():
        raise ParticlePrepError("non-finite query point")
    return pts, scalar


def _element_distance(pts, elems):
    """Exact distance and closest point from pts[i] to elems[i]."""
    pts = np.ascontiguousarray(pts)
    if elems.shape[1] == 2:
        return seg_closest_pairs(
            pts, np.ascontiguousarray(elems[:, 0]), np.ascontiguousarray(elems[:, 1])
        )
    return tri_closest_pairs(
        pts,
        np.ascontiguousarray(elems[:, 0]),
        np.ascontiguousarray(elems[:, 1]),
        np.ascontiguousarray(elems[:, 2]),
    )


# -- file loading ----------------------------------------------------------


def load_surface(path, fmt: str) -> SurfaceGeometry:
    """Load a surface file in one of SURFACE_FORMATS.

    3D meshes are checked for watertightness (parity consistency across the
    three fixed rays) and rejected if inconsistent.
    """
    if fmt not in SURFACE_FORMATS:
        raise ValueError(f"unknown format {fmt!r}; expected one of {SURFACE_FORMATS}")
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    if fmt == "polyline-csv":
        loops = [_parse_polyline_csv(path)]
        return surface_from_loops(loops)
    if fmt == "stl-ascii":
        tris = _parse_stl_ascii(path)
    elif fmt == "stl-binary":
        tris = _parse_stl_binary(path)
    else:
        tris = _parse_obj(path)
    if len(tris) == 0:
        raise EmptyInputError(f"{path}: no triangles")
    return SurfaceGeometry(np.asarray(tris), check_watertight=True)


def surface_from_loops(loops) -> SurfaceGeometry:
    """Build a 2D surface from one or more closed vertex loops.

    A loop whose first and last vertices coincide (within 1e-12 of the
    overall bbox diagonal) has the duplicate dropped; otherwise a closing
    segment is appended.
    """
    all_verts = np.concatenate([np.asarray(l, dtype=np.float64) for l in loops])
    if not np.isfinite(all_verts).all():
        raise MalformedInputError("non-finite vertex in polyline input")
    diag = float(np.linalg.norm(all_verts.max(axis=0) - all_verts.min(axis=0)))
    tol = 1e-12 * max(diag, 1.0)
    segs = []
    for loop in loops:
        v = np.asarray(loop, dtype=np.float64)
        if len(v) >= 2 and np.linalg.norm(v[0] - v[-1]) <= tol:
            v = v[:-1]
        if len(v) < 3:
            raise TopologyError(
                f"polyline loop has only {len(v)} distinct vertices; "
                "cannot form a closed region"
            )
        nxt = np.roll(v, -1, axis=0)
        segs.append(np.stack([v, nxt], axis=1))
    return SurfaceGeometry(np.concatenate(segs))


def _parse_polyline_csv(path) -> np.ndarray:
    verts = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise MalformedInputError(
                    f"{path}, line {lineno}: expected 'x,y', got {line!r}"
                )
            try:
                verts.append((float(parts[0]), float(parts[1])))
            except ValueError:
                raise MalformedInputError(
                    f"{path}, line {lineno}: non-numeric coordinate in {line!r}"
                ) from None
    if not verts:
        raise EmptyInputError(f"{path}: no vertices")
    return np.asarray(verts)


def _parse_stl_ascii(path):
    tris = []
    current = []
    with open(path, "r", encoding="utf-8", errors="replace") as f:
        lines = f.readlines()
    if not lines or not lines[0].lstrip().startswith("solid"):
        raise MalformedInputError(f"{path}, line 1: missing 'solid' header")
    saw_end = False
    for lineno, raw in enumerate(lines[1:], start=2):
        tok = raw.split()
        if not tok:
            continue
        if tok[0] == "vertex":
            if len(tok) != 4:
                raise MalformedInputError(
                    f"{path}, line {lineno}: vertex needs 3 coordinates"
                )
            try:
                current.append([float(tok[1]), float(tok[2]), float(tok[3])])
            except ValueError:
                raise MalformedInputError(
                    f"{path}, line {lineno}: non-numeric vertex coordinate"
                ) from None
        elif tok[0] == "endfacet":
            if len(current) != 3:
                raise MalformedInputError(
                    f"{path}, line {lineno}: facet has {len(current)} vertices, "
                    "expected 3"
                )
            tris.append(current)
            current = []
        elif tok[0] == "endsolid":
            saw_end = True
        elif tok[0] in ("facet", "outer", "endloop", "solid"):
            continue
        else:
            raise MalformedInputError(
                f"{path}, line {lineno}: unexpected token {tok[0]!r}"
            )
    if not saw_end:
        raise MalformedInputError(f"{path}: truncated file, no 'endsolid'")
    if current:
        raise MalformedInputError(f"{path}: truncated facet at end of file")
    return tris


def _parse_stl_binary(path):
    data = Path(path).read_bytes()
    if len(data) < 84:
        raise MalformedInputError(
            f"{path}: binary STL needs at least 84 bytes, got {len(data)}"
        )
    (count,) = struct.unpack_from("<I", data, 80)
    expected = 84 + 50 * count
    if len(data) < expected:
        raise MalformedInputError(
            f"{path}: truncated at byte {len(data)}, "
            f"expected {expected} for {count} triangles"
        )
    if count == 0:
        raise EmptyInputError(f"{path}: zero triangles")
    rec = np.frombuffer(
        data, dtype=np.dtype("<12f4, <u2"), count=count, offset=84
    )
    floats = rec["f0"].astype(np.float64).reshape(count, 4, 3)
    return floats[:, 1:4, :]  # drop the stored facet normal


def _parse_obj(path):
    verts = []
    faces = []
    with open(path, "r", encoding="utf-8", errors="replace") as f:
        for lineno, raw in enumerate(f, start=1):
            tok = raw.split()
            if not tok or tok[0].startswith("#"):
                continue
            if tok[0] == "v":
                if len(tok) < 4:
                    raise MalformedInputError(
                        f"{path}, line {lineno}: vertex needs 3 coordinates"
                    )
                try:
                    verts.append([float(tok[1]), float(tok[2]), float(tok[3])])
                except ValueError:
                    raise MalformedInputError(
                        f"{path}, line {lineno}: non-numeric vertex coordinate"
                    ) from None
            elif tok[0] == "f":
                if len(tok) != 4:
                    raise MalformedInputError(
                        f"{path}, line {lineno}: only triangular faces supported, "
                        f"got {len(tok) - 1} vertices"
                    )
                idx = []
                for t in tok[1:]:
                    head = t.split("/")[0]
                    try:
                        i = int(head)
                    except ValueError:
                        raise MalformedInputError(
                            f"{path}, line {lineno}: bad face index {t!r}"
                        ) from None
                    if i < 1:
                        raise MalformedInputError(
                            f"{path}, line {lineno}: face indices must be 1-based "
                            f"positive, got {i}"
                        )
                    idx.append(i - 1)
                faces.append(idx)
    if not verts or not faces:
        raise EmptyInputError(f"{path}: no geometry")
    verts = np.asarray(verts)
    faces = np.asarray(faces)
    if faces.max() >= len(verts):
        raise MalformedInputError(
            f"{path}: face index {faces.max() + 1} exceeds vertex count {len(verts)}"
        )
    return verts[faces]
