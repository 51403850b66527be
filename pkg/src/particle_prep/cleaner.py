"""Detection and removal of sub-resolution surface features.

Fine cells are classified by whether their corner-interpolated phi values
straddle the zero level or the auxiliary levels at +-eps (eps = 0.75*l_f by
default). A zero- or gap-cut cell with no positive-cut (negative-cut)
neighbor in its 3^d neighborhood marks a feature too thin to resolve; its
phi is replaced by a signed distance estimate to the surviving auxiliary
level, capped at D_limit = 3*l_f, and the band is re-initialized.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
from itertools import product

import numpy as np

from .confinement import compute_completion
from .levelset import _PACKAGE_EDGE, LevelSetField, reinitialize

ZERO_CUT = np.uint8(1)
POSITIVE_CUT = np.uint8(2)
NEGATIVE_CUT = np.uint8(4)
GAP_CUT = np.uint8(8)
NON_RESOLVED_PLUS = np.uint8(16)
NON_RESOLVED_MINUS = np.uint8(32)

D_LIMIT_CELLS = 3.0   # replacement cap, in units of l_f
SEARCH_HALF_WIDTH = 2  # 5^d window around a non-resolved cell

DEFAULT_EPS_FACTOR = 0.75  # eps = 0.75 * l_f


@dataclass
class PassStats:
    index: int
    n_zero: int
    n_pos: int
    n_neg: int
    n_gap: int
    n_non_plus: int
    n_non_minus: int
    modified: int
    residual: float


@dataclass
class CleanReport:
    passes: list = dataclass_field(default_factory=list)
    complete: bool = True

    @property
    def total_modified(self):
        return sum(p.modified for p in self.passes)

    @property
    def already_clean(self):
        return len(self.passes) == 1 and self.passes[0].modified == 0


def default_eps(field: LevelSetField) -> float:
    return DEFAULT_EPS_FACTOR * field.l_f


def corner_values(field: LevelSetField, phi_halo=None):
    """(P, 5..5) corner lattice: each corner is the mean of its 2^d adjacent
    fine-cell centers (far constants fill in at band borders)."""
    d = field.dimension
    if phi_halo is None:
        phi_halo = field.assemble_halo("phi", width=1)
    n = _PACKAGE_EDGE + 1
    shape = (phi_halo.shape[0],) + (n,) * d
    out = np.zeros(shape)
    for off in product((0, 1), repeat=d):
        sl = (slice(None),) + tuple(slice(o, o + n) for o in off)
        out += phi_halo[sl]
    out /= 2 ** d
    return out


def corner_phi(field: LevelSetField, fine_index):
    """The 2^d corner values of one fine cell (global index)."""
    gidx = np.asarray(fine_index, dtype=np.int64)
    coarse = gidx // _PACKAGE_EDGE
    pkg = int(field.package_index[tuple(coarse)])
    if pkg < 0:
        raise ValueError(f"fine cell {fine_index} is not in an inner package")
    local = gidx - coarse * _PACKAGE_EDGE
    corners = corner_values(field)
    sel = (pkg,) + tuple(slice(i, i + 2) for i in local)
    return corners[sel].ravel()


def classify_cells(field: LevelSetField, eps=None):
    """Recompute all interface-id flags from phi (core packages only).

    zero_cut: corner values straddle 0; positive_cut/negative_cut: corner
    values straddle +eps/-eps; gap_cut: the cell-center phi lies strictly
    between 0 and +-eps and the cell is not zero-cut.
    """
    if eps is None:
        eps = default_eps(field)
    d = field.dimension
    corners = corner_values(field)
    cell_min = None
    cell_max = None
    for off in product((0, 1), repeat=d):
        sl = (slice(None),) + tuple(
            slice(o, o + _PACKAGE_EDGE) for o in off
        )
        v = corners[sl]
        cell_min = v if cell_min is None else np.minimum(cell_min, v)
        cell_max = v if cell_max is None else np.maximum(cell_max, v)

    flags = np.zeros(field.phi.shape, dtype=np.uint8)
    zero = (cell_min < 0.0) & (cell_max > 0.0)
    pos = (cell_min < eps) & (cell_max > eps)
    neg = (cell_min < -eps) & (cell_max > -eps)
    center = field.phi
    gap = (
        (((-eps < center) & (center < 0.0)) | ((0.0 < center) & (center < eps)))
        & ~zero
    )
    flags[zero] |= ZERO_CUT
    flags[pos] |= POSITIVE_CUT
    flags[neg] |= NEGATIVE_CUT
    flags[gap] |= GAP_CUT

    # classification is only meaningful (and only used) in core packages
    core = field.package_is_core
    flags[~core] = 0
    field.iface = flags
    return flags


def find_non_resolved(field: LevelSetField, flags=None):
    """Split the topologically inconsistent cut cells: a zero/gap-cut cell
    with no positive-cut (negative-cut) cell anywhere in its 3^d
    neighborhood, itself included."""
    if flags is None:
        flags = field.iface
    d = field.dimension
    halo = field.assemble_halo("iface", width=1)
    has_pos = np.zeros(flags.shape, dtype=bool)
    has_neg = np.zeros(flags.shape, dtype=bool)
    for off in product((0, 1, 2), repeat=d):
        sl = (slice(None),) + tuple(slice(o, o + _PACKAGE_EDGE) for o in off)
        v = halo[sl]
        has_pos |= (v & POSITIVE_CUT) != 0
        has_neg |= (v & NEGATIVE_CUT) != 0

    cand = (flags & (ZERO_CUT | GAP_CUT)) != 0
    non_plus = cand & ~has_pos
    non_minus = cand & ~has_neg
    field.iface[non_plus] |= NON_RESOLVED_PLUS
    field.iface[non_minus] |= NON_RESOLVED_MINUS
    return non_plus, non_minus


def redistance(field: LevelSetField, non_plus, non_minus):
    """Replace phi of non-resolved cells with the signed estimate of their
    distance to the surviving auxiliary level, scanned over the 5^d window
    and capped at D_limit = 3*l_f. Returns the number of modified cells.

    All reads come from the pre-pass snapshot; writes land afterwards.
    """
    l_f = field.l_f
    d_limit = D_LIMIT_CELLS * l_f
    w = SEARCH_HALF_WIDTH
    phi_h = field.assemble_halo("phi", width=w)
    iface_h = field.assemble_halo("iface", width=w)
    normal_h = field.assemble_halo("normal", width=w)

    def min_distance(cells, want_flag, sign):
        """Minimum Eq-style distance from each cell to a want_flag cell in
        its window; +inf where the window holds none. sign=+1 uses +phi of
        the auxiliary cell, sign=-1 uses -phi."""
        m = len(cells)
        best = np.full(m, np.inf)
        pkg = cells[:, 0]
        loc = cells[:, 1:]
        for off in product(range(-w, w + 1), repeat=field.dimension):
            off_a = np.asarray(off)
            sel = (pkg,) + tuple((loc + w + off_a).T)
            flagged = (iface_h[sel] & want_flag) != 0
            if not flagged.any():
                continue
            phi_p = phi_h[sel][flagged]
            n_p = normal_h[sel][flagged]
            delta = off_a * l_f + sign * phi_p[:, None] * n_p
            dist = np.linalg.norm(delta, axis=1)
            idx = np.flatnonzero(flagged)
            best[idx] = np.minimum(best[idx], dist)
        return best

    cells_plus = np.argwhere(non_plus)
    cells_minus = np.argwhere(non_minus)
    d_plus = min_distance(cells_plus, POSITIVE_CUT, +1)
    d_minus = min_distance(cells_minus, NEGATIVE_CUT, -1)

    new_phi = field.phi.copy()
    # C_non+ first ...
    sel_p = tuple(cells_plus.T)
    new_phi[sel_p] = -np.minimum(d_plus, d_limit)
    # ... then C_non-, overwriting cells in both sets
    sel_m = tuple(cells_minus.T)
    new_phi[sel_m] = np.minimum(d_minus, d_limit)

    both = non_plus & non_minus
    if both.any():
        # whichever side found a real auxiliary cell wins; when neither did,
        # keep the pre-edit sign at magnitude D_limit
        lookup_p = {tuple(c): d for c, d in zip(cells_plus, d_plus)}
        for cell in np.argwhere(both):
            key = tuple(cell)
            dp = lookup_p[key]
            dm = d_minus[_row_index(cells_minus, cell)]
            if np.isinf(dm) and np.isfinite(dp):
                new_phi[key] = -min(dp, d_limit)
            elif np.isinf(dp) and np.isinf(dm):
                pre = field.phi[key]
                new_phi[key] = d_limit if pre >= 0 else -d_limit
    modified = int(np.count_nonzero(new_phi != field.phi))
    field.phi = new_phi
    return modified


def _row_index(rows, row):
    return int(np.flatnonzero((rows == row).all(axis=1))[0])


def clean(
    field: LevelSetField,
    max_passes=5,
    eps=None,
    kernel=None,
    completion_eps=None,
    reinit_iters=40,
):
    """Run the full cleaning loop: classify, find non-resolved cells,
    re-distance, re-initialize, refresh normals (and the completion field
    when a kernel is attached), until nothing is flagged or max_passes is
    exhausted. Returns (field, CleanReport)."""
    if eps is None:
        eps = default_eps(field)
    report = CleanReport()
    for p in range(1, max_passes + 1):
        flags = classify_cells(field, eps)
        non_plus, non_minus = find_non_resolved(field, flags)
        stats = PassStats(
            index=p,
            n_zero=int(((flags & ZERO_CUT) != 0).sum()),
            n_pos=int(((flags & POSITIVE_CUT) != 0).sum()),
            n_neg=int(((flags & NEGATIVE_CUT) != 0).sum()),
            n_gap=int(((flags & GAP_CUT) != 0).sum()),
            n_non_plus=int(non_plus.sum()),
            n_non_minus=int(non_minus.sum()),
            modified=0,
            residual=0.0,
        )
        if not (non_plus.any() or non_minus.any()):
            report.passes.append(stats)
            report.complete = True
            return field, report
        stats.modified = redistance(field, non_plus, non_minus)
        stats.residual = reinitialize(field, reinit_iters)
        field.refresh_normals()
        if kernel is not None:
            compute_completion(field, kernel, completion_eps or eps)
        report.passes.append(stats)
    # out of passes: one more classification decides whether we're done
    flags = classify_cells(field, eps)
    non_plus, non_minus = find_non_resolved(field, flags)
    report.complete = not (non_plus.any() or non_minus.any())
    return field, report
