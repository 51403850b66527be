"""Static-confinement completion field.

For a near-surface particle the kernel support sticks out of the body; the
missing exterior part of the kernel-gradient sum only depends on the fixed
surface, so it is precomputed per fine cell as
    I(a) = sum_c H(phi_c, eps) * l_f^d * grad_a W(|x_a - x_c|)
over the fine cells c within the cutoff radius, with the smoothed Heaviside
H estimating each cell's exterior volume fraction. Relaxation interpolates
I at particle positions and adds it to the pressure-force sum.
"""

from __future__ import annotations

from itertools import product

import numpy as np

from .errors import ConfigurationError
from .levelset import _PACKAGE_EDGE, LevelSetField, _pts


def heaviside(phi, eps):
    """Three-branch smoothed Heaviside: 0 below -eps, 1 above +eps,
    1/2 + phi/2eps + sin(pi phi/eps)/2pi between."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    phi_a = np.asarray(phi, dtype=np.float64)
    mid = 0.5 + phi_a / (2.0 * eps) + np.sin(np.pi * phi_a / eps) / (2.0 * np.pi)
    out = np.where(phi_a < -eps, 0.0, np.where(phi_a > eps, 1.0, mid))
    return float(out) if np.isscalar(phi) else out


def active_band(field: LevelSetField, r_c):
    """Threshold window of cells that carry a completion vector:
    -(r_c + l_f) <= phi <= +l_f."""
    t_n = -(r_c + field.l_f)
    t_p = field.l_f
    return t_n, t_p


def compute_completion(field: LevelSetField, kernel, eps=None):
    """Fill the per-cell completion vectors for every fine cell in the
    active band; zero elsewhere. Far-positive cells (and anything beyond
    the stored grid, which the domain padding keeps outside the body)
    contribute with full weight H = 1."""
    if eps is None:
        eps = 0.75 * field.l_f
    r_c = kernel.r_c
    if r_c > 4.0 * field.l_c:
        raise ConfigurationError(
            f"kernel cutoff {r_c} exceeds the representable band 4*l_c = "
            f"{4.0 * field.l_c}"
        )
    d = field.dimension
    l_f = field.l_f
    t_n, t_p = active_band(field, r_c)

    field.completion = np.zeros_like(field.completion)
    targets = np.argwhere((field.phi >= t_n) & (field.phi <= t_p))
    if len(targets) == 0:
        return field
    pkg = targets[:, 0]
    gidx = field.package_coords[pkg] * _PACKAGE_EDGE + targets[:, 1:]

    kmax = int(np.floor(r_c / l_f))
    acc = np.zeros((len(targets), d))
    for off in product(range(-kmax, kmax + 1), repeat=d):
        off_a = np.asarray(off, dtype=np.int64)
        r = float(np.linalg.norm(off_a)) * l_f
        if r == 0.0 or r >= r_c:
            continue
        # grad_a W(x_a - x_c) with x_a - x_c = -off*l_f
        g = kernel.dwdr(r) * (-off_a * l_f) / r
        phi_c = _gather_phi_ext(field, gidx + off_a)
        acc += heaviside(phi_c, eps)[:, None] * g[None, :]
    acc *= l_f ** d
    field.completion[tuple(targets.T)] = acc
    return field


def probe_completion(field: LevelSetField, points):
    """Multilinear interpolation of the stored completion vectors; zero
    outside the active band and in far regions."""
    pts, scalar = _pts(points, field.dimension)
    field._require_inside(pts)
    out = field.interpolate(pts, "completion")
    return out[0] if scalar else out


def _gather_phi_ext(field: LevelSetField, gidx):
    """phi at global fine indices, where indices beyond the stored grid
    resolve to the positive far value (the padding guarantees anything out
    there is outside the body)."""
    outside = ((gidx < 0) | (gidx >= field.fine_dims)).any(axis=1)
    vals = field.gather_fine(np.clip(gidx, 0, field.fine_dims - 1), "phi")
    if outside.any():
        vals[outside] = field.far_positive
    return vals
