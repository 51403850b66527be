"""Physics-driven particle relaxation with level-set surface bounding.

Particles seeded on a lattice inside the body repel each other under a
constant background pressure; positions advance by r += F*dt^2/2 (no
velocity state), any particle shallower than half a spacing is projected
back along the inward normal, and the per-iteration displacement serves as
the velocity proxy for the kinetic-energy convergence diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
from itertools import product

import numpy as np

from .confinement import probe_completion
from .errors import EmptySeedError, ParticleEscapeError
from .levelset import LevelSetField, probe_normal, probe_phi

DT_MAX = 1.0


class WendlandC2:
    """Wendland quintic C2 kernel, W(q) = alpha (1 - q/2)^4 (2q + 1) for
    q = r/h in [0, 2]; cutoff r_c = 2h."""

    def __init__(self, h, dim):
        if dim not in (2, 3):
            raise ValueError("WendlandC2 supports dim 2 or 3")
        self.h = float(h)
        self.dim = dim
        self.r_c = 2.0 * self.h
        if dim == 2:
            self.alpha = 7.0 / (4.0 * np.pi * self.h ** 2)
        else:
            self.alpha = 21.0 / (16.0 * np.pi * self.h ** 3)

    def w(self, r):
        q = np.asarray(r, dtype=np.float64) / self.h
        t = 1.0 - 0.5 * q
        val = np.where(q < 2.0, t * t * t * t * (2.0 * q + 1.0), 0.0)
        return self.alpha * val

    def dwdr(self, r):
        q = np.asarray(r, dtype=np.float64) / self.h
        t = 1.0 - 0.5 * q
        val = np.where(q < 2.0, -5.0 * q * t * t * t, 0.0)
        return self.alpha * val / self.h

    def grad(self, rvec, r=None):
        """grad_a W(|r|) for r = x_a - x_b; zero at r = 0 (by symmetry)."""
        rvec = np.asarray(rvec, dtype=np.float64)
        if r is None:
            r = np.linalg.norm(rvec, axis=-1)
        mag = np.where(r > 0.0, self.dwdr(r), 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(r[..., None] > 0.0, rvec / r[..., None], 0.0)
        return mag[..., None] * unit


@dataclass
class ParticleSet:
    positions: np.ndarray          # (N, d)
    dx: float                      # nominal spacing
    kernel: WendlandC2
    volume: float = 0.0            # dx^d, fixed
    mass: float = 0.0              # rho0 * volume with rho0 = 1
    forces: np.ndarray = None      # (N, d) acceleration accumulator
    _grid: "_NeighborGrid" = None

    def __post_init__(self):
        d = self.positions.shape[1]
        if self.volume == 0.0:
            self.volume = self.dx ** d
        if self.mass == 0.0:
            self.mass = self.volume  # rho0 = 1
        if self.forces is None:
            self.forces = np.zeros_like(self.positions)

    def __len__(self):
        return len(self.positions)

    @property
    def dimension(self):
        return self.positions.shape[1]


@dataclass
class DiagnosticsSeries:
    """Per-iteration convergence record."""

    avg_kinetic_energy: list = dataclass_field(default_factory=list)
    max_displacement: list = dataclass_field(default_factory=list)
    bounded_count: list = dataclass_field(default_factory=list)

    def __len__(self):
        return len(self.avg_kinetic_energy)

    def append(self, e_k, max_disp, bounded):
        self.avg_kinetic_energy.append(float(e_k))
        self.max_displacement.append(float(max_disp))
        self.bounded_count.append(int(bounded))

    def converged_at(self, window=50, spread=0.10):
        """First iteration whose trailing window has
        (max - min)/mean < spread; None if never."""
        e = np.asarray(self.avg_kinetic_energy)
        for i in range(window - 1, len(e)):
            w = e[i - window + 1 : i + 1]
            mean = w.mean()
            if mean <= 0.0:
                return i
            if (w.max() - w.min()) / mean < spread:
                return i
        return None


@dataclass
class RelaxConfig:
    iterations: int = 1000
    use_confinement: bool = False
    p0: float = 1.0


class _NeighborGrid:
    """Uniform binning with cell edge r_c; rebuilt every iteration.

    Exposes a fixed-width candidate matrix (N, 3^d * max_occupancy) of
    particle indices (-1 padded), covering every pair within r_c.
    """

    def __init__(self, positions, origin, r_c):
        self.r_c = r_c
        d = positions.shape[1]
        self.origin = origin
        cell = np.floor((positions - origin) / r_c).astype(np.int64)
        self.cmin = cell.min(axis=0)
        cell -= self.cmin
        self.dims = cell.max(axis=0) + 1
        flat = cell[:, 0]
        for ax in range(1, d):
            flat = flat * self.dims[ax] + cell[:, ax]
        ncells = int(self.dims.prod())
        order = np.argsort(flat, kind="stable")
        flat_sorted = flat[order]
        starts = np.searchsorted(flat_sorted, np.arange(ncells + 1))
        counts = np.diff(starts)
        maxk = int(counts.max())
        slots = np.full((ncells, maxk), -1, dtype=np.int64)
        rank = np.arange(len(order)) - np.repeat(starts[:-1], counts)
        slots[flat_sorted, rank] = order
        self._slots = slots
        self._cell = cell
        self._flat = flat
        self._d = d

    def candidates(self):
        """(N, 3^d * maxk) candidate indices per particle, -1 padded;
        includes the particle itself (callers mask self-pairs)."""
        d = self._d
        neigh_flats = []
        for off in product((-1, 0, 1), repeat=d):
            nb = self._cell + np.asarray(off)
            ok = ((nb >= 0) & (nb < self.dims)).all(axis=1)
            flat = nb[:, 0]
            for ax in range(1, d):
                flat = flat * self.dims[ax] + nb[:, ax]
            flat = np.where(ok, flat, 0)
            cols = self._slots[flat]
            cols = np.where(ok[:, None], cols, -1)
            neigh_flats.append(cols)
        return np.concatenate(neigh_flats, axis=1)


def lattice_seed(field: LevelSetField, dx) -> ParticleSet:
    """Particles at lattice points (offset dx/2 from the domain origin)
    wherever the probed phi is negative."""
    if dx <= 0:
        raise ValueError("dx must be positive")
    d = field.dimension
    counts = np.floor((field.domain[1] - field.domain[0]) / dx + 1e-9).astype(int)
    axes = [field.origin[ax] + (np.arange(counts[ax]) + 0.5) * dx for ax in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    keep = np.zeros(len(pts), dtype=bool)
    chunk = 1 << 18
    for lo in range(0, len(pts), chunk):
        hi = min(lo + chunk, len(pts))
        keep[lo:hi] = probe_phi(field, pts[lo:hi]) < 0.0
    if not keep.any():
        raise EmptySeedError(
            f"lattice spacing {dx} produced no particle inside the body"
        )
    kernel = WendlandC2(1.3 * dx, d)
    return ParticleSet(positions=pts[keep].copy(), dx=float(dx), kernel=kernel)


def rebuild_neighbors(ps: ParticleSet, field: LevelSetField):
    ps._grid = _NeighborGrid(ps.positions, field.origin, ps.kernel.r_c)
    return ps


def neighbor_counts(ps: ParticleSet, radius):
    """Number of other particles within `radius` of each particle
    (radius must not exceed the kernel cutoff used for binning)."""
    if ps._grid is None or radius > ps.kernel.r_c:
        grid = _NeighborGrid(ps.positions, ps.positions.min(axis=0), max(radius, ps.kernel.r_c))
    else:
        grid = ps._grid
    cand = grid.candidates()
    valid = cand >= 0
    diff = ps.positions[:, None, :] - ps.positions[cand]
    r2 = np.einsum("nkd,nkd->nk", diff, diff)
    self_mask = cand == np.arange(len(ps))[:, None]
    hit = valid & ~self_mask & (r2 < radius * radius)
    return hit.sum(axis=1)


def compute_forces(ps: ParticleSet, field: LevelSetField, use_confinement=False, p0=1.0):
    """Pressure repulsion F = -2 p0 (sum_b grad W V_b [+ I at the particle])
    with V/m = 1/rho0 = 1; fills ps.forces."""
    if ps._grid is None:
        rebuild_neighbors(ps, field)
    cand = ps._grid.candidates()
    valid = cand >= 0
    pos = ps.positions
    diff = pos[:, None, :] - pos[np.where(valid, cand, 0)]
    r2 = np.einsum("nkd,nkd->nk", diff, diff)
    r_c = ps.kernel.r_c
    self_mask = cand == np.arange(len(ps))[:, None]
    pair = valid & ~self_mask & (r2 < r_c * r_c) & (r2 > 0.0)
    r = np.sqrt(np.where(pair, r2, 1.0))
    mag = np.where(pair, ps.kernel.dwdr(r) / r, 0.0)
    grad_sum = np.einsum("nk,nkd->nd", mag, diff) * ps.volume
    if use_confinement:
        grad_sum = grad_sum + probe_completion(field, pos)
    ps.forces = -2.0 * p0 * grad_sum
    return ps


def step(ps: ParticleSet, field: LevelSetField, diagnostics: DiagnosticsSeries = None):
    """One relaxation step: global dt from the largest acceleration,
    overdamped position update, then surface bounding."""
    f_mag = np.linalg.norm(ps.forces, axis=1)
    f_max = float(f_mag.max()) if len(f_mag) else 0.0
    if f_max > 0.0:
        dt = min(0.25 * np.sqrt(ps.kernel.h / f_max), DT_MAX)
    else:
        dt = DT_MAX
    old = ps.positions
    new = old + 0.5 * ps.forces * dt * dt

    escaped = (
        (new < field.domain[0]) | (new > field.domain[1])
    ).any(axis=1)
    if escaped.any():
        i = int(np.flatnonzero(escaped)[0])
        raise ParticleEscapeError(
            f"particle {i} escaped the domain at {new[i].tolist()}"
        )

    phi = probe_phi(field, new)
    bound = phi >= -0.5 * ps.dx
    if bound.any():
        normals = probe_normal(field, new[bound])
        new = new.copy()
        new[bound] -= (phi[bound] + 0.5 * ps.dx)[:, None] * normals
    ps.positions = new

    disp = new - old
    disp_mag = np.linalg.norm(disp, axis=1)
    if diagnostics is not None:
        e_k = 0.5 * ps.mass * float(np.mean((disp_mag / dt) ** 2))
        diagnostics.append(e_k, disp_mag.max(), int(bound.sum()))
    return ps


def relax(ps: ParticleSet, field: LevelSetField, config: RelaxConfig = None):
    """Run the relaxation loop; neighbor lists are rebuilt every iteration."""
    if config is None:
        config = RelaxConfig()
    diag = DiagnosticsSeries()
    rebuild_neighbors(ps, field)
    for _ in range(config.iterations):
        compute_forces(ps, field, config.use_confinement, config.p0)
        step(ps, field, diag)
        rebuild_neighbors(ps, field)
    return ps, diag
