"""Bond strain, peridynamic force, potential energy and the L2 Lipschitz ratio.

All lattice sums run over the precomputed horizon stencil of the grid with
the self-cell excluded (nodal midpoint rule).  Per node, bonds are summed in
stencil order, so results do not depend on how nodes are split across
worker threads.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import ConfigError, DomainError
from .grid import Grid, domain_taper, l2_norm
from .potential import (F1_second, InfluenceSpec, PotentialSpec,
                        inflection_point, unit_ball_volume)


class BondModel:
    """Discrete bond-based peridynamic operator on a fixed grid."""

    def __init__(self, grid: Grid, potential: PotentialSpec | None = None,
                 influence: InfluenceSpec | None = None, workers: int = 1):
        self.grid = grid
        self.potential = potential or PotentialSpec()
        self.influence = influence or InfluenceSpec()
        self.workers = max(1, int(workers))
        g = grid
        self.taper = domain_taper(g)
        self.taper_padded = domain_taper(g, padded=True)
        self.inside_padded = (g.boundary_distance(padded=True) > 0).astype(float)
        omega_d = unit_ball_volume(g.d)
        xi_norm = np.linalg.norm(g.xi, axis=1)
        J = self.influence(xi_norm)
        keep = J > 0
        self.offsets = g.offsets[keep]
        self.dirs = g.directions[keep]
        self.s = g.bond_lengths[keep]
        self.sqrt_s = np.sqrt(self.s)
        self.J = J[keep]
        vol = (g.h / g.eps) ** g.d
        # lattice weights of the force, stability and energy sums
        self.w_stab = 2.0 / (g.eps * omega_d) * vol * self.J
        self.w_force = self.w_stab / self.sqrt_s
        self.w_energy = g.h**g.d / (g.eps**g.d * omega_d) * self.J / g.eps
        self.rbar = inflection_point(self.potential)

    # -- plumbing -------------------------------------------------------------
    def _check(self, u):
        if u.shape[: self.grid.d] != self.grid.shape:
            raise ConfigError(f"field shape {u.shape} does not match grid {self.grid.shape}")

    def _blocks(self, counts):
        n0 = counts[0]
        if self.workers == 1 or n0 < 2 * self.workers:
            return [(0, n0)]
        edges = np.linspace(0, n0, self.workers + 1).astype(int)
        return [(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]

    def _map_blocks(self, fn, starts, counts, stride):
        blocks = self._blocks(counts)
        jobs = []
        for a, b in blocks:
            st = (starts[0] + a * stride,) + tuple(starts[1:])
            ct = (b - a,) + tuple(counts[1:])
            jobs.append((st, ct))
        if len(jobs) == 1:
            return [fn(*jobs[0], stride)]
        with ThreadPoolExecutor(max_workers=self.workers) as ex:
            return list(ex.map(lambda j: fn(*j, stride), jobs))

    def _slices(self, k, starts, counts, stride):
        m = self.grid.pad_width
        return tuple(slice(m + s + ka, m + s + ka + stride * (c - 1) + 1, stride)
                     for s, c, ka in zip(starts, counts, k))

    def _bond_strains(self, up, starts, counts, stride):
        """Yield (bond number, neighbour slice, strain) for every stencil bond."""
        base = self._slices((0,) * self.grid.d, starts, counts, stride)
        ui = up[base]
        for b, (k, e, s) in enumerate(zip(self.offsets, self.dirs, self.s)):
            sl = self._slices(k, starts, counts, stride)
            yield b, sl, ((up[sl] - ui) @ e) / s

    # -- force ----------------------------------------------------------------
    def _force_block(self, up, starts, counts, stride):
        wp = self.taper_padded
        base = self._slices((0,) * self.grid.d, starts, counts, stride)
        wi = wp[base]
        c2 = 2.0 * self.potential.c * self.potential.beta
        beta = self.potential.beta
        F = np.zeros(tuple(counts) + (self.grid.d,))
        for b, sl, S in self._bond_strains(up, starts, counts, stride):
            x = self.sqrt_s[b] * S
            g = (self.w_force[b] * c2) * wi * wp[sl] * x * np.exp(-beta * x * x)
            for a in range(self.grid.d):
                if self.dirs[b, a] != 0.0:
                    F[..., a] += g * self.dirs[b, a]
        return F

    def force(self, u: np.ndarray, start: int = 0, stride: int = 1, count=None) -> np.ndarray:
        """Nodal force -grad PD at all nodes, or at the sub-lattice
        ``start + stride * j`` (same on every axis) when ``stride > 1``."""
        self._check(u)
        if self.potential.kind != "exponential":
            raise ConfigError(f"no force kernel for potential kind {self.potential.kind!r}")
        up = self.grid.pad(u)
        starts = (start,) * self.grid.d
        if count is None:
            count = tuple((n - start + stride - 1) // stride for n in self.grid.shape)
        parts = self._map_blocks(lambda st, ct, sd: self._force_block(up, st, ct, sd),
                                 starts, count, stride)
        return parts[0] if len(parts) == 1 else np.concatenate(parts, axis=0)

    # -- energy ---------------------------------------------------------------
    def potential_energy(self, u: np.ndarray) -> float:
        self._check(u)
        g = self.grid
        up = g.pad(u)
        wp = self.taper_padded
        starts, counts = (0,) * g.d, g.shape
        wi = wp[self._slices((0,) * g.d, starts, counts, 1)]
        c, beta = self.potential.c, self.potential.beta
        total = 0.0
        for b, sl, S in self._bond_strains(up, starts, counts, 1):
            fval = -c * np.expm1(-beta * self.s[b] * S * S)
            total += self.w_energy[b] * float(np.sum(wi * wp[sl] * fval))
        return g.h**g.d * total

    def kinetic_energy(self, v: np.ndarray) -> float:
        return 0.5 * l2_norm(v, self.grid) ** 2

    def total_energy(self, u: np.ndarray, v: np.ndarray) -> float:
        return self.kinetic_energy(v) + self.potential_energy(u)

    # -- bond diagnostics -----------------------------------------------------
    def bond_scan(self, u: np.ndarray):
        """Return (max |S| over weighted bonds, per-node softened count,
        per-node count of bonds to nodes inside D)."""
        self._check(u)
        g = self.grid
        up = g.pad(u)
        starts, counts = (0,) * g.d, g.shape
        wi = self.taper_padded[self._slices((0,) * g.d, starts, counts, 1)]
        soft = np.zeros(g.shape)
        total = np.zeros(g.shape)
        smax = 0.0
        for b, sl, S in self._bond_strains(up, starts, counts, 1):
            inside = self.inside_padded[sl]
            active = (wi * self.taper_padded[sl]) > 0
            if np.any(active):
                smax = max(smax, float(np.max(np.abs(S[active]))))
            Sc = self.rbar / self.sqrt_s[b]
            soft += inside * (np.abs(S) > Sc)
            total += inside
        return smax, soft, total

    def stability_matrices(self, u: np.ndarray) -> np.ndarray:
        """Per-node stability matrix, shape grid.shape + (d, d).

        Exact derivative of the nodal force under the radial perturbation
        ``s(y) = delta * mu * (1 - |y - x|)`` about ``u``.
        """
        self._check(u)
        g = self.grid
        up = g.pad(u)
        wp = self.taper_padded
        starts, counts = (0,) * g.d, g.shape
        wi = wp[self._slices((0,) * g.d, starts, counts, 1)]
        A = np.zeros(g.shape + (g.d, g.d))
        for b, sl, S in self._bond_strains(up, starts, counts, 1):
            coef = self.w_stab[b] * wi * wp[sl] * F1_second(self.sqrt_s[b] * S, self.potential)
            A -= coef[..., None, None] * np.outer(self.dirs[b], self.dirs[b])
        return A


# -- functional surface -------------------------------------------------------

def strain(u: np.ndarray, grid: Grid, i, j) -> float:
    """Bond strain between lattice nodes i and j (0-based; ghosts read zero)."""
    i, j = tuple(i), tuple(j)
    if i == j:
        raise DomainError("strain is undefined for a bond from a node to itself")
    ui = u[i] if grid.is_inside(i) else np.zeros(grid.d)
    uj = u[j] if grid.is_inside(j) else np.zeros(grid.d)
    dx = (np.asarray(j) - np.asarray(i)) * grid.h
    r = float(np.linalg.norm(dx))
    return float(np.dot(uj - ui, dx / r) / r)


def peridynamic_force(u, grid, potential=None, influence=None, taper=None, model=None):
    if model is None:
        model = BondModel(grid, potential, influence)
    elif model.grid is not grid:
        raise ConfigError("model was built for a different grid")
    if taper is not None and not np.array_equal(taper, model.taper):
        raise ConfigError("taper does not belong to this grid")
    return model.force(u)


def potential_energy(u, grid, potential=None, influence=None, model=None) -> float:
    model = model or BondModel(grid, potential, influence)
    return model.potential_energy(u)


def total_energy(u, v, grid, potential=None, influence=None, model=None) -> float:
    model = model or BondModel(grid, potential, influence)
    return model.total_energy(u, v)


def lipschitz_ratio(u: np.ndarray, w: np.ndarray, model: BondModel) -> float:
    """``||F(u) - F(w)|| / ||u - w||`` in the discrete L2 norm (0 when u = w)."""
    den = l2_norm(u - w, model.grid)
    if den == 0.0:
        return 0.0
    return l2_norm(model.force(u) - model.force(w), model.grid) / den


def lipschitz_bound(cbar: float, eps: float) -> float:
    return 6.0 * cbar / eps**2


def linearized_operator_norm(model: BondModel) -> float:
    """Largest |eigenvalue| of the force Jacobian at u = 0, by dense assembly.

    Only meant for coarse grids (assembles N*d columns).
    """
    g = model.grid
    n = g.num_nodes * g.d
    if n > 4000:
        raise ConfigError("dense linearisation limited to 4000 unknowns")
    eye = np.zeros(g.shape + (g.d,))
    cols = []
    delta = 1e-7
    for idx in range(n):
        eye.reshape(-1)[idx] = delta
        cols.append(model.force(eye).reshape(-1) / delta)
        eye.reshape(-1)[idx] = 0.0
    K = np.array(cols).T
    K = 0.5 * (K + K.T)
    return float(np.max(np.abs(np.linalg.eigvalsh(K))))


def bond_count(grid: Grid) -> int:
    return len(grid.offsets)


def horizon_ratio(grid: Grid) -> float:
    return grid.eps / grid.h if grid.h else math.inf
