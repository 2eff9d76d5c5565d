"""Uniform lattice over a box, horizon stencil, boundary taper and field utilities.

Nodes sit at ``x_i = h * i`` strictly inside ``D = prod [0, L_a]``.  Fields are
numpy arrays of shape ``grid.shape + (d,)``; values outside ``D`` are zero by
convention and are realised by zero padding of width ``grid.pad_width``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ConfigError


def _interior_count(length: float, h: float) -> int:
    q = length / h
    if abs(q - round(q)) < 1e-9 * max(1.0, q):
        return int(round(q)) - 1
    return int(math.floor(q))


@dataclass(frozen=True)
class Grid:
    d: int
    extents: tuple[float, ...]
    h: float
    eps: float
    shape: tuple[int, ...] = field(init=False)
    pad_width: int = field(init=False)
    offsets: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ConfigError(f"dimension must be 1, 2 or 3, got {self.d}")
        if len(self.extents) != self.d or min(self.extents) <= 0:
            raise ConfigError("need one positive extent per axis")
        if not 0 < self.h < self.eps:
            raise ConfigError(f"need 0 < h < eps (h={self.h}, eps={self.eps})")
        if self.eps >= 1.0 or self.eps >= min(self.extents):
            raise ConfigError(f"need eps < 1 and eps < min extent (eps={self.eps})")
        shape = tuple(_interior_count(L, self.h) for L in self.extents)
        m = int(math.floor(self.eps / self.h + 1e-9))
        axes = [np.arange(-m, m + 1)] * self.d
        k = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.d)
        dist = np.linalg.norm(k, axis=1) * self.h
        keep = (dist > 0) & (dist <= self.eps * (1 + 1e-12))
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "pad_width", m)
        object.__setattr__(self, "offsets", k[keep])

    # -- geometry -----------------------------------------------------------
    @property
    def num_nodes(self) -> int:
        return int(np.prod(self.shape))

    @property
    def volume(self) -> float:
        return float(np.prod(self.extents))

    @property
    def padded_shape(self) -> tuple[int, ...]:
        return tuple(n + 2 * self.pad_width for n in self.shape)

    def axis_coords(self, padded: bool = False) -> list[np.ndarray]:
        m = self.pad_width if padded else 0
        return [self.h * np.arange(1 - m, n + 1 + m) for n in self.shape]

    def coords(self, padded: bool = False) -> np.ndarray:
        mesh = np.meshgrid(*self.axis_coords(padded), indexing="ij")
        return np.stack(mesh, axis=-1)

    def lattice_index(self) -> np.ndarray:
        mesh = np.meshgrid(*[np.arange(1, n + 1) for n in self.shape], indexing="ij")
        return np.stack(mesh, axis=-1)

    def boundary_distance(self, padded: bool = False) -> np.ndarray:
        """Signed distance to the box boundary (negative outside D)."""
        x = self.coords(padded)
        L = np.asarray(self.extents)
        return np.min(np.minimum(x, L - x), axis=-1)

    def cell_measure(self) -> np.ndarray:
        """``|U_i intersect D|`` per node."""
        parts = []
        for x, L in zip(self.axis_coords(), self.extents):
            lo = np.maximum(x - self.h / 2, 0.0)
            hi = np.minimum(x + self.h / 2, L)
            parts.append(hi - lo)
        mesh = np.meshgrid(*parts, indexing="ij")
        return np.prod(np.stack(mesh, axis=-1), axis=-1)

    # -- stencil ------------------------------------------------------------
    @property
    def xi(self) -> np.ndarray:
        """Offsets in horizon units, shape (K, d)."""
        return self.offsets * (self.h / self.eps)

    @property
    def bond_lengths(self) -> np.ndarray:
        return np.linalg.norm(self.offsets, axis=1) * self.h

    @property
    def directions(self) -> np.ndarray:
        k = self.offsets.astype(float)
        return k / np.linalg.norm(k, axis=1)[:, None]

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape + (self.d,))

    def pad(self, arr: np.ndarray) -> np.ndarray:
        m = self.pad_width
        widths = [(m, m)] * self.d + [(0, 0)] * (arr.ndim - self.d)
        return np.pad(arr, widths)

    def shifted(self, k, start=None, stop=None, stride: int = 1) -> tuple:
        """Slice of a padded array giving values at ``node + k``.

        ``start/stop/stride`` restrict the first axis (used for slab
        parallelism and for evaluating on a coarse subset of nodes).
        """
        m = self.pad_width
        sl = []
        for a, (ka, n) in enumerate(zip(k, self.shape)):
            lo = m + int(ka)
            if a == 0 and start is not None:
                sl.append(slice(lo + start, lo + stop, stride))
            else:
                sl.append(slice(lo, lo + n, stride))
        return tuple(sl)

    def neighbor_indices(self, node: tuple[int, ...]) -> list[tuple[int, ...]]:
        """0-based lattice indices of the horizon neighbours of ``node``.

        Indices outside ``[0, n)`` denote ghost nodes (zero field, zero taper).
        """
        return [tuple(int(a + b) for a, b in zip(node, k)) for k in self.offsets]

    def is_inside(self, idx: tuple[int, ...]) -> bool:
        return all(0 <= i < n for i, n in zip(idx, self.shape))


def build_grid(d: int, extents, h: float, eps: float) -> Grid:
    if np.isscalar(extents):
        extents = (float(extents),) * d
    return Grid(d, tuple(float(L) for L in extents), float(h), float(eps))


def smoothstep(s):
    s = np.clip(s, 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s)


def domain_taper(grid: Grid, padded: bool = False) -> np.ndarray:
    """omega = smoothstep(dist(x, boundary) / eps); zero on and outside the boundary."""
    dist = grid.boundary_distance(padded)
    return np.where(dist > 0, smoothstep(dist / grid.eps), 0.0)


def _gauss_points(order: int):
    t, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * t, 0.5 * w  # on [-1/2, 1/2], weights sum to 1


def cell_average_projection(exact_fn: Callable, grid: Grid, order: int = 3) -> np.ndarray:
    """Mean of ``exact_fn`` over each cell ``U_i`` (clipped to D).

    ``exact_fn`` maps points of shape (..., d) to values of shape (..., k).
    Tensor Gauss-Legendre with ``order`` points per axis.
    """
    if order < 3:
        raise ConfigError("cell averages use at least 3 Gauss points per axis")
    t, w = _gauss_points(order)
    lo_hi = []
    for x, L in zip(grid.axis_coords(), grid.extents):
        lo = np.maximum(x - grid.h / 2, 0.0)
        hi = np.minimum(x + grid.h / 2, L)
        lo_hi.append((0.5 * (lo + hi), hi - lo))
    total = None
    for q in np.ndindex(*(order,) * grid.d):
        pts = [c + t[qa] * wid for (c, wid), qa in zip(lo_hi, q)]
        mesh = np.stack(np.meshgrid(*pts, indexing="ij"), axis=-1)
        val = np.asarray(exact_fn(mesh), dtype=float)
        weight = np.prod([w[qa] for qa in q])
        total = weight * val if total is None else total + weight * val
    return total


def sample_nodes(exact_fn: Callable, grid: Grid) -> np.ndarray:
    return np.asarray(exact_fn(grid.coords()), dtype=float)


def l2_norm(values: np.ndarray, grid: Grid) -> float:
    sq = np.sum(values.reshape(grid.shape + (-1,)) ** 2, axis=-1)
    return float(np.sqrt(np.sum(grid.cell_measure() * sq)))


def l2_inner(a: np.ndarray, b: np.ndarray, grid: Grid) -> float:
    dots = np.sum(a.reshape(grid.shape + (-1,)) * b.reshape(grid.shape + (-1,)), axis=-1)
    return float(np.sum(grid.cell_measure() * dots))


def holder_seminorm_estimate(values: np.ndarray, gamma: float, grid: Grid,
                             sample_budget: int = 2_000_000, seed: int = 0) -> float:
    """Lower estimate of ``sup |u(x)-u(y)| / |x-y|^gamma`` over node pairs.

    Exhaustive when the number of pairs fits ``sample_budget``, otherwise a
    seeded uniform sample of pairs.
    """
    if not 0 < gamma <= 1:
        raise ConfigError("Hoelder exponent must lie in (0, 1]")
    x = grid.coords().reshape(-1, grid.d)
    u = values.reshape(x.shape[0], -1)
    n = x.shape[0]
    if n < 2:
        return 0.0
    best = 0.0
    if n * (n - 1) // 2 <= sample_budget:
        chunk = max(1, sample_budget // max(n, 1) // 8 or 1)
        for i0 in range(0, n, chunk):
            xi, ui = x[i0:i0 + chunk], u[i0:i0 + chunk]
            dx = np.linalg.norm(xi[:, None, :] - x[None, :, :], axis=-1)
            du = np.linalg.norm(ui[:, None, :] - u[None, :, :], axis=-1)
            mask = dx > 0
            if np.any(mask):
                best = max(best, float(np.max(du[mask] / dx[mask] ** gamma)))
        return best
    rng = np.random.default_rng(seed)
    i = rng.integers(0, n, sample_budget)
    j = rng.integers(0, n, sample_budget)
    mask = i != j
    i, j = i[mask], j[mask]
    dx = np.linalg.norm(x[i] - x[j], axis=1)
    du = np.linalg.norm(u[i] - u[j], axis=1)
    return float(np.max(du / dx**gamma))


def holder_norm_estimate(values: np.ndarray, gamma: float, grid: Grid, **kw) -> float:
    """sup |u| plus the seminorm estimate."""
    sup = float(np.max(np.linalg.norm(values.reshape(grid.num_nodes, -1), axis=1)))
    return sup + holder_seminorm_estimate(values, gamma, grid, **kw)


# -- CSV snapshots ----------------------------------------------------------

def write_field_csv(path, grid: Grid, values: np.ndarray, names: list[str] | None = None) -> None:
    flat = values.reshape(grid.num_nodes, -1)
    idx = grid.lattice_index().reshape(-1, grid.d)
    x = grid.coords().reshape(-1, grid.d)
    if names is None:
        names = [f"u{a}" for a in range(flat.shape[1])]
    header = [f"i{a}" for a in range(grid.d)] + [f"x{a}" for a in range(grid.d)] + names
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in range(grid.num_nodes):
            w.writerow([*map(int, idx[r]), *(f"{v:.17g}" for v in x[r]), *(f"{v:.17g}" for v in flat[r])])


def read_field_csv(path, grid: Grid, ncomp: int | None = None) -> np.ndarray:
    """Load a snapshot written by :func:`write_field_csv` onto ``grid``."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"snapshot not found: {path}")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    ni = sum(1 for c in header if c.startswith("i"))
    if ni != grid.d:
        raise ConfigError(f"snapshot has {ni} index columns, grid has d={grid.d}")
    ncols = len(header) - 2 * grid.d if ncomp is None else ncomp
    out = np.zeros(grid.shape + (ncols,))
    for row in body:
        idx = tuple(int(v) - 1 for v in row[: grid.d])
        if not grid.is_inside(idx):
            raise ConfigError(f"snapshot node {idx} lies outside the grid")
        out[idx] = [float(v) for v in row[2 * grid.d: 2 * grid.d + ncols]]
    return out
