"""Local stability under radial perturbations.

For a displacement ``u`` and node ``x``, perturbing by ``delta * mu * (1 - |y - x|)``
gives a linear growth law governed by the symmetric d x d stability matrix
``A(x)``.  Its eigenvalues fix the spectral radius of the forward and
backward Euler iteration maps for that mode.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .force import BondModel
from .grid import Grid


def stability_matrix(u: np.ndarray, model: BondModel, node) -> np.ndarray:
    node = tuple(node)
    if not model.grid.is_inside(node):
        raise DomainError(f"node {node} is not a grid node")
    return model.stability_matrices(u)[node]


def eigenvalues(A: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues of one or a stack of symmetric matrices."""
    A = np.asarray(A, dtype=float)
    return np.linalg.eigvalsh(0.5 * (A + np.swapaxes(A, -1, -2)))


def forward_euler_radius(lam, dt: float) -> float:
    """max_i |1 +- dt sqrt(lam_i)|, complex modulus for lam_i < 0."""
    if not dt > 0:
        raise DomainError("dt must be positive")
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    rho = np.where(lam >= 0, 1.0 + dt * np.sqrt(np.abs(lam)), np.sqrt(1.0 + dt * dt * np.abs(lam)))
    return float(np.max(rho))


def backward_euler_radius(lam, dt: float) -> float:
    """max_i |1/th +- dt sqrt(lam_i)/|th||, th = 1 - lam_i dt^2."""
    if not dt > 0:
        raise DomainError("dt must be positive")
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    th = 1.0 - lam * dt * dt
    if np.any(np.abs(th) < 1e-14):
        raise DomainError("resonance: lambda * dt^2 = 1 makes the backward map singular")
    num = np.where(lam >= 0, 1.0 + dt * np.sqrt(np.abs(lam)), np.sqrt(1.0 + dt * dt * np.abs(lam)))
    return float(np.max(num / np.abs(th)))


def softening_map(u: np.ndarray, model: BondModel):
    """Per-node share of horizon bonds past the critical strain, and the
    bond-count weighted global share.  Only bonds to nodes inside D count."""
    _, soft, total = model.bond_scan(u)
    frac = np.divide(soft, total, out=np.zeros_like(soft), where=total > 0)
    nb = float(np.sum(total))
    return frac, (float(np.sum(soft)) / nb if nb else 0.0)


@dataclass
class StabilityReport:
    grid: Grid
    matrices: np.ndarray
    eigvals: np.ndarray
    rho_forward: np.ndarray
    rho_backward: np.ndarray
    softening: np.ndarray
    global_softening: float
    dt: float

    @property
    def not_negative_definite(self) -> np.ndarray:
        return np.any(self.eigvals > 0, axis=-1)

    def summary(self) -> dict:
        return dict(
            dt=self.dt,
            nodes=int(self.grid.num_nodes),
            nodes_not_negative_definite=int(np.sum(self.not_negative_definite)),
            max_eigenvalue=float(np.max(self.eigvals)),
            min_eigenvalue=float(np.min(self.eigvals)),
            max_rho_forward=float(np.max(self.rho_forward)),
            max_rho_backward=float(np.max(self.rho_backward)),
            min_rho_forward=float(np.min(self.rho_forward)),
            global_softening_fraction=self.global_softening,
        )

    def write_csv(self, path) -> None:
        g = self.grid
        idx = g.lattice_index().reshape(-1, g.d)
        x = g.coords().reshape(-1, g.d)
        lam = self.eigvals.reshape(-1, g.d)
        cols = ([f"i{a}" for a in range(g.d)] + [f"x{a}" for a in range(g.d)]
                + [f"lambda{a + 1}" for a in range(g.d)]
                + ["rho_forward", "rho_backward", "softening_fraction"])
        rf, rb, sf = (a.reshape(-1) for a in (self.rho_forward, self.rho_backward, self.softening))
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for r in range(g.num_nodes):
                vals = [*x[r], *lam[r], rf[r], rb[r], sf[r]]
                w.writerow([*map(int, idx[r]), *(f"{v:.17g}" for v in vals)])

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)


def stability_report(u: np.ndarray, model: BondModel, dt: float) -> StabilityReport:
    A = model.stability_matrices(u)
    lam = eigenvalues(A)
    flat = lam.reshape(-1, model.grid.d)
    rf = np.array([forward_euler_radius(row, dt) for row in flat]).reshape(model.grid.shape)
    rb = np.array([backward_euler_radius(row, dt) for row in flat]).reshape(model.grid.shape)
    frac, glob = softening_map(u, model)
    return StabilityReport(model.grid, A, lam, rf, rb, frac, glob, dt)
