"""Time stepping for the discrete peridynamic equation of motion (unit density).

The forward scheme updates the velocity first and uses the new velocity in
the displacement update, which makes it the central-difference scheme in
``u``.  The theta family is solved by Picard iteration; ``theta = 0``
delegates to the forward scheme so both paths agree bit for bit.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import BlowUpError, ConfigError, NonconvergenceError
from .force import BondModel
from .grid import l2_norm
from .potential import derivative_bounds, influence_moment

BodyForce = Optional[Callable[[float], np.ndarray]]

TRAJECTORY_COLUMNS = ["step", "t", "energy", "kinetic", "potential", "max_strain", "softening_fraction"]


@dataclass(frozen=True)
class SchemeConfig:
    dt: float
    T: float
    theta: float = 0.0
    tol_fp: float = 1e-10
    max_fp_iters: int = 100
    rho: float = 1.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("time step must be positive")
        if not 0.0 <= self.theta <= 1.0:
            raise ConfigError("theta must lie in [0, 1]")
        if not self.T > 0:
            raise ConfigError("final time must be positive")
        if self.rho != 1.0:
            raise ConfigError("only unit density is supported")
        if self.max_fp_iters < 1 or not self.tol_fp > 0:
            raise ConfigError("fixed-point tolerance and iteration cap must be positive")

    @property
    def num_steps(self) -> int:
        q = self.T / self.dt
        n = round(q)
        if n < 1 or abs(q - n) > 1e-9 * max(1.0, q):
            raise ConfigError(f"T={self.T!r} is not an integer multiple of dt={self.dt!r}")
        return int(n)

    def contraction(self, cbar: float, eps: float) -> float:
        return self.dt * self.theta * cbar / eps**2

    def check_contraction(self, cbar: float, eps: float) -> None:
        """Refuse implicit runs violating dt < eps^2 / Cbar."""
        if self.theta > 0 and self.dt >= eps**2 / cbar:
            raise ConfigError(
                f"implicit scheme needs dt < eps^2/Cbar = {eps**2 / cbar:.6g}, got dt={self.dt:.6g}")


@dataclass
class State:
    u: np.ndarray
    v: np.ndarray
    t: float = 0.0
    k: int = 0
    fp_iters: int = 0


def _finite_or_raise(state: State) -> State:
    if not (np.all(np.isfinite(state.u)) and np.all(np.isfinite(state.v))):
        raise BlowUpError(state.k)
    return state


def _body(body: BodyForce, t: float, like: np.ndarray):
    return np.zeros_like(like) if body is None else body(t)


def forward_euler_step(state: State, model: BondModel, dt: float, body: BodyForce = None,
                       force: np.ndarray | None = None) -> State:
    """v <- v + dt (F(u) + b); u <- u + dt v_new."""
    F = model.force(state.u) if force is None else force
    v = state.v + dt * (F + _body(body, state.t, state.u))
    u = state.u + dt * v
    return _finite_or_raise(State(u, v, state.t + dt, state.k + 1))


def theta_step(state: State, model: BondModel, cfg: SchemeConfig, body: BodyForce = None,
               cbar: float | None = None, history: list | None = None) -> State:
    """One step of the theta family, solved by Picard iteration.

    The iterate starts from the forward-Euler predictor; each sweep updates
    ``v`` from ``F(u_it)`` and then ``u`` from the new ``v``.  Successive
    L2 changes are appended to ``history`` when given.
    """
    th, dt = cfg.theta, cfg.dt
    if th == 0.0:
        return forward_euler_step(state, model, dt, body)
    g = model.grid
    G0 = model.force(state.u) + _body(body, state.t, state.u)
    b1 = _body(body, state.t + dt, state.u)
    v_it = state.v + dt * G0
    u_it = state.u + dt * v_it
    u_expl = state.u + dt * (1 - th) * state.v
    v_expl = state.v + dt * (1 - th) * G0
    for it in range(1, cfg.max_fp_iters + 1):
        v_new = v_expl + dt * th * (model.force(u_it) + b1)
        u_new = u_expl + dt * th * v_new
        change = l2_norm(u_new - u_it, g) + l2_norm(v_new - v_it, g)
        scale = l2_norm(u_new, g) + l2_norm(v_new, g)
        u_it, v_it = u_new, v_new
        if history is not None:
            history.append(change)
        if not (np.all(np.isfinite(u_it)) and np.all(np.isfinite(v_it))):
            raise BlowUpError(state.k + 1, "non-finite fixed-point iterate")
        if change <= cfg.tol_fp * scale or change == 0.0:
            out = State(u_it, v_it, state.t + dt, state.k + 1, it)
            return _finite_or_raise(out)
    est = cfg.contraction(cbar, g.eps) if cbar is not None else math.nan
    raise NonconvergenceError(state.k + 1, cfg.max_fp_iters, est)


# -- orchestration -------------------------------------------------------------

@dataclass
class Trajectory:
    rows: list[dict] = field(default_factory=list)
    times: list[float] = field(default_factory=list)   # every step, for the b integral
    body_norms: list[float] = field(default_factory=list)
    fp_iters: list[int] = field(default_factory=list)
    final: State | None = None
    T: float = 0.0

    @property
    def energies(self) -> np.ndarray:
        return np.array([r["energy"] for r in self.rows])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRAJECTORY_COLUMNS)
            for r in self.rows:
                w.writerow([r["step"]] + [f"{r[c]:.17g}" for c in TRAJECTORY_COLUMNS[1:]])


def _record(model: BondModel, state: State) -> dict:
    kin = model.kinetic_energy(state.v)
    pot = model.potential_energy(state.u)
    smax, soft, total = model.bond_scan(state.u)
    nb = float(np.sum(total))
    return dict(step=state.k, t=state.t, energy=kin + pot, kinetic=kin, potential=pot,
                max_strain=smax, softening_fraction=float(np.sum(soft)) / nb if nb else 0.0)


def run_simulation(u0: np.ndarray, v0: np.ndarray, model: BondModel, cfg: SchemeConfig,
                   body: BodyForce = None, snapshot_every: int = 1,
                   observer: Callable[[State], None] | None = None,
                   cbar: float | None = None) -> Trajectory:
    """Step from t = 0 to T, recording energies every ``snapshot_every`` steps.

    ``observer`` sees every state including the initial one.
    """
    n = cfg.num_steps
    if snapshot_every < 1:
        raise ConfigError("snapshot_every must be >= 1")
    if cfg.theta > 0:
        if cbar is None:
            raise ConfigError("implicit runs need Cbar for the time-step restriction")
        cfg.check_contraction(cbar, model.grid.eps)
    g = model.grid
    state = State(np.array(u0, dtype=float), np.array(v0, dtype=float), 0.0, 0)
    traj = Trajectory(T=cfg.T)

    def note(s):
        traj.times.append(s.t)
        traj.body_norms.append(0.0 if body is None else l2_norm(body(s.t), g))
        if s.k % snapshot_every == 0 or s.k == n:
            traj.rows.append(_record(model, s))
        if observer is not None:
            observer(s)

    note(state)
    for k in range(n):
        state = theta_step(state, model, cfg, body, cbar)
        # keep t exact on the lattice t_k = k dt
        state.t = (k + 1) * cfg.dt
        traj.fp_iters.append(state.fp_iters)
        note(state)
    traj.final = state
    return traj


# -- energy stability -----------------------------------------------------------

@dataclass
class EnergyStabilityReport:
    C: float
    bound: float
    max_energy: float
    margin: float
    body_integral: float
    holds: bool

    def to_dict(self) -> dict:
        return dict(C=self.C, bound=self.bound, max_energy=self.max_energy,
                    margin=self.margin, body_integral=self.body_integral, holds=self.holds)


def stability_constant(model: BondModel) -> float:
    """C = 4 C1 Jbar_{1/2} sqrt(|D|)."""
    C1 = derivative_bounds(model.potential)[0]
    J = influence_moment(0.5, model.grid.d, model.influence)
    return 4.0 * C1 * J * math.sqrt(model.grid.volume)


def energy_stability_report(traj: Trajectory, model: BondModel, rtol: float = 1e-8) -> EnergyStabilityReport:
    """Compare max_t E(t) with (sqrt(E0) + T C / eps^1.5 + int ||b||)^2."""
    C = stability_constant(model)
    E = traj.energies
    bint = float(integrate.trapezoid(traj.body_norms, traj.times)) if len(traj.times) > 1 else 0.0
    bound = (math.sqrt(E[0]) + traj.T * C / model.grid.eps**1.5 + bint) ** 2
    emax = float(np.max(E))
    return EnergyStabilityReport(C, bound, emax, bound - emax, bint, emax <= bound * (1 + rtol))
