"""Command-line entry point: constants, simulate, converge, stability, bound.

Exit codes: 0 success, 2 config error, 3 blow-up, 4 implicit
nonconvergence, 5 bound violation.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config
from .errors import ConfigError, PeridynError
from .force import BondModel
from .grid import read_field_csv, write_field_csv
from .integrate import SchemeConfig, energy_stability_report, run_simulation
from .potential import cbar as cbar_const, constants_report
from .stability import stability_report
from .study import (BodyForceOracle, ManufacturedProblem, apriori_bound, consistency_constants,
                    error_Ek, measured_vs_bound, refinement_study, worked_example)

log = logging.getLogger("peridyn_fd")

COMMANDS = ("constants", "simulate", "converge", "stability", "bound")


def _f17(x):
    if isinstance(x, float):
        return float(f"{x:.17g}") if math.isfinite(x) else str(x)
    if isinstance(x, dict):
        return {k: _f17(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_f17(v) for v in x]
    return x


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_f17(obj), indent=2, sort_keys=False) + "\n")


def _cbar(cfg: RunConfig) -> float:
    return cbar_const(cfg.potential, cfg.influence_spec, cfg.dim,
                      h_over_eps=cfg.h / cfg.eps if cfg.dim == 1 else None)


def _problem(cfg: RunConfig, seed: int) -> ManufacturedProblem:
    return ManufacturedProblem(cfg.dim, cfg.extents, cfg.gamma, cfg.profile, cfg.amp_omega,
                               ref_factor=cfg.ref_factor, seed=seed, base_spacing=cfg.h)


# -- commands ----------------------------------------------------------------

def cmd_constants(cfg: RunConfig, out: Path, args) -> int:
    rep = constants_report(cfg.potential, cfg.influence_spec, cfg.dim, cfg.gamma,
                           h_over_eps=cfg.h / cfg.eps if cfg.dim == 1 else None)
    if rep.mu is None:
        log.warning("LEFM constants are only defined for d = 2, 3; omitted for d=%d", cfg.dim)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "constants.json", rep.to_dict())
    print(json.dumps(_f17(rep.to_dict()), indent=2))
    return 0


def cmd_simulate(cfg: RunConfig, out: Path, args) -> int:
    grid = cfg.grid()
    model = BondModel(grid, cfg.potential, cfg.influence_spec, workers=args.threads)
    scheme = SchemeConfig(cfg.dt, cfg.T, cfg.theta, cfg.tol_fp, cfg.max_fp_iters)
    cb = _cbar(cfg)
    scheme.num_steps
    if scheme.theta > 0:
        scheme.check_contraction(cb, cfg.eps)
    problem = _problem(cfg, args.seed)
    body = None if cfg.profile == "zero" else BodyForceOracle(problem, model)
    x = grid.coords()
    sup = [0.0]

    def observe(s):
        sup[0] = max(sup[0], error_Ek(s.u, s.v, problem.exact(s.t, x, 0), problem.exact(s.t, x, 1), grid))

    traj = run_simulation(problem.exact(0.0, x, 0), problem.exact(0.0, x, 1), model, scheme, body,
                          snapshot_every=cfg.snapshot_every, observer=observe, cbar=cb)
    rep = energy_stability_report(traj, model)
    out.mkdir(parents=True, exist_ok=True)
    traj.write_csv(out / "trajectory.csv")
    d = grid.d
    state = np.concatenate([traj.final.u, traj.final.v], axis=-1)
    write_field_csv(out / "final_state.csv", grid, state,
                    [f"u{a}" for a in range(d)] + [f"v{a}" for a in range(d)])
    summary = dict(steps=scheme.num_steps, sup_Ek=sup[0], energy_stability=rep.to_dict(),
                   mean_fp_iters=float(np.mean(traj.fp_iters)) if traj.fp_iters else 0.0)
    _write_json(out / "summary.json", summary)
    print(f"steps={scheme.num_steps} sup_Ek={sup[0]:.17g} max_energy={rep.max_energy:.17g} "
          f"energy_bound={rep.bound:.17g}")
    if not rep.holds:
        log.error("energy exceeds the stability bound")
        return 5
    return 0


def cmd_converge(cfg: RunConfig, out: Path, args) -> int:
    study = cfg.study(seed=args.seed, workers=args.threads)
    table = refinement_study(study, log=log.info)
    out.mkdir(parents=True, exist_ok=True)
    table.write_csv(out / "rates.csv")
    table.write_json(out / "slopes.json")
    print(f"axis={table.axis} slope={table.slope} residual={table.residual}")
    for r in table.rows:
        if r.status.startswith("blow-up"):
            return 3
        if r.status.startswith("nonconvergence"):
            return 4
    check = measured_vs_bound(table)
    print("slack per level: " + ", ".join(f"{s:.3g}" if isinstance(s, float) else str(s) for s in check.slack))
    return 0


def cmd_stability(cfg: RunConfig, out: Path, args) -> int:
    grid = cfg.grid()
    snap = Path(args.snapshot) if args.snapshot else out / "final_state.csv"
    if not snap.is_file():
        raise ConfigError(f"snapshot not found: {snap}")
    u = read_field_csv(snap, grid, ncomp=grid.d)
    model = BondModel(grid, cfg.potential, cfg.influence_spec, workers=args.threads)
    rep = stability_report(u, model, cfg.dt)
    out.mkdir(parents=True, exist_ok=True)
    rep.write_csv(out / "stability.csv")
    s = rep.summary()
    _write_json(out / "stability_summary.json", s)
    if s["nodes_not_negative_definite"]:
        log.warning("%d nodes have a stability matrix that is not negative definite",
                    s["nodes_not_negative_definite"])
    print(json.dumps(_f17(s), indent=2))
    return 0


def cmd_bound(cfg: RunConfig, out: Path, args) -> int:
    grid = cfg.grid()
    cb = _cbar(cfg)
    cc = consistency_constants(_problem(cfg, args.seed), grid, cb, cfg.T, seed=args.seed)
    rep = apriori_bound(cfg.T, cfg.dt, cfg.h, cfg.gamma, cfg.eps, cb, cc.Ct, cc.Cs, cfg.theta, cc.Ct_bar)
    ex = worked_example()
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "bound.json", dict(
        config=dict(Cbar=cb, Ct=cc.Ct, Cs=cc.Cs, Ct_bar=cc.Ct_bar, bound=rep.bound, exponent=rep.exponent),
        worked_example=ex.to_dict()))
    print(f"a-priori bound = {rep.bound:.17g} (Cbar={cb:.17g}, Ct={cc.Ct:.17g}, Cs={cc.Cs:.17g})")
    print("worked example (Cbar = 1.19, eps = 0.1, T = 1.5/718):")
    for line in ex.lines():
        print("  " + line)
    return 0


HANDLERS = dict(constants=cmd_constants, simulate=cmd_simulate, converge=cmd_converge,
                stability=cmd_stability, bound=cmd_bound)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="peridyn-fd", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="config file or bundled fixture name")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--threads", type=int, default=1, help="worker threads for force evaluation")
    p.add_argument("--seed", type=int, default=0, help="seed for sampled estimators and rough profiles")
    p.add_argument("--snapshot", default=None, help="field snapshot for 'stability' (default OUT/final_state.csv)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg = load_config(args.config)
        return HANDLERS[args.command](cfg, Path(args.out), args)
    except PeridynError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
