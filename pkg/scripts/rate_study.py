"""Run the bundled refinement studies and print one rate table per fixture.

Usage: python3 scripts/rate_study.py [fixture ...] [--out DIR]
Without arguments the 1D and temporal fixtures run (about 15 s); add the
2D fixtures by name, they take about a minute each.
"""
import argparse
import logging
from pathlib import Path

from peridyn_fd.config import load_config
from peridyn_fd.study import measured_vs_bound, refinement_study

QUICK = ["space-gamma1", "space-gamma-half", "time-fe", "time-be", "time-cn"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("fixtures", nargs="*", default=QUICK)
    ap.add_argument("--out", default=None, help="write rates_<fixture>.csv here")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    for name in args.fixtures:
        cfg = load_config(name)
        table = refinement_study(cfg.study(workers=args.threads), log=logging.info)
        check = measured_vs_bound(table)
        print(f"\n{name}: axis={table.axis} slope={table.slope:.4f}")
        print(f"{'h':>10} {'dt':>10} {'sup_Ek':>12} {'bound':>10} {'wall_ms':>9}")
        for r in table.rows:
            print(f"{r.h:10.5g} {r.dt:10.5g} {r.sup_Ek:12.5g} {r.bound:10.3g} {r.wall_ms:9.0f}")
        print("slack:", ", ".join(f"{s:.3g}" if isinstance(s, float) else str(s) for s in check.slack))
        if args.out:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            table.write_csv(out / f"rates_{name}.csv")


if __name__ == "__main__":
    main()
