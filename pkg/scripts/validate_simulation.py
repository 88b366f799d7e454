"""Cross-check the analytic model against the simulator on the validation grid.

Codes (3,1), (6,2), (15,5); Delta in {0.25, 0.5, 1, 2, 4}; BS/D2D time ratios 10
and 100. The default budget is 1e5 measured requests x 10 replications per
point, which takes roughly ten minutes on one core.

    python scripts/validate_simulation.py --out results/ --workers 4
    python scripts/validate_simulation.py --requests 20000 --reps 5   # quick look
"""

import argparse
import sys
import time
from pathlib import Path

from d2dcache.experiments import SimBudget, get_preset, run_compare, write_atomic

CODES = [[3, 1], [6, 2], [15, 5]]
GRID = [0.25, 0.5, 1.0, 2.0, 4.0]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="results")
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--requests", type=int, default=100_000)
    ap.add_argument("--reps", type=int, default=10)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    budget = SimBudget(args.requests, args.reps)
    all_ok = True
    start = time.perf_counter()
    for preset in ("fig2", "fig3"):
        spec = get_preset(preset).with_overrides({"codes": CODES, "grid": GRID})
        res = run_compare(spec, args.seed, budget, args.workers)
        write_atomic(Path(args.out) / f"{preset}_validation.csv", res.to_csv())
        print(f"{preset} (t_bs/t_d = {spec.bs_to_d2d:g})")
        print(f"  {'k':>2} {'Delta':>5} {'analytic':>9} {'simulated':>19} {'err':>7}  worst bin")
        for pt, an, sim, rep in zip(res.points, res.analytic, res.simulated, res.reports):
            bins = [it for it in rep.items if it.name.startswith("outcome")]
            worst = max(bins, key=lambda it: it.n_se)
            flag = "" if rep.passed else "  FAIL"
            print(f"  {pt.code.k:>2} {pt.params.delta:>5g} {an.tbar_dw:9.5f} "
                  f"{sim.mean_delay:9.5f} {rep.get('mean_delay').rel_err:+7.2%}  "
                  f"{worst.name} {worst.n_se:.1f} SE{flag}")
        all_ok &= res.passed
    print(f"total {(time.perf_counter() - start) / 60:.1f} min; {'PASS' if all_ok else 'FAIL'}")
    return 0 if all_ok else 3


if __name__ == "__main__":
    sys.exit(main())
