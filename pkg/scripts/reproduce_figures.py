"""Write the analytic curves behind the speedup figures as CSV.

    python scripts/reproduce_figures.py --out results/

Produces fig2.csv .. fig5.csv plus a short speedup table on stdout.
"""

import argparse
import time
from pathlib import Path

from d2dcache.experiments import PRESETS, run_sweep, write_atomic


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="results", help="output directory")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    out = Path(args.out)
    for name, spec in PRESETS.items():
        start = time.perf_counter()
        res = run_sweep(spec, workers=args.workers)
        write_atomic(out / f"{name}.csv", res.to_csv())
        print(f"{name}: {len(res.points)} points in {time.perf_counter() - start:.2f}s")
        for (n_c, k) in spec.codes:
            curve = [(p.axis_value, b.speedup) for p, b in zip(res.points, res.analytic)
                     if p.code.k == k and p.n_c == n_c]
            lo, hi = curve[0], curve[-1]
            print(f"  ({n_c:>2},{k}) {spec.axis}={lo[0]:<6g} speedup {lo[1]:7.3f}   "
                  f"{spec.axis}={hi[0]:<6g} speedup {hi[1]:7.3f}")


if __name__ == "__main__":
    main()
