"""Single-phase CLuP (contraction engine) at alpha=0.6 against the bundled reference rows.

    python scripts/standard_clup_sweep.py --n 2000 --trials 200 --snr 13 15
"""

import argparse

from clup.harness import ExperimentConfig, run_sweep, write_report
from clup.rephasing import load_bundled_dataset, query


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--snr", type=float, nargs="+", default=[12.0, 13.0, 14.0, 15.0])
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--report", default=None, help="optional JSON report path")
    args = ap.parse_args()

    cfg = ExperimentConfig(alpha=0.6, n=args.n, snr_grid_db=args.snr, algorithms=["clup_r0"],
                           trials=args.trials, base_seed=args.seed)
    res = run_sweep(cfg, threads=args.threads)
    recs = load_bundled_dataset()
    print(f"{'snr':>5} {'c2':>8} {'ref':>8} {'c1':>8} {'ref':>8} {'p_err':>10} {'ref':>10} stuck")
    for s in res.summaries:
        ref = {r.kind: r for r in query(recs, table_id="1", snr_db=s.snr_db)}
        th, sim = ref.get("theory"), ref.get("simulated")
        print(f"{s.snr_db:5g} {s.c2_mean:8.4f} {th.c2:8.4f} {s.c1_mean:8.4f} {th.c1:8.4f} "
              f"{s.p_err_mean:10.3e} {sim.p_err:10.3e} {s.non_convergent_count}")
    if args.report:
        write_report(res, args.report)


if __name__ == "__main__":
    main()
