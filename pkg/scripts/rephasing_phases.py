"""Per-phase overlaps and error rates of the bundled multi-phase schedules.

    python scripts/rephasing_phases.py --variant rephased_r1 --snr 13 --n 2000 --trials 100
    python scripts/rephasing_phases.py --variant rephased_r3 --snr 12 --n 4000 --trials 20
"""

import argparse

import numpy as np

from clup.harness import ExperimentConfig, run_sweep
from clup.rephasing import bundled_schedule, load_bundled_dataset, query


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--variant", choices=["rephased_r1", "rephased_r3"], default="rephased_r1")
    ap.add_argument("--snr", type=float, default=13.0)
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--seed", type=int, default=2)
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args()

    sched = bundled_schedule(0.6, args.snr, args.variant)
    cfg = ExperimentConfig(alpha=0.6, n=args.n, snr_grid_db=[args.snr], algorithms=[args.variant],
                           trials=args.trials, base_seed=args.seed)
    res = run_sweep(cfg, threads=args.threads)
    recs = load_bundled_dataset()
    print(f"{'phase':>5} {'r_norm':>7} {'c2':>8} {'c1':>8} {'mean p_err':>11} {'median':>10} "
          f"{'ref p_err':>10}")
    for k, (cfg_k, cite) in enumerate(zip(sched.phases, sched.citations)):
        col = lambda key: np.array([t["phases"][k][key] for t in res.trials])
        tid, label = cite.removeprefix("table ").split(": ")
        sim = query(recs, table_id=tid, label=label, kind="simulated")
        ref = f"{sim[0].p_err:10.3e}" if sim else f"{'-':>10}"
        print(f"{k:5d} {cfg_k.r_norm:7.4f} {col('c2').mean():8.5f} {col('c1').mean():8.5f} "
              f"{col('p_err').mean():11.3e} {np.median(col('p_err')):10.3e} {ref}")


if __name__ == "__main__":
    main()
