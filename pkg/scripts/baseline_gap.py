"""BER of the box relaxation and of single-phase CLuP, and the SNR gap at a target p_err.

    python scripts/baseline_gap.py --n 1000 --trials 100
"""

import argparse
import math

import numpy as np

from clup.harness import ExperimentConfig, run_sweep


def crossing(snrs, perr, level):
    logs = np.log(np.maximum(perr, 1e-12))
    for i in range(1, len(snrs)):
        if logs[i - 1] > math.log(level) >= logs[i]:
            t = (logs[i - 1] - math.log(level)) / (logs[i - 1] - logs[i])
            return snrs[i - 1] + t * (snrs[i] - snrs[i - 1])
    return None


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--level", type=float, default=1e-2)
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args()

    curves = {}
    for alg, grid, seed in (("clup_r0", [12.0, 13.0, 14.0, 15.0], 7001),
                            ("polytope", list(np.arange(14.0, 20.01, 0.5)), 7002)):
        cfg = ExperimentConfig(alpha=0.6, n=args.n, snr_grid_db=grid, algorithms=[alg],
                               trials=args.trials, base_seed=seed)
        res = run_sweep(cfg, threads=args.threads)
        curves[alg] = (grid, [s.p_err_mean for s in res.summaries])
        for s in res.summaries:
            print(f"{alg:9s} {s.snr_db:5.1f} dB  p_err {s.p_err_mean:.3e}")
    xc = crossing(*curves["clup_r0"], args.level)
    xp = crossing(*curves["polytope"], args.level)
    print(f"p_err={args.level:g}: CLuP at {xc} dB, relaxation at {xp} dB")
    if xc is not None and xp is not None:
        print(f"gap {xp - xc:.2f} dB")


if __name__ == "__main__":
    main()
