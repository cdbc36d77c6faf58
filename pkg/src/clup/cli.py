"""Command-line entry point (``clup`` or ``python -m clup``).

Exit codes: 0 success, 1 configuration or usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from clup.contraction import PhaseConfig, contraction_run, precompute
from clup.errors import ConfigurationError, DatasetError, DomainError
from clup.exact_solver import clup_run, random_corner_init
from clup.harness import ALGORITHMS, ExperimentConfig, read_config, run_sweep, write_report
from clup.model import (SystemDims, bit_error_fraction, generate_instance, overlap_stats,
                        round_to_corner, snr_db_to_sigma)
from clup.rdt_theory import find_glitch_snr, find_stationary_points, ml_curve
from clup.rephasing import Schedule, bundled_schedule, load_bundled_dataset, query, run_rephased

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _emit(args, rows: list[dict]):
    out = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        if args.format == "json":
            out.write(json.dumps(rows, indent=1) + "\n")
        elif rows:
            w = csv.DictWriter(out, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
    finally:
        if out is not sys.stdout:
            out.close()


def _snr_range(lo, hi, step):
    if step <= 0 or hi < lo:
        raise ConfigurationError("need --step > 0 and --snr-hi >= --snr-lo")
    k = int(math.floor((hi - lo) / step + 1e-9))
    return [round(lo + i * step, 10) for i in range(k + 1)]


def cmd_theory_curve(args):
    mode = "global" if args.branch == "global" else "local_high_branch"
    rows = [{"snr_db": p.snr_db, "c1": p.c1, "xi": p.xi, "branch": p.branch}
            for p in ml_curve(args.alpha, _snr_range(args.snr_lo, args.snr_hi, args.step), mode)]
    _emit(args, rows)


def cmd_glitch(args):
    g = find_glitch_snr(args.alpha, args.lo, args.hi, args.tol)
    print(f"{g:.4f}")


def cmd_stationary(args):
    pts = find_stationary_points(args.alpha, snr_db_to_sigma(args.snr))
    _emit(args, [{"c1": p.c1, "xi": p.xi, "d1": p.d1, "d2": p.d2, "kind": p.kind} for p in pts])


def cmd_run(args):
    dims = SystemDims.from_alpha(args.n, args.alpha)
    inst = generate_instance(dims, snr_db_to_sigma(args.snr), args.seed)
    x0 = random_corner_init(args.n, args.seed + 1)
    alg = args.algorithm
    if args.r_norm is not None:
        phases = (PhaseConfig(r_norm=args.r_norm, gamma1_scaled=args.gamma1 or 0.0,
                              c2_hat=args.c2_hat or 1.0, i_max=args.i_max or 5000),)
        if alg in ("clup_r0", "rephased_r1", "rephased_r3") and (args.gamma1 is None or args.c2_hat is None):
            raise ConfigurationError("--r-norm with a contraction algorithm also needs --gamma1 and --c2-hat")
        sched = Schedule(phases=phases, alpha=args.alpha, snr_db=args.snr, source="user")
    elif alg != "polytope":
        variant = {"clup_exact": "standard_r0", "clup_r0": "standard_r0"}.get(alg, alg)
        sched = bundled_schedule(args.alpha, args.snr, variant,
                                 records=load_bundled_dataset(args.tables_path),
                                 **({"i_max": args.i_max} if args.i_max else {}))
    rows = []
    if alg == "polytope":
        from clup.baselines import polytope_relax
        rel = polytope_relax(inst)
        st = overlap_stats(rel.x_relaxed, inst.x_sol)
        rows.append({"phase": 0, "iteration": rel.iterations, "c1": st.c1, "c2": st.c2,
                     "p_err": bit_error_fraction(rel.decode(), inst.x_sol)})
    elif alg == "clup_exact":
        cfg = sched.phases[0]
        res = clup_run(inst, cfg.r_norm * math.sqrt(args.n), x0, max_iter=cfg.i_max,
                       step_tol=cfg.step_tol)
        for i, st in enumerate(res.trajectory, 1):
            rows.append({"phase": 0, "iteration": i, "c1": st.c1, "c2": st.c2, "p_err": ""})
        rows[-1]["p_err"] = bit_error_fraction(round_to_corner(res.x_final), inst.x_sol)
    else:
        if alg == "clup_r0":
            sched = Schedule(phases=sched.phases[:1], alpha=sched.alpha, snr_db=sched.snr_db)
        rr = run_rephased(inst, sched, x0, ops=precompute(inst))
        for k, (res, pe) in enumerate(zip(rr.per_phase, rr.phase_p_err)):
            stride = max(1, len(res.trajectory) // args.max_rows)
            for i, st in enumerate(res.trajectory, 1):
                if i % stride == 0 or i == len(res.trajectory):
                    rows.append({"phase": k, "iteration": i, "c1": st.c1, "c2": st.c2,
                                 "p_err": pe if i == len(res.trajectory) else ""})
    _emit(args, rows)


def cmd_sweep(args):
    cfg = read_config(args.config)
    if args.trials is not None:
        cfg.trials = args.trials
    if args.seed is not None:
        cfg.base_seed = args.seed
    ExperimentConfig.from_dict(cfg.to_dict())
    result = run_sweep(cfg, threads=args.threads, tables_path=args.tables_path)
    out = Path(args.output or cfg.output_path)
    json_path, csv_path = write_report(result, out, tables_path=args.tables_path)
    for s in result.summaries:
        print(f"{s.snr_db:g} dB {s.algorithm:12s} p_err_mean={s.p_err_mean:.4e} "
              f"median={s.p_err_median:.4e} c1={s.c1_mean:.4f} c2={s.c2_mean:.4f} "
              f"non_convergent={s.non_convergent_count}")
    print(f"wrote {json_path} and {csv_path}")


def cmd_tables(args):
    recs = load_bundled_dataset(args.tables_path)
    if args.table is not None:
        recs = query(recs, table_id=str(args.table))
        if not recs:
            raise ConfigurationError(f"no rows for table {args.table}")
    rows = [{k: getattr(r, k) for k in ("table_id", "label", "kind", "role", "snr_db", "alpha",
                                         "n", "phase", "c2", "c1", "nu", "gamma", "gamma1",
                                         "p_err", "r_norm")} for r in recs]
    _emit(args, rows)


def _global_flags(suppress: bool) -> _Parser:
    # subcommand copies must not reset flags already given before the subcommand
    def d(value):
        return argparse.SUPPRESS if suppress else value

    g = _Parser(add_help=False)
    g.add_argument("--seed", type=int, default=d(None), help="base seed (default 0)")
    g.add_argument("--threads", type=int, default=d(None),
                   help="worker threads (default: CLUP_THREADS or all cores)")
    g.add_argument("--output", "-o", default=d(None), help="output file (default stdout)")
    g.add_argument("--format", choices=("csv", "json"), default=d("csv"))
    g.add_argument("--tables-path", default=d(None), help="alternative stationary-point dataset")
    return g


def build_parser() -> argparse.ArgumentParser:
    top = _global_flags(suppress=False)
    common = _global_flags(suppress=True)

    p = _Parser(prog="clup", description=__doc__.splitlines()[0], parents=[top])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("theory-curve", parents=[common], help="ML theory curve over an SNR range")
    s.add_argument("--alpha", type=float, default=0.6)
    s.add_argument("--snr-lo", type=float, default=12.0)
    s.add_argument("--snr-hi", type=float, default=16.0)
    s.add_argument("--step", type=float, default=0.25)
    s.add_argument("--branch", choices=("global", "high"), default="global")
    s.set_defaults(func=cmd_theory_curve)

    s = sub.add_parser("glitch", parents=[common], help="SNR where the global minimizer switches branch")
    s.add_argument("--alpha", type=float, default=0.6)
    s.add_argument("--lo", type=float, default=13.0)
    s.add_argument("--hi", type=float, default=16.0)
    s.add_argument("--tol", type=float, default=0.01)
    s.set_defaults(func=cmd_glitch)

    s = sub.add_parser("stationary", parents=[common], help="stationary points of the ML objective")
    s.add_argument("--alpha", type=float, default=0.6)
    s.add_argument("--snr", type=float, required=True)
    s.set_defaults(func=cmd_stationary)

    s = sub.add_parser("run", parents=[common], help="one instance, one algorithm, print trajectory")
    s.add_argument("--algorithm", choices=ALGORITHMS, default="clup_r0")
    s.add_argument("--alpha", type=float, default=0.6)
    s.add_argument("--n", type=int, default=400)
    s.add_argument("--snr", type=float, default=13.0)
    s.add_argument("--r-norm", type=float, default=None)
    s.add_argument("--gamma1", type=float, default=None)
    s.add_argument("--c2-hat", type=float, default=None)
    s.add_argument("--i-max", type=int, default=None)
    s.add_argument("--max-rows", type=int, default=50, help="trajectory rows kept per phase")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", parents=[common], help="run a sweep from a JSON config")
    s.add_argument("config")
    s.add_argument("--trials", type=int, default=None, help="override the config's trial count")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("tables", parents=[common], help="dump or query the bundled tables")
    s.add_argument("--table", default=None, help="table id, e.g. 3")
    s.set_defaults(func=cmd_tables)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command != "sweep" and args.seed is None:
            args.seed = 0
        args.func(args)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    except (ConfigurationError, DomainError, DatasetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, RuntimeError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK
