"""Monte Carlo BER sweeps: configuration, execution, aggregation and reports.

Every trial draws its instance and starting point from a seed derived from
``(base_seed, snr index, trial index)`` only, so results do not depend on the
thread count or on completion order.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from clup import __version__
from clup.baselines import polytope_relax
from clup.contraction import PhaseConfig, precompute
from clup.errors import ConfigurationError, InfeasibleRadiusError, InnerSolverError
from clup.exact_solver import clup_run, random_corner_init
from clup.model import (RNG_DESCRIPTION, SystemDims, bit_error_count, generate_instance,
                        overlap_stats, round_to_corner, snr_db_to_sigma)
from clup.rephasing import (Schedule, bundled_schedule, dataset_checksum, load_bundled_dataset,
                            run_rephased)

ALGORITHMS = ("polytope", "clup_exact", "clup_r0", "rephased_r1", "rephased_r3")
_VARIANT = {"clup_exact": "standard_r0", "clup_r0": "standard_r0",
            "rephased_r1": "rephased_r1", "rephased_r3": "rephased_r3"}
X0_MODES = ("random", "x_sol")
CSV_HEADER = ["snr_db", "algorithm", "trials", "bits", "bit_errors", "p_err_mean", "p_err_median",
              "c1_mean", "c2_mean", "non_convergent", "wall_time_s"]
PHASE_OVERRIDE_KEYS = ("i_max", "step_tol", "c_q2")


@dataclass
class ExperimentConfig:
    """One sweep.

    ``schedule_overrides`` replaces the bundled phase list for every CLuP
    algorithm (single-phase algorithms use its first entry). ``phase_overrides``
    patches ``i_max``/``step_tol``/``c_q2`` of bundled phases.
    """

    alpha: float
    n: int
    snr_grid_db: list[float]
    algorithms: list[str]
    trials: int
    base_seed: int = 0
    schedule_overrides: list[PhaseConfig] | None = None
    output_path: str = "report.json"
    x0_mode: str = "random"
    phase_overrides: dict = field(default_factory=dict)
    polytope_tol: float = 1e-9
    record_timing: bool = False

    def __post_init__(self):
        self.snr_grid_db = [float(s) for s in self.snr_grid_db]
        self.algorithms = list(self.algorithms)
        if not self.snr_grid_db:
            raise ConfigurationError("snr_grid_db must be nonempty")
        if any(math.isnan(s) for s in self.snr_grid_db):
            raise ConfigurationError("snr_grid_db contains NaN")
        if not self.algorithms:
            raise ConfigurationError("algorithms must be nonempty")
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad:
            raise ConfigurationError(f"unknown algorithm(s) {bad}; expected a subset of {ALGORITHMS}")
        if len(set(self.algorithms)) != len(self.algorithms):
            raise ConfigurationError("algorithms contains duplicates")
        if isinstance(self.trials, bool) or not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigurationError(f"trials must be an integer >= 1, got {self.trials!r}")
        if isinstance(self.n, bool) or not isinstance(self.n, int) or self.n < 1:
            raise ConfigurationError(f"n must be an integer >= 1, got {self.n!r}")
        if not self.alpha > 0:
            raise ConfigurationError(f"alpha must be > 0, got {self.alpha}")
        if not isinstance(self.base_seed, int) or self.base_seed < 0:
            raise ConfigurationError(f"base_seed must be a nonnegative integer, got {self.base_seed!r}")
        if self.x0_mode not in X0_MODES:
            raise ConfigurationError(f"x0_mode must be one of {X0_MODES}, got {self.x0_mode!r}")
        extra = set(self.phase_overrides) - set(PHASE_OVERRIDE_KEYS)
        if extra:
            raise ConfigurationError(f"phase_overrides: unknown key(s) {sorted(extra)}")
        if self.schedule_overrides is not None:
            self.schedule_overrides = [p if isinstance(p, PhaseConfig) else PhaseConfig.from_dict(p)
                                       for p in self.schedule_overrides]
            if not self.schedule_overrides:
                raise ConfigurationError("schedule_overrides must be nonempty when given")
        SystemDims.from_alpha(self.n, self.alpha)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha, "n": self.n,
            "snr_grid_db": [_json_float(s) for s in self.snr_grid_db],
            "algorithms": list(self.algorithms), "trials": self.trials,
            "base_seed": self.base_seed,
            "schedule_overrides": None if self.schedule_overrides is None
            else [p.to_dict() for p in self.schedule_overrides],
            "output_path": self.output_path, "x0_mode": self.x0_mode,
            "phase_overrides": dict(self.phase_overrides),
            "polytope_tol": self.polytope_tol, "record_timing": self.record_timing,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigurationError("config must be a JSON object")
        names = set(cls.__dataclass_fields__)
        extra = sorted(set(d) - names)
        if extra:
            raise ConfigurationError(f"unknown config field(s): {extra}")
        for req in ("alpha", "n", "snr_grid_db", "algorithms", "trials"):
            if req not in d:
                raise ConfigurationError(f"config field {req!r} is missing")
        kw = dict(d)
        kw["snr_grid_db"] = [_parse_snr(s) for s in _as_list(d["snr_grid_db"], "snr_grid_db")]
        kw["algorithms"] = _as_list(d["algorithms"], "algorithms")
        if kw.get("schedule_overrides") is not None:
            kw["schedule_overrides"] = _as_list(kw["schedule_overrides"], "schedule_overrides")
        if kw.get("phase_overrides") is None:
            kw.pop("phase_overrides", None)
        return cls(**kw)


def _as_list(v, name):
    if not isinstance(v, list):
        raise ConfigurationError(f"config field {name!r} must be a list")
    return v


def _parse_snr(s):
    if isinstance(s, str) and s.lower() in ("inf", "infinity"):
        return math.inf
    if isinstance(s, bool) or not isinstance(s, (int, float)):
        raise ConfigurationError(f"snr_grid_db entries must be numbers or 'inf', got {s!r}")
    return float(s)


def _json_float(s):
    return "inf" if s == math.inf else s


@dataclass
class BerSummary:
    snr_db: float
    algorithm: str
    trials: int
    bits: int
    bit_errors: int
    p_err_mean: float
    p_err_median: float
    c1_mean: float
    c2_mean: float
    non_convergent_count: int
    wall_time_s: float = 0.0

    def csv_row(self) -> list:
        return [_json_float(self.snr_db), self.algorithm, self.trials, self.bits, self.bit_errors,
                repr(self.p_err_mean), repr(self.p_err_median), repr(self.c1_mean),
                repr(self.c2_mean), self.non_convergent_count, repr(self.wall_time_s)]


@dataclass
class SweepResult:
    config: ExperimentConfig
    summaries: list[BerSummary]
    trials: list[dict]


def trial_seeds(base_seed: int, snr_index: int, trial_index: int) -> tuple[int, int]:
    """(instance seed, start-point seed) for one trial."""
    ss = np.random.SeedSequence(base_seed, spawn_key=(snr_index, trial_index))
    a, b = ss.generate_state(2, np.uint64)
    return int(a), int(b)


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        env = os.environ.get("CLUP_THREADS")
        if env:
            try:
                threads = int(env)
            except ValueError as exc:
                raise ConfigurationError(f"CLUP_THREADS must be an integer, got {env!r}") from exc
        else:
            threads = len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") \
                else (os.cpu_count() or 1)
    if threads < 1:
        raise ConfigurationError(f"thread count must be >= 1, got {threads}")
    return threads


def _schedules(config: ExperimentConfig, records) -> dict:
    """Resolve every (snr, algorithm) schedule up front so bad combinations fail early."""
    out = {}
    for snr in config.snr_grid_db:
        for alg in config.algorithms:
            if alg == "polytope":
                continue
            if config.schedule_overrides is not None:
                phases = tuple(config.schedule_overrides)
                if alg in ("clup_exact", "clup_r0"):
                    phases = phases[:1]
                out[(snr, alg)] = Schedule(phases=phases, alpha=config.alpha, snr_db=snr,
                                           source="user")
            else:
                if not math.isfinite(snr):
                    raise ConfigurationError(
                        f"{alg} at snr_db={snr} needs schedule_overrides (no bundled entry)")
                out[(snr, alg)] = bundled_schedule(config.alpha, snr, _VARIANT[alg], records=records,
                                                   **config.phase_overrides)
    return out


def _run_algorithm(alg, inst, x0, schedule, ops, config):
    n = inst.n
    if alg == "polytope":
        rel = polytope_relax(inst, tol=config.polytope_tol, lam_max=ops.lam_max if ops else None)
        st = overlap_stats(rel.x_relaxed, inst.x_sol)
        errs = bit_error_count(round_to_corner(rel.x_relaxed), inst.x_sol)
        return {"bit_errors": errs, "c1": st.c1, "c2": st.c2, "iterations": rel.iterations,
                "non_convergent": not rel.converged, "phases": []}
    if alg == "clup_exact":
        cfg = schedule.phases[0]
        try:
            res = clup_run(inst, cfg.r_norm * math.sqrt(n), x0, max_iter=cfg.i_max,
                           step_tol=cfg.step_tol)
        except (InnerSolverError, InfeasibleRadiusError) as exc:
            x = getattr(exc, "best_x", None)
            x = x0 if x is None else x
            st = overlap_stats(x, inst.x_sol)
            return {"bit_errors": bit_error_count(round_to_corner(x), inst.x_sol), "c1": st.c1,
                    "c2": st.c2, "iterations": getattr(exc, "iteration", None) or 0,
                    "non_convergent": True, "phases": [], "error": str(exc)}
        errs = bit_error_count(round_to_corner(res.x_final), inst.x_sol)
        st = overlap_stats(res.x_step, inst.x_sol)
        return {"bit_errors": errs, "c1": st.c1, "c2": st.c2, "iterations": res.iterations,
                "non_convergent": not res.converged,
                "phases": [{"label": cfg.label, "c1": st.c1, "c2": st.c2, "p_err": errs / n,
                            "iterations": res.iterations, "converged": bool(res.converged)}]}
    rr = run_rephased(inst, schedule, x0, engine="contraction", ops=ops)
    phases = []
    for cfg, res, pe in zip(schedule.phases, rr.per_phase, rr.phase_p_err):
        st = overlap_stats(res.x_step, inst.x_sol)
        phases.append({"label": cfg.label, "c1": st.c1, "c2": st.c2, "p_err": pe,
                       "iterations": res.iterations, "converged": bool(res.converged)})
    errs = bit_error_count(round_to_corner(rr.final_x), inst.x_sol)
    return {"bit_errors": errs, "c1": rr.final_stats.c1, "c2": rr.final_stats.c2,
            "iterations": sum(p["iterations"] for p in phases),
            "non_convergent": any(r.non_convergent or not r.converged for r in rr.per_phase),
            "phases": phases}


def _run_trial(config, schedules, si, ti):
    snr = config.snr_grid_db[si]
    seed, x0_seed = trial_seeds(config.base_seed, si, ti)
    dims = SystemDims.from_alpha(config.n, config.alpha)
    inst = generate_instance(dims, snr_db_to_sigma(snr), seed)
    x0 = inst.x_sol.copy() if config.x0_mode == "x_sol" else random_corner_init(config.n, x0_seed)
    needs_ops = any(a in ("clup_r0", "rephased_r1", "rephased_r3") for a in config.algorithms)
    ops = precompute(inst) if needs_ops else None
    rows = []
    for alg in config.algorithms:
        t0 = time.perf_counter()
        rec = _run_algorithm(alg, inst, x0, schedules.get((snr, alg)), ops, config)
        wall = time.perf_counter() - t0 if config.record_timing else 0.0
        row = {"snr_db": _json_float(snr), "snr_index": si, "trial": ti, "algorithm": alg,
               "seed": seed, "x0_seed": x0_seed}
        row.update(rec)
        row["p_err"] = rec["bit_errors"] / config.n
        row["wall_time_s"] = wall
        rows.append(row)
    return rows


def summarize(config: ExperimentConfig, trials: list[dict]) -> list[BerSummary]:
    out = []
    for si, snr in enumerate(config.snr_grid_db):
        for alg in config.algorithms:
            rows = [t for t in trials if t["snr_index"] == si and t["algorithm"] == alg]
            rows.sort(key=lambda t: t["trial"])
            bits = len(rows) * config.n
            errs = sum(t["bit_errors"] for t in rows)
            out.append(BerSummary(
                snr_db=snr, algorithm=alg, trials=len(rows), bits=bits, bit_errors=errs,
                p_err_mean=errs / bits,
                p_err_median=float(np.median([t["p_err"] for t in rows])),
                c1_mean=float(np.mean([t["c1"] for t in rows])),
                c2_mean=float(np.mean([t["c2"] for t in rows])),
                non_convergent_count=sum(bool(t["non_convergent"]) for t in rows),
                wall_time_s=float(sum(t["wall_time_s"] for t in rows))))
    return out


def run_sweep(config: ExperimentConfig, threads: int | None = None,
              tables_path: str | Path | None = None) -> SweepResult:
    records = load_bundled_dataset(tables_path)
    schedules = _schedules(config, records)
    jobs = [(si, ti) for si in range(len(config.snr_grid_db)) for ti in range(config.trials)]
    nthreads = resolve_threads(threads)
    if nthreads == 1:
        chunks = [_run_trial(config, schedules, si, ti) for si, ti in jobs]
    else:
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            chunks = list(pool.map(lambda j: _run_trial(config, schedules, *j), jobs))
    order = {a: i for i, a in enumerate(config.algorithms)}
    trials = sorted((r for c in chunks for r in c),
                    key=lambda t: (t["snr_index"], order[t["algorithm"]], t["trial"]))
    return SweepResult(config=config, summaries=summarize(config, trials), trials=trials)


def run_ber_sweep(config: ExperimentConfig, threads: int | None = None) -> list[BerSummary]:
    return run_sweep(config, threads=threads).summaries


def summaries_csv(summaries: list[BerSummary]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for s in summaries:
        w.writerow(s.csv_row())
    return buf.getvalue()


def report_dict(result: SweepResult, tables_path: str | Path | None = None) -> dict:
    return {
        "artifact_version": __version__,
        "rng": RNG_DESCRIPTION,
        "dataset_sha256": dataset_checksum(tables_path),
        "config": result.config.to_dict(),
        "summaries": [
            {"snr_db": _json_float(s.snr_db), "algorithm": s.algorithm, "trials": s.trials,
             "bits": s.bits, "bit_errors": s.bit_errors, "p_err_mean": s.p_err_mean,
             "p_err_median": s.p_err_median, "c1_mean": s.c1_mean, "c2_mean": s.c2_mean,
             "non_convergent": s.non_convergent_count, "wall_time_s": s.wall_time_s}
            for s in result.summaries],
        "trials": result.trials,
    }


def write_report(result: SweepResult, path: str | Path,
                 tables_path: str | Path | None = None) -> tuple[Path, Path]:
    """Write the JSON report and a companion summary CSV next to it."""
    path = Path(path)
    csv_path = path.with_suffix(".csv")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(report_dict(result, tables_path), indent=1) + "\n")
        csv_path.write_text(summaries_csv(result.summaries))
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc.strerror}") from exc
    return path, csv_path


def write_config(config: ExperimentConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2) + "\n")


def read_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError as exc:
        raise ConfigurationError(f"config file not found: {path}") from exc
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    try:
        return ExperimentConfig.from_dict(data)
    except TypeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    except ConfigurationError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
