"""Multi-phase CLuP (rephasing) and the bundled parameter tables.

A schedule is a list of phases with increasing radius; each phase starts from
the previous phase's final iterate. The bundled tables are data, shipped with
per-row table ids, and are never recomputed here.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from clup.contraction import PhaseConfig, PrecomputedOperators, contraction_run, precompute
from clup.errors import ConfigurationError, DatasetError
from clup.exact_solver import ClupResult, ExactStepSettings, clup_run
from clup.model import OverlapStats, SystemInstance, bit_error_fraction, overlap_stats, round_to_corner

DATASET_NAME = "clup_reference_tables.json"
ROLES = ("lower", "trap", "target")
VARIANTS = ("standard_r0", "rephased_r1", "rephased_r3")
ENGINES = ("contraction", "exact")


@dataclass(frozen=True)
class StationaryRecord:
    table_id: str
    label: str
    kind: str
    role: str
    snr_db: float
    alpha: float
    c2: float | None = None
    c1: float | None = None
    nu: float | None = None
    gamma: float | None = None
    gamma1: float | None = None
    p_err: float | None = None
    r_norm: float | None = None
    n: int | None = None
    phase: int | None = None

    def __post_init__(self):
        if self.role not in ROLES:
            raise DatasetError(f"bad role {self.role!r} in table {self.table_id}")
        if self.p_err is not None and not 0 <= self.p_err <= 1:
            raise DatasetError(f"p_err out of range in table {self.table_id} {self.label}")
        if self.c1 is not None and not -1 <= self.c1 <= 1:
            raise DatasetError(f"c1 out of range in table {self.table_id} {self.label}")
        if self.c2 is not None and not 0 <= self.c2 <= 1 + 1e-6:
            raise DatasetError(f"c2 out of range in table {self.table_id} {self.label}")


def _canonical_bytes(records: list[dict]) -> bytes:
    return json.dumps(records, sort_keys=True, separators=(",", ":")).encode()


def default_dataset_path() -> Path:
    return Path(str(resources.files("clup") / "data" / DATASET_NAME))


def dataset_checksum(path: str | Path | None = None) -> str:
    path = Path(path) if path else default_dataset_path()
    try:
        doc = json.loads(path.read_text())
    except (OSError, ValueError) as exc:
        raise DatasetError(f"cannot read dataset {path}: {exc}") from exc
    return hashlib.sha256(_canonical_bytes(doc.get("records", []))).hexdigest()


def load_bundled_dataset(path: str | Path | None = None) -> list[StationaryRecord]:
    """Load the table rows, verifying row count and checksum against the manifest."""
    path = Path(path) if path else default_dataset_path()
    try:
        doc = json.loads(path.read_text())
        manifest = doc["manifest"]
        raw = doc["records"]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise DatasetError(f"corrupted or unreadable dataset {path}: {exc}") from exc
    if len(raw) != manifest.get("row_count"):
        raise DatasetError(f"{path}: {len(raw)} rows, manifest says {manifest.get('row_count')}")
    if hashlib.sha256(_canonical_bytes(raw)).hexdigest() != manifest.get("sha256"):
        raise DatasetError(f"{path}: checksum does not match manifest")
    try:
        return [StationaryRecord(**r) for r in raw]
    except TypeError as exc:
        raise DatasetError(f"{path}: malformed record: {exc}") from exc


def query(records, table_id=None, role=None, kind=None, label=None, snr_db=None):
    out = []
    for r in records:
        if table_id is not None and r.table_id != str(table_id):
            continue
        if role is not None and r.role != role:
            continue
        if kind is not None and r.kind != kind:
            continue
        if label is not None and r.label != label:
            continue
        if snr_db is not None and r.snr_db != snr_db:
            continue
        out.append(r)
    return out


@dataclass(frozen=True)
class Schedule:
    phases: tuple[PhaseConfig, ...]
    alpha: float
    snr_db: float
    source: str = "user"
    citations: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.phases) < 1:
            raise ConfigurationError("a schedule needs at least one phase")
        if self.source not in ("bundled", "user"):
            raise ConfigurationError(f"bad schedule source {self.source!r}")
        if self.source == "bundled" and len(self.citations) != len(self.phases):
            raise ConfigurationError("bundled schedules need one citation per phase")


# (snr_db, variant) -> list of (table_id, label) for the theory rows to use per phase
_SCHEDULE_ROWS = {
    (12, "standard_r0"): [("1", "12 dB")],
    (13, "standard_r0"): [("1", "13 dB")],
    (14, "standard_r0"): [("1", "14 dB")],
    (15, "standard_r0"): [("1", "15 dB")],
    (12, "rephased_r1"): [("1", "12 dB"), ("13", "phase 1")],
    (13, "rephased_r1"): [("5", "phase 0"), ("5", "phase 1")],
    (14, "rephased_r1"): [("6", "phase 0"), ("6", "phase 1")],
    (15, "rephased_r1"): [("7", "phase 0"), ("7", "phase 1")],
    (12, "rephased_r3"): [("13", "phase 0"), ("13", "phase 1"), ("13", "phase 2"), ("13", "phase 3")],
}
BUNDLED_ALPHA = 0.6


def supported_schedules() -> list[tuple[float, float, str]]:
    return sorted((BUNDLED_ALPHA, float(s), v) for s, v in _SCHEDULE_ROWS)


def bundled_schedule(alpha: float, snr_db: float, variant: str,
                     records: list[StationaryRecord] | None = None, **phase_overrides) -> Schedule:
    """Schedule built from the theory rows of the bundled tables.

    ``c2_hat`` of every phase is the tabulated target ``c2``. Extra keyword
    arguments (``i_max``, ``step_tol``, ``c_q2``) override every phase.
    """
    key = (int(round(snr_db)), variant)
    if variant not in VARIANTS or alpha != BUNDLED_ALPHA or key not in _SCHEDULE_ROWS \
            or float(snr_db) != key[0]:
        keys = ", ".join(f"(alpha={a}, snr_db={s:g}, {v})" for a, s, v in supported_schedules())
        raise ConfigurationError(
            f"no bundled schedule for alpha={alpha}, snr_db={snr_db}, variant={variant!r}; "
            f"supported: {keys}")
    records = records if records is not None else load_bundled_dataset()
    phases, cites = [], []
    for i, (tid, label) in enumerate(_SCHEDULE_ROWS[key]):
        rows = query(records, table_id=tid, label=label, kind="theory")
        if len(rows) != 1:
            raise DatasetError(f"expected one theory row for table {tid} {label!r}, got {len(rows)}")
        row = rows[0]
        kw = {"r_norm": row.r_norm, "gamma1_scaled": row.gamma1, "c2_hat": row.c2,
              "label": f"phase {i}"}
        kw.update({k: v for k, v in phase_overrides.items() if v is not None})
        phases.append(PhaseConfig(**kw))
        cites.append(f"table {tid}: {label}")
    return Schedule(phases=tuple(phases), alpha=float(alpha), snr_db=float(snr_db),
                    source="bundled", citations=tuple(cites))


@dataclass
class RephasedResult:
    per_phase: list[ClupResult]
    final_x: np.ndarray
    final_stats: OverlapStats
    p_err_observed: float
    phase_p_err: list[float] = field(default_factory=list)
    phase_starts: list[np.ndarray] = field(default_factory=list, repr=False)


def run_rephased(instance: SystemInstance, schedule: Schedule, x0, engine: str = "contraction",
                 abort_policy: str = "continue", ops: PrecomputedOperators | None = None,
                 exact_settings: ExactStepSettings | None = None) -> RephasedResult:
    """Run the phases of ``schedule`` back to back, warm-starting each one.

    The contraction engine uses every phase parameter; the exact engine uses
    only ``r_norm`` (and ``i_max``/``step_tol`` as iteration controls).
    """
    if engine not in ENGINES:
        raise ConfigurationError(f"unknown engine {engine!r}; expected one of {ENGINES}")
    if abort_policy not in ("abort", "continue"):
        raise ConfigurationError(f"unknown abort_policy {abort_policy!r}")
    if engine == "contraction" and ops is None:
        ops = precompute(instance)
    b = instance.bound
    x = np.asarray(x0, dtype=float)
    per_phase, phase_p_err, starts = [], [], []
    for cfg in schedule.phases:
        if engine == "contraction":
            x = np.clip(x, -b, b)
            starts.append(x.copy())
            res = contraction_run(instance, cfg, x, ops=ops)
        else:
            starts.append(x.copy())
            res = clup_run(instance, cfg.r_norm * math.sqrt(instance.n), x, max_iter=cfg.i_max,
                           step_tol=cfg.step_tol, settings=exact_settings)
        per_phase.append(res)
        phase_p_err.append(bit_error_fraction(round_to_corner(res.x_final), instance.x_sol))
        x = res.x_final
        if res.non_convergent and abort_policy == "abort":
            break
    final_x = per_phase[-1].x_final
    return RephasedResult(per_phase=per_phase, final_x=final_x,
                          final_stats=overlap_stats(per_phase[-1].x_step, instance.x_sol),
                          p_err_observed=phase_p_err[-1], phase_p_err=phase_p_err,
                          phase_starts=starts)
