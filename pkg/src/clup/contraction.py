"""Large-scale CLuP: the clamped linear contraction iteration.

Units. With ``r = r_norm * sqrt(n)``, ``gamma1 = gamma1_scaled / sqrt(n)`` and
``c_q2 = c_q2_norm * sqrt(n)``, dividing the raw update

    x_raw = (c_q2 x + gamma1 sqrt(c2_hat) (A^T y - A^T A x)) / (c_q2 - r)

through by ``sqrt(n)`` gives the form used here,

    x_raw = (c_q2_norm x + gamma1_scaled sqrt(c2_hat) (h - G x) / n) / (c_q2_norm - r_norm),

with ``h = A^T y`` and ``G = A^T A``. Each component is then clamped to
``[-1/sqrt(n), 1/sqrt(n)]``. Fixed points satisfy
``r_norm * x = gamma1_scaled * sqrt(c2_hat) * (G x - h) / n`` on free
coordinates, the stationarity condition of the exact step with multiplier
``gamma1``; ``c_q2`` only sets the step length.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field, replace

import numpy as np

from clup.boxqp import top_eigenvalue
from clup.errors import ConfigurationError
from clup.exact_solver import ClupResult
from clup.model import SystemInstance, overlap_stats

DEFAULT_GRAM_THRESHOLD = 4096
# auto c_q2 sits this factor above the stability edge of the top eigenmode
CQ2_SAFETY = 1.05


@dataclass(frozen=True)
class PhaseConfig:
    r_norm: float
    gamma1_scaled: float
    c2_hat: float
    c_q2: float | None = None
    i_max: int = 5000
    step_tol: float = 1e-5
    label: str = ""

    def __post_init__(self):
        if not self.r_norm > 0:
            raise ConfigurationError(f"r_norm must be > 0, got {self.r_norm}")
        if self.i_max < 1:
            raise ConfigurationError(f"i_max must be >= 1, got {self.i_max}")
        if not 0 < self.c2_hat <= 1:
            raise ConfigurationError(f"c2_hat must lie in (0, 1], got {self.c2_hat}")
        if self.c_q2 is not None and self.c_q2 - self.r_norm == 0:
            raise ConfigurationError("c_q2 - r_norm must be nonzero")
        if not self.step_tol >= 0:
            raise ConfigurationError("step_tol must be >= 0")

    def to_dict(self) -> dict:
        return {"r_norm": self.r_norm, "gamma1_scaled": self.gamma1_scaled, "c2_hat": self.c2_hat,
                "c_q2": self.c_q2, "i_max": self.i_max, "step_tol": self.step_tol,
                "label": self.label}

    @classmethod
    def from_dict(cls, d: dict) -> "PhaseConfig":
        known = {"r_norm", "gamma1_scaled", "c2_hat", "c_q2", "i_max", "step_tol", "label"}
        extra = set(d) - known
        if extra:
            raise ConfigurationError(f"unknown phase field(s): {sorted(extra)}")
        for req in ("r_norm", "gamma1_scaled", "c2_hat"):
            if req not in d:
                raise ConfigurationError(f"phase field {req!r} is missing")
        return cls(**d)


@dataclass(frozen=True, eq=False)
class PrecomputedOperators:
    """Operators shared by every step on one instance.

    ``products`` counts matrix-vector products and is diagnostic only.
    """

    gram_mode: str
    h: np.ndarray
    A: np.ndarray
    y_sq: float
    lam_max: float
    G: np.ndarray | None = None
    products: Counter = field(default_factory=Counter, compare=False)

    @property
    def n(self) -> int:
        return self.A.shape[1]

    def gram(self, x):
        """``G @ x`` using one (full_gram) or two (two_mults) products."""
        if self.gram_mode == "full_gram":
            self.products["matvec"] += 1
            return self.G @ x
        self.products["matvec"] += 2
        return self.A.T @ (self.A @ x)


def precompute(instance: SystemInstance, gram_threshold: int = DEFAULT_GRAM_THRESHOLD,
               lam_max: float | None = None) -> PrecomputedOperators:
    A, y = instance.A, instance.y
    h = A.T @ y
    if lam_max is None:
        lam_max = top_eigenvalue(A)
    if instance.n <= gram_threshold:
        G = A.T @ A
        G = 0.5 * (G + G.T)
        G.setflags(write=False)
        return PrecomputedOperators("full_gram", h, A, float(y @ y), lam_max, G)
    return PrecomputedOperators("two_mults", h, A, float(y @ y), lam_max)


def resolve_c_q2(cfg: PhaseConfig, ops: PrecomputedOperators) -> float:
    """Explicit ``c_q2`` if configured, otherwise a stable default.

    The unclamped map has eigenvalues ``(c - g l) / (c - r)`` over the
    eigenvalues ``l`` of ``G/n`` (``g = gamma1_scaled * sqrt(c2_hat)``); staying
    above -1 needs ``c > (g l_max + r) / 2``. The default takes
    ``r + CQ2_SAFETY * g * l_max / 2``, which is as large a step as that allows.
    """
    if cfg.c_q2 is not None:
        return float(cfg.c_q2)
    g = cfg.gamma1_scaled * math.sqrt(cfg.c2_hat)
    return cfg.r_norm + 0.5 * CQ2_SAFETY * abs(g) * ops.lam_max / ops.n


def _step(x, gx, ops, cfg, cq, n):
    g = cfg.gamma1_scaled * math.sqrt(cfg.c2_hat)
    x_raw = (cq * x + (g / n) * (ops.h - gx)) / (cq - cfg.r_norm)
    if not np.all(np.isfinite(x_raw)):
        raise ConfigurationError(
            f"non-finite contraction step for r_norm={cfg.r_norm}, gamma1_scaled="
            f"{cfg.gamma1_scaled}, c2_hat={cfg.c2_hat}, c_q2={cq}")
    b = 1.0 / math.sqrt(n)
    return np.clip(x_raw, -b, b)


def contraction_step(x_prev, ops: PrecomputedOperators, cfg: PhaseConfig, n: int) -> np.ndarray:
    x_prev = np.asarray(x_prev, dtype=float)
    if x_prev.shape != (n,):
        raise ValueError(f"x_prev must have length {n}, got shape {x_prev.shape}")
    return _step(x_prev, ops.gram(x_prev), ops, cfg, resolve_c_q2(cfg, ops), n)


def contraction_run(instance: SystemInstance, cfg: PhaseConfig, x0,
                    ops: PrecomputedOperators | None = None,
                    stall_window: int = 50) -> ClupResult:
    """Iterate the contraction from ``x0`` (clamped into the box on entry).

    Stops at ``i_max`` or when ``||x_{i+1} - x_i|| <= step_tol``. A run that
    sits on a box corner with residual above ``3 r`` for ``stall_window``
    consecutive iterations (or stops moving there) is flagged ``non_convergent``.
    """
    if ops is None:
        ops = precompute(instance)
    n = instance.n
    b = instance.bound
    cq = resolve_c_q2(cfg, ops)
    r_raw = cfg.r_norm * math.sqrt(n)
    x = np.clip(np.asarray(x0, dtype=float), -b, b)
    if x.shape != (n,):
        raise ValueError(f"x0 must have length {n}")
    trajectory = []
    converged = False
    stalled = 0
    non_convergent = False
    residual = math.nan
    for _ in range(cfg.i_max):
        gx = ops.gram(x)
        # ||y - A x||^2 from quantities already at hand: no extra product
        residual = math.sqrt(max(ops.y_sq - 2.0 * (ops.h @ x) + x @ gx, 0.0))
        if residual > 3.0 * r_raw and np.all(np.abs(x) == b):
            stalled += 1
            if stalled >= stall_window:
                non_convergent = True
                break
        else:
            stalled = 0
        x_new = _step(x, gx, ops, cfg, cq, n)
        trajectory.append(overlap_stats(x_new, instance.x_sol))
        moved = float(np.linalg.norm(x_new - x))
        x = x_new
        if moved <= cfg.step_tol:
            # a corner that no longer moves would sit there for good
            if stalled:
                non_convergent = True
            else:
                converged = True
            break
    residual = float(np.linalg.norm(instance.y - instance.A @ x))
    return ClupResult(x_final=x, trajectory=trajectory, residual_final=residual,
                      iterations=len(trajectory), converged=converged, x_step=x,
                      non_convergent=non_convergent,
                      info={"engine": "contraction", "c_q2": cq, "label": cfg.label})


def fixed_point_residual(instance: SystemInstance, x, cfg: PhaseConfig,
                         ops: PrecomputedOperators | None = None) -> float:
    """``||x - contraction_step(x)||``."""
    if ops is None:
        ops = precompute(instance)
    x = np.asarray(x, dtype=float)
    return float(np.linalg.norm(x - contraction_step(x, ops, cfg, instance.n)))


def with_overrides(cfg: PhaseConfig, **kw) -> PhaseConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
