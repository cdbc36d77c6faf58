"""Box (polytope) relaxation decoder and the radius scaling built on it."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from clup.boxqp import BoxQP
from clup.errors import ConfigurationError
from clup.model import SystemInstance, round_to_corner


@dataclass
class RelaxationResult:
    x_relaxed: np.ndarray
    residual: float
    r_plt_norm: float
    iterations: int
    converged: bool
    kkt: float = float("nan")

    def decode(self) -> np.ndarray:
        return round_to_corner(self.x_relaxed)


def polytope_relax(instance: SystemInstance, tol: float = 1e-9, max_iter: int = 20000,
                   lam_max: float | None = None) -> RelaxationResult:
    """Minimize ``||y - A x||`` over the box.

    ``tol`` bounds the projected-gradient (KKT) violation of the squared
    objective. When ``max_iter`` runs out the best iterate is returned with
    ``converged=False``.
    """
    if not tol > 0:
        raise ConfigurationError(f"tol must be > 0, got {tol}")
    if max_iter < 1:
        raise ConfigurationError(f"max_iter must be >= 1, got {max_iter}")
    qp = BoxQP(instance.A, instance.y, instance.bound, lam_max=lam_max)
    res = qp.solve(1.0, None, tol=tol, max_iter=max_iter)
    x = np.clip(res.x, -instance.bound, instance.bound)
    resid = float(np.linalg.norm(instance.y - instance.A @ x))
    return RelaxationResult(x_relaxed=x, residual=resid, r_plt_norm=resid / math.sqrt(instance.n),
                            iterations=res.iterations, converged=res.converged, kkt=res.kkt)


def radius_from_scaling(r_sc: float, r_plt_norm: float, n: int) -> tuple[float, float]:
    """Return ``(r, r_norm)`` with ``r_norm = r_sc * r_plt_norm`` and ``r = r_norm * sqrt(n)``."""
    if not r_sc > 0:
        raise ConfigurationError(f"r_sc must be > 0, got {r_sc}")
    if not r_plt_norm >= 0:
        raise ConfigurationError(f"r_plt_norm must be >= 0, got {r_plt_norm}")
    if n < 1:
        raise ConfigurationError(f"n must be >= 1, got {n}")
    r_norm = r_sc * r_plt_norm
    return r_norm * math.sqrt(n), r_norm
