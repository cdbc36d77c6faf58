"""Basic CLuP: exact box-and-ball constrained linear step plus renormalization.

Each iteration solves

    maximize  x_prev @ x   subject to  ||y - A x|| <= r,  |x_i| <= 1/sqrt(n)

and rescales the maximizer to unit norm. When the ball binds, the step is the
box minimizer of ``mu * ||y - A x||^2 - x_prev @ x`` for the multiplier ``mu``
at which the residual equals ``r``; ``mu`` is found by a safeguarded secant
(Illinois) search in ``log(mu)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from clup.boxqp import BoxQP
from clup.errors import ConfigurationError, InfeasibleRadiusError, InnerSolverError
from clup.model import OverlapStats, SystemInstance, overlap_stats


@dataclass(frozen=True)
class ExactStepSettings:
    constraint_tol: float = 1e-9
    mu_bracket_max: float = 1e6
    inner_tol: float = 1e-10
    inner_max_iter: int = 10000
    mu_bracket_min: float = 1e-6
    max_search_steps: int = 200

    def __post_init__(self):
        for name in ("constraint_tol", "mu_bracket_max", "inner_tol", "mu_bracket_min"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be > 0")
        if self.inner_max_iter < 1:
            raise ConfigurationError("inner_max_iter must be >= 1")


@dataclass
class ClupResult:
    """Outcome of one CLuP run (exact or contraction engine).

    ``trajectory`` holds the statistics of the constrained-step outputs, i.e.
    before renormalization for the exact engine. ``x_step`` is the last of
    those outputs; the contraction engine has no renormalization so there it
    equals ``x_final``.
    """

    x_final: np.ndarray
    trajectory: list[OverlapStats]
    residual_final: float
    iterations: int
    converged: bool
    x_step: np.ndarray | None = None
    non_convergent: bool = False
    info: dict = field(default_factory=dict)


class _StepSolver:
    """Holds per-instance state reused across CLuP iterations."""

    def __init__(self, instance: SystemInstance, settings: ExactStepSettings):
        self.instance = instance
        self.settings = settings
        self.qp = BoxQP(instance.A, instance.y, instance.bound)
        self._min_residual = None
        self.mu = None
        self.x_warm = None

    def residual(self, x):
        return float(np.linalg.norm(self.instance.y - self.instance.A @ x))

    def min_residual(self):
        if self._min_residual is None:
            s = self.settings
            res = self.qp.solve(1.0, None, tol=s.inner_tol * 1e-2, max_iter=50 * s.inner_max_iter)
            self._min_residual = self.residual(res.x)
        return self._min_residual

    def _inner(self, mu, p):
        s = self.settings
        # scale-free KKT tolerance for mu * ||y - A x||^2 - p @ x
        res = self.qp.solve(mu, p, x0=self.x_warm, tol=s.inner_tol * (1.0 + np.linalg.norm(p)),
                            max_iter=s.inner_max_iter)
        if not res.converged:
            raise InnerSolverError(
                f"inner box QP did not converge in {s.inner_max_iter} iterations (mu={mu:.6g})",
                best_x=res.x, kkt_residual=res.kkt)
        self.x_warm = res.x
        return res.x, self.residual(res.x)

    def step(self, x_prev, r):
        s = self.settings
        inst = self.instance
        if not r > 0:
            raise ConfigurationError(f"radius must be positive, got {r}")
        p = np.asarray(x_prev, dtype=float)
        corner = np.where(p >= 0, inst.bound, -inst.bound)
        if self.residual(corner) <= r:
            return corner
        rmin = self.min_residual()
        if rmin > r * (1.0 + s.constraint_tol):
            raise InfeasibleRadiusError(r, rmin)

        target = lambda res: res - r
        done = lambda res: abs(res - r) <= r * s.constraint_tol

        # bracket in t = log(mu): residual(mu) is nonincreasing
        mu0 = self.mu if self.mu is not None else s.mu_bracket_min
        t_lo = t_hi = None
        x_hi = None
        mu = mu0
        x, res = self._inner(mu, p)
        if done(res):
            self.mu = mu
            return x
        if res > r:
            t_lo, f_lo = math.log(mu), target(res)
            while True:
                mu *= 10.0
                if mu > s.mu_bracket_max:
                    raise InnerSolverError(
                        f"multiplier search exceeded mu_bracket_max={s.mu_bracket_max:g}",
                        best_x=x, kkt_residual=float("nan"))
                x, res = self._inner(mu, p)
                if done(res):
                    self.mu = mu
                    return x
                if res < r:
                    t_hi, f_hi, x_hi = math.log(mu), target(res), x
                    break
                t_lo, f_lo = math.log(mu), target(res)
        else:
            t_hi, f_hi, x_hi = math.log(mu), target(res), x
            while True:
                mu /= 10.0
                if mu < s.mu_bracket_min * 1e-6:
                    # the corner is optimal in the limit mu -> 0, handled above
                    raise InnerSolverError("multiplier search fell below the bracket",
                                           best_x=x, kkt_residual=float("nan"))
                x, res = self._inner(mu, p)
                if done(res):
                    self.mu = mu
                    return x
                if res > r:
                    t_lo, f_lo = math.log(mu), target(res)
                    break
                t_hi, f_hi, x_hi = math.log(mu), target(res), x

        side = 0
        for _ in range(s.max_search_steps):
            t = (t_lo * f_hi - t_hi * f_lo) / (f_hi - f_lo)
            if not t_lo < t < t_hi:
                t = 0.5 * (t_lo + t_hi)
            mu = math.exp(t)
            x, res = self._inner(mu, p)
            f = target(res)
            if done(res):
                self.mu = mu
                return x
            if f > 0:
                t_lo, f_lo = t, f
                if side == -1:
                    f_hi *= 0.5
                side = -1
            else:
                t_hi, f_hi, x_hi = t, f, x
                if side == 1:
                    f_lo *= 0.5
                side = 1
            if t_hi - t_lo < 1e-15:
                break
        # bracket collapsed: the feasible side is within tolerance of optimal
        self.mu = math.exp(t_hi)
        if x_hi is not None and self.residual(x_hi) <= r * (1.0 + s.constraint_tol):
            return x_hi
        raise InnerSolverError("multiplier search did not reach the radius tolerance",
                               best_x=x, kkt_residual=float("nan"))


def clup_inner_step(instance: SystemInstance, x_prev, r: float,
                    settings: ExactStepSettings | None = None) -> np.ndarray:
    """Solve one constrained CLuP step exactly (to tolerance)."""
    settings = settings or ExactStepSettings()
    return _StepSolver(instance, settings).step(x_prev, r)


def random_corner_init(n: int, seed: int) -> np.ndarray:
    if n < 1:
        raise ConfigurationError(f"n must be >= 1, got {n}")
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    return (2.0 * rng.integers(0, 2, size=n) - 1.0) / math.sqrt(n)


def clup_run(instance: SystemInstance, r: float, x0, max_iter: int = 100,
             step_tol: float = 1e-8, settings: ExactStepSettings | None = None) -> ClupResult:
    """Iterate exact CLuP steps until the normalized iterate stops moving."""
    settings = settings or ExactStepSettings()
    x = np.asarray(x0, dtype=float)
    nrm = np.linalg.norm(x)
    if nrm == 0:
        raise ConfigurationError("x0 must be nonzero")
    if max_iter < 1:
        raise ConfigurationError("max_iter must be >= 1")
    x = x / nrm
    solver = _StepSolver(instance, settings)
    trajectory = []
    converged = False
    x_step = None
    for i in range(1, max_iter + 1):
        try:
            x_step = solver.step(x, r)
        except (InnerSolverError, InfeasibleRadiusError) as exc:
            exc.iteration = i
            exc.args = (f"iteration {i}: {exc.args[0]}",)
            raise
        trajectory.append(overlap_stats(x_step, instance.x_sol))
        x_new = x_step / np.linalg.norm(x_step)
        moved = float(np.linalg.norm(x_new - x))
        x = x_new
        if moved <= step_tol:
            converged = True
            break
    return ClupResult(x_final=x, trajectory=trajectory, residual_final=solver.residual(x_step),
                      iterations=len(trajectory), converged=converged, x_step=x_step,
                      info={"engine": "exact", "r": float(r)})
