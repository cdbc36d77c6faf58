"""Minimize ``w * ||y - A x||^2 - p @ x`` over the box ``[-b, b]^n``.

Accelerated projected gradient with adaptive restart, followed by an
active-set polish: once the bound set looks settled, the free coordinates are
obtained from the reduced normal equations and accepted only if the result
passes the KKT check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigsh


@dataclass
class BoxQPResult:
    x: np.ndarray
    kkt: float
    iterations: int
    converged: bool


def top_eigenvalue(A: np.ndarray) -> float:
    """Largest eigenvalue of ``A.T @ A`` (a slight overestimate for large A)."""
    m, n = A.shape
    if min(m, n) <= 400:
        return float(np.linalg.norm(A, 2) ** 2)
    k = min(m, n)
    if m <= n:
        op = LinearOperator((k, k), matvec=lambda u: A @ (A.T @ u), dtype=float)
    else:
        op = LinearOperator((k, k), matvec=lambda u: A.T @ (A @ u), dtype=float)
    val = eigsh(op, k=1, which="LA", v0=np.ones(k), tol=1e-10, return_eigenvectors=False)
    return float(val[0]) * (1.0 + 1e-8)


def kkt_violation(x, grad, b):
    """Infinity norm of the first-order optimality violation on the box."""
    v = np.where(x >= b, np.maximum(grad, 0.0), np.where(x <= -b, np.maximum(-grad, 0.0), grad))
    return float(np.max(np.abs(v))) if v.size else 0.0


class BoxQP:
    """One problem instance; ``w`` and ``p`` can change between solves."""

    def __init__(self, A, y, b, lam_max=None):
        self.A = A
        self.y = y
        self.b = float(b)
        self.h = A.T @ y
        self.lam_max = top_eigenvalue(A) if lam_max is None else float(lam_max)

    def grad(self, x, w, p):
        return 2.0 * w * (self.A.T @ (self.A @ x - self.y)) - p

    def _polish(self, x, w, p, tol):
        b = self.b
        g = self.grad(x, w, p)
        eps = 1e-9 * b
        upper = (x >= b - eps) & (g <= 0)
        lower = (x <= -b + eps) & (g >= 0)
        free = ~(upper | lower)
        xc = np.where(upper, b, np.where(lower, -b, x))
        nf = int(free.sum())
        if nf:
            if nf > self.A.shape[0]:
                return None
            AF = self.A[:, free]
            rhs_y = self.y - self.A[:, ~free] @ xc[~free]
            M = AF.T @ AF
            rhs = AF.T @ rhs_y + p[free] / (2.0 * w)
            try:
                xf = np.linalg.solve(M, rhs)
            except np.linalg.LinAlgError:
                return None
            if not np.all(np.isfinite(xf)) or np.any(np.abs(xf) > b):
                return None
            xc[free] = xf
        kkt = kkt_violation(xc, self.grad(xc, w, p), b)
        return (xc, kkt) if kkt <= tol else None

    def solve(self, w, p, x0=None, tol=1e-10, max_iter=10000, polish_every=10):
        """Minimize over the box; ``tol`` bounds the KKT violation (infinity norm)."""
        b = self.b
        n = self.A.shape[1]
        p = np.zeros(n) if p is None else np.asarray(p, dtype=float)
        if w <= 0:
            x = np.where(p >= 0, b, -b)
            return BoxQPResult(x=x, kkt=0.0, iterations=0, converged=True)
        L = 2.0 * w * self.lam_max
        x = np.zeros(n) if x0 is None else np.clip(np.asarray(x0, dtype=float), -b, b)
        z = x.copy()
        t = 1.0
        best = (math.inf, x)
        for k in range(1, max_iter + 1):
            x_new = np.clip(z - self.grad(z, w, p) / L, -b, b)
            if (z - x_new) @ (x_new - x) > 0:
                t = 1.0
                z = x_new
            else:
                t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
                z = x_new + ((t - 1.0) / t_new) * (x_new - x)
                t = t_new
            x = x_new
            if k % polish_every == 0:
                kkt = kkt_violation(x, self.grad(x, w, p), b)
                if kkt < best[0]:
                    best = (kkt, x.copy())
                if kkt <= tol:
                    return BoxQPResult(x=x, kkt=kkt, iterations=k, converged=True)
                polished = self._polish(x, w, p, tol)
                if polished is not None:
                    return BoxQPResult(x=polished[0], kkt=polished[1], iterations=k, converged=True)
        kkt = kkt_violation(x, self.grad(x, w, p), b)
        if kkt < best[0]:
            best = (kkt, x)
        return BoxQPResult(x=best[1], kkt=best[0], iterations=max_iter, converged=best[0] <= tol)
