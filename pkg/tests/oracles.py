"""Independent reference solvers used only by the tests."""

import cvxpy as cp
import numpy as np


def socp_step_objective(inst, p, r):
    """Optimal ``p @ x`` over the box and the ball ``||y - A x|| <= r`` (conic solver).

    With ``r=None`` returns the smallest attainable residual instead.
    """
    n = inst.n
    x = cp.Variable(n)
    box = [x <= inst.bound, x >= -inst.bound]
    if r is None:
        prob = cp.Problem(cp.Minimize(cp.norm(inst.y - inst.A @ x, 2)), box)
    else:
        prob = cp.Problem(cp.Maximize(np.asarray(p) @ x),
                          box + [cp.norm(inst.y - inst.A @ x, 2) <= r])
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10,
               max_iter=500)
    if prob.status not in ("optimal", "optimal_inaccurate"):
        raise RuntimeError(f"reference solver status {prob.status}")
    return float(prob.value)
