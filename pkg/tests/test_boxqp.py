import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import lsq_linear

from clup.boxqp import BoxQP, kkt_violation, top_eigenvalue


def problem(seed, m, n):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    y = A @ (rng.choice([-1.0, 1.0], n) / math.sqrt(n)) + 0.3 * rng.standard_normal(m)
    return A, y, 1 / math.sqrt(n)


@settings(max_examples=40)
@given(seed=st.integers(0, 10**6), n=st.integers(2, 30), ratio=st.floats(0.4, 2.0))
def test_least_squares_matches_bounded_least_squares(seed, n, ratio):
    m = max(1, round(ratio * n))
    A, y, b = problem(seed, m, n)
    res = BoxQP(A, y, b).solve(1.0, None, tol=1e-12, max_iter=200_000)
    ref = lsq_linear(A, y, bounds=(-b, b), method="bvls", tol=1e-15)
    f = lambda x: float(np.sum((y - A @ x) ** 2))
    assert res.converged
    assert np.all(np.abs(res.x) <= b)
    assert f(res.x) <= f(ref.x) + 1e-10 * (1 + f(ref.x))


@settings(max_examples=30)
@given(seed=st.integers(0, 10**6), n=st.integers(2, 12), w=st.floats(0.01, 100.0))
def test_linear_term_solution_passes_kkt_and_beats_perturbations(seed, n, w):
    A, y, b = problem(seed, n, n)
    p = np.random.default_rng(seed + 1).standard_normal(n)
    qp = BoxQP(A, y, b)
    res = qp.solve(w, p, tol=1e-10, max_iter=200_000)
    assert res.converged and kkt_violation(res.x, qp.grad(res.x, w, p), b) <= 1e-10
    f = lambda x: w * float(np.sum((y - A @ x) ** 2)) - p @ x
    rng = np.random.default_rng(seed + 2)
    for _ in range(50):
        z = np.clip(res.x + 1e-3 * b * rng.standard_normal(n), -b, b)
        assert f(z) >= f(res.x) - 1e-12


def test_zero_weight_picks_the_sign_corner():
    A, y, b = problem(0, 5, 7)
    p = np.array([1.0, -2.0, 0.0, 3.0, -0.1, 0.2, -5.0])
    res = BoxQP(A, y, b).solve(0.0, p)
    np.testing.assert_array_equal(res.x, np.where(p >= 0, b, -b))


def test_kkt_violation_cases():
    b = 1.0
    x = np.array([1.0, -1.0, 0.0])
    assert kkt_violation(x, np.array([-2.0, 3.0, 0.0]), b) == 0.0  # pushes outward at bounds
    assert kkt_violation(x, np.array([0.5, 0.0, 0.0]), b) == 0.5   # upper bound, should move in
    assert kkt_violation(x, np.array([0.0, 0.0, -0.25]), b) == 0.25


@pytest.mark.parametrize("shape", [(30, 50), (50, 30), (450, 500), (520, 430)])
def test_top_eigenvalue(shape):
    A = np.random.default_rng(1).standard_normal(shape)
    ref = float(np.linalg.eigvalsh(A.T @ A)[-1])
    assert top_eigenvalue(A) == pytest.approx(ref, rel=1e-7)
    assert top_eigenvalue(A) >= ref * (1 - 1e-12)


def test_iteration_budget_reports_best_iterate():
    A, y, b = problem(3, 40, 60)
    res = BoxQP(A, y, b).solve(1.0, None, tol=1e-300, max_iter=7, polish_every=1)
    assert not res.converged and res.iterations == 7
    assert np.all(np.abs(res.x) <= b)
