import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import lsq_linear

from clup.baselines import polytope_relax, radius_from_scaling
from clup.errors import ConfigurationError
from clup.model import (SystemDims, SystemInstance, bit_error_fraction, generate_instance,
                        round_to_corner, snr_db_to_sigma)


def test_noiseless_interior_point_is_recovered():
    n, m = 40, 60
    rng = np.random.default_rng(0)
    A = rng.standard_normal((m, n))
    x_int = rng.uniform(-0.5, 0.5, n) / math.sqrt(n)
    inst = SystemInstance(dims=SystemDims(n, m, m / n), A=A, x_sol=np.sign(x_int) / math.sqrt(n),
                          v=np.zeros(m), sigma=0.0, y=A @ x_int, seed=0)
    tol = 1e-9
    res = polytope_relax(inst, tol=tol)
    assert res.converged
    assert res.residual <= tol * np.linalg.norm(inst.y)
    np.testing.assert_allclose(res.x_relaxed, x_int, atol=1e-10)


@settings(max_examples=25)
@given(seed=st.integers(0, 2**32), alpha=st.floats(0.4, 1.5))
def test_small_instances_match_bounded_least_squares(seed, alpha):
    inst = generate_instance(SystemDims.from_alpha(10, alpha), 0.3, seed)
    res = polytope_relax(inst, tol=1e-11)
    ref = lsq_linear(inst.A, inst.y, bounds=(-inst.bound, inst.bound), method="bvls", tol=1e-15)
    f = lambda x: float(np.sum((inst.y - inst.A @ x) ** 2))
    assert abs(f(res.x_relaxed) - f(ref.x)) <= 1e-8


def test_residual_beats_random_box_points():
    inst = generate_instance(SystemDims.from_alpha(50, 0.6), snr_db_to_sigma(12), 3)
    res = polytope_relax(inst)
    assert np.all(np.abs(res.x_relaxed) <= inst.bound)
    assert res.r_plt_norm == pytest.approx(res.residual / math.sqrt(50))
    rng = np.random.default_rng(0)
    for _ in range(100):
        z = rng.uniform(-inst.bound, inst.bound, 50)
        assert res.residual <= np.linalg.norm(inst.y - inst.A @ z)


def test_iteration_budget_is_flagged():
    inst = generate_instance(SystemDims.from_alpha(200, 0.6), 0.3, 1)
    res = polytope_relax(inst, tol=1e-14, max_iter=3)
    assert not res.converged and res.iterations == 3
    assert np.all(np.abs(res.x_relaxed) <= inst.bound)
    with pytest.raises(ConfigurationError):
        polytope_relax(inst, tol=0.0)


def test_decoding_rounds_signs():
    inst = generate_instance(SystemDims.from_alpha(30, 0.6), 0.2, 5)
    res = polytope_relax(inst)
    np.testing.assert_array_equal(res.decode(), round_to_corner(res.x_relaxed))


def test_radius_scaling():
    assert radius_from_scaling(1.0, 0.13, 400)[1] == 0.13
    r, r_norm = radius_from_scaling(0.5, 0.2, 100)
    assert r_norm == pytest.approx(0.1) and r == pytest.approx(1.0)
    for bad in ((0.0, 0.1, 10), (1.0, -0.1, 10), (1.0, 0.1, 0)):
        with pytest.raises(ConfigurationError):
            radius_from_scaling(*bad)


def test_scaling_that_reproduces_a_tabulated_radius():
    n = 400
    r_plt = np.mean([polytope_relax(generate_instance(SystemDims.from_alpha(n, 0.6),
                                                       snr_db_to_sigma(14), s)).r_plt_norm
                     for s in range(50)])
    r_sc = 0.1544 / r_plt
    assert radius_from_scaling(r_sc, r_plt, n)[1] == pytest.approx(0.1544)
    # CLuP radii sit above the relaxation residual
    assert r_sc > 1.0


def test_relaxation_ber_falls_with_snr():
    n, grid = 60, [6.0, 9.0, 12.0, 15.0, 18.0]
    curve = []
    for snr in grid:
        errs = []
        for s in range(200):
            inst = generate_instance(SystemDims.from_alpha(n, 0.6), snr_db_to_sigma(snr), 10_000 + s)
            errs.append(bit_error_fraction(polytope_relax(inst).decode(), inst.x_sol))
        curve.append(np.mean(errs))
    inversions = sum(b > a for a, b in zip(curve, curve[1:]))
    assert inversions <= 1
