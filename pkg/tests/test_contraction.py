import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from clup.contraction import (PhaseConfig, contraction_run, contraction_step, fixed_point_residual,
                              precompute, resolve_c_q2, with_overrides)
from clup.errors import ConfigurationError
from clup.exact_solver import clup_run, random_corner_init
from clup.model import SystemDims, generate_instance, snr_db_to_sigma

CFG13 = PhaseConfig(r_norm=0.0926, gamma1_scaled=2.0341, c2_hat=0.8509)


def instance(n=300, snr=13.0, seed=0):
    return generate_instance(SystemDims.from_alpha(n, 0.6), snr_db_to_sigma(snr), seed)


def test_step_equals_unnormalized_update():
    inst = instance(200)
    ops = precompute(inst)
    n = inst.n
    x = random_corner_init(n, 1) * 0.7
    cq_norm = resolve_c_q2(CFG13, ops)
    # same update written with r, gamma1 and c_q2 in unnormalized units
    r = CFG13.r_norm * math.sqrt(n)
    gamma1 = CFG13.gamma1_scaled / math.sqrt(n)
    cq = cq_norm * math.sqrt(n)
    A, y = inst.A, inst.y
    raw = (cq * x + gamma1 * math.sqrt(CFG13.c2_hat) * (A.T @ y - A.T @ (A @ x))) / (cq - r)
    ref = np.clip(raw, -1 / math.sqrt(n), 1 / math.sqrt(n))
    np.testing.assert_allclose(contraction_step(x, ops, CFG13, n), ref, rtol=0, atol=1e-13)


def test_gram_modes_agree():
    inst = instance(150)
    full, two = precompute(inst), precompute(inst, gram_threshold=0)
    assert (full.gram_mode, two.gram_mode) == ("full_gram", "two_mults")
    x0 = random_corner_init(150, 2)
    cfg = with_overrides(CFG13, i_max=300, step_tol=0.0)
    a = contraction_run(inst, cfg, x0, ops=full)
    b = contraction_run(inst, cfg, x0, ops=two)
    np.testing.assert_allclose(a.x_final, b.x_final, atol=1e-10)
    assert a.iterations == b.iterations == 300


def test_one_gram_product_per_iteration():
    inst = instance(120)
    for mode_threshold, per_iter in ((4096, 1), (0, 2)):
        ops = precompute(inst, gram_threshold=mode_threshold)
        res = contraction_run(inst, with_overrides(CFG13, i_max=37, step_tol=0.0),
                              random_corner_init(120, 0), ops=ops)
        assert ops.products["matvec"] == per_iter * res.iterations == per_iter * 37


def test_limit_does_not_depend_on_step_length():
    inst = instance(250, seed=3)
    ops = precompute(inst)
    x0 = random_corner_init(250, 5)
    cq = resolve_c_q2(CFG13, ops)
    a = contraction_run(inst, with_overrides(CFG13, step_tol=1e-12, i_max=100_000), x0, ops=ops)
    b = contraction_run(inst, with_overrides(CFG13, c_q2=2 * cq, step_tol=1e-12, i_max=100_000),
                        x0, ops=ops)
    assert a.converged and b.converged
    np.testing.assert_allclose(a.x_final, b.x_final, atol=1e-6)
    # free coordinates satisfy r x = g (G x - h) / n
    x = a.x_final
    free = np.abs(x) < inst.bound * (1 - 1e-9)
    g = CFG13.gamma1_scaled * math.sqrt(CFG13.c2_hat)
    lhs = CFG13.r_norm * x[free]
    rhs = g * (ops.G @ x - ops.h)[free] / inst.n
    np.testing.assert_allclose(lhs, rhs, atol=1e-8)
    assert fixed_point_residual(inst, x, CFG13, ops) <= 1e-10


def test_auto_step_keeps_top_mode_stable():
    inst = instance(200)
    ops = precompute(inst)
    cq = resolve_c_q2(CFG13, ops)
    g = CFG13.gamma1_scaled * math.sqrt(CFG13.c2_hat)
    lam = np.linalg.eigvalsh(ops.G / inst.n)
    factors = (cq - g * lam) / (cq - CFG13.r_norm)
    assert factors.min() > -1
    assert factors.min() < -0.8  # close to the edge: as long a step as is safe


def test_exact_and_contraction_limits_coincide():
    inst = instance(400, snr=14.0, seed=1)
    cfg = PhaseConfig(r_norm=0.0926, gamma1_scaled=1.5907, c2_hat=0.8963)
    x0 = random_corner_init(400, 1)
    ex = clup_run(inst, cfg.r_norm * 20, x0, max_iter=400, step_tol=1e-10)
    assert fixed_point_residual(inst, ex.x_step, cfg) <= 1e-2


def test_run_stops_on_small_steps_and_records_trajectory():
    inst = instance(300, snr=15.0)
    res = contraction_run(inst, PhaseConfig(0.0926, 1.2478, 0.9325), random_corner_init(300, 4))
    assert res.converged and not res.non_convergent
    assert len(res.trajectory) == res.iterations < 5000
    assert np.all(np.abs(res.x_final) <= inst.bound)
    assert res.residual_final == pytest.approx(np.linalg.norm(inst.y - inst.A @ res.x_final))
    assert res.x_step is res.x_final


def test_stuck_corner_is_flagged_not_raised():
    inst = instance(100)
    cfg = PhaseConfig(r_norm=0.05, gamma1_scaled=-3.0, c2_hat=0.9)
    res = contraction_run(inst, cfg, random_corner_init(100, 0))
    assert res.non_convergent and not res.converged
    assert res.iterations < cfg.i_max


def test_overflowing_step_names_the_parameters():
    inst = instance(50)
    cfg = PhaseConfig(r_norm=0.1, gamma1_scaled=1e300, c2_hat=0.9, c_q2=float(np.nextafter(0.1, 1)))
    with pytest.raises(ConfigurationError, match="c_q2"):
        contraction_step(random_corner_init(50, 0), precompute(inst), cfg, 50)


def test_zero_gain_step_scales_and_clamps():
    inst = instance(64)
    ops = precompute(inst)
    cfg = PhaseConfig(r_norm=0.2, gamma1_scaled=0.0, c2_hat=0.5, c_q2=1.0)
    x = np.linspace(-1, 1, 64) / 8
    np.testing.assert_allclose(contraction_step(x, ops, cfg, 64), np.clip(x / 0.8, -1 / 8, 1 / 8))
    np.testing.assert_array_equal(contraction_step(np.zeros(64), ops, cfg, 64), np.zeros(64))


def test_two_dimensional_hand_evaluation():
    from clup.model import SystemInstance
    A = np.array([[1.0, 0.5], [0.0, 2.0]])
    y = np.array([0.3, -0.4])
    inst = SystemInstance(dims=SystemDims(2, 2, 1.0), A=A, x_sol=np.array([1.0, -1.0]) / math.sqrt(2),
                          v=np.zeros(2), sigma=0.0, y=y, seed=0)
    cfg = PhaseConfig(r_norm=0.1, gamma1_scaled=1.0, c2_hat=0.81, c_q2=2.0)
    x = np.array([0.2, 0.1])
    # h = (0.3, -0.65), G x = (0.25, 0.525); g = 0.9, divide by n = 2
    # raw = (2 x + 0.45 (h - G x)) / 1.9 = ((0.4 + 0.0225), (0.2 - 0.52875)) / 1.9
    expected = np.array([0.4225 / 1.9, -0.32875 / 1.9])
    np.testing.assert_allclose(contraction_step(x, precompute(inst), cfg, 2), expected, atol=1e-15)


def test_noiseless_solution_is_kept():
    inst = generate_instance(SystemDims.from_alpha(60, 0.6), 0.0, 9)
    for cfg in (CFG13, PhaseConfig(0.1698, 0.3869, 0.9976)):
        res = contraction_run(inst, cfg, inst.x_sol)
        assert np.max(np.abs(res.x_final - inst.x_sol)) <= 1e-6


def test_iteration_cap_contract():
    inst = instance(40)
    with pytest.raises(ConfigurationError):
        with_overrides(CFG13, i_max=0)
    res = contraction_run(inst, with_overrides(CFG13, i_max=1), random_corner_init(40, 0))
    assert res.iterations == 1 and len(res.trajectory) == 1


def test_mode_equivalence_on_random_instances():
    rng = np.random.default_rng(5)
    for k in range(20):
        n = int(rng.integers(2, 513))
        inst = generate_instance(SystemDims.from_alpha(n, float(rng.uniform(0.3, 1.5))), 0.2, k)
        x = rng.uniform(-1, 1, n) / math.sqrt(n)
        full, two = precompute(inst), precompute(inst, gram_threshold=0)
        assert np.max(np.abs(full.G - full.G.T)) <= 1e-10 and two.G is None
        a, b = contraction_step(x, full, CFG13, n), contraction_step(x, two, CFG13, n)
        np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-10 / math.sqrt(n))


def test_fixed_point_residual_separates_limits_from_corners():
    inst = instance(200, snr=15.0)
    cfg = PhaseConfig(0.0926, 1.2478, 0.9325)
    res = contraction_run(inst, cfg, random_corner_init(200, 1))
    x = res.x_final
    # the last step moved at most step_tol; the residual is that step
    assert fixed_point_residual(inst, x, cfg) <= cfg.step_tol * (1 + np.linalg.norm(x))
    assert fixed_point_residual(inst, random_corner_init(200, 8), cfg) > 0.1


def test_phase_config_validation():
    for bad in ({"r_norm": 0.0}, {"c2_hat": 0.0}, {"c2_hat": 1.5}, {"i_max": 0},
                {"step_tol": -1.0}, {"c_q2": 0.0926}):
        kw = {"r_norm": 0.0926, "gamma1_scaled": 2.0, "c2_hat": 0.85} | bad
        with pytest.raises(ConfigurationError):
            PhaseConfig(**kw)
    with pytest.raises(ConfigurationError, match="unknown"):
        PhaseConfig.from_dict({"r_norm": 0.1, "gamma1_scaled": 1, "c2_hat": 0.9, "radius": 1})
    with pytest.raises(ConfigurationError, match="gamma1_scaled"):
        PhaseConfig.from_dict({"r_norm": 0.1, "c2_hat": 0.9})


@given(r=st.floats(1e-3, 1.0), g=st.floats(-5, 5), c2=st.floats(1e-3, 1.0),
       cq=st.one_of(st.none(), st.floats(2.0, 10.0)), i_max=st.integers(1, 10**6),
       tol=st.floats(0, 1e-2), label=st.text(max_size=8))
def test_phase_config_round_trip(r, g, c2, cq, i_max, tol, label):
    cfg = PhaseConfig(r, g, c2, cq, i_max, tol, label)
    assert PhaseConfig.from_dict(cfg.to_dict()) == cfg


def test_wrong_length_inputs():
    inst = instance(40)
    ops = precompute(inst)
    with pytest.raises(ValueError):
        contraction_step(np.zeros(39), ops, CFG13, 40)
    with pytest.raises(ValueError):
        contraction_run(inst, CFG13, np.zeros(41), ops=ops)
