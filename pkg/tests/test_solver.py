from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import euler_loop, fbm_covariance, mc_band
from youngint.errors import DivergenceError, DomainError
from youngint.paths import FbmSpec, GridPath, estimate_holder_exponent, sample_fbm
from youngint.solver import (
    FieldMeta,
    SolveConfig,
    VectorField,
    constant_field,
    dyadic_levels,
    empirical_order,
    intermediate_holder_constant,
    linear_field,
    picard_refine,
    refine_fbm_midpoints,
    refine_linear,
    shifted,
    sine_field,
    solve_young_euler,
)


def fbm(h, n_steps, seed, dim=1):
    return sample_fbm(FbmSpec(h, n_steps + 1, dimension=dim, seed=seed))


# ---------------------------------------------------------------------------
# VectorField contract


def test_stock_fields_pass_check():
    rng = np.random.default_rng(0)
    for f in (constant_field(2.0), constant_field([[1.0, 2.0], [0.0, -1.0]], 2, 2),
              linear_field(1.5, -0.5), sine_field(2.0, 1 / 3), shifted(sine_field(), 0.1)):
        f.check(rng)


def test_check_rejects_wrong_metadata():
    rng = np.random.default_rng(1)
    bad_sup = VectorField(lambda x: (2 * x)[..., None], 1, 1, FieldMeta(sup_df=1.0, a0=0, a1=2.0))
    with pytest.raises(DomainError, match="sup_df"):
        bad_sup.check(rng)
    bad_growth = VectorField(lambda x: (x**2)[..., None], 1, 1, FieldMeta(sup_df=100.0, a0=1, a1=1))
    with pytest.raises(DomainError, match="growth"):
        bad_growth.check(rng, radius=5.0)
    bad_jac = VectorField(
        lambda x: np.sin(x)[..., None], 1, 1, FieldMeta(sup_df=1.0, a0=1, a1=0, sup_f=1.0),
        jacobian=lambda x: np.sin(x)[..., None, None],
    )
    with pytest.raises(DomainError, match="jacobian"):
        bad_jac.check(rng)
    bad_shape = VectorField(lambda x: x, 1, 1, FieldMeta(sup_df=1.0, a0=0, a1=1))
    with pytest.raises(DomainError, match="shape"):
        bad_shape.check(rng)


def test_field_meta_validation():
    with pytest.raises(DomainError):
        FieldMeta(sup_df=-1.0, a0=0, a1=0)
    with pytest.raises(DomainError):
        FieldMeta(sup_df=1.0, a0=0, a1=0, lam=0.0)
    with pytest.raises(DomainError):
        SolveConfig(tolerance=0.0)


# ---------------------------------------------------------------------------
# Euler


def test_constant_matrix_field_exact():
    y = fbm(0.7, 256, 3, dim=2)
    c = np.array([[1.0, -2.0], [0.5, 3.0], [0.0, 1.0]])
    field = constant_field(c, 3, 2)
    x0 = np.array([1.0, 0.0, -1.0])
    x = solve_young_euler(field, x0, y).path.values
    expect = x0 + (y.values - y.values[0]) @ c.T
    assert np.allclose(x, expect, rtol=0, atol=1e-13)
    assert np.array_equal(x[0], x0)


def test_euler_matches_plain_loop():
    y = fbm(0.75, 512, 4)
    field = sine_field(2.0, 1.0)
    got = solve_young_euler(field, 1.0, y).path.values[:, 0]
    assert np.allclose(got, euler_loop(lambda v: np.sin(v) + 2.0, 1.0, y.values[:, 0]), rtol=1e-14, atol=0)


def linear_errors(seed, levels=4, finest=2**11):
    y = fbm(0.75, finest, seed)
    errs, sizes = [], []
    for yl in dyadic_levels(y, levels):
        x = solve_young_euler(linear_field(1.0), 1.0, yl).path.values[:, 0]
        exact = np.exp(yl.values[:, 0] - yl.values[0, 0])
        errs.append(float(np.abs(x - exact).max()))
        sizes.append(len(yl) - 1)
    return sizes, errs, y


def test_linear_field_convergence_order():
    for seed in range(3):
        sizes, errs, y = linear_errors(seed)
        beta_hat = estimate_holder_exponent(y)
        assert empirical_order(sizes, errs) >= 2 * beta_hat - 1 - 0.2


def test_sine_field_against_fine_reference():
    fine = fbm(0.75, 2**14, 11)
    coarse = fine.subsample(2**4)
    field = sine_field(2.0, 1.0)
    ref = solve_young_euler(field, 1.0, fine).path
    got = solve_young_euler(field, 1.0, coarse).path
    idx = np.searchsorted(fine.times, coarse.times)
    gap = np.abs(got.values[:, 0] - ref.values[idx, 0]).max()
    assert gap < 0.05
    mid = solve_young_euler(field, 1.0, fine.subsample(4)).path
    gap_mid = np.abs(mid.values[:, 0] - ref.values[np.searchsorted(fine.times, mid.times), 0]).max()
    assert gap_mid < gap


def test_divergence_error_index():
    t = np.linspace(0, 1, 11)
    y = GridPath(t, 1e100 * np.arange(11.0))
    square = VectorField(lambda x: (x**2)[..., None], 1, 1, FieldMeta(1, 1, 1))
    with np.errstate(over="ignore", invalid="ignore"):
        expect = int(np.argmax(~np.isfinite(euler_loop(lambda v: v * v, 1.0, y.values))))
    with pytest.raises(DivergenceError) as info:
        solve_young_euler(square, 1.0, y)
    assert expect == 3 and info.value.index == expect


def test_zero_driver_keeps_initial_state():
    y = GridPath(np.linspace(0, 2, 65), np.full(65, 0.3))
    res = solve_young_euler(sine_field(), 0.7, y)
    assert np.all(res.path.values == 0.7)


def test_flow_property():
    y = fbm(0.75, 512, 8)
    field = sine_field(1.0, 0.5)
    whole = solve_young_euler(field, 0.2, y).path
    half = y.times[256]
    first = solve_young_euler(field, 0.2, y.window(0.0, half)).path
    second = solve_young_euler(field, first.values[-1], y.window(half, 1.0)).path
    assert np.array_equal(whole.values[:257], first.values)
    assert np.array_equal(whole.values[256:], second.values)


def test_convergence_flag_and_rough_warning():
    y = fbm(0.75, 1024, 2)
    assert solve_young_euler(linear_field(1.0), 1.0, y).converged
    strict = solve_young_euler(linear_field(1.0), 1.0, y, SolveConfig(tolerance=1e-12))
    assert not strict.converged and strict.messages
    rng = np.random.default_rng(0)
    t = np.linspace(0, 1, 1025)
    noise = GridPath(t, 0.01 * rng.normal(size=1025))
    res = solve_young_euler(sine_field(), 0.0, noise)
    assert any("1/2" in m for m in res.messages)


def test_x0_shape_error():
    y = fbm(0.75, 64, 0)
    with pytest.raises(DomainError):
        solve_young_euler(sine_field(), [1.0, 2.0], y)


def test_intermediate_constant_finite():
    y = fbm(0.75, 1024, 5)
    field = sine_field(2.0, 1 / 3)
    x = solve_young_euler(field, 0.0, y).path
    k = intermediate_holder_constant(x, y, 0.6, field.meta.sup_f, field.meta.sup_df)
    assert 0 < k < 10
    flat = GridPath(y.times, np.zeros(len(y)))
    assert intermediate_holder_constant(x, flat, 0.6, 1.0, 1.0) == 0.0


@settings(max_examples=15)
@given(st.floats(-3, 3), st.floats(-2, 2), st.integers(0, 50))
def test_euler_affine_in_constant_field(c, x0, seed):
    y = fbm(0.8, 64, seed)
    x = solve_young_euler(constant_field(c), x0, y).path.values[:, 0]
    assert np.allclose(x, x0 + c * (y.values[:, 0] - y.values[0, 0]), atol=1e-12)


# ---------------------------------------------------------------------------
# Picard


def test_picard_fixed_point_for_constant_field():
    y = fbm(0.75, 256, 1)
    exact = GridPath(y.times, 1.0 + 2.0 * (y.values - y.values[0]))
    res = picard_refine(constant_field(2.0), 1.0, y, exact, 5)
    assert res.distance <= 1e-14


def test_picard_one_step_linear():
    y = fbm(0.75, 256, 2)
    start = GridPath(y.times, np.full(len(y), 1.5))
    res = picard_refine(linear_field(1.0), 1.5, y, start, 1)
    assert np.allclose(res.path.values[:, 0], 1.5 * (1 + y.values[:, 0] - y.values[0, 0]), atol=1e-14)


def test_picard_converges_to_euler():
    y = fbm(0.75, 1024, 11)
    field = sine_field(2.0, 1.0)
    euler = solve_young_euler(field, 1.0, y).path
    start = GridPath(y.times, np.ones(len(y)))
    res = picard_refine(field, 1.0, y, start, 60)
    assert np.abs(res.path.values - euler.values).max() < 1e-2
    assert res.history[-1] < res.history[0]


def test_picard_divergence():
    t = np.linspace(0, 1, 257)
    y = GridPath(t, 40.0 * np.sin(20 * t))
    start = GridPath(t, np.ones(257))
    with pytest.raises(DivergenceError):
        picard_refine(linear_field(1.0), 1.0, y, start, 50)


def test_picard_grid_mismatch():
    y = fbm(0.75, 64, 0)
    with pytest.raises(DomainError):
        picard_refine(sine_field(), 0.0, y, fbm(0.75, 32, 0), 3)


# ---------------------------------------------------------------------------
# refinement helpers


def test_refine_linear_and_levels():
    y = fbm(0.75, 8, 0)
    r = refine_linear(y, 2)
    assert len(r) == 17 and np.array_equal(r.values[::2], y.values)
    assert np.allclose(r.values[1::2], 0.5 * (y.values[:-1] + y.values[1:]))
    levels = dyadic_levels(fbm(0.75, 16, 0), 3)
    assert [len(lv) for lv in levels] == [17, 9, 5]
    with pytest.raises(DomainError):
        dyadic_levels(fbm(0.75, 6, 0), 3)


def test_midpoint_refinement_law():
    h = 0.7
    rng = np.random.default_rng(5)
    spec = FbmSpec(h, 5, seed=3)
    mids, ends = [], []
    for i in range(4000):
        y = sample_fbm(spec, i)
        r = refine_fbm_midpoints(y, h, rng)
        mids.append(r.values[1, 0])  # t = 0.125
        ends.append(r.values[8, 0])  # t = 1
    mids, ends = np.array(mids), np.array(ends)
    ok, est, se = mc_band(mids, ends, float(fbm_covariance(0.125, 1.0, h)))
    assert ok, (est, se)
    ok, est, se = mc_band(mids, mids, float(fbm_covariance(0.125, 0.125, h)))
    assert ok, (est, se)


def test_midpoint_refinement_requires_origin():
    y = fbm(0.7, 4, 0)
    with pytest.raises(DomainError):
        refine_fbm_midpoints(y.with_values(y.values + 1.0), 0.7, np.random.default_rng(0))
