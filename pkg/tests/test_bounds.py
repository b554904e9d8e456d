from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from youngint.bounds import (
    BoundReport,
    bound_bounded,
    bound_linear_growth,
    calibrate_k,
    rhs_from_factors,
    stability_bound,
    subdivision_plan,
    violates,
)
from youngint.errors import CalibrationError, DomainError, PreconditionError
from youngint.paths import FbmSpec, holder_seminorm, sample_fbm, sup_norm
from youngint.solver import (
    FieldMeta,
    VectorField,
    constant_field,
    linear_field,
    shifted,
    sine_field,
    solve_young_euler,
)

BOUNDED = FieldMeta(sup_df=1 / 3, a0=1.0, a1=0.0, sup_f=1.0, sup_ddf=1 / 3)
LINEAR = FieldMeta(sup_df=1.0, a0=0.0, a1=1.0, sup_ddf=0.0)

pos = st.floats(1e-3, 10.0)
betas = st.floats(0.51, 0.95)


def fbm(seed, n_steps=1024, h=0.75):
    return sample_fbm(FbmSpec(h, n_steps + 1, seed=seed))


def solve(field, x0, y):
    return solve_young_euler(field, x0, y).path


# ---------------------------------------------------------------------------
# bounded coefficients


def test_bounded_formula():
    r = bound_bounded(BOUNDED, 2.0, 1.5, 0.6, 0.5)
    expect = 0.5 + 1.5 * 1.0 * (1 / 3) ** (0.4 / 0.6) * 2.0 ** (1 / 0.6)
    assert r.rhs_without_k == pytest.approx(expect, rel=1e-14)
    assert r.factors["increment"] == pytest.approx(expect - 0.5, rel=1e-14)
    assert rhs_from_factors(r) == r.rhs_without_k


def test_bounded_trivial_cases():
    assert bound_bounded(BOUNDED, 0.0, 1.0, 0.6, 0.7).rhs_without_k == 0.7
    zero_f = FieldMeta(sup_df=0.0, a0=0.0, a1=0.0, sup_f=0.0)
    assert bound_bounded(zero_f, 3.0, 1.0, 0.6, 0.7).rhs_without_k == 0.7
    with pytest.raises(PreconditionError):
        bound_bounded(LINEAR, 1.0, 1.0, 0.6, 0.0)
    with pytest.raises(DomainError):
        bound_bounded(BOUNDED, 1.0, 1.0, 1.0, 0.0)
    with pytest.raises(DomainError):
        bound_bounded(BOUNDED, -1.0, 1.0, 0.6, 0.0)


def test_bounded_sweep_example():
    field = sine_field(2.0, 1 / 3)
    reports = []
    for seed in range(20):
        y = fbm(seed)
        x = solve(field, 0.0, y)
        reports.append(bound_bounded(field.meta, holder_seminorm(y, 0.6), 1.0, 0.6, 0.0, lhs=sup_norm(x)))
    k = calibrate_k(reports)
    assert 0 < k < math.inf
    assert not any(violates(r, k) for r in reports)


@given(pos, pos, betas, st.floats(0, 5))
def test_bounded_scaling_in_seminorm(y_semi, T, beta, x0):
    a = bound_bounded(BOUNDED, y_semi, T, beta, x0)
    b = bound_bounded(BOUNDED, 2 * y_semi, T, beta, x0)
    assert b.rhs_without_k - x0 == pytest.approx(2 ** (1 / beta) * (a.rhs_without_k - x0), rel=1e-12)


@given(pos, pos, betas, st.floats(0, 5), st.sampled_from(["y", "T", "sup_f", "sup_df", "x0"]))
def test_bounded_monotone(y_semi, T, beta, x0, which):
    args = {"y": y_semi, "T": T, "sup_f": 1.0, "sup_df": 0.5, "x0": x0}
    big = dict(args)
    big[which] = args[which] * 1.5 + 0.1

    def rhs(a):
        meta = FieldMeta(sup_df=a["sup_df"], a0=a["sup_f"], a1=0.0, sup_f=a["sup_f"])
        return bound_bounded(meta, a["y"], a["T"], beta, a["x0"]).rhs_without_k

    assert rhs(big) >= rhs(args)


# ---------------------------------------------------------------------------
# linear growth


def test_linear_growth_formula_and_trivial_cases():
    r = bound_linear_growth(LINEAR, 1.2, 0.8, 0.6, 2.0)
    expo = 0.8 * 1.0 * 1.2 ** (1 / 0.6)
    assert r.factors["exponent"] == pytest.approx(expo)
    assert r.rhs_without_k == pytest.approx(2**expo * 3.0)
    assert bound_linear_growth(LINEAR, 0.0, 1.0, 0.6, 2.0).rhs_without_k == 3.0
    zero = FieldMeta(sup_df=0.0, a0=0.0, a1=0.0)
    assert bound_linear_growth(zero, 5.0, 1.0, 0.6, 2.0).rhs_without_k == 3.0


def test_linear_growth_closed_form_dominated():
    reports = []
    for seed in range(20):
        y = fbm(seed)
        x0 = 1.0 + 0.1 * seed
        exact = x0 * np.exp(y.values[:, 0] - y.values[0, 0])
        reports.append(bound_linear_growth(LINEAR, holder_seminorm(y, 0.6), 1.0, 0.6, x0, lhs=float(exact.max())))
    k = calibrate_k(reports)
    assert np.isfinite(k) and k >= 0
    assert not any(violates(r, k) for r in reports)
    # the Hölder-form majorant |x0| exp(‖y‖ T^β) also dominates sup |x|
    for r in reports:
        assert r.lhs <= r.factors["x0_norm"] * math.exp(r.factors["y_seminorm"]) * (1 + 1e-12)


@given(pos, pos, betas, st.floats(0, 5), st.sampled_from(["y", "T", "sup_df", "a0", "a1", "x0"]))
def test_linear_growth_monotone(y_semi, T, beta, x0, which):
    args = {"y": y_semi, "T": T, "sup_df": 0.5, "a0": 0.3, "a1": 0.7, "x0": x0}
    big = dict(args)
    big[which] = args[which] * 1.5 + 0.1

    def rhs(a):
        meta = FieldMeta(sup_df=a["sup_df"], a0=a["a0"], a1=a["a1"])
        return bound_linear_growth(meta, a["y"], a["T"], beta, a["x0"]).rhs_without_k

    assert rhs(big) >= rhs(args)


# ---------------------------------------------------------------------------
# stability


def test_stability_identical_inputs():
    y = fbm(3)
    field = sine_field(2.0, 1 / 3)
    x = solve(field, 0.5, y)
    r = stability_bound(field, field, x, x, y, y, 0.6)
    assert r.lhs == 0.0 and r.factors["braces"] == 0.0
    assert not violates(r, 0.0)


def test_stability_linear_initial_conditions():
    y = fbm(4)
    field = linear_field(1.0)
    x = solve(field, 1.0, y)
    xt = solve(field, 1.6, y)
    r = stability_bound(field, field, x, xt, y, y, 0.6)
    assert r.factors["braces"] == pytest.approx(0.6, rel=1e-12)
    euler_gap = 0.6 * np.abs(x.values[:, 0]).max()  # Euler is linear in x0
    assert r.lhs == pytest.approx(euler_gap, rel=1e-12)
    exact = 0.6 * np.exp(y.values[:, 0] - y.values[0, 0]).max()
    assert r.lhs == pytest.approx(exact, rel=1e-2)


def test_stability_needs_second_derivative():
    y = fbm(1, 64)
    meta = FieldMeta(sup_df=1.0, a0=0.0, a1=1.0)
    field = VectorField(lambda v: v[..., None], 1, 1, meta)
    x = solve(field, 1.0, y)
    with pytest.raises(PreconditionError):
        stability_bound(field, field, x, x, y, y, 0.6)
    with pytest.raises(DomainError):
        stability_bound(linear_field(), linear_field(), x, x, y, fbm(1, 32), 0.6)


def test_stability_shift_sweep_linear_in_eps():
    y = fbm(6)
    field = sine_field(2.0, 1 / 3)
    x = solve(field, 0.0, y)
    ratios = []
    lhs = []
    for eps in (1e-3, 1e-2, 1e-1):
        ft = shifted(field, eps)
        xt = solve(ft, 0.0, y)
        r = stability_bound(field, ft, x, xt, y, y, 0.6)
        assert r.factors["f_diff_sup"] == pytest.approx(eps, rel=1e-9)
        lhs.append(r.lhs)
        ratios.append(r.lhs / r.factors["braces"])
    assert lhs[1] / lhs[0] == pytest.approx(10, rel=0.05)
    assert lhs[2] / lhs[1] == pytest.approx(10, rel=0.1)
    assert max(ratios) / min(ratios) < 1.5


def test_stability_lhs_symmetric():
    y, yt = fbm(7), fbm(8)
    f, ft = sine_field(2.0, 1 / 3), sine_field(1.5, 0.4)
    x, xt = solve(f, 0.2, y), solve(ft, -0.3, yt)
    a = stability_bound(f, ft, x, xt, y, yt, 0.6)
    b = stability_bound(ft, f, xt, x, yt, y, 0.6)
    assert a.lhs == b.lhs
    assert a.factors["exponent"] > 0


# ---------------------------------------------------------------------------
# subdivision plan


def test_plan_beta_one_gives_unit_step():
    meta = FieldMeta(sup_df=1 / 3, a0=0.1, a1=0.2)
    plan = subdivision_plan(meta, 1.0, 2.5, 1.0)
    assert plan.delta == 1.0 and plan.n_intervals == 3


def test_plan_zero_driver():
    plan = subdivision_plan(LINEAR, 0.0, 1.0, 0.6, 2.0)
    assert plan.n_intervals == 1 and plan.delta == 1.0
    assert plan.D_contraction == 1.0 and plan.F_offset == 0.0
    assert plan.bound_at(1) == 2.0


def test_plan_dominates_linear_solution():
    for seed in range(5):
        y = fbm(seed)
        x0 = 1.0
        plan = subdivision_plan(LINEAR, holder_seminorm(y, 0.6), 1.0, 0.6, x0)
        x = x0 * np.exp(y.values[:, 0] - y.values[0, 0])
        for j, t in enumerate(plan.endpoints()):
            measured = np.abs(x[y.times <= t + 1e-15]).max()
            assert measured <= plan.bound_at(j)


@given(st.floats(0, 5), st.floats(0, 5), st.floats(0, 5), st.floats(1e-3, 20), st.floats(0.1, 5), st.floats(0.5, 1.0))
def test_plan_gating_and_count(sup_df, a0, a1, y_semi, T, beta):
    plan = subdivision_plan(FieldMeta(sup_df=sup_df, a0=a0, a1=a1), y_semi, T, beta)
    db = plan.delta**beta
    for c in (plan.A, plan.B, plan.C):
        assert c * db <= 1 / 3
    if max(plan.A, plan.B, plan.C) > 0:
        assert plan.n_intervals == max(1, math.ceil(T / plan.delta - 1e-12))
        assert plan.n_intervals * plan.delta >= T * (1 - 1e-12)
    assert plan.D_contraction >= 1 and plan.F_offset >= 0
    assert len(plan.bounds) == plan.n_intervals + 1


# ---------------------------------------------------------------------------
# calibration


def zero_driver_report(kind):
    if kind == "bounded_24":
        return bound_bounded(BOUNDED, 0.0, 1.0, 0.6, 1.0, lhs=1.0)
    return bound_linear_growth(LINEAR, 0.0, 1.0, 0.6, 1.0, lhs=1.0)


def test_calibrate_examples():
    for kind in ("bounded_24", "linear_growth_25"):
        assert calibrate_k([zero_driver_report(kind)] * 3) == 0.0
    r = bound_bounded(BOUNDED, 1.0, 1.0, 0.6, 0.0)
    r.lhs = r.rhs_without_k
    assert calibrate_k([r]) == pytest.approx(1.0, rel=1e-14)
    e = bound_linear_growth(LINEAR, 1.0, 1.0, 0.6, 1.0, lhs=2.0 * 4.0)
    assert calibrate_k([e]) == pytest.approx(2.0)
    assert calibrate_k([bound_linear_growth(LINEAR, 1.0, 1.0, 0.6, 1.0, lhs=0.5)]) == 0.0


def test_calibrate_errors():
    with pytest.raises(CalibrationError):
        calibrate_k([])
    with pytest.raises(CalibrationError):
        calibrate_k([zero_driver_report("bounded_24"), zero_driver_report("linear_growth_25")])
    stuck = bound_bounded(BOUNDED, 0.0, 1.0, 0.6, 1.0, lhs=2.0)
    with pytest.raises(CalibrationError):
        calibrate_k([stuck])
    with pytest.raises(CalibrationError):
        calibrate_k([bound_bounded(BOUNDED, 1.0, 1.0, 0.6, 1.0)])


@given(st.lists(st.tuples(pos, st.floats(0, 3), st.floats(0, 50)), min_size=1, max_size=20))
def test_calibrated_k_covers_its_sweep(rows):
    reports = [bound_linear_growth(LINEAR, y, 1.0, 0.6, x0, lhs=lhs) for y, x0, lhs in rows]
    k = calibrate_k(reports)
    assert not any(violates(r, k, rtol=1e-9) for r in reports)


def test_json_round_trip():
    r = bound_linear_growth(LINEAR, 1.3, 1.0, 0.6, 0.4, lhs=2.0)
    r.k_hat = 0.7
    data = json.loads(r.to_json())
    assert set(data) == {"kind", "rhs_without_k", "factors", "lhs", "k_hat"}
    back = BoundReport.from_dict(data)
    assert back == r
    assert "k_hat" not in bound_bounded(BOUNDED, 1.0, 1.0, 0.6, 0.0).to_dict()
    with pytest.raises(DomainError):
        BoundReport("other", 0.0, {})


def test_factors_nonnegative_and_reproducible():
    y = fbm(9)
    f = sine_field(2.0, 1 / 3)
    x = solve(f, 0.3, y)
    xt = solve(constant_field(0.5), 0.1, y)
    reports = [
        bound_bounded(f.meta, holder_seminorm(y, 0.6), 1.0, 0.6, 0.3),
        bound_linear_growth(f.meta, holder_seminorm(y, 0.6), 1.0, 0.6, 0.3),
        stability_bound(f, constant_field(0.5), x, xt, y, y, 0.6),
    ]
    for r in reports:
        assert all(v >= 0 for v in r.factors.values())
        assert rhs_from_factors(r) == pytest.approx(r.rhs_without_k, rel=1e-14)
        assert r.rhs_without_k >= 0
