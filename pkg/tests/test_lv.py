import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from pmfrontier.errors import DomainError, ExtrapolationError, GateViolation, InvariantBreach
from pmfrontier.lv import (Barrier, BarrierKind, LVSubParams, LVSupParams, LVTrajectory, band_table,
                           barrier_residual, check_gate, check_gate_sub, check_invariants, closed_form_bounds_sub,
                           closed_form_bounds_sup, eval_barrier, integrate, rhs_sub, rhs_sup, support_bound,
                           support_radius_series)


def sub(alpha0=0.5, beta0=0.1, **kw):
    args = dict(p_m=1.0, m=2.0, n=2, d_g=1.0, alpha0=alpha0, beta0=beta0)
    args.update(kw)
    return LVSubParams(**args)


def sup(lambda0=0.7, kappa0=0.05, **kw):
    args = dict(p_m=1.0, m=2.0, n=2, D_g=1.0, lambda0=lambda0, kappa0=kappa0)
    args.update(kw)
    return LVSupParams(**args)


def test_gate_sub_standard_margins():
    g = check_gate_sub(sub())
    assert g.ok
    assert (g.upper_margin, g.lower_margin) == pytest.approx((0.1, 0.3), abs=1e-15)


def test_gate_sub_rejects_large_alpha():
    g = check_gate(sub(alpha0=0.65))
    assert not g.ok
    assert g.failed_gate() == "ini1 upper gate"


def test_gate_sub_rejects_small_beta():
    # 1 - 8 * 0.05 = 0.6 is not below alpha0 = 0.5
    g = check_gate(sub(beta0=0.05))
    assert not g.ok
    assert g.failed_gate() == "ini1 lower gate"


def test_gate_sup_standard():
    g = check_gate(sup())
    assert g.ok and g.gate == "lowini"
    assert g.upper_margin == pytest.approx(0.1)
    assert g.lower_margin == pytest.approx(0.8)


def test_rhs_sub_examples():
    assert rhs_sub(sub(), (1.0, 0.0)) == (0.0, 0.0)
    assert rhs_sub(sub(), (0.5, 0.1)) == pytest.approx((0.05, -0.03), abs=1e-15)
    beta = 0.07
    da, db = rhs_sub(sub(), (0.0, beta))
    assert da == 0.0
    assert db == pytest.approx(beta * (1.0 - 8.0 * beta))


def test_rhs_sup_examples():
    assert rhs_sup(sup(), (1.0, 0.0)) == (0.0, 0.0)
    assert rhs_sup(sup(), (0.7, 0.05)) == pytest.approx((0.07, -0.04), abs=1e-15)
    dl, dk = rhs_sup(sup(), (0.3, 0.0))
    assert dl == pytest.approx(0.3 * 0.7) and dk == 0.0


def test_integrate_zero_horizon():
    traj = integrate(sub(), 0.0)
    assert traj.times.tolist() == [0.0]
    assert traj.states.tolist() == [[0.5, 0.1]]


def test_integrate_rejects_gate_violation():
    with pytest.raises(GateViolation, match="ini1 upper gate"):
        integrate(sub(alpha0=0.65), 1.0)


def test_integrate_rejects_bad_dt():
    with pytest.raises(DomainError):
        integrate(sub(), 1.0, dt=0.05)


def test_integrate_sub_within_gap_band():
    p = sub()
    traj = integrate(p, 100.0)
    b = closed_form_bounds_sub(p, 100.0)
    gap = 1.0 - traj.first[-1]
    assert b.gap_low <= gap <= b.gap_high
    assert traj.times[-1] == 100.0


def test_integrate_sup_kappa_band():
    traj = integrate(sup(), 10.0)
    k10 = traj.second[-1]
    assert 0.05 * math.exp(-12.0) <= k10 <= 0.05 / 0.7 * math.exp(-7.0)


def test_rk4_against_reference_solver():
    from scipy.integrate import solve_ivp

    p = sub()
    traj = integrate(p, 10.0, dt=1e-2)
    ref = solve_ivp(lambda t, y: rhs_sub(p, y), (0, 10), list(p.initial), rtol=1e-12, atol=1e-14,
                    t_eval=traj.times[::100])
    assert np.max(np.abs(traj.states[::100] - ref.y.T)) < 1e-9


def test_bounds_sub_at_zero():
    b = closed_form_bounds_sub(sub(), 0.0)
    assert (b.beta_low, b.beta_high) == pytest.approx((0.1, 0.2))


def test_bounds_sub_gap_rates_are_inverse_time():
    p = sub()
    t = np.array([1e3, 1e4])
    b = closed_form_bounds_sub(p, t)
    assert np.all(np.diff(t * b.gap_low) / (t[0] * b.gap_low[0]) < 0.01)
    ratio = b.gap_high / b.gap_low
    assert np.all(ratio < 20) and abs(ratio[1] / ratio[0] - 1) < 0.01


def test_bounds_sup_rates():
    p = sup()
    b0 = closed_form_bounds_sup(p, 0.0)
    assert b0.ratio_low == pytest.approx(14.0) and b0.ratio_high == pytest.approx(14.0)
    assert b0.fast_rate == pytest.approx(1.2) and b0.slow_rate == pytest.approx(0.7)
    kh = closed_form_bounds_sup(p, np.linspace(0, 10, 50)).kappa_high
    assert np.all(np.diff(kh) < 0)


def test_beta_band_holds_along_trajectory():
    p = sub()
    traj = integrate(p, 200.0, dt=1e-2)
    bands = band_table(traj)
    assert np.all(bands["beta_low"] <= traj.second * (1 + 1e-12))
    assert np.all(traj.second <= bands["beta_high"] * (1 + 1e-12))


def test_literal_beta_band_without_factor_four_fails():
    # alpha0 t <= alpha/beta - alpha0/beta0 <= P_M t, as printed, is broken by the trajectory
    traj = integrate(sub(), 1.0)
    excess = traj.first / traj.second - 5.0
    assert np.any(excess[1:] > traj.times[1:])


def test_sup_bands_hold_along_trajectory():
    traj = integrate(sup(), 20.0)
    bands = band_table(traj)
    ratio = traj.first / traj.second
    assert np.all(bands["ratio_low"] <= ratio * (1 + 1e-9)) and np.all(ratio <= bands["ratio_high"] * (1 + 1e-9))
    assert np.all(bands["kappa_low"] <= traj.second * (1 + 1e-9))
    assert np.all(traj.second <= bands["kappa_high"] * (1 + 1e-9))


def test_check_invariants_names_first_bad_sample():
    p = sub()
    good = integrate(p, 1.0, check=False)
    states = good.states.copy()
    states[37, 1] = states[36, 1] * 1.01
    bad = LVTrajectory(good.times, states, BarrierKind.SUB, good.dt, p)
    with pytest.raises(InvariantBreach) as exc:
        check_invariants(bad)
    assert exc.value.index == 37


def test_eval_barrier_examples():
    b = Barrier(integrate(sub(), 1.0))
    assert eval_barrier(b, 0.0, 0.0) == 0.5
    assert eval_barrier(b, 0.0, 3.0) == 0.0
    assert b.support_radius(0.0) == pytest.approx(math.sqrt(5.0), abs=1e-12)
    with pytest.raises(ExtrapolationError):
        eval_barrier(b, 1.5, 0.0)


def test_support_radius_series():
    t, R = support_radius_series(Barrier(integrate(sub(), 20.0)))
    assert R[0] == pytest.approx(math.sqrt(5.0))
    assert np.all(np.diff(R) > 0)
    p = sup()
    t, R = support_radius_series(Barrier(integrate(p, 10.0)))
    growth = math.sqrt(14.0) * np.exp(0.6 * t)
    assert np.all(R <= growth * (1 + 1e-12))
    assert np.allclose(support_bound(p, t), growth, rtol=1e-14)


def test_residual_vanishes_on_axis_for_tumor(tumor):
    b = Barrier(integrate(sub(), 5.0))
    t = np.linspace(0, 5, 11)
    assert np.max(np.abs(barrier_residual(b, tumor, t, 0.0))) < 1e-14


def _interior_points(b, rng, count, t_end):
    t = rng.uniform(0.0, t_end, count)
    a, c = b.trajectory.at(t)
    R = np.sqrt(a / c)
    r = R * np.sqrt(rng.uniform(0.0, 0.999, count))
    return t, r


@pytest.mark.parametrize("model, ab, lk", [("tumor", (0.5, 0.1), (0.7, 0.05)), ("fisher", (1.0, 0.1), (1.4, 0.05))])
def test_residual_signs(model, ab, lk, request, rng):
    spec = request.getfixturevalue(model)
    sb = Barrier(integrate(LVSubParams.from_model(spec, 2, *ab), 10.0))
    t, r = _interior_points(sb, rng, 2000, 10.0)
    assert np.max(barrier_residual(sb, spec, t, r)) <= 1e-8 * spec.p_m
    pb = Barrier(integrate(LVSupParams.from_model(spec, 2, *lk), 10.0))
    t, r = _interior_points(pb, rng, 2000, 10.0)
    assert np.min(barrier_residual(pb, spec, t, r)) >= -1e-8 * spec.p_m


def test_residual_outside_support_raises(tumor):
    b = Barrier(integrate(sub(), 1.0))
    with pytest.raises(DomainError):
        barrier_residual(b, tumor, 0.0, 3.0)


@settings(max_examples=40, deadline=None)
@given(alpha0=st.floats(0.05, 0.95), u=st.floats(0.05, 0.95), m=st.floats(1.2, 3.0))
def test_gated_trajectories_keep_invariants(alpha0, u, m):
    # beta0 drawn inside the open gate interval
    c_lo, c_hi = 4.0, (4.0 * (m - 1) + 4.0) / (m - 1)
    lo, hi = (1 - alpha0) / c_hi, (1 - alpha0) / c_lo
    p = sub(alpha0=alpha0, beta0=lo + u * (hi - lo), m=m)
    assume(check_gate(p).ok)
    traj = integrate(p, 5.0)
    check_invariants(traj)
    assert np.all(np.diff(traj.first / traj.second) > 0)
