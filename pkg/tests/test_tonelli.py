"""Characteristic flows, curvature estimates, windows, two-sided smoothing."""

import numpy as np
import pytest

import weakkam as wk
from weakkam.errors import ConfigError, NotTonelliError
from weakkam.grid import GridFn, GridSpec
from weakkam.hamiltonian import eikonal_model, mechanical_model
from weakkam.semigroup import build_kernel, refold_kernel
from weakkam.subsol import build_strict_strictly_convex
from weakkam.tonelli import (FlowState, bernard_regularize,
                             check_envelope_identity, contraction_check,
                             estimate_semiconcavity, flow_integrate,
                             kernel_semiconcavity, lifted_mask_deviation,
                             mask_gradient_agreement, regular_window,
                             verify_minimizer_is_characteristic)


def test_non_tonelli_models_are_refused(flat64):
    model = eikonal_model(dim=1, offset=2.0, field_bound=1.0)
    env = flat64["env"]
    with pytest.raises(NotTonelliError) as exc:
        flow_integrate(model, env, FlowState([0.0], [0.5]), 1.0, 1e-2)
    assert exc.value.failed_conditions
    with pytest.raises(NotTonelliError):
        regular_window(2.0, 1.0, model, env)


def test_free_particle_flow_is_exact(flat64):
    model, env = flat64["model"], flat64["env"]
    traj = flow_integrate(model, env, FlowState([0.0], [1.0]), 1.0, 1.0 / 64.0)
    # the RK4 stages are exact on a linear-in-time flow
    assert traj.xi[-1][0] == 1.0
    assert float(np.ptp(traj.eta)) == 0.0
    assert traj.drift == 0.0
    with pytest.raises(ConfigError):
        flow_integrate(model, env, FlowState([0.0], [1.0]), 1.0, 0.0)


def test_pendulum_flow_reverses_and_conserves_energy(pend64):
    model, env = pend64["model"], pend64["env"]
    fwd = flow_integrate(model, env, FlowState([0.3], [0.7]), 0.5, 1e-3)
    back = flow_integrate(model, env, FlowState(fwd.xi[-1], fwd.eta[-1]),
                          -0.5, 1e-3)
    assert abs(back.xi[-1][0] - 0.3) <= 1e-10
    assert abs(back.eta[-1][0] - 0.7) <= 1e-10
    long_run = flow_integrate(model, env, FlowState([0.25], [0.5]), 10.0, 1e-3)
    assert long_run.drift <= 1e-6


def test_second_difference_scan_matches_discrete_eigenvalue(pend64):
    grid = pend64["grid"]
    v = GridFn.from_callable(grid, lambda x: np.cos(2 * np.pi * x[:, 0]))
    rep = estimate_semiconcavity(v, k_reference=(2 * np.pi) ** 2)
    exact = (2.0 - 2.0 * np.cos(2 * np.pi * grid.h)) / grid.h**2
    assert rep.k_upper == exact
    assert rep.k_lower == -exact
    assert not rep.unbounded_above and not rep.unbounded_below
    assert rep.semiconcave and rep.semiconvex


def test_kinks_score_at_the_flagging_scale(pend64):
    grid = pend64["grid"]
    v = GridFn.from_callable(grid, lambda x: np.minimum(x[:, 0] % 1.0,
                                                        1.0 - x[:, 0] % 1.0))
    rep = estimate_semiconcavity(v)
    assert rep.k_upper == 2.0 / grid.h and rep.k_lower == -2.0 / grid.h
    assert rep.unbounded_above and rep.unbounded_below
    assert rep.kink_scale == 1.0 / grid.h
    assert rep.argmax_index == 0 and rep.argmin_index == grid.size // 2
    assert rep.semiconcave is None  # no reference supplied


def test_kernel_curvature_is_a_staircase_in_time(pend64):
    kern = pend64["kernel"]
    one = kernel_semiconcavity(kern, kern.dt)
    four = kernel_semiconcavity(kern, 4 * kern.dt)
    assert one == pytest.approx(four, rel=1e-9)
    assert 1.0 / kern.dt <= one <= 1.05 / kern.dt


def test_window_constants_are_reproducible(pend64):
    model, env = pend64["model"], pend64["env"]
    win = regular_window(2.0, 1.0, model, env)
    assert win.t0 == 2.0**-8
    # energy ceiling from |p| <= 2 is 3, giving momentum radius sqrt(8)
    assert win.rho == pytest.approx(np.sqrt(8.0), abs=1e-4)
    assert win.ell == pytest.approx((2 * np.pi) ** 2, rel=1e-12)
    assert win.r_kappa0 == pytest.approx(2.0 + 2.0 * np.sqrt(2.0), rel=1e-12)
    assert win.a_const == pytest.approx(3.3000358749388656, rel=1e-9)
    assert set(win.constraints) == {"contraction", "rate_time", "excursion"}
    assert win.constraints["contraction"] < 0.5
    assert win.constraints["rate_time"] < 0.25
    assert win.constraints["excursion"] < 0.25


def test_gradient_fed_flows_contract_inside_the_window(pend64):
    model, env = pend64["model"], pend64["env"]
    win = regular_window(2.0, 1.0, model, env)
    rep = contraction_check(win, model, env, n_pairs=100, dt=1e-3, seed=0)
    assert rep.passed and rep.lipschitz <= 0.5
    assert rep.lipschitz == pytest.approx(0.0041605, abs=1e-5)
    assert rep.max_energy_drift <= 1e-9


def test_two_sided_smoothing_earns_all_five_certificates(pend64):
    model, env, grid = pend64["model"], pend64["env"], pend64["grid"]
    kern, c, w, mask = (pend64[k] for k in ("kernel", "c", "w", "mask"))
    win = regular_window(2.0, 1.0, model, env)
    fine = refold_kernel(build_kernel(model, env, grid, dt=win.t0,
                                      theta=kern.theta), c)
    v_strict = build_strict_strictly_convex(w, kern, c, 0.125, 6)
    bound = max(win.a_const, kernel_semiconcavity(fine, win.t0))
    w_eps, rep = bernard_regularize(v_strict, fine, c, win.t0, win.t0,
                                    mask=mask, strict_input=True,
                                    curvature_bound=bound)
    assert rep.passed
    assert rep.subsolution_ok and rep.curvature_ok and rep.sup_ok
    assert rep.mask_ok and rep.strict_ok
    assert rep.warnings == []
    assert rep.mask_agreement == 0.0
    assert rep.sup_change <= rep.sup_bound
    assert w_eps.grid.size == grid.size


def test_smoothing_without_mask_or_strictness_flag(pend64):
    model, env, grid = pend64["model"], pend64["env"], pend64["grid"]
    kern, c, w = pend64["kernel"], pend64["c"], pend64["w"]
    win = regular_window(2.0, 1.0, model, env)
    fine = refold_kernel(build_kernel(model, env, grid, dt=win.t0,
                                      theta=kern.theta), c)
    _, rep = bernard_regularize(w, fine, c, win.t0, win.t0)
    assert rep.mask_ok is None and rep.strict_ok is None
    assert rep.curvature_ok is None
    assert len(rep.warnings) == 1  # input strictness not certified
    assert rep.passed == (rep.subsolution_ok and rep.sup_ok)


def test_envelope_identity_at_one_step(pend64):
    kern, grid = pend64["kernel"], pend64["grid"]
    u0 = GridFn.from_callable(grid, lambda x: 0.3 * np.cos(2 * np.pi * x[:, 0]))
    rep = check_envelope_identity(u0, kern, kern.dt, 0.3 * (2 * np.pi) ** 2,
                                  [0, 16, 32, 48])
    # the paraboloid sits below the data and shares the contact argmin
    assert rep.min_discrepancy >= 0.0
    assert rep.max_discrepancy == 0.0


def test_lifted_mask_is_flow_invariant_for_the_corrector(pend64, pendulum_corrector):
    model, env, mask = pend64["model"], pend64["env"], pend64["mask"]
    u = GridFn.from_callable(pend64["grid"], lambda p: pendulum_corrector(p[:, 0]))
    assert u.central_gradient()[0][0] == 0.0
    dev = lifted_mask_deviation(mask, u, model, env, t_span=1.0, dt=1e-3)
    assert dev == 0.0
    with pytest.raises(ConfigError):
        lifted_mask_deviation(np.zeros(u.grid.size, dtype=bool), u, model, env)


def test_gradients_agree_on_the_mask_for_symmetric_members(pend64, pendulum_corrector):
    lib, mask = pend64["lib"], pend64["mask"]
    corrector = GridFn.from_callable(pend64["grid"],
                                     lambda p: pendulum_corrector(p[:, 0]))
    assert mask_gradient_agreement(lib.members[:2], mask) == 0.0
    assert mask_gradient_agreement([corrector, lib.members[0]], mask) == 0.0
    with pytest.raises(ConfigError):
        mask_gradient_agreement(lib.members[:2],
                                np.zeros(pend64["grid"].size, dtype=bool))


def test_minimizing_chains_shadow_characteristics(pend64):
    kern, w = pend64["kernel"], pend64["w"]
    rep = verify_minimizer_is_characteristic(w, kern, 16, 0.5)
    assert rep.max_deviation <= 0.15  # ~10 cells at n=64; halves at n=128
    assert rep.energy_drift <= 1e-9
    assert rep.chain_indices.shape == (33,)
    assert rep.chain_points.shape == rep.flow_points.shape == (33, 1)
    assert np.isfinite(rep.terminal_momentum).all()
