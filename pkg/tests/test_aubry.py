"""Subsolution libraries, fixed-point masks, extensions, calibrated chains."""

import numpy as np
import pytest

import weakkam as wk
from weakkam.aubry import (_edge_shortest_paths, build_library, build_w,
                           classical_aubry, default_eps, detect_aubry,
                           extract_calibrated_curve, fixed_point_set,
                           folded_edge_costs, lax_extension, verify_member)
from weakkam.errors import (ConfigError, EmptyAubryMaskError,
                            NotASubsolutionError, SubcriticalLevelError)
from weakkam.grid import GridFn, GridSpec
from weakkam.hamiltonian import mechanical_model
from weakkam.semigroup import build_kernel, discrete_critical_value, refold_kernel


def test_every_library_member_verifies_on_every_edge(pend64):
    lib = pend64["lib"]
    assert len(lib.members) == 8  # cone + anticone per seed
    assert all(lib.verified)
    assert max(lib.violations) <= 1e-12
    assert {"cone[0]", "anticone[0]"} <= set(lib.labels)
    # members are pinned to vanish at the origin node
    for v in lib.members:
        assert v.values[0] == 0.0


def test_library_image_and_extra_members_also_verify(pend64):
    kern, model, env, c, grid = (pend64[k] for k in
                                 ("kernel", "model", "env", "c", "grid"))
    lib = build_library(model, c, env, kern, n_seeds=2,
                        image_time=2 * kern.dt, extra=(GridFn.zeros(grid),))
    assert len(lib.members) == 6
    assert all(lib.verified), lib.violations
    assert lib.labels[-1] == "user[0]"
    assert any(lab.startswith("image[") for lab in lib.labels)


def test_mix_weights_are_geometric_and_renormalized(pend64):
    lib = pend64["lib"]
    w2 = build_w(lib, m_terms=2)
    expect = (0.5 * lib.members[0].values + 0.25 * lib.members[1].values) / 0.75
    assert np.max(np.abs(w2.values - expect)) <= 1e-15
    with pytest.raises(ConfigError):
        build_w(lib, m_terms=0)
    with pytest.raises(ConfigError):
        build_w(lib, m_terms=len(lib.members) + 1)


def test_mix_refuses_unverified_member(pend64):
    kern, model, env, c, grid = (pend64[k] for k in
                                 ("kernel", "model", "env", "c", "grid"))
    lib = build_library(model, c, env, kern, n_seeds=2)
    rng = np.random.default_rng(0)
    bad = GridFn(grid, 10.0 * rng.standard_normal(grid.size))
    assert lib.add(bad, kern, "bad") is False
    with pytest.raises(NotASubsolutionError):
        build_w(lib)
    # mixing only the clean prefix still works
    build_w(lib, m_terms=4)


def test_fixed_point_set_requires_a_subsolution(pend64):
    kern, c, grid, w = (pend64[k] for k in ("kernel", "c", "grid", "w"))
    rng = np.random.default_rng(4)
    bad = GridFn(grid, 10.0 * rng.standard_normal(grid.size))
    with pytest.raises(NotASubsolutionError):
        fixed_point_set(bad, kern, c, kern.dt, 1e-6)
    fp = fixed_point_set(w, kern, c, kern.dt, 1e-6)
    assert fp.dtype == bool and fp.shape == (grid.size,)
    assert fp[0]  # the hilltop is fixed already at one step


def test_pendulum_mask_is_the_single_hilltop_cell(pend64):
    mask = pend64["mask"]
    assert list(mask.indices()) == [0]
    # folded residual is exactly zero on the Aubry cell
    assert mask.residual[0] == 0.0
    # threshold sensitivity: halving or doubling eps moves nothing
    for lab in ("half", "two"):
        assert np.array_equal(mask.thresholds[lab], mask.mask)
    assert mask.coords().shape == (1, 1)


def test_flat_mask_is_the_whole_torus_with_zero_residual(flat64):
    kern, c, grid = flat64["kernel"], flat64["c"], flat64["grid"]
    mask = detect_aubry(GridFn.zeros(grid), kern, c, 2.0)
    assert bool(np.all(mask.mask))
    assert float(np.max(np.abs(mask.residual))) == 0.0


def test_closed_orbit_surrogate_agrees_with_fixed_point_route(pend64):
    kern, c, mask = pend64["kernel"], pend64["c"], pend64["mask"]
    cl = classical_aubry(kern, c, 4.0)
    assert np.array_equal(cl.mask, mask.mask)
    assert cl.residual[0] == 0.0


def test_default_eps_scales_with_range():
    assert default_eps(np.array([0.0, 2.0])) == pytest.approx(2e-6)
    assert default_eps(np.array([0.0, 0.5])) == pytest.approx(1e-6)


def test_tail_warnings_and_too_short_ladder(pend64):
    kern, c, w = pend64["kernel"], pend64["c"], pend64["w"]
    long_run = detect_aubry(w, kern, c, 4.0)
    assert long_run.warnings == []
    short_run = detect_aubry(w, kern, c, 0.5)
    assert any("ladder" in msg for msg in short_run.warnings)
    with pytest.raises(ConfigError):
        detect_aubry(w, kern, c, 0.5 * kern.dt)


def test_detect_aubry_rejects_non_subsolutions(pend64):
    kern, c, grid = pend64["kernel"], pend64["c"], pend64["grid"]
    rng = np.random.default_rng(5)
    bad = GridFn(grid, 10.0 * rng.standard_normal(grid.size))
    with pytest.raises(NotASubsolutionError) as exc:
        detect_aubry(bad, kern, c, 2.0)
    assert exc.value.violation > 0


def test_subcritical_level_is_flagged_as_negative_cycle(pend64):
    kern, c = pend64["kernel"], pend64["c"]
    with pytest.raises(SubcriticalLevelError):
        _edge_shortest_paths(folded_edge_costs(kern, c - 0.5), 0)
    with pytest.raises(SubcriticalLevelError):
        build_library(pend64["model"], c - 0.5, pend64["env"], kern)


def test_lax_extension_from_the_mask_is_a_subsolution(pend64):
    kern, c, grid, mask = (pend64[k] for k in ("kernel", "c", "grid", "mask"))
    model, env = pend64["model"], pend64["env"]
    u = lax_extension(GridFn.zeros(grid), mask.mask, model, c, env, kernel=kern)
    assert u.values[0] == 0.0
    ok, worst = verify_member(u, kern, c)
    assert ok and worst <= 1e-9
    with pytest.raises(EmptyAubryMaskError):
        lax_extension(GridFn.zeros(grid), np.zeros(grid.size, dtype=bool),
                      model, c, env, kernel=kern)
    with pytest.raises(ConfigError):
        lax_extension(GridFn.zeros(grid), mask.mask, model, c, env)


def test_calibrated_chain_at_the_rest_point(pend64):
    kern, c, w, mask = (pend64[k] for k in ("kernel", "c", "w", "mask"))
    cur = extract_calibrated_curve(0, w, kern, c, 8, model=pend64["model"],
                                   env=pend64["env"], mask=mask.mask)
    assert np.array_equal(cur.indices, np.zeros(9, dtype=int))
    assert cur.calibration_defect == 0.0
    assert cur.action_vs_semidistance == 0.0
    assert cur.stays_in_mask is True
    assert cur.step_costs.shape == (8,)


def test_moving_chain_action_dominates_semidistance(pend64):
    kern, c, w = pend64["kernel"], pend64["c"], pend64["w"]
    cur = extract_calibrated_curve(16, w, kern, c, 8, model=pend64["model"],
                                   env=pend64["env"], mask=pend64["mask"].mask)
    # each folded kernel edge over-prices the metric edge, so the chain action
    # dominates the semidistance between the endpoints
    assert cur.action_vs_semidistance >= -1e-9
    assert cur.stays_in_mask is False
    assert cur.coords.shape == (9, 1)


def test_two_dimensional_seed_layout_verifies():
    spec = wk.EnvSpec(kind="periodic", dimension=2, seed=0,
                      params={"amplitudes": (0.5,)})
    env = wk.sample_realization(spec, 0)
    model = mechanical_model(dim=2, field_bound=0.5)
    grid = GridSpec(dim=2, n=16)
    raw = build_kernel(model, env, grid, dt=1.0 / 32.0, theta=2.0)
    c = discrete_critical_value(raw)
    kern = refold_kernel(raw, c)
    lib = build_library(model, c, env, kern, n_seeds=4)
    assert len(lib.members) == 8
    assert all(lib.verified), lib.violations
