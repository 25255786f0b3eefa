"""Support costs, path semidistances, and the bisected critical level."""

import numpy as np
import pytest

import weakkam as wk
from weakkam.errors import ConfigError, SubcriticalLevelError
from weakkam.grid import GridFn, GridSpec
from weakkam.hamiltonian import (mechanical_model, reversed_model,
                                 tilted_mechanical_model)
from weakkam.metric import (build_cost_graph, check_subsolution,
                            critical_value_free, critical_value_stationary,
                            semidistance, support_sigma)


@pytest.fixture(scope="module")
def flat_env():
    spec = wk.EnvSpec(kind="periodic", dimension=1, seed=0,
                      params={"amplitudes": (0.0,)})
    return wk.sample_realization(spec, 0)


@pytest.fixture(scope="module")
def cosine_env():
    spec = wk.EnvSpec(kind="periodic", dimension=1, seed=0,
                      params={"amplitudes": (1.0,)})
    return wk.sample_realization(spec, 0)


def test_support_cost_closed_form(flat_env, cosine_env):
    m = mechanical_model(dim=1, field_bound=1.0)
    # flat field: sigma_a(x, q) = |q| sqrt(2a)
    val = support_sigma(m, np.array([[0.0]]), np.array([[0.25]]), 0.5, flat_env)
    assert np.allclose(val, 0.25)
    # cosine field at the origin, level 1: sublevel degenerates, cost 0
    val0 = support_sigma(m, np.array([[0.0]]), np.array([[0.25]]), 1.0, cosine_env)
    assert np.allclose(val0, 0.0)
    # below the field value the sublevel is empty: NaN signals it
    bad = support_sigma(m, np.array([[0.0]]), np.array([[0.25]]), 0.5, cosine_env)
    assert np.all(np.isnan(bad))


def test_flat_semidistance_is_the_torus_metric(flat_env):
    m = mechanical_model(dim=1, field_bound=0.0)
    g = GridSpec(dim=1, n=64)
    sd = semidistance(m, 0.5, [0], flat_env, g, radius=0.1)
    expected = g.torus_dist(g.points(), np.zeros((1, 1)))
    assert np.max(np.abs(sd.values[0] - expected)) == 0.0
    assert sd.as_gridfn(0).values[0] == 0.0


def test_semidistance_triangle_inequality(cosine_env):
    m = mechanical_model(dim=1, field_bound=1.0)
    g = GridSpec(dim=1, n=64)
    sources = [0, 16, 40]
    sd = semidistance(m, 1.0, sources, cosine_env, g, radius=0.15)
    rng = np.random.default_rng(0)
    worst = -np.inf
    for _ in range(200):
        i, k = rng.integers(0, len(sources), size=2)
        x = rng.integers(0, g.size)
        # S(s_i, x) <= S(s_i, s_k) + S(s_k, x)
        lhs = sd.values[i, x]
        rhs = sd.values[i, sources[k]] + sd.values[k, x]
        worst = max(worst, lhs - rhs)
    assert worst <= 1e-9


def test_negative_cycle_raises_with_witness(flat_env):
    tm = tilted_mechanical_model(p0=(0.5,), dim=1, field_bound=0.0)
    g = GridSpec(dim=1, n=64)
    with pytest.raises(SubcriticalLevelError) as err:
        semidistance(tm, 0.05, [0], flat_env, g, radius=0.1)
    assert err.value.cycle is not None and len(err.value.cycle) > 1


def test_cost_graph_infeasible_below_field_max(cosine_env):
    m = mechanical_model(dim=1, field_bound=1.0)
    g = GridSpec(dim=1, n=64)
    with pytest.raises(SubcriticalLevelError) as err:
        build_cost_graph(m, 0.9, cosine_env, g, radius=0.1)
    assert err.value.empty_at is not None


def test_critical_value_bisection_flat_and_tilted(flat_env):
    m = mechanical_model(dim=1, field_bound=0.0)
    g = GridSpec(dim=1, n=64)
    res = critical_value_free(m, flat_env, g)
    assert res.hi == 0.0              # upper end certified feasible
    assert abs(res.value - 0.0) <= res.bracket_width
    assert res.certificate["reason"] in ("empty_sublevel", "negative_cycle")
    tm = tilted_mechanical_model(p0=(0.5,), dim=1, field_bound=0.0)
    res2 = critical_value_free(tm, flat_env, g)
    # the tilt pays |p0|^2/2 to stand still
    assert abs(res2.value - 0.125) <= res2.bracket_width + 1e-12
    assert res2.hi >= 0.125 - 1e-12


def test_critical_value_pendulum_hits_field_max(cosine_env):
    m = mechanical_model(dim=1, field_bound=1.0)
    g = GridSpec(dim=1, n=64)
    res = critical_value_free(m, cosine_env, g, tol_bisect=5e-3)
    assert abs(res.value - 1.0) <= 2e-2
    assert res.bracket_width <= 1e-2
    assert res.lo <= 1.0 <= res.hi + 1e-2


def test_check_subsolution_gradient_route(cosine_env):
    m = mechanical_model(dim=1, field_bound=1.0)
    g = GridSpec(dim=1, n=64)
    zero = GridFn.zeros(g)
    rep = check_subsolution(zero, m, 1.0, cosine_env)
    assert rep.passed and rep.max_violation <= 0.0
    rep2 = check_subsolution(zero, m, 0.5, cosine_env, tol=1e-3)
    assert not rep2.passed
    # worst point sits at the field maximum
    assert np.isclose(rep2.max_violation, 0.5)


def test_semidistance_sources_accept_coordinates(flat_env):
    m = mechanical_model(dim=1, field_bound=0.0)
    g = GridSpec(dim=1, n=64)
    by_index = semidistance(m, 0.5, [8], flat_env, g, radius=0.1)
    by_coord = semidistance(m, 0.5, [np.array([8 / 64])], flat_env, g, radius=0.1)
    assert np.array_equal(by_index.values, by_coord.values)


def test_stationary_estimates_shapes_and_determinism():
    spec = wk.EnvSpec(kind="random_fourier", dimension=1, seed=7,
                      params={"amplitude": 0.5, "k_max": 3, "decay": 1.0,
                              "period": 8.0})
    m = mechanical_model(dim=1, field_bound=0.5)
    res = critical_value_stationary(m, spec, n_samples=2, box_radii=(2.0, 4.0),
                                    points_per_unit=16, tol_bisect=1e-2)
    assert res.estimates.shape == (2, 2)
    assert res.means.shape == (2,) and res.spreads.shape == (2,)
    res2 = critical_value_stationary(m, spec, n_samples=2, box_radii=(2.0, 4.0),
                                     points_per_unit=16, tol_bisect=1e-2)
    assert np.array_equal(res.estimates, res2.estimates)
