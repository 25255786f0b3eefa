"""Model catalog: convex duality, momentum radii, speed bounds, reversal."""

import numpy as np
import pytest

import weakkam as wk
from weakkam.errors import ConfigError, PRadiusError, SubcriticalLevelError
from weakkam.hamiltonian import (eikonal_model, kappa, legendre,
                                 lipschitz_radius, mechanical_model,
                                 model_catalog, nonstrict_model,
                                 reversed_model, sublevel_margin,
                                 tilted_mechanical_model)


@pytest.fixture(scope="module")
def cosine_env():
    spec = wk.EnvSpec(kind="periodic", dimension=1, seed=0,
                      params={"amplitudes": (1.0,)})
    return wk.sample_realization(spec, 0)


def test_mechanical_closed_forms(cosine_env):
    m = mechanical_model(dim=1, field_bound=1.0)
    x = np.array([[0.2]])
    p = np.array([[0.7]])
    q = np.array([[-1.3]])
    V = np.cos(2 * np.pi * 0.2)
    assert np.allclose(m.eval_H(x, p, cosine_env), 0.5 * 0.49 + V)
    assert np.allclose(m.eval_L(x, q, cosine_env), 0.5 * 1.69 - V)
    _, dp = m.eval_DH(x, p, cosine_env)
    assert np.allclose(dp, p)
    assert m.convex and m.strictly_convex and m.tonelli


def test_legendre_transform_recovers_the_dual(cosine_env):
    m = mechanical_model(dim=1, field_bound=1.0)
    x = np.array([0.37])
    q = np.array([1.21])
    res = legendre(m, x, q, cosine_env)
    V = np.cos(2 * np.pi * 0.37)
    assert abs(res.value - (0.5 * 1.21**2 - V)) < 1e-6
    assert abs(res.p_star[0] - 1.21) < 1e-4
    assert not res.boundary


def test_legendre_flags_scan_boundary(cosine_env):
    m = mechanical_model(dim=1, field_bound=1.0)
    with pytest.raises(PRadiusError):
        legendre(m, np.array([0.0]), np.array([100.0]), cosine_env, p_radius=6)


def test_eikonal_lagrangian_is_speed_limited(cosine_env):
    m = eikonal_model(dim=1, offset=2.0, field_bound=1.0)
    x = np.array([[0.0]])
    f0 = 2.0 + 1.0
    assert np.allclose(m.eval_L(x, np.array([[0.5]]), cosine_env), f0)
    assert np.isinf(m.eval_L(x, np.array([[1.5]]), cosine_env))
    assert np.allclose(m.eval_H(x, np.array([[0.25]]), cosine_env), 0.25 - f0)
    assert not m.tonelli
    with pytest.raises(ConfigError):
        eikonal_model(dim=1, offset=0.5, field_bound=1.0)


def test_nonstrict_model_flat_piece(cosine_env):
    m = nonstrict_model(dim=1, field_bound=1.0)
    x = np.array([[0.25]])     # field vanishes here
    p_small = np.array([[0.5]])
    p_big = np.array([[2.0]])
    assert np.allclose(m.eval_H(x, p_small, cosine_env), 0.0)  # inside the unit ball
    assert np.allclose(m.eval_H(x, p_big, cosine_env), 1.0)
    assert m.convex and not m.strictly_convex and not m.tonelli


def test_tilted_shifts_the_momentum_ball(cosine_env):
    m = tilted_mechanical_model(p0=(0.5,), dim=1, field_bound=1.0)
    x = np.array([[0.25]])
    p = np.array([[0.25]])
    assert np.allclose(m.eval_H(x, p, cosine_env), 0.5 * 0.75**2)
    q = np.array([[1.0]])
    assert np.allclose(m.eval_L(x, q, cosine_env), 0.5 - 0.5)
    with pytest.raises(ConfigError):
        tilted_mechanical_model(p0=(0.5, 0.5), dim=1)


def test_kappa_exact_on_cosine_well(cosine_env):
    m = mechanical_model(dim=1, field_bound=1.0)
    # level 1 touches the field maximum: momenta reach sqrt(2(1 - min V)) = 2
    assert np.isclose(kappa(m, 1.0, cosine_env), 2.0)
    # higher level grows like sqrt(2(a+1))
    assert np.isclose(kappa(m, 3.0, cosine_env), np.sqrt(8.0))
    # the radius is a sup over x: levels below max V still reach momenta
    assert np.isclose(kappa(m, 0.5, cosine_env), np.sqrt(3.0))
    # at the pointwise minimum of H the sublevel degenerates to p = 0
    assert kappa(m, -1.0, cosine_env) == 0.0
    with pytest.raises(SubcriticalLevelError):
        kappa(m, -1.5, cosine_env)


def test_sublevel_margin_orders_levels(cosine_env):
    m = mechanical_model(dim=1, field_bound=1.0)
    margin = sublevel_margin(m, 1.0, 2.0, cosine_env)
    assert margin > 0
    with pytest.raises(ConfigError):
        sublevel_margin(m, 2.0, 1.0, cosine_env)


def test_lipschitz_radius_matches_the_analytic_envelope():
    m = mechanical_model(dim=1, field_bound=1.0)
    theta = 2.0
    # the mechanical envelope: max(theta + sqrt(theta^2 + 4 vb), vb,
    #                              theta^2/2 + vb, 1) with vb = 1
    expected = max(theta + np.sqrt(theta**2 + 4.0), 1.0, theta**2 / 2 + 1.0, 1.0)
    assert np.isclose(lipschitz_radius(theta, m), expected)


def test_reversal_flips_momentum(cosine_env):
    m = mechanical_model(dim=1, field_bound=1.0)
    r = reversed_model(m)
    x = np.array([[0.3]])
    p = np.array([[0.8]])
    assert np.allclose(r.eval_H(x, p, cosine_env), m.eval_H(x, -p, cosine_env))
    assert np.allclose(r.eval_L(x, p, cosine_env), m.eval_L(x, -p, cosine_env))


def test_model_catalog_lists_the_four_families():
    names = set(model_catalog())
    assert {"mechanical", "tilted_mechanical", "eikonal", "nonstrict"} <= names
