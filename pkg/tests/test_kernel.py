import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from artifact.errors import ConfigurationError, DivergenceError, DomainError
from artifact.kernel import (
    EPS_MAX,
    KernelConfig,
    angular_constants,
    angular_profile,
    angular_quadrature,
    check_primededuct,
    check_theta_bound,
    collision_geometry,
    grazing_lambda,
    legendre_coefficients,
    post_collision,
    primededuct_sides,
    random_geometries,
    sin_b,
    theta_bound_sides,
    theta_functional,
)


def unit(x):
    x = np.asarray(x, dtype=float)
    return x / np.linalg.norm(x)


vec = st.lists(st.floats(-5, 5, allow_nan=False), min_size=3, max_size=3).map(np.array)
direction = st.lists(st.floats(-1, 1, allow_nan=False), min_size=3, max_size=3).filter(
    lambda x: np.linalg.norm(x) > 1e-3
).map(unit)


# ---------------------------------------------------------------- config


@pytest.mark.parametrize(
    "kw",
    [dict(gamma=0.0), dict(gamma=2.5), dict(s=0.0), dict(s=1.0), dict(K=0.5), dict(Lambda=-1.0), dict(theta_min=0.0)],
)
def test_config_rejects_out_of_range(kw):
    with pytest.raises(DomainError):
        KernelConfig(**kw)


def test_config_is_frozen_and_lambda_copy():
    cfg = KernelConfig()
    with pytest.raises(Exception):
        cfg.s = 0.3
    assert cfg.with_lambda(2.0).Lambda == 2.0 and cfg.Lambda is None


# ---------------------------------------------------------------- geometry


def test_post_collision_symmetric_case():
    vp, vsp = post_collision([1, 0, 0], [-1, 0, 0], [0, 1, 0])
    np.testing.assert_allclose(vp, [0, 1, 0], atol=1e-15)
    np.testing.assert_allclose(vsp, [0, -1, 0], atol=1e-15)


def test_post_collision_identity_direction():
    v, vs = np.array([0.3, -1.2, 2.0]), np.array([1.1, 0.4, -0.5])
    vp, vsp = post_collision(v, vs, unit(v - vs))
    np.testing.assert_allclose(vp, v, atol=1e-14)
    np.testing.assert_allclose(vsp, vs, atol=1e-14)


def test_post_collision_invariants_million_samples():
    rng = np.random.default_rng(7)
    n = 10**6
    v = rng.uniform(-5, 5, (n, 3))
    vs = rng.uniform(-5, 5, (n, 3))
    sg = rng.standard_normal((n, 3))
    sg /= np.linalg.norm(sg, axis=1, keepdims=True)
    vp, vsp = post_collision(v, vs, sg)
    e0 = np.sum(v**2 + vs**2, axis=1)
    assert np.max(np.abs(np.sum(vp**2 + vsp**2, axis=1) - e0) / e0) < 1e-12
    assert np.max(np.abs(vp + vsp - v - vs)) < 1e-12


def test_post_collision_rejects_non_unit_sigma():
    with pytest.raises(DomainError):
        post_collision([1, 0, 0], [0, 0, 0], [1, 1, 0])


@settings(max_examples=200, deadline=None)
@given(v=vec, vs=vec, sg=direction)
def test_geometry_identity(v, vs, sg):
    if np.linalg.norm(v - vs) < 1e-6:
        return
    g = collision_geometry(v, vs, sg)
    assert abs(g.n @ g.omega) < 1e-12
    assert -1e-12 <= g.h <= math.sqrt((1 + v @ v) * (1 + vs @ vs))
    assert abs(g.identity_residual()) < 1e-10 * (1 + v @ v + vs @ vs)


def test_geometry_rejects_coincident_velocities():
    with pytest.raises(DomainError):
        collision_geometry([1, 2, 3], [1, 2, 3], [0, 0, 1])


# ---------------------------------------------------------------- profile


def test_profile_value_at_right_angle():
    cfg = KernelConfig(s=0.5)
    assert angular_profile(math.pi / 2, cfg) == pytest.approx((math.pi / 2) ** -2, rel=1e-15)
    assert angular_profile(math.pi / 2, cfg) == pytest.approx(0.405285, abs=1e-6)


def test_profile_cutoff_and_grazing_indicator():
    cfg = KernelConfig(s=0.5)
    th = 2 * math.asin(0.2)
    assert angular_profile(th, cfg, "cutoff", 0.3) == 0.0
    assert angular_profile(th, cfg, "grazing", 0.3) == angular_profile(th, cfg)


@settings(max_examples=100, deadline=None)
@given(
    th=st.floats(1e-4, math.pi / 2),
    eps=st.floats(0.01, EPS_MAX),
    s=st.floats(0.05, 0.95),
    K=st.floats(1.0, 6.0),
)
def test_profile_partition_and_pinching(th, eps, s, K):
    cfg = KernelConfig(s=s, K=K)
    full = angular_profile(th, cfg)
    cut = angular_profile(th, cfg, "cutoff", eps)
    graz = angular_profile(th, cfg, "grazing", eps)
    half = math.sin(th / 2)
    if abs(half - eps) > 1e-14:
        assert cut + graz == pytest.approx(full, rel=1e-14)
    r = th ** (1 + 2 * s) * sin_b(th, cfg)
    assert 1 / K - 1e-12 <= r <= K + 1e-12


def test_default_profile_is_exact_power():
    cfg = KernelConfig(s=0.3)
    th = np.linspace(0.01, math.pi / 2, 50)
    np.testing.assert_allclose(th ** 1.6 * sin_b(th, cfg), 1.0, rtol=1e-14)


@pytest.mark.parametrize("theta", [0.0, -0.1, 2.0])
def test_profile_rejects_theta_outside_support(theta):
    with pytest.raises(DomainError):
        angular_profile(theta, KernelConfig())


# ---------------------------------------------------------------- angular constants


def test_a2_against_midpoint_refinement():
    # oracle: substitute θ = u^2 to remove the singularity, midpoint rule, Richardson
    s = 0.5
    cfg = KernelConfig(s=s)

    def mid(n):
        u = (np.arange(n) + 0.5) * math.sqrt(math.pi / 2) / n
        th = u**2
        return 2 * math.pi * np.sum(th ** (-1 - 2 * s) * np.sin(th) ** 2 * 2 * u) * math.sqrt(math.pi / 2) / n

    m1, m2 = mid(4000), mid(8000)
    oracle = (4 * m2 - m1) / 3
    assert angular_constants(None, cfg).A2 == pytest.approx(oracle, rel=1e-8)
    # closed form 2π (Si(π) - 2/π) for s = 1/2, K = 1 (integration by parts)
    from scipy.special import sici

    assert angular_constants(None, cfg).A2 == pytest.approx(2 * math.pi * (sici(math.pi)[0] - 2 / math.pi), rel=1e-12)


def test_a_eps_scaling_and_monotonicity():
    cfg = KernelConfig(s=0.5)
    # s = 1/2, K = 1: A_eps = 2π (1/θ_ε - 2/π) exactly
    for e in (0.1, 0.05):
        th = 2 * math.asin(e)
        assert angular_constants(e, cfg).A_eps == pytest.approx(2 * math.pi * (1 / th - 2 / math.pi), rel=1e-12)
    # ε^{-2s} growth: the ratio tends to 2^{2s}; the constant term still shows at ε = 0.1
    a1 = angular_constants(0.1, cfg).A_eps
    a2 = angular_constants(0.05, cfg).A_eps
    assert a2 / a1 == pytest.approx(2 ** (2 * cfg.s), rel=0.08)
    a1 = angular_constants(2e-3, cfg).A_eps
    a2 = angular_constants(1e-3, cfg).A_eps
    assert a2 / a1 == pytest.approx(2 ** (2 * cfg.s), rel=5e-3)
    eps = [0.6, 0.4, 0.2, 0.1, 0.05, 0.01]
    c = [angular_constants(e, cfg) for e in eps]
    assert all(b.A_eps > a.A_eps for a, b in zip(c, c[1:]))
    assert all(b.A2_eps_full > a.A2_eps_full for a, b in zip(c, c[1:]))
    assert c[-1].A2_eps_full < c[-1].A2


def test_a_eps_oracle_quad():
    cfg = KernelConfig(s=0.25, K=2.0)
    eps = 0.2
    th0 = 2 * math.asin(eps)
    val, _ = integrate.quad(lambda t: sin_b(t, cfg), th0, math.pi / 2, epsrel=1e-13)
    assert angular_constants(eps, cfg).A_eps == pytest.approx(2 * math.pi * val, rel=1e-10)


def test_a2_eps_full_at_boundary_is_zero():
    c = angular_constants(EPS_MAX, KernelConfig())
    assert c.A2_eps_full == 0.0 and c.A_eps == 0.0


def test_a_eps_diverges_at_zero():
    with pytest.raises(DivergenceError):
        angular_constants(0.0, KernelConfig())


def test_grazing_lambda_matches_ratio_limit():
    cfg = KernelConfig(s=0.5)
    eps = 1e-4
    th = 2 * math.asin(eps)
    val, _ = integrate.quad(lambda t: sin_b(t, cfg) * math.sin(t) ** 2, 0, th, epsrel=1e-12)
    ratio = 2 * math.pi * val / 16 * eps ** (2 * cfg.s - 2)
    assert ratio == pytest.approx(grazing_lambda(cfg), rel=1e-3)


def test_legendre_coefficients_oracle():
    cfg = KernelConfig(s=0.5, K=1 + math.pi)
    c = legendre_coefficients(cfg, 0.0, math.pi / 2, 6)
    from scipy.special import eval_legendre

    for n in (0, 1, 4, 6):
        val, _ = integrate.quad(
            lambda t: sin_b(t, cfg) * (eval_legendre(n, math.cos(t)) - 1), 0, math.pi / 2, epsrel=1e-12, limit=200
        )
        assert c[n] == pytest.approx(2 * math.pi * val, rel=1e-9, abs=1e-13)
    lo = legendre_coefficients(cfg, 0.3, 1.0, 5, subtract=False)
    val, _ = integrate.quad(lambda t: sin_b(t, cfg) * math.cos(t), 0.3, 1.0)
    assert lo[1] == pytest.approx(2 * math.pi * val, rel=1e-12)


def test_angular_quadrature_invariants():
    cfg = KernelConfig(s=0.5)
    q = angular_quadrature(cfg)
    assert np.all(q.theta_nodes >= cfg.theta_min) and np.all(q.theta_nodes <= math.pi / 2)
    assert np.all(q.theta_weights > 0)
    np.testing.assert_allclose(np.diff(q.azimuths), 2 * math.pi / q.n_azimuth)
    # integrates θ^{1-2s} exactly
    assert np.sum(q.theta_weights) == pytest.approx((math.pi / 2) ** (2 - 2 * cfg.s) / (2 - 2 * cfg.s), rel=1e-13)
    with pytest.raises(ConfigurationError):
        angular_quadrature(KernelConfig(s=0.5, theta_min=0.5))


# ---------------------------------------------------------------- inequality checks


def test_primededuct_identity_collision():
    v, vs = np.array([1.0, 2.0, 0.0]), np.array([0.0, -1.0, 0.5])
    g = collision_geometry(v, vs, unit(v - vs))
    lhs, rhs = primededuct_sides(g, 3.0)
    assert abs(lhs) < 1e-9 and check_primededuct(g, 3.0)


def test_primededuct_degenerate_partner():
    rng = np.random.default_rng(3)
    for _ in range(200):
        v = rng.uniform(-3, 3, 3)
        g = collision_geometry(v, np.zeros(3), unit(rng.standard_normal(3)))
        assert g.h == 0.0
        assert check_primededuct(g, 4.5)


def test_primededuct_suite():
    rng = np.random.default_rng(11)
    geoms = list(random_geometries(5000, rng))
    assert all(check_primededuct(g, p) for g in geoms for p in (2.0, 3.0, 4.5))


def test_primededuct_domain():
    g = next(iter(random_geometries(1, np.random.default_rng(0))))
    with pytest.raises(DomainError):
        primededuct_sides(g, 1.5)


def test_theta_coincident_velocities():
    cfg = KernelConfig(s=0.5)
    v = np.array([[1.0, -2.0, 0.5]])
    t, rhs = theta_bound_sides(v, v, 3.0, cfg)
    assert t[0] == 0.0 and rhs[0] >= 0 and check_theta_bound(v[0], v[0], 3.0, cfg)


def test_theta_functional_against_scalar_quadrature():
    cfg = KernelConfig(s=0.5)
    v, vs = np.array([1.0, 0.5, -0.3]), np.array([-0.4, 0.2, 1.1])
    p = 3.0
    q = v - vs
    n = unit(q)
    e1 = unit(np.cross(n, [0, 0, 1.0]))
    e2 = np.cross(n, e1)
    w = lambda x: (1 + x @ x) ** p

    def inner(th):
        def f(ph):
            sg = math.cos(th) * n + math.sin(th) * (math.cos(ph) * e1 + math.sin(ph) * e2)
            a, b = post_collision(v, vs, sg)
            return w(a) + w(b) - w(v) - w(vs)

        return integrate.quad(f, 0, 2 * math.pi, epsrel=1e-12)[0] * sin_b(th, cfg)

    ref = np.linalg.norm(q) ** cfg.gamma * integrate.quad(inner, 0, math.pi / 2, epsrel=1e-10, limit=200)[0]
    assert theta_functional(v, vs, p, cfg)[0] == pytest.approx(ref, rel=1e-7)


def test_theta_bound_suite_and_homogeneity():
    cfg = KernelConfig(gamma=1.0, s=0.5)
    rng = np.random.default_rng(5)
    v = rng.uniform(-1, 1, (300, 3)) * 5 / math.sqrt(3)
    vs = rng.uniform(-1, 1, (300, 3)) * 5 / math.sqrt(3)
    for p in (3.0, 4.0):
        assert np.all(check_theta_bound(v, vs, p, cfg))
    # leading homogeneity of Θ at degree 2p + γ
    p = 3.0
    vals = [abs(theta_functional(c * v[:5], c * vs[:5], p, cfg)) / c ** (2 * p + cfg.gamma) for c in (1, 2, 4)]
    assert np.all(vals[2] <= 4 * np.maximum(vals[1], vals[0]) + 1e-12)


def test_theta_bound_domain():
    with pytest.raises(DomainError):
        check_theta_bound([1, 0, 0], [0, 1, 0], 2.5, KernelConfig())
