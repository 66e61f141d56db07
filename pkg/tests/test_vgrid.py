import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from artifact.errors import ConfigurationError, DomainError
from artifact.vgrid import (
    Distribution,
    GridField,
    VelocityGrid,
    anisotropic_gaussian,
    dump_field,
    entropy,
    eps_norm,
    gaussian,
    gaussian_mixture,
    interp_inequality_check,
    interp_inequality_sides,
    interpolate,
    llogl,
    load_field,
    maxwellian,
    moments,
    sobolev_norm,
    weighted_l1,
    weighted_l2,
    weps_l2,
    weps_symbol,
)


@pytest.fixture(scope="module")
def g32():
    return VelocityGrid(32, 8.0)


@pytest.fixture(scope="module")
def g12():
    return VelocityGrid(12, 6.0)


def smooth_field(grid, rng):
    k = rng.integers(1, 4)
    out = np.zeros(grid.shape)
    for _ in range(k):
        u = rng.uniform(-0.8, 0.8, 3)
        T = rng.uniform(0.3, 1.2, 3)
        out += rng.uniform(0.2, 1.0) * gaussian(grid, 1.0, u, T).values
    return out


# ---------------------------------------------------------------- grid


@pytest.mark.parametrize("N", [7, 6, 9, 0])
def test_grid_rejects_bad_N(N):
    with pytest.raises(ConfigurationError):
        VelocityGrid(N, 5.0)


def test_grid_rejects_bad_L():
    with pytest.raises(ConfigurationError):
        VelocityGrid(8, -1.0)


def test_grid_nodes_cell_centred():
    g = VelocityGrid(8, 2.0)
    np.testing.assert_allclose(g.nodes, [-1.75, -1.25, -0.75, -0.25, 0.25, 0.75, 1.25, 1.75])
    assert g.h == 0.5 and g.cell_volume == 0.125 and g.mesh.shape == (3, 8, 8, 8)


def test_field_rejects_nonfinite_and_bad_shape():
    g = VelocityGrid(8, 2.0)
    bad = np.zeros(g.shape)
    bad[0, 0, 0] = np.nan
    with pytest.raises(DomainError):
        GridField(g, bad)
    with pytest.raises(DomainError):
        GridField(g, np.zeros((8, 8)))


def test_distribution_invariants():
    g = VelocityGrid(8, 2.0)
    v = np.ones(g.shape)
    v[1, 1, 1] = -1e-6
    with pytest.raises(DomainError):
        Distribution(g, v)
    with pytest.raises(DomainError):
        Distribution(g, np.zeros(g.shape))
    v[1, 1, 1] = -1e-13
    Distribution(g, v)


def test_field_arithmetic_keeps_grid():
    g = VelocityGrid(8, 2.0)
    f = GridField(g, np.ones(g.shape))
    h = 2 * f - f
    assert isinstance(h, GridField) and h.grid == g
    np.testing.assert_array_equal(h.values, 1.0)


# ---------------------------------------------------------------- constructors and moments


def test_maxwellian_moments(g32):
    m = moments(maxwellian(g32, 1.0, (0, 0, 0), 1.0))
    assert abs(m.mass - 1) < 1e-9
    assert abs(m.energy - 3) < 1e-8
    m = moments(maxwellian(g32, 1.0, (1, 0, 0), 1.0))
    np.testing.assert_allclose(m.momentum, [1, 0, 0], atol=1e-8)


def test_anisotropic_moments(g32):
    f = anisotropic_gaussian(g32)
    V = g32.mesh
    tx = np.sum(f.values * V[0] ** 2) * g32.cell_volume
    ty = np.sum(f.values * V[1] ** 2) * g32.cell_volume
    assert tx == pytest.approx(1.4, abs=1e-8) and ty == pytest.approx(0.8, abs=1e-8)


def test_mixture_mass_and_momentum(g32):
    m = moments(gaussian_mixture(g32))
    assert m.mass == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(m.momentum, [0.0, 0.1, 0.2], atol=1e-8)


def test_zero_field_moments(g12):
    m = moments(np.zeros(g12.shape), g12)
    assert m.mass == 0 and m.energy == 0 and np.all(m.momentum == 0)


def test_support_check():
    with pytest.raises(ConfigurationError):
        maxwellian(VelocityGrid(16, 4.0), 1.0, (1, 0, 0), 1.0)


def test_plain_array_needs_grid():
    with pytest.raises(DomainError):
        weighted_l1(np.ones((8, 8, 8)))


# ---------------------------------------------------------------- norms


def test_weighted_l1_maxwellian(g32):
    assert weighted_l1(maxwellian(g32), 2) == pytest.approx(4.0, abs=1e-8)


def test_norms_of_zero(g12):
    z = np.zeros(g12.shape)
    for val in (
        weighted_l1(z, 3, g12),
        weighted_l2(z, 2, g12),
        llogl(z, g12),
        entropy(z, g12),
        sobolev_norm(z, 1.5, 1, g12),
        eps_norm(z, 0.1, 0, 1, 0.5, g12),
        weps_l2(z, 0.1, 1, 0.5, g12),
    ):
        assert val == 0.0


def test_l1_monotone_in_q(g12):
    f = maxwellian(g12, 1.0, (0.5, 0, 0), 0.8)
    vals = [weighted_l1(f, q) for q in np.linspace(0, 6, 13)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_entropy_oracle(g32):
    # H(M) = -ρ(3/2)(1 + log(2πT)) for a Maxwellian of unit density
    T = 0.9
    f = maxwellian(g32, 1.0, (0, 0, 0), T)
    assert entropy(f) == pytest.approx(-1.5 * (1 + math.log(2 * math.pi * T)), rel=1e-8)


def test_sobolev_zero_order_is_l2(g12):
    rng = np.random.default_rng(0)
    f = GridField(g12, rng.standard_normal(g12.shape))
    assert sobolev_norm(f, 0, 0) == pytest.approx(weighted_l2(f, 0), rel=1e-10)
    assert sobolev_norm(f, 0, 1.5) == pytest.approx(weighted_l2(f, 1.5), rel=1e-10)


def test_sobolev_gaussian_oracle(g32):
    # ‖M‖²_{H¹} = ∫|M̂|²(1+|ξ|²) = ‖M‖²_{L²} + ‖∇M‖²_{L²}; for T=1: ‖∇M‖² = (3/2) ‖M‖²
    f = maxwellian(g32)
    l2 = weighted_l2(f, 0) ** 2
    assert sobolev_norm(f, 1, 0) ** 2 == pytest.approx(2.5 * l2, rel=1e-6)


def test_weps_symbol_values():
    assert weps_symbol(5.0, 0.1, 0.5) == pytest.approx(26**0.25, rel=1e-15)
    assert weps_symbol(5.0, 0.1, 0.5) == pytest.approx(2.2581, abs=1e-4)
    assert weps_symbol(20.0, 0.1, 0.5) == pytest.approx(0.1**-0.5, rel=1e-15)


def test_eps_norm_definition_and_sandwich(g12):
    rng = np.random.default_rng(1)
    s = 0.5
    for _ in range(100):
        f = GridField(g12, rng.standard_normal(g12.shape) * np.exp(-g12.speed2 / 4))
        for eps in (0.5, 1.0, 0.05):
            e = eps_norm(f, eps, 0, 1, s)
            lo = sobolev_norm(f, s, 1)
            hi = sobolev_norm(f, 1, 1)
            assert lo <= e * (1 + 1e-12)
            assert e <= 2 * hi * (1 + 1e-12)
    f = GridField(g12, rng.standard_normal(g12.shape))
    want = math.sqrt(sobolev_norm(f, 1.5, 0.5) ** 2 + 0.2 * sobolev_norm(f, 2, 0.5) ** 2)
    assert eps_norm(f, 0.2, 1, 0.5, 0.5) == pytest.approx(want, rel=1e-13)


@settings(max_examples=40, deadline=None)
@given(c=st.floats(-1e3, 1e3).filter(lambda x: abs(x) > 1e-6), seed=st.integers(0, 2**16))
def test_norm_homogeneity(c, seed):
    g = VelocityGrid(8, 3.0)
    f = np.random.default_rng(seed).standard_normal(g.shape)
    for norm in (
        lambda x: weighted_l1(x, 2, g),
        lambda x: weighted_l2(x, 1, g),
        lambda x: sobolev_norm(x, 1.5, 1, g),
        lambda x: eps_norm(x, 0.3, 0, 1, 0.5, g),
        lambda x: weps_l2(x, 0.3, 1, 0.5, g),
    ):
        assert norm(c * f) == pytest.approx(abs(c) * norm(f), rel=1e-12)


def test_zero_extension_consistency():
    small = VelocityGrid(16, 6.0)
    big = VelocityGrid(24, 9.0)
    f = maxwellian(small, 1.0, (0.3, 0, 0), 0.8).values
    F = np.zeros(big.shape)
    F[4:20, 4:20, 4:20] = f
    for q in (0, 2, 4):
        assert weighted_l1(F, q, big) == pytest.approx(weighted_l1(f, q, small), rel=1e-10)
        assert weighted_l2(F, q, big) == pytest.approx(weighted_l2(f, q, small), rel=1e-10)


# ---------------------------------------------------------------- interpolation inequality


def test_interp_inequality_suite(g12):
    rng = np.random.default_rng(2)
    assert interp_inequality_check(maxwellian(g12), 1.0)
    assert interp_inequality_check(np.zeros(g12.shape), 1.0, grid=g12)
    for _ in range(100):
        f = smooth_field(g12, rng)
        for lam in (0.1, 1.0, 10.0):
            assert interp_inequality_check(f, lam, 0.5, g12)


def test_interp_inequality_rejects_bad_lambda(g12):
    with pytest.raises(DomainError):
        interp_inequality_sides(maxwellian(g12), 0.0, 0.5)


# ---------------------------------------------------------------- trilinear interpolation


def test_interpolate_nodes_and_outside(g12):
    rng = np.random.default_rng(3)
    f = GridField(g12, rng.standard_normal(g12.shape))
    idx = rng.integers(0, 12, (20, 3))
    pts = g12.nodes[idx]
    np.testing.assert_allclose(interpolate(f, pts), f.values[idx[:, 0], idx[:, 1], idx[:, 2]], rtol=1e-13)
    assert interpolate(f, [6.5, 0, 0]) == 0.0
    assert interpolate(f, [0, 0, -7.0]) == 0.0


def test_interpolate_reproduces_affine(g12):
    a = np.array([0.3, -1.2, 0.7])
    f = GridField(g12, np.einsum("i,i...->...", a, g12.mesh) + 2.0)
    rng = np.random.default_rng(4)
    lo, hi = g12.nodes[0], g12.nodes[-1]
    pts = rng.uniform(lo, hi, (200, 3))
    np.testing.assert_allclose(interpolate(f, pts), pts @ a + 2.0, rtol=1e-12, atol=1e-12)


# ---------------------------------------------------------------- I/O


@pytest.mark.parametrize("binary", [False, True])
def test_dump_load_roundtrip(tmp_path, binary):
    g = VelocityGrid(8, 2.5)
    f = GridField(g, np.random.default_rng(5).standard_normal(g.shape))
    p = tmp_path / "f.dat"
    dump_field(f, p, binary=binary)
    h = load_field(p)
    assert h.grid == g
    np.testing.assert_array_equal(h.values, f.values)
    head = p.read_bytes().split(b"\n")[:3]
    assert head == [b"N=8", b"L=2.5", b"order=row-major-x-fastest"]


def test_dump_is_x_fastest(tmp_path):
    g = VelocityGrid(8, 1.0)
    v = np.zeros(g.shape)
    v[1, 0, 0] = 7.0
    dump_field(GridField(g, v), tmp_path / "f.txt")
    first = (tmp_path / "f.txt").read_text().splitlines()[3].split()
    assert float(first[1]) == 7.0


def test_load_rejects_bad_header(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("N=8\nL=1\norder=column\n" + "0 " * 512)
    with pytest.raises(ConfigurationError):
        load_field(p)
