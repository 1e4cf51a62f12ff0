"""Hermite recursions, Wick bundles, convention bridge, chaos structure."""

import numpy as np
import pytest

from phi4lab.grid import TorusGrid
from phi4lab.noise import RngPolicy
from phi4lab import gaussian as G
from phi4lab.wick import WickBundle, hermite_apply, wick_centred, wick_of_phi, wick_with_ic


GRID = TorusGrid(np.pi, 32)
POLICY = RngPolicy(1618)


def test_hermite_polynomials():
    x = np.linspace(-3, 3, 7)
    assert np.array_equal(hermite_apply(x, 0.0, 2), x**2)
    assert hermite_apply(np.array(2.0), 1.0, 3) == 8.0 - 6.0
    assert np.allclose(hermite_apply(x, 0.5, 4), x**4 - 3.0 * x**2 + 0.75)
    with pytest.raises(ValueError):
        hermite_apply(x, 1.0, 5)


def test_hermite_centred_under_gaussian():
    # E P_n(a, G) = 0 for G ~ N(0, a), via the Gaussian-moment oracle
    rng = np.random.default_rng(0)
    a = 1.7
    g = rng.normal(0.0, np.sqrt(a), size=1_000_000)
    # oracle moments: E G^2 = a, E G^4 = 3 a^2, E G^6 = 15 a^3 control errors
    for n, var in ((2, 2 * a**2), (3, 6 * a**3), (4, 24 * a**4)):
        m = hermite_apply(g, a, n).mean()
        assert abs(m) < 3.0 * np.sqrt(var / g.size)


def test_wick_zero_field():
    z = np.zeros(GRID.shape)
    bundle = wick_centred(z, GRID, 0.5, "homogeneous")
    a = G.counterterm_variance(0.5, GRID)
    assert np.allclose(bundle.z2, -a)
    assert np.array_equal(bundle.z3, np.zeros(GRID.shape))


def test_convention_bridge_identity():
    rng = POLICY.scalar_generator(1)
    t = 0.5
    a_ref = G.reference_counterterm(GRID)
    f_val = G.counterterm_bridge_f(t, GRID, a_ref)
    z = G.sample_ou_centred(GRID, t, rng, batch=100)
    hom = wick_centred(z, GRID, t, "homogeneous")
    fix = wick_centred(z, GRID, t, "fixed", a_ref)
    assert np.abs(fix.z2 - (hom.z2 + f_val)).max() < 1e-12
    assert np.abs(fix.z3 - (hom.z3 + 3.0 * f_val * z)).max() < 1e-12


def test_convention_mismatch_rejected():
    z = np.zeros(GRID.shape)
    with pytest.raises(ValueError):
        wick_centred(z, GRID, 0.5, "homogeneous", a_ref=1.0)
    with pytest.raises(ValueError):
        wick_centred(z, GRID, 0.5, "nonsense")


def test_wick_with_ic_examples():
    t = 0.4
    rng = POLICY.scalar_generator(2)
    z = G.sample_ou_centred(GRID, t, rng)
    bundle = wick_centred(z, GRID, t, "fixed")
    # phi0 = 0: bundle unchanged
    out = wick_with_ic(bundle, np.zeros(GRID.shape), t)
    assert np.allclose(out.z2, bundle.z2)
    assert np.allclose(out.z3, bundle.z3)
    # z_tilde = 0 sample: :Z^3: = m^3 - 3 a m with m the heat-flowed phi0
    a = bundle.a_used
    phi0 = rng.standard_normal(GRID.shape)
    zero_bundle = wick_centred(np.zeros(GRID.shape), GRID, t, "fixed")
    out = wick_with_ic(zero_bundle, phi0, t)
    m = GRID.irfft(GRID.rfft(phi0) * np.exp(-t * GRID.omega_r))
    assert np.abs(out.z3 - (m**3 - 3.0 * a * m)).max() < 1e-12
    with pytest.raises(ValueError):
        wick_with_ic(bundle, phi0, 0.0)


def test_wick_with_ic_constant_mean():
    # constant phi0 = c: replica mean of :Z^2: is (c e^{-t})^2 plus the
    # convention offset (0 homogeneous, f(t, L) under the fixed counterterm)
    t, c = 0.6, 1.3
    batch = 4000
    rng = POLICY.scalar_generator(3)
    z = G.sample_ou_centred(GRID, t, rng, batch=batch)
    phi0 = np.full(GRID.shape, c)
    for convention, offset in (
        ("homogeneous", 0.0),
        ("fixed", G.counterterm_bridge_f(t, GRID, G.reference_counterterm(GRID))),
    ):
        bundle = wick_with_ic(wick_centred(z, GRID, t, convention), phi0, t)
        got = bundle.z2.mean()
        target = (c * np.exp(-t)) ** 2 + offset
        spread = 3.0 * bundle.z2.std() / np.sqrt(batch * GRID.N**2 / 4)
        assert abs(got - target) < spread


def test_wick_of_phi_examples():
    t = 0.5
    rng = POLICY.scalar_generator(4)
    z = G.sample_ou_centred(GRID, t, rng)
    bundle = wick_centred(z, GRID, t, "fixed")
    # v = 0 leaves the power unchanged
    for n in (2, 3, 4):
        assert np.allclose(wick_of_phi(np.zeros(GRID.shape), bundle, n), bundle.power(n))
    # bundle from a zero sample with a = 0: plain powers of v
    zero = WickBundle(GRID, t, "fixed", 0.0, np.zeros(GRID.shape))
    v = rng.standard_normal(GRID.shape)
    for n in (2, 3, 4):
        assert np.abs(wick_of_phi(v, zero, n) - v**n).max() < 1e-12
    with pytest.raises(ValueError):
        wick_of_phi(v, bundle, 5)


def test_wick_of_phi_is_pointwise_hermite():
    # binomial combination equals P_n(a, z + v) identically (polynomial
    # identity, checked field-by-field)
    t = 0.5
    rng = POLICY.scalar_generator(5)
    z = G.sample_ou_centred(GRID, t, rng, batch=8)
    v = rng.standard_normal((8,) + GRID.shape)
    bundle = wick_centred(z, GRID, t, "fixed")
    for n in (2, 3, 4):
        lhs = wick_of_phi(v, bundle, n)
        rhs = hermite_apply(z + v, bundle.a_used, n)
        assert np.abs(lhs - rhs).max() < 1e-10 * max(np.abs(rhs).max(), 1.0)


def test_wick_of_phi_top_term_linearity():
    # quadratic expansion: wick_of_phi(v+w, 2) - wick_of_phi(v, 2)
    # = 2 w (Z + v) + w^2 exactly
    t = 0.5
    rng = POLICY.scalar_generator(6)
    z = G.sample_ou_centred(GRID, t, rng)
    bundle = wick_centred(z, GRID, t, "fixed")
    v = rng.standard_normal(GRID.shape)
    w = rng.standard_normal(GRID.shape)
    lhs = wick_of_phi(v + w, bundle, 2) - wick_of_phi(v, bundle, 2)
    rhs = 2.0 * w * (z + v) + w**2
    assert np.abs(lhs - rhs).max() < 1e-12 * np.abs(rhs).max()


def test_chaos_orthogonality():
    # Cov((::Z^2::, f), (Z, g)) vanishes across chaoses
    t = 0.5
    batch = 8000
    rng = POLICY.scalar_generator(7)
    f = G.ProductBump((0.0, 0.3), 1.0).values(GRID)
    g = G.ProductBump((-0.4, 0.0), 1.2).values(GRID)
    z = G.sample_ou_centred(GRID, t, rng, batch=batch)
    b = wick_centred(z, GRID, t, "homogeneous")
    a_ = GRID.pairing(b.z2, f)
    c_ = GRID.pairing(z, g)
    cov = (a_ * c_).mean() - a_.mean() * c_.mean()
    spread = np.sqrt((a_.var() * c_.var()) / batch)
    assert abs(cov) < 3.0 * spread


def test_cubic_odd_symmetry():
    # sign symmetry of the cubic power: exact under Z -> -Z, and the sample
    # distribution of (::Z^3::, f) is symmetric about 0 (sign test)
    t = 0.5
    rng = POLICY.scalar_generator(8)
    z = G.sample_ou_centred(GRID, t, rng, batch=4000)
    b = wick_centred(z, GRID, t, "homogeneous")
    bm = wick_centred(-z, GRID, t, "homogeneous")
    assert np.array_equal(b.z3, -bm.z3)
    f = G.ProductBump((0.0, 0.0), 1.0).values(GRID)
    signs = np.sign(GRID.pairing(b.z3, f))
    n = len(signs)
    assert abs(signs.sum()) < 3.0 * np.sqrt(n)


def test_spatial_average_of_z2_centred():
    # homogeneous convention: replica average of :Z^2: tends to zero
    t = 0.5
    batch = 4000
    rng = POLICY.scalar_generator(9)
    z = G.sample_ou_centred(GRID, t, rng, batch=batch)
    b = wick_centred(z, GRID, t, "homogeneous")
    avg = b.z2.mean()
    # sites are correlated; bound the error by the pair-variance oracle of
    # the constant test function
    ones = np.ones(GRID.shape) / GRID.volume
    var1 = G.wick_pair_variance_oracle(GRID, t, ones, 2)
    assert abs(avg) < 3.0 * np.sqrt(var1 / batch)


def test_variance_scaling_n1_exact_and_two_resolutions():
    # n = 1 matches the covariance-kernel quadrature; n = 2 matches the
    # squared-kernel formula on two grid resolutions within 3 sigma
    t = 0.5
    for N in (32, 64):
        grid = TorusGrid(np.pi, N)
        f = G.ProductBump((0.0, 0.0), 1.0).values(grid)
        rng = RngPolicy(55 + N).scalar_generator(0)
        batch = 4000
        z = G.sample_ou_centred(grid, t, rng, batch=batch)
        b = wick_centred(z, grid, t, "homogeneous")
        for n in (1, 2):
            v = grid.pairing(b.centred_power(n), f)
            est = (v**2).mean()
            stderr = (v**2).std(ddof=1) / np.sqrt(batch)
            oracle = (
                G.pair_variance_oracle(grid, t, f)
                if n == 1
                else G.wick_pair_variance_oracle(grid, t, f, 2)
            )
            assert abs(est - oracle) < 3.0 * stderr
