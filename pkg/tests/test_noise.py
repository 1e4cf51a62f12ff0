"""Noise slabs, stream determinism, and volume coupling."""

import numpy as np
import pytest

from phi4lab.grid import TorusGrid
from phi4lab.noise import (
    RngPolicy,
    bump_cutoff,
    periodise_initial,
    periodise_noise,
    sample_slab,
    sample_slab_batch,
    subgrid_for,
    wrap_field,
)


def test_slab_determinism():
    policy = RngPolicy(1234)
    grid = TorusGrid(np.pi, 32)
    a = sample_slab(policy, grid, 0.01, step=7, replica=3)
    b = sample_slab(policy, grid, 0.01, step=7, replica=3)
    assert np.array_equal(a.increments, b.increments)
    c = sample_slab(policy, grid, 0.01, step=8, replica=3)
    assert not np.array_equal(a.increments, c.increments)


def test_slab_batch_matches_singles():
    policy = RngPolicy(5)
    grid = TorusGrid(1.0, 16)
    batch = sample_slab_batch(policy, grid, 0.02, step=4, replicas=range(3, 8))
    for i, r in enumerate(range(3, 8)):
        single = sample_slab(policy, grid, 0.02, step=4, replica=r)
        assert np.array_equal(batch.increments[i], single.increments)


def test_slab_moments():
    policy = RngPolicy(901)
    grid = TorusGrid(np.pi, 64)
    dt = 0.05
    # >= 1e6 sites pooled over replicas
    vals = np.concatenate(
        [
            sample_slab(policy, grid, dt, step=0, replica=r).increments.ravel()
            for r in range(256)
        ]
    )
    n = vals.size
    assert n >= 1_000_000
    target = dt / grid.spacing**2
    mean_err = 3.0 * np.sqrt(target / n)
    assert abs(vals.mean()) < mean_err
    var_err = 3.0 * np.sqrt(2.0 / n) * target
    assert abs(vals.var() - target) < var_err


def test_slab_rejects_bad_dt():
    with pytest.raises(ValueError):
        sample_slab(RngPolicy(0), TorusGrid(1.0, 8), 0.0, 0, 0)


def test_spatial_whiteness():
    policy = RngPolicy(77)
    grid = TorusGrid(np.pi, 64)
    xs = sample_slab_batch(policy, grid, 1.0, 0, range(64)).increments
    n = xs[0].size * len(xs)
    for lag in ((1, 0), (0, 1), (2, 3)):
        corr = (xs * np.roll(xs, lag, axis=(-2, -1))).mean()
        # normalised by the site variance 1/h^2
        rho = corr / xs.var()
        assert abs(rho) < 3.0 / np.sqrt(n)


def test_stream_independence():
    policy = RngPolicy(31337)
    n = 100_000
    a = policy.generator(0, 0).standard_normal(n)
    b = policy.generator(1, 0).standard_normal(n)
    c = policy.generator(0, 1).standard_normal(n)
    for x, y in ((a, b), (a, c), (b, c)):
        rho = (x * y).mean() / (x.std() * y.std())
        assert abs(rho) < 3.0 / np.sqrt(n)


def test_periodise_identity_at_master_size():
    policy = RngPolicy(4)
    grid = TorusGrid(4.0, 64)
    slab = sample_slab(policy, grid, 0.1, 0, 0)
    out = periodise_noise(slab, 4.0)
    assert out.grid == grid
    assert np.array_equal(out.increments, slab.increments)


def test_periodise_preserves_site_variance():
    # restriction keeps the white-noise normalisation dt/h^2 per site
    policy = RngPolicy(8)
    master = TorusGrid(4.0, 128)
    dt = 0.2
    vals = np.concatenate(
        [
            periodise_noise(sample_slab(policy, master, dt, 0, r), 1.0).increments.ravel()
            for r in range(512)
        ]
    )
    target = dt / master.spacing**2
    assert abs(vals.var() - target) < 3.0 * np.sqrt(2.0 / vals.size) * target


def test_pairing_adjoint_exact():
    # (W^l, f) = (W, f^l) for master test functions f, exactly: f^l is the
    # wrapped sum of f placed in the central fundamental domain
    policy = RngPolicy(12)
    master = TorusGrid(4.0, 64)
    sub_L = 1.0
    sub = subgrid_for(master, sub_L)
    slab = sample_slab(policy, master, 0.3, 0, 0)
    sub_noise = periodise_noise(slab, sub_L)
    rng = np.random.default_rng(0)
    i0 = int(round((master.L - sub_L) / master.spacing))
    for _ in range(20):
        f = rng.standard_normal(master.shape)
        wrapped = wrap_field(master, f, sub_L)
        lhs = sub.pairing(sub_noise.increments, wrapped)
        f_l = np.zeros(master.shape)
        f_l[i0 : i0 + sub.N, i0 : i0 + sub.N] = wrapped
        rhs = master.pairing(slab.increments, f_l)
        assert abs(lhs - rhs) < 1e-12 * max(abs(lhs), 1.0)


def test_pairing_identity_for_supported_functions():
    # f supported inside the sub-domain: (W^l, f) = (W, f) exactly
    policy = RngPolicy(13)
    master = TorusGrid(4.0, 64)
    sub_L = 1.0
    sub = subgrid_for(master, sub_L)
    slab = sample_slab(policy, master, 0.3, 0, 0)
    sub_noise = periodise_noise(slab, sub_L)
    rng = np.random.default_rng(1)
    x1, x2 = master.coords
    for _ in range(20):
        f = rng.standard_normal(master.shape)
        f = f * (np.abs(x1) < 0.99 * sub_L) * (np.abs(x2) < 0.99 * sub_L)
        _, f_sub = __import__("phi4lab.noise", fromlist=["restrict_to_subtorus"]).restrict_to_subtorus(
            master, f, sub_L
        )
        lhs = sub.pairing(sub_noise.increments, f_sub)
        rhs = master.pairing(slab.increments, f)
        assert abs(lhs - rhs) < 1e-12 * max(abs(lhs), 1.0)


def test_nested_coupling_consistency():
    policy = RngPolicy(21)
    master = TorusGrid(4.0, 128)
    slab = sample_slab(policy, master, 0.1, 0, 0)
    via_mid = periodise_noise(periodise_noise(slab, 2.0), 1.0)
    direct = periodise_noise(slab, 1.0)
    assert np.array_equal(via_mid.increments, direct.increments)


def test_misalignment_rejected():
    master = TorusGrid(4.0, 64)
    with pytest.raises(ValueError, match="divide"):
        subgrid_for(master, 3.0)


def test_bump_cutoff_profile():
    assert bump_cutoff(np.array(0.0)) == 1.0
    assert bump_cutoff(np.array(0.98)) == 1.0
    assert bump_cutoff(np.array(1.0)) == 0.0
    r = np.linspace(0.99, 1.0, 50)
    vals = bump_cutoff(r)
    assert np.all(np.diff(vals) <= 1e-12)


def test_periodise_initial_examples():
    master = TorusGrid(4.0, 128)
    sub_L = 1.0
    x1, x2 = master.coords
    rng = np.random.default_rng(3)
    # supported strictly inside the 99/100 box: reproduced exactly
    phi0 = rng.standard_normal(master.shape)
    phi0 *= (np.abs(x1) < 0.9 * sub_L) & (np.abs(x2) < 0.9 * sub_L)
    out = periodise_initial(master, phi0, sub_L)
    from phi4lab.noise import restrict_to_subtorus

    _, expected = restrict_to_subtorus(master, phi0, sub_L)
    assert np.array_equal(out, expected)
    # zero stays zero
    assert np.array_equal(
        periodise_initial(master, np.zeros(master.shape), sub_L), np.zeros((32, 32))
    )
    # delta spike at the origin is preserved with weight chi(0) = 1
    spike = np.zeros(master.shape)
    i0 = master.N // 2
    spike[i0, i0] = 3.7  # site x = 0
    out = periodise_initial(master, spike, 2.0)
    sub = subgrid_for(master, 2.0)
    assert abs(out[sub.N // 2, sub.N // 2] - 3.7) < 1e-14
    assert abs(out.sum() - 3.7) < 1e-14


def test_periodise_initial_identity_at_master():
    master = TorusGrid(4.0, 32)
    phi0 = np.random.default_rng(4).standard_normal(master.shape)
    assert np.array_equal(periodise_initial(master, phi0, 4.0), phi0)
