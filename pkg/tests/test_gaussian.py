"""Ornstein-Uhlenbeck engine, covariance kernel, counterterms, decay oracle."""

import numpy as np
import pytest

from phi4lab.grid import TorusGrid
from phi4lab.noise import RngPolicy, periodise_noise, sample_slab_batch, subgrid_for
from phi4lab import gaussian as G


GRID = TorusGrid(np.pi, 32)
POLICY = RngPolicy(2718)


def chain(grid, t, n_steps, replicas, policy=POLICY, base_step=0):
    state = G.ou_init(grid, batch=len(replicas))
    dt = t / n_steps
    for k in range(n_steps):
        state = G.ou_step_exact(
            state, sample_slab_batch(policy, grid, dt, base_step + k, replicas)
        )
    return state


def test_zero_mode_stationary_variance():
    # orthonormal-normalisation variance of the zero mode tends to 1/(0+1) = 1
    state = chain(GRID, 6.0, 60, range(4000))
    var0 = (np.abs(state.z_hat[:, 0, 0]) ** 2).mean() * GRID.volume
    target = -np.expm1(-2.0 * 6.0)
    assert abs(var0 - target) < 3.0 * np.sqrt(2.0 / 4000) * target


def test_mode_variance_formula():
    # var(Z_hat_t(p)) = (1 - e^{-2t w}) / ((2L)^2 w) within 3 sigma
    t = 0.8
    state = chain(GRID, t, 16, range(10_000))
    w = GRID.omega_r
    for idx in [(0, 0), (1, 2), (5, 3), (9, 9)]:
        var = (np.abs(state.z_hat[(slice(None),) + idx]) ** 2).mean()
        target = -np.expm1(-2.0 * t * w[idx]) / (w[idx] * GRID.volume)
        # |c|^2 of a complex mode has relative std ~ 1 (or sqrt(2) for real modes)
        assert abs(var - target) < 3.0 * np.sqrt(2.0 / 10_000) * target


def test_exact_law_step_partition():
    # one step of size t and two steps of size t/2 give the same law
    t = 0.6
    one = chain(GRID, t, 1, range(6000), RngPolicy(1))
    two = chain(GRID, t, 2, range(6000), RngPolicy(2))
    f = G.ProductBump((0.2, -0.4), 1.0).values(GRID)
    a = GRID.pairing(one.z_tilde(), f)
    b = GRID.pairing(two.z_tilde(), f)
    va, vb = a.var(ddof=1), b.var(ddof=1)
    joint = np.sqrt(2.0 / 6000) * np.hypot(va, vb)
    assert abs(va - vb) < 3.0 * joint


def test_stationarity_of_gff():
    # starting from the stationary law and stepping leaves mode variances flat
    rng = POLICY.scalar_generator(10)
    batch = 6000
    phi = G.sample_gff(GRID, rng, batch=batch)
    state = G.OuState(GRID, 0.0, GRID.rfft(phi))
    state = G.ou_step_exact(state, sample_slab_batch(RngPolicy(3), GRID, 0.35, 0, range(batch)))
    w = GRID.omega_r
    for idx in [(0, 0), (2, 1), (7, 4)]:
        var = (np.abs(state.z_hat[(slice(None),) + idx]) ** 2).mean()
        target = 1.0 / (w[idx] * GRID.volume)
        assert abs(var - target) < 3.0 * np.sqrt(2.0 / batch) * target


def test_mean_relaxation_with_initial_condition():
    rng = POLICY.scalar_generator(11)
    phi0 = G.sample_gff(GRID, rng)
    batch = 2000
    state = G.ou_init(GRID, phi0, batch=batch)
    t = 0.5
    for k in range(8):
        state = G.ou_step_exact(
            state, sample_slab_batch(RngPolicy(5), GRID, t / 8, k, range(batch))
        )
    z = state.z()
    mean = z.mean(axis=0)
    target = GRID.irfft(GRID.rfft(phi0) * np.exp(-t * GRID.omega_r))
    resid = np.abs(mean - target).max()
    site_std = np.sqrt(G.counterterm_variance(t, GRID) / batch)
    assert resid < 5.0 * site_std  # max over 1024 sites of a CLT fluctuation


def test_coupled_subtorus_bit_identity():
    # Z^l driven through the periodisation helper is bit-identical to a
    # direct sub-torus chain fed the same restricted increments
    master = TorusGrid(4.0, 64)
    sub_L = 2.0
    sub = subgrid_for(master, sub_L)
    s_direct = G.ou_init(sub, batch=3)
    s_coupled = G.ou_init(sub, batch=3)
    for k in range(10):
        slab = sample_slab_batch(RngPolicy(9), master, 0.02, k, range(3))
        sub_slab = periodise_noise(slab, sub_L)
        s_coupled = G.ou_step_exact(s_coupled, sub_slab)
        s_direct = G.ou_step_exact(s_direct, sub_slab)
    assert np.array_equal(s_coupled.z_hat, s_direct.z_hat)


def test_grid_mismatch_rejected():
    state = G.ou_init(GRID)
    other = TorusGrid(np.pi, 64)
    slab = sample_slab_batch(POLICY, other, 0.1, 0, range(1))
    with pytest.raises(ValueError, match="grid"):
        G.ou_step_exact(state, slab)


# -- covariance kernel ---------------------------------------------------------------


def test_cov_kernel_matches_sampled_covariance():
    t, s = 0.8, 0.3
    batch = 8000
    state = G.ou_init(GRID, batch=batch)
    z_s = None
    for k in range(8):
        state = G.ou_step_exact(
            state, sample_slab_batch(RngPolicy(6), GRID, 0.1, k, range(batch))
        )
        if abs(state.t - s) < 1e-12:
            z_s = state.z_tilde()
    z_t = state.z_tilde()
    k_eval = G.CovKernel(t, s, GRID.L)
    pts = [((0, 0), (3, 2)), ((5, 5), (5, 9)), ((0, 4), (6, 4))]
    h = GRID.spacing
    for (i1, j1), (i2, j2) in pts:
        emp = (z_t[:, i1, j1] * z_s[:, i2, j2]).mean()
        x = np.array([(i1 - i2) * h, (j1 - j2) * h])
        oracle = G.cov_kernel_eval(k_eval, x)
        spread = np.sqrt(
            (z_t[:, i1, j1] ** 2).mean() * (z_s[:, i2, j2] ** 2).mean() / batch
        )
        assert abs(emp - oracle) < 3.5 * spread


def test_cov_kernel_gaussian_tail_envelope():
    # for |x| moderately large relative to sqrt(t) the kernel sits below the
    # e^{-|x|^2/(5t)} envelope (window where the prefactor dominates)
    t = 0.25
    k = G.CovKernel(t, t, np.pi)
    for r in (1.5, 2.0, 2.5):
        x = np.array([r, 0.0])
        val = G.cov_kernel_eval(k, x)
        assert 0 < val < np.exp(-(r**2) / (5.0 * t))


def test_cov_kernel_rejects_origin_at_equal_times():
    with pytest.raises(ValueError, match="diverges"):
        G.cov_kernel_eval(G.CovKernel(0.5, 0.5, 1.0), (0.0, 0.0))


def test_cov_kernel_empty_interval():
    assert G.cov_kernel_eval(G.CovKernel(0.7, 0.0, 1.0), (0.3, 0.0)) == 0.0


def test_cov_kernel_symmetry_monotonicity():
    a = G.cov_kernel_eval(G.CovKernel(0.7, 0.2, 2.0), (0.4, 0.1))
    b = G.cov_kernel_eval(G.CovKernel(0.2, 0.7, 2.0), (0.4, 0.1))
    assert abs(a - b) < 1e-12
    v1 = G.cov_kernel_eval(G.CovKernel(0.3, 0.3, 2.0), (0.4, 0.1))
    v2 = G.cov_kernel_eval(G.CovKernel(0.6, 0.6, 2.0), (0.4, 0.1))
    assert v2 > v1


# -- counterterms ---------------------------------------------------------------------


def test_counterterm_monotone_from_zero():
    vals = [G.counterterm_variance(t, GRID) for t in (0.0, 1e-3, 1e-2, 0.1, 1.0)]
    assert vals[0] == 0.0
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_counterterm_log_slope_in_resolution():
    # a(t fixed, N) grows like (1/2pi) log N as the grid refines
    Ns = [32, 64, 128, 256]
    vals = [G.counterterm_variance(10.0, TorusGrid(1.0, n)) for n in Ns]
    slope = np.polyfit(np.log(Ns), vals, 1)[0]
    assert abs(slope - 1.0 / (2.0 * np.pi)) < 0.05 / (2.0 * np.pi)


def test_counterterm_second_precision_sum():
    import mpmath as mp

    mp.mp.dps = 40
    grid = TorusGrid(1.0, 64)
    t = 1.0
    acc = mp.mpf(0)
    for p1 in grid.wavenumbers:
        for p2 in grid.wavenumbers:
            w = mp.mpf(float(p1)) ** 2 + mp.mpf(float(p2)) ** 2 + 1
            acc += (1 - mp.e ** (-2 * t * w)) / w
    acc /= mp.mpf(4) * grid.L**2
    assert abs(G.counterterm_variance(t, grid) - float(acc)) < 1e-13


def test_bridge_zero_at_reference_crossing():
    a_ref = G.reference_counterterm(GRID)
    # f(t) crosses zero where a(t) = a_ref; at the reference time itself the
    # bridge is zero up to the (tiny) a(10) vs a(t_ref) identity
    assert abs(G.counterterm_bridge_f(10.0, GRID, a_ref)) < 1e-15


def test_bridge_uniform_in_volume():
    # successive volume doublings at fixed spacing shrink f(t, L) - f(t, 2L)
    # at an image-term rate; the 1e-6 band is reached from L = 8 on (at
    # L = 2 the nearest image e^{-L^2/t} is itself ~e^{-4} and dominates)
    h = 1.0 / 16
    for t in (0.25, 1.0):
        fs = {}
        for L in (2.0, 4.0, 8.0, 16.0):
            g = TorusGrid(L, int(round(2 * L / h)))
            fs[L] = G.counterterm_bridge_f(t, g, G.reference_counterterm(g))
        d1 = abs(fs[2.0] - fs[4.0])
        d2 = abs(fs[4.0] - fs[8.0])
        d3 = abs(fs[8.0] - fs[16.0])
        assert d1 > 10.0 * d2 > 100.0 * d3  # super-polynomial shrinkage
        assert d3 < 1e-6


def test_zz_decay_identity_at_master():
    master = TorusGrid(2.0, 32)
    f = G.ProductBump((0.0, 0.0), 0.8)
    rows = G.z_minus_zL_decay(RngPolicy(77), master, [(2.0, [0.5])], f, replicas=32)
    assert rows[0]["estimate"] == 0.0
    assert rows[0]["oracle_value"] == 0.0


def test_zz_oracle_monotone_in_t():
    master = TorusGrid(4.0, 64)
    f = G.ProductBump((0.0, 0.0), 0.6)
    v1 = G.zz_difference_oracle(master, 1.0, 0.5, f)
    v2 = G.zz_difference_oracle(master, 1.0, 1.0, f)
    assert 0 < v1 < v2


def test_zz_support_violation_rejected():
    master = TorusGrid(4.0, 64)
    f = G.ProductBump((0.0, 0.0), 0.8)  # radius 0.8 > (2/3)*1
    with pytest.raises(ValueError, match="2/3"):
        G.z_minus_zL_decay(RngPolicy(1), master, [(1.0, [0.5])], f, replicas=4)


def test_decay_csv(tmp_path):
    rows = [
        {"L": 1.0, "t": 0.5, "estimate": 1e-3, "stderr": 1e-4, "oracle_value": 9e-4}
    ]
    path = tmp_path / "decay.csv"
    G.write_decay_csv(path, rows)
    text = path.read_text().splitlines()
    assert text[0] == "L,t,estimate,stderr,oracle_value"
    assert len(text) == 2
