"""Grid, transforms, spectral operators, heat kernels, snapshot format."""

import numpy as np
import pytest

from phi4lab.grid import (
    RealField,
    SpectralField,
    TorusGrid,
    apply_multiplier,
    heat_semigroup,
    load_snapshot,
    periodic_heat_kernel,
    plane_heat_kernel,
    save_snapshot,
    write_slice_csv,
)


@pytest.mark.parametrize("L,N", [(np.pi, 64), (1.0, 32), (4.0, 128)])
def test_fft_roundtrip_parseval(L, N):
    grid = TorusGrid(L, N)
    rng = np.random.default_rng(0)
    fields = rng.standard_normal((100, N, N))
    back = grid.ifft(grid.fft(fields))
    assert np.abs(back - fields).max() <= 1e-12 * np.abs(fields).max()
    site = grid.l2_norm_sq(fields)
    mode = (np.abs(grid.fft(fields)) ** 2).sum(axis=(-2, -1)) * grid.volume
    assert np.abs(site - mode).max() <= 1e-12 * site.max()


def test_spacing_times_n_is_exactly_2l():
    grid = TorusGrid(np.pi, 64)
    assert grid.spacing * grid.N == 2 * grid.L


def test_rfft_matches_fft():
    grid = TorusGrid(2.0, 32)
    f = np.random.default_rng(1).standard_normal(grid.shape)
    full = grid.fft(f)[:, : grid.N // 2 + 1]
    assert np.allclose(grid.rfft(f), full, atol=1e-14)
    assert np.allclose(grid.irfft(grid.rfft(f)), f, atol=1e-13)


def test_hermitian_symmetry_and_imaginary_part():
    grid = TorusGrid(1.0, 16)
    f = RealField(grid, np.random.default_rng(2).standard_normal(grid.shape))
    spec = f.to_spectral()
    c = spec.coeffs
    sym = np.conj(c[(-np.arange(16)) % 16][:, (-np.arange(16)) % 16])
    assert np.allclose(c, sym, atol=1e-15)
    back = np.fft.ifft2(c * grid.N**2)
    assert np.abs(back.imag).max() < 1e-10 * np.linalg.norm(back.real)


def test_apply_multiplier_identity_and_heat_zero():
    grid = TorusGrid(np.pi, 32)
    f = RealField(grid, np.random.default_rng(3).standard_normal(grid.shape))
    spec = f.to_spectral()
    out = apply_multiplier(spec, lambda p2: np.ones_like(p2))
    assert np.array_equal(out.coeffs, spec.coeffs)
    out0 = apply_multiplier(spec, lambda p2: np.exp(-0.0 * (p2 + 1.0)))
    assert np.allclose(out0.to_real().values, f.values, atol=1e-12)


def test_heat_semigroup_constant_field():
    grid = TorusGrid(np.pi, 32)
    c, t = 2.5, 0.7
    out = heat_semigroup(RealField(grid, np.full(grid.shape, c)), t)
    assert np.allclose(out.values, c * np.exp(-t), atol=1e-12)


def test_apply_multiplier_rejects_nonfinite():
    grid = TorusGrid(np.pi, 32)
    spec = RealField(grid, np.ones(grid.shape)).to_spectral()
    with pytest.raises(ValueError, match="wavenumber"):
        apply_multiplier(spec, lambda p2: 1.0 / p2)  # infinite at p = 0


def test_heat_semigroup_rejects_negative_time():
    grid = TorusGrid(np.pi, 32)
    with pytest.raises(ValueError):
        heat_semigroup(RealField(grid, np.ones(grid.shape)), -0.1)


def test_heat_delta_matches_image_sum():
    # Kronecker delta of mass spacing^-2 approximates a Dirac delta; its heat
    # evolution at x = 0 matches e^{-t} p_t^L(0) from the truncated image sum.
    grid = TorusGrid(1.0, 64)
    delta = np.zeros(grid.shape)
    delta[0, 0] = 1.0 / grid.spacing**2
    t = 1.0
    out = heat_semigroup(RealField(grid, delta), t).values[0, 0]
    images = sum(
        plane_heat_kernel(t, np.array([-2.0 * a1, -2.0 * a2]))
        for a1 in range(-8, 9)
        for a2 in range(-8, 9)
    )
    oracle = np.exp(-t) * images
    assert abs(out - oracle) < 1e-10 * oracle


def test_periodic_heat_kernel_values():
    # distant images negligible at L = 8: p_1(0) = 1/(4 pi)
    assert abs(periodic_heat_kernel(1.0, [0.0, 0.0], 8.0) - 1.0 / (4 * np.pi)) < 1e-6
    # direct truncated image sum at L = 1
    direct = sum(
        plane_heat_kernel(1.0, np.array([-2.0 * a1, -2.0 * a2]))
        for a1 in range(-9, 10)
        for a2 in range(-9, 10)
    )
    assert abs(periodic_heat_kernel(1.0, [0.0, 0.0], 1.0) - direct) < 1e-12
    # evenness
    for x in ([0.3, 0.1], [0.7, -0.4], [1.2, 0.9]):
        a = periodic_heat_kernel(0.5, np.array(x), 2.0)
        b = periodic_heat_kernel(0.5, -np.array(x), 2.0)
        assert abs(a - b) < 1e-15
    with pytest.raises(ValueError):
        periodic_heat_kernel(0.0, [0.1, 0.1], 1.0)


def test_semigroup_property():
    grid = TorusGrid(np.pi, 64)
    f = RealField(grid, np.random.default_rng(5).standard_normal(grid.shape))
    s, t = 0.3, 0.8
    two = heat_semigroup(heat_semigroup(f, s), t).values
    one = heat_semigroup(f, s + t).values
    assert np.abs(two - one).max() <= 1e-10 * np.abs(one).max()


def test_heat_positivity_proxy():
    # discrete maximum principle proxy at macroscopic times
    grid = TorusGrid(np.pi, 64)
    rng = np.random.default_rng(6)
    f = RealField(grid, np.abs(rng.standard_normal(grid.shape)))
    for t in (0.05, 0.2, 1.0):
        out = heat_semigroup(f, t).values
        assert out.min() >= -1e-10


def test_grid_validation():
    with pytest.raises(ValueError):
        TorusGrid(-1.0, 32)
    with pytest.raises(ValueError):
        TorusGrid(1.0, 33)
    TorusGrid(1.0, 1)  # degenerate single-site grid is allowed


def test_snapshot_roundtrip(tmp_path):
    grid = TorusGrid(2.5, 16)
    f = RealField(grid, np.random.default_rng(7).standard_normal(grid.shape))
    path = tmp_path / "field.phi4"
    save_snapshot(path, f)
    raw = path.read_bytes()
    assert raw[:4] == b"PHI4"
    back = load_snapshot(path)
    assert back.grid == grid
    assert np.array_equal(back.values, f.values)


def test_slice_csv(tmp_path):
    grid = TorusGrid(1.0, 8)
    f = RealField(grid, np.arange(64, dtype=float).reshape(8, 8))
    path = tmp_path / "slice.csv"
    write_slice_csv(path, f, axis=0, index=2)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "x,value"
    assert len(lines) == 9
