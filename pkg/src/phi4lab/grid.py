"""Discrete torus [-L, L)^2, its Fourier dual, and diagonal spectral operators.

Conventions used throughout the package:

* The torus is ``[-L, L)^2`` sampled on an ``N x N`` grid with spacing
  ``h = 2L/N``; site coordinates are ``x_i = -L + i*h``.
* The forward transform carries the ``1/N^2`` factor, so mode coefficients
  approximate the Fourier-series coefficients of the continuum function:
  ``c(k) = (1/N^2) sum_x f(x) exp(-i p_k . x)`` with ``p_k = (pi/L) k`` and
  integer ``k`` in ``[-N/2, N/2)``.  Under this normalisation Parseval reads
  ``h^2 sum_x u v = (2L)^2 sum_k u_hat conj(v_hat)``.
* ``A = -Laplacian + 1`` acts as multiplication by ``|p|^2 + 1`` on modes
  (exact continuum symbol).  The 5-point finite-difference symbol
  ``(4/h^2)(sin^2(p_x h/2) + sin^2(p_y h/2))`` is also provided for the
  lattice Langevin scheme, which is the one place the finite-difference
  Laplacian is wanted.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.fft as _sfft

_FFT_WORKERS = 2

__all__ = [
    "TorusGrid",
    "RealField",
    "SpectralField",
    "apply_multiplier",
    "heat_semigroup",
    "inverse_a",
    "periodic_heat_kernel",
    "plane_heat_kernel",
    "save_snapshot",
    "load_snapshot",
    "write_slice_csv",
]

SNAPSHOT_MAGIC = b"PHI4"
SNAPSHOT_VERSION = 1


class TorusGrid:
    """Uniform discretisation of the square torus [-L, L)^2.

    ``N`` is the number of sites per dimension; even ``N`` (powers of two
    preferred) keeps the Nyquist mode unambiguous.  ``N == 1`` is accepted as
    a degenerate single-site grid for scalar-well tests.
    """

    def __init__(self, L: float, N: int):
        if not L > 0:
            raise ValueError(f"L must be positive, got {L}")
        if N != 1 and (N < 2 or N % 2 != 0):
            raise ValueError(f"N must be a positive even integer (or 1), got {N}")
        self.L = float(L)
        self.N = int(N)
        self.spacing = 2.0 * self.L / self.N

    def __repr__(self) -> str:
        return f"TorusGrid(L={self.L}, N={self.N})"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, TorusGrid) and other.L == self.L and other.N == self.N
        )

    def __hash__(self) -> int:
        return hash((self.L, self.N))

    @cached_property
    def xs(self) -> np.ndarray:
        """Site coordinates along one axis, -L + i*h."""
        return -self.L + self.spacing * np.arange(self.N)

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid (X1, X2) of site coordinates, 'ij' indexing."""
        x1, x2 = np.meshgrid(self.xs, self.xs, indexing="ij")
        return x1, x2

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """1-d wavenumbers pi*k/L in FFT order, k integer in [-N/2, N/2)."""
        return 2.0 * np.pi * np.fft.fftfreq(self.N, d=self.spacing)

    @cached_property
    def p_squared(self) -> np.ndarray:
        """|p|^2 on the (N, N) mode grid."""
        p = self.wavenumbers
        return p[:, None] ** 2 + p[None, :] ** 2

    @cached_property
    def omega(self) -> np.ndarray:
        """Symbol of A = -Laplacian + 1, i.e. |p|^2 + 1."""
        return self.p_squared + 1.0

    @cached_property
    def fd_p_squared(self) -> np.ndarray:
        """5-point finite-difference symbol (4/h^2) sum_i sin^2(p_i h/2)."""
        p = self.wavenumbers
        s = (4.0 / self.spacing**2) * np.sin(p * self.spacing / 2.0) ** 2
        return s[:, None] + s[None, :]

    @cached_property
    def omega_r(self) -> np.ndarray:
        """Symbol of A on the rfft layout (N, N//2 + 1)."""
        return self.omega[:, : self.N // 2 + 1]

    @cached_property
    def fd_omega_r(self) -> np.ndarray:
        """Finite-difference symbol of A on the rfft layout."""
        return (self.fd_p_squared + 1.0)[:, : self.N // 2 + 1]

    @cached_property
    def rfft_weights(self) -> np.ndarray:
        """Multiplicity of each rfft column under Hermitian symmetry.

        Column 0 and (for even N) the Nyquist column represent themselves;
        every other column stands for a conjugate pair.  Parseval on the rfft
        layout reads h^2 sum_x u^2 = (2L)^2 sum_k w_k |u_hat(k)|^2.
        """
        w = np.full(self.N // 2 + 1, 2.0)
        w[0] = 1.0
        if self.N % 2 == 0:
            w[-1] = 1.0
        return np.broadcast_to(w, (self.N, self.N // 2 + 1))

    @property
    def volume(self) -> float:
        """|T_L^2| = (2L)^2."""
        return (2.0 * self.L) ** 2

    @property
    def shape(self) -> tuple[int, int]:
        return (self.N, self.N)

    # -- transforms ---------------------------------------------------------

    def fft(self, values: np.ndarray) -> np.ndarray:
        """Forward transform with the 1/N^2 normalisation (last two axes)."""
        return np.fft.fft2(values, axes=(-2, -1)) / self.N**2

    def ifft(self, coeffs: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`fft`; returns the real part.

        The imaginary part of the inverse of a Hermitian-symmetric coefficient
        array is pure rounding noise; callers that need to assert this use
        :meth:`ifft_checked`.
        """
        return np.fft.ifft2(coeffs * self.N**2, axes=(-2, -1)).real

    def ifft_checked(self, coeffs: np.ndarray, tol: float = 1e-10) -> np.ndarray:
        out = np.fft.ifft2(coeffs * self.N**2, axes=(-2, -1))
        scale = np.linalg.norm(out.real)
        if scale > 0 and np.linalg.norm(out.imag) > tol * scale:
            raise ValueError("inverse transform has a non-negligible imaginary part")
        return out.real

    def rfft(self, values: np.ndarray) -> np.ndarray:
        """Real-input forward transform, same 1/N^2 normalisation as fft."""
        return _sfft.rfft2(values, axes=(-2, -1), workers=_FFT_WORKERS) / self.N**2

    def irfft(self, coeffs: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`rfft`; exactly real by construction."""
        return _sfft.irfft2(
            coeffs * self.N**2, s=self.shape, axes=(-2, -1), workers=_FFT_WORKERS
        )

    # -- inner products ------------------------------------------------------

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """h^2 sum_x f(x), the lattice integral over the torus."""
        return values.sum(axis=(-2, -1)) * self.spacing**2

    def pairing(self, f: np.ndarray, g: np.ndarray) -> np.ndarray:
        """(f, g) = h^2 sum_x f(x) g(x)."""
        return (f * g).sum(axis=(-2, -1)) * self.spacing**2

    def l2_norm_sq(self, values: np.ndarray) -> np.ndarray:
        return (values**2).sum(axis=(-2, -1)) * self.spacing**2

    def lp_norm(self, values: np.ndarray, p: float) -> np.ndarray:
        """|| f ||_{L^p} with the h^2-weighted lattice sum."""
        return (np.abs(values) ** p).sum(axis=(-2, -1)) ** (1.0 / p) * self.spacing ** (
            2.0 / p
        )


@dataclass
class RealField:
    """A scalar field on grid sites (row-major N x N array of float64)."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape[-2:] != self.grid.shape:
            raise ValueError(
                f"field shape {self.values.shape} does not match grid {self.grid.shape}"
            )

    def validate_finite(self) -> "RealField":
        if not np.all(np.isfinite(self.values)):
            raise FloatingPointError("field contains NaN or Inf")
        return self

    def to_spectral(self) -> "SpectralField":
        return SpectralField(self.grid, self.grid.fft(self.values))


@dataclass
class SpectralField:
    """Hermitian-symmetric Fourier coefficients of a real field."""

    grid: TorusGrid
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if self.coeffs.shape[-2:] != self.grid.shape:
            raise ValueError(
                f"coefficient shape {self.coeffs.shape} does not match grid "
                f"{self.grid.shape}"
            )

    def to_real(self) -> RealField:
        return RealField(self.grid, self.grid.ifft_checked(self.coeffs))


def apply_multiplier(
    fld: SpectralField, m: Callable[[np.ndarray], np.ndarray]
) -> SpectralField:
    """Apply a Fourier multiplier k |-> m(|p_k|^2) to each mode.

    ``m`` receives the (N, N) array of squared wavenumbers and must return a
    finite array of the same shape; a non-finite value is rejected with the
    offending wavenumber reported.  A real multiplier preserves Hermitian
    symmetry.
    """
    grid = fld.grid
    table = np.asarray(m(grid.p_squared))
    if table.shape != grid.shape:
        table = np.broadcast_to(table, grid.shape)
    bad = ~np.isfinite(table)
    if np.any(bad):
        i, j = np.argwhere(bad)[0]
        p = (grid.wavenumbers[i], grid.wavenumbers[j])
        raise ValueError(f"multiplier is not finite at wavenumber p={p}")
    return SpectralField(grid, fld.coeffs * table)


def heat_semigroup(fld: RealField, t: float) -> RealField:
    """e^{-tA} f with A = -Laplacian + 1, computed spectrally."""
    if t < 0:
        raise ValueError(f"heat semigroup needs t >= 0, got {t}")
    grid = fld.grid
    out = grid.ifft(grid.fft(fld.values) * np.exp(-t * grid.omega))
    return RealField(grid, out)


def heat_apply(grid: TorusGrid, values: np.ndarray, t: float) -> np.ndarray:
    """Array-level e^{-tA}, batched over leading axes."""
    if t < 0:
        raise ValueError(f"heat semigroup needs t >= 0, got {t}")
    return grid.ifft(grid.fft(values) * np.exp(-t * grid.omega))


def inverse_a(fld: RealField) -> RealField:
    """A^{-1} f, the Green operator of -Laplacian + 1."""
    grid = fld.grid
    return RealField(grid, grid.ifft(grid.fft(fld.values) / grid.omega))


def plane_heat_kernel(t: float, x: np.ndarray) -> np.ndarray:
    """Heat kernel on R^2: p_t(x) = (4 pi t)^{-1} exp(-|x|^2 / 4t)."""
    x = np.asarray(x, dtype=np.float64)
    r2 = (x**2).sum(axis=-1)
    return np.exp(-r2 / (4.0 * t)) / (4.0 * np.pi * t)


def periodic_heat_kernel(t: float, x, L: float) -> float:
    """Periodised heat kernel p_t^L(x) = sum_a p_t(x - 2aL) on [-L, L)^2.

    The image sum runs over square shells |a|_inf = s and stops once four
    times the largest Gaussian term omitted so far, multiplied by the number
    of sites remaining on the next shell, drops below 1e-14 of the running
    sum.
    """
    if not t > 0:
        raise ValueError(f"periodic heat kernel needs t > 0, got {t}")
    x = np.asarray(x, dtype=np.float64).reshape(2)
    total = float(plane_heat_kernel(t, x))
    s = 1
    while True:
        aa = np.arange(-s, s + 1)
        a1, a2 = np.meshgrid(aa, aa, indexing="ij")
        shell = (np.maximum(np.abs(a1), np.abs(a2)) == s).ravel()
        pts = np.stack([a1.ravel()[shell], a2.ravel()[shell]], axis=-1) * (2.0 * L)
        terms = plane_heat_kernel(t, x - pts)
        total += float(terms.sum())
        # nearest possible image on the next shell
        d_next = 2.0 * L * (s + 1) - np.abs(x).max()
        bound = np.exp(-(d_next**2) / (4.0 * t)) / (4.0 * np.pi * t)
        n_next = 8 * (s + 1)
        if 4.0 * bound * n_next < 1e-14 * max(total, 1e-300):
            return total
        s += 1
        if s > 10_000:
            raise RuntimeError("periodic heat kernel image sum did not converge")


# -- snapshot format ----------------------------------------------------------
#
# Little-endian binary: magic "PHI4", version u32, L f64, N u32, then N^2
# float64 values in row-major order.


def save_snapshot(path, fld: RealField) -> None:
    grid, values = fld.grid, np.ascontiguousarray(fld.values, dtype="<f8")
    if values.ndim != 2:
        raise ValueError("snapshots store a single 2-d field")
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<I", SNAPSHOT_VERSION))
        fh.write(struct.pack("<d", grid.L))
        fh.write(struct.pack("<I", grid.N))
        fh.write(values.tobytes(order="C"))


def load_snapshot(path) -> RealField:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != SNAPSHOT_MAGIC:
            raise ValueError(f"bad snapshot magic {magic!r}")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {version}")
        (L,) = struct.unpack("<d", fh.read(8))
        (N,) = struct.unpack("<I", fh.read(4))
        data = np.frombuffer(fh.read(8 * N * N), dtype="<f8").reshape(N, N)
    return RealField(TorusGrid(L, N), data.copy())


def write_slice_csv(path, fld: RealField, axis: int = 0, index: int = 0) -> None:
    """Emit a 1-d slice of the field as CSV (coordinate, value)."""
    grid = fld.grid
    line = fld.values[index, :] if axis == 0 else fld.values[:, index]
    with open(path, "w") as fh:
        fh.write("x,value\n")
        for x, v in zip(grid.xs, line):
            fh.write(f"{x!r},{v!r}\n")
