"""Exact-in-Fourier Ornstein-Uhlenbeck simulation and Gaussian analytics.

The process solved here is (d/dt + A) Z = sqrt(2) dW with A = -Laplacian + 1
on the torus.  Per mode p the update over a step dt is the exact transition

    Z_hat(p) <- exp(-dt w) Z_hat(p) + sigma_mode(dt, p) xi_hat(p),
    w = |p|^2 + 1,  sigma_mode = sqrt((1 - exp(-2 w dt)) / (w dt)),

where xi_hat is the transform of a white-noise slab (per-site variance
dt/h^2, hence per-mode variance dt/(2L)^2).  The stationary per-mode
variance is 1/((2L)^2 w); equivalently the orthonormal-mode variance
(2L)^2 E|Z_hat(p)|^2 is 1/w.

Everything stochastic in the package is tested against the analytics in this
module: the covariance kernel K^L(t1, t2, x) = int_{|t1-t2|}^{t1+t2}
e^{-u} p_u^L(x) du, the grid-exact counterterm a(t, L) = Var Z_tilde_t(x),
and the erf-product quadrature oracles for finite-volume differences.
The grid spacing plays the role of the mollification scale: the implicit
sharp Fourier cutoff of the lattice is the only regularisation, and all
counterterm statements are relative to a fixed reference a_ref evaluated at
a late reference time on the same grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy import integrate
from scipy.special import ndtr

from .grid import TorusGrid, periodic_heat_kernel
from .noise import NoiseSlab, RngPolicy, periodise_noise, sample_slab_batch, subgrid_for

__all__ = [
    "OuState",
    "ou_init",
    "ou_step_exact",
    "sample_ou_centred",
    "sample_gff",
    "CovKernel",
    "cov_kernel_eval",
    "counterterm_variance",
    "reference_counterterm",
    "counterterm_bridge_f",
    "kernel_offset_table",
    "kernel_power_offset_table",
    "pair_variance_oracle",
    "wick_pair_variance_oracle",
    "ProductBump",
    "zz_difference_oracle",
    "z_minus_zL_decay",
]

REFERENCE_TIME = 10.0


# -- OU state and exact stepping ----------------------------------------------


@dataclass
class OuState:
    """Ornstein-Uhlenbeck state Z = e^{-tA} phi0 + Z_tilde.

    ``z_hat`` holds the rfft-layout coefficients (..., N, N//2 + 1) of the
    centred part Z_tilde; leading axes are replica batches.  ``phi0_hat`` is
    None for the centred process.
    """

    grid: TorusGrid
    t: float
    z_hat: np.ndarray
    phi0_hat: np.ndarray | None = None

    @property
    def centred(self) -> bool:
        return self.phi0_hat is None

    def mean_field(self) -> np.ndarray:
        """e^{-tA} phi0 in site space (zero field if centred)."""
        if self.phi0_hat is None:
            return np.zeros(self.grid.shape)
        return self.grid.irfft(self.phi0_hat * np.exp(-self.t * self.grid.omega_r))

    def z_tilde(self) -> np.ndarray:
        return self.grid.irfft(self.z_hat)

    def z(self) -> np.ndarray:
        return self.z_tilde() + self.mean_field()


def ou_init(
    grid: TorusGrid, phi0: np.ndarray | None = None, batch: int | None = None
) -> OuState:
    rshape = (grid.N, grid.N // 2 + 1)
    shape = rshape if batch is None else (batch,) + rshape
    z_hat = np.zeros(shape, dtype=np.complex128)
    phi0_hat = None if phi0 is None else grid.rfft(np.asarray(phi0, dtype=np.float64))
    return OuState(grid, 0.0, z_hat, phi0_hat)


def ou_step_exact(state: OuState, slab: NoiseSlab) -> OuState:
    """Advance the OU state by one slab with the exact per-mode transition."""
    grid = state.grid
    if slab.grid != grid:
        raise ValueError(f"slab grid {slab.grid} does not match state grid {grid}")
    dt = slab.dt
    w = grid.omega_r
    decay = np.exp(-dt * w)
    sigma = np.sqrt(-np.expm1(-2.0 * dt * w) / (w * dt))
    xi_hat = grid.rfft(slab.increments)
    return replace(state, t=state.t + dt, z_hat=decay * state.z_hat + sigma * xi_hat)


def ou_mode_variances(grid: TorusGrid, t: float) -> np.ndarray:
    """Per-mode variance of Z_tilde_t: (1 - e^{-2 t w}) / ((2L)^2 w)."""
    w = grid.omega
    return -np.expm1(-2.0 * t * w) / (w * grid.volume)


def _field_from_mode_variance(
    grid: TorusGrid, var: np.ndarray, rng: np.random.Generator, batch: int | None
) -> np.ndarray:
    """Real Gaussian field with given spectral variance table (full layout).

    Transforming i.i.d. site normals gives Hermitian coefficients with
    per-mode variance 1/N^2; rescaling to the target variance and inverting
    yields the exact field law, Nyquist modes included.
    """
    shape = grid.shape if batch is None else (batch,) + grid.shape
    white = rng.standard_normal(shape)
    scale = np.sqrt(var[:, : grid.N // 2 + 1] * grid.N**2)
    return grid.irfft(grid.rfft(white) * scale)


def sample_ou_centred(
    grid: TorusGrid, t: float, rng: np.random.Generator, batch: int | None = None
) -> np.ndarray:
    """One-shot exact sample of Z_tilde_t (law equals chained exact steps)."""
    return _field_from_mode_variance(grid, ou_mode_variances(grid, t), rng, batch)


def sample_gff(
    grid: TorusGrid, rng: np.random.Generator, batch: int | None = None
) -> np.ndarray:
    """Sample of the lattice free field, covariance A^{-1}."""
    return _field_from_mode_variance(
        grid, 1.0 / (grid.omega * grid.volume), rng, batch
    )


# -- covariance kernel ---------------------------------------------------------


@dataclass(frozen=True)
class CovKernel:
    """Evaluation rule for K^L(t1, t2, x) = int_{|t1-t2|}^{t1+t2} e^{-u} p_u^L(x) du."""

    t1: float
    t2: float
    L: float

    @property
    def lo(self) -> float:
        return abs(self.t1 - self.t2)

    @property
    def hi(self) -> float:
        return self.t1 + self.t2


def cov_kernel_eval(k: CovKernel, x, quad_tol: float = 1e-10) -> float:
    """Adaptive quadrature of the covariance kernel at spatial offset x.

    The integrand has an integrable log singularity at u -> 0 when x = 0;
    that point is only reachable at equal times with lo = 0 and is rejected.
    For small |x| > 0 the substitution u = e^v resolves the sharp layer at
    u ~ |x|^2.
    """
    x = np.asarray(x, dtype=np.float64).reshape(2)
    lo, hi = k.lo, k.hi
    if hi <= lo + 1e-15:
        return 0.0
    r2 = float((x**2).sum())
    if lo < 1e-12 and r2 == 0.0:
        raise ValueError(
            "cov_kernel_eval requires x != 0 at equal times: the kernel diverges "
            "logarithmically at coinciding points"
        )

    def integrand(u: float) -> float:
        return np.exp(-u) * periodic_heat_kernel(u, x, k.L)

    if lo < 1e-12:
        # integrate in v = log u to tame the u -> 0 layer
        v_lo = np.log(max(r2 / 400.0, 1e-300))
        v_hi = np.log(hi)
        if v_lo >= v_hi:
            v_lo = v_hi - 40.0
        val, err = integrate.quad(
            lambda v: np.exp(v) * integrand(np.exp(v)),
            v_lo,
            v_hi,
            epsabs=quad_tol,
            epsrel=1e-10,
            limit=200,
        )
        # the discarded [0, e^{v_lo}] tail is bounded by the peak Gaussian value
        tail = np.exp(v_lo) * np.exp(-r2 / (4.0 * np.exp(v_lo))) if r2 > 0 else 0.0
        err += tail
    else:
        val, err = integrate.quad(
            integrand, lo, hi, epsabs=quad_tol, epsrel=1e-10, limit=200
        )
    if err > max(10.0 * quad_tol, 1e-8 * abs(val)):
        raise RuntimeError(
            f"covariance-kernel quadrature did not converge: achieved error {err:g}"
        )
    return float(val)


# -- counterterms ---------------------------------------------------------------


def counterterm_variance(t: float, grid: TorusGrid) -> float:
    """Grid-exact Var(Z_tilde_t(x)) = (2L)^{-2} sum_p (1-e^{-2tw})/w.

    This is the lattice analogue of the mollified variance a_eps(t, L), the
    grid cutoff playing the role of the mollifier.
    """
    if t < 0:
        raise ValueError(f"counterterm variance needs t >= 0, got {t}")
    return float(ou_mode_variances(grid, t).sum())


def reference_counterterm(grid: TorusGrid, t_ref: float = REFERENCE_TIME) -> float:
    """Fixed reference counterterm a_ref = Var(Z_tilde_{t_ref}) on this grid.

    Evaluated once per grid at the late reference time, this realises
    time- and volume-independent Wick ordering on a fixed grid; all bridge
    statements are relative to it.
    """
    return counterterm_variance(t_ref, grid)


def counterterm_bridge_f(t: float, grid: TorusGrid, a_ref: float) -> float:
    """Bridge between Wick conventions: f(t, L) = a(t, L) - a_ref.

    With this sign the algebraic identities
    :Z^2: = ::Z^2:: + f  and  :Z^3: = ::Z^3:: + 3 f Z
    hold field-by-field, f(t, L) ~ (1/4pi) log t as t -> 0 (above the grid
    cutoff), and sup_{L >= 1} |f(t, L)| stays bounded for t >= 1.
    """
    return counterterm_variance(t, grid) - a_ref


# -- quadrature oracles ----------------------------------------------------------


def _u_panels(lo: float, hi: float, n_gauss: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights on geometrically refined panels of [lo, hi]."""
    edges = [lo]
    e = lo
    while e < hi:
        e = min(2.0 * e, hi)
        edges.append(e)
    gx, gw = np.polynomial.legendre.leggauss(n_gauss)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        nodes.append(mid + half * gx)
        weights.append(half * gw)
    return np.concatenate(nodes), np.concatenate(weights)


def _interval_images(L: float, hi: float) -> np.ndarray:
    """1-d image shifts 2aL wide enough for Gaussian mass at variance 2*hi."""
    reach = int(np.ceil((6.0 * np.sqrt(2.0 * hi)) / (2.0 * L))) + 1
    return 2.0 * L * np.arange(-reach, reach + 1)


def kernel_offset_table(
    grid: TorusGrid, t1: float, t2: float, quad_n: int = 16
) -> np.ndarray:
    """Cell-averaged covariance kernel on every grid offset.

    Returns the (N, N) table K_bar(r) = h^{-2} int_{cell(r)} K^L(t1,t2,s) ds,
    computed by the erf product form of the box integral of the periodised
    Gaussian.  Cell averaging makes the log singularity at r = 0 harmless, so
    h^2 sum_r (f star f)(r) K_bar(r) is a bona fide quadrature of the double
    integral of f f K^L.
    """
    lo, hi = abs(t1 - t2), t1 + t2
    if hi <= lo + 1e-15:
        return np.zeros(grid.shape)
    h, L = grid.spacing, grid.L
    u0 = max(lo, 1e-4 * h * h)
    nodes, weights = _u_panels(u0, hi, quad_n)
    shifts = _interval_images(L, hi)
    # 1-d offsets in FFT order, matching the (f star f) layout
    r1 = _fft_order_offsets(grid)
    # S[u, r] = sum_a Phi((r + h/2 - 2aL)/sqrt(2u)) - Phi((r - h/2 - 2aL)/sqrt(2u))
    sig = np.sqrt(2.0 * nodes)[:, None, None]
    arg_hi = (r1[None, :, None] + h / 2.0 - shifts[None, None, :]) / sig
    arg_lo = (r1[None, :, None] - h / 2.0 - shifts[None, None, :]) / sig
    S = (ndtr(arg_hi) - ndtr(arg_lo)).sum(axis=2)  # (n_nodes, N)
    damp = weights * np.exp(-nodes)
    return np.einsum("u,ui,uj->ij", damp, S, S) / (h * h)


def _fft_order_offsets(grid: TorusGrid) -> np.ndarray:
    """Offset coordinates i*h wrapped into [-L, L), in FFT index order."""
    r = (grid.xs + grid.L) % (2.0 * grid.L)
    return np.where(r > grid.L, r - 2.0 * grid.L, r)


def kernel_point_values(
    grid_or_L, t1: float, t2: float, pts: np.ndarray, quad_n: int = 16
) -> np.ndarray:
    """Pointwise K^L(t1, t2, x) on an array of offsets (..., 2), vectorised."""
    L = grid_or_L.L if isinstance(grid_or_L, TorusGrid) else float(grid_or_L)
    lo, hi = abs(t1 - t2), t1 + t2
    pts = np.asarray(pts, dtype=np.float64)
    if hi <= lo + 1e-15:
        return np.zeros(pts.shape[:-1])
    r2min = max(float((pts**2).sum(axis=-1).min()), 1e-12)
    u0 = max(lo, min(r2min / 400.0, hi / 4.0))
    nodes, weights = _u_panels(u0, hi, quad_n)
    shifts = _interval_images(L, hi)
    flat = pts.reshape(-1, 2)
    out = np.zeros(len(flat))
    for u, w in zip(nodes, weights):
        # product of 1-d image sums of the heat kernel at variance 2u
        g1 = np.exp(-((flat[:, 0:1] - shifts) ** 2) / (4.0 * u)).sum(axis=1)
        g2 = np.exp(-((flat[:, 1:2] - shifts) ** 2) / (4.0 * u)).sum(axis=1)
        out += w * np.exp(-u) * g1 * g2 / (4.0 * np.pi * u)
    return out.reshape(pts.shape[:-1])


def kernel_power_offset_table(
    grid: TorusGrid, t: float, n: int, near_radius: int = 4, subcells: int = 6
) -> np.ndarray:
    """Cell-averaged K^L(t, t, .)^n table (for Wick variance oracles).

    Far cells use the midpoint value of K^n; cells within ``near_radius`` of
    the diagonal average K(s)^n over a tensor Gauss-Legendre rule, which
    integrates the log^n singularity accurately.
    """
    h = grid.spacing
    r1 = _fft_order_offsets(grid)
    R1, R2 = np.meshgrid(r1, r1, indexing="ij")
    pts = np.stack([R1, R2], axis=-1)
    table = kernel_point_values(grid, t, t, pts) ** n
    # replace near-diagonal cells by subcell tensor Gauss-Legendre averages
    gx, gw = np.polynomial.legendre.leggauss(subcells)
    offs = 0.5 * h * gx
    near = np.argwhere(
        (np.abs(R1) <= near_radius * h) & (np.abs(R2) <= near_radius * h)
    )
    centers = pts[near[:, 0], near[:, 1]]
    sub = centers[:, None, None, :] + np.stack(
        [
            np.broadcast_to(offs[:, None], (subcells, subcells)),
            np.broadcast_to(offs[None, :], (subcells, subcells)),
        ],
        axis=-1,
    )
    vals = kernel_point_values(grid, t, t, sub) ** n
    avg = np.einsum("cij,i,j->c", vals, gw, gw) / (gw.sum() ** 2)
    table[near[:, 0], near[:, 1]] = avg
    return table


def _autocorrelation(grid: TorusGrid, f: np.ndarray) -> np.ndarray:
    """(f star f)(r) = h^2 sum_x f(x) f(x+r), circular, via FFT."""
    fh = np.fft.fft2(f)
    return np.fft.ifft2(np.abs(fh) ** 2).real * grid.spacing**2


def pair_variance_oracle(grid: TorusGrid, t: float, f: np.ndarray) -> float:
    """Quadrature of the double integral f f K^L(t, t, x - y): Var (Z_tilde_t, f)."""
    table = kernel_offset_table(grid, t, t)
    return float((_autocorrelation(grid, f) * table).sum() * grid.spacing**2)


def wick_pair_variance_oracle(grid: TorusGrid, t: float, f: np.ndarray, n: int) -> float:
    """n! times the quadrature of f f K^L(t,t,x-y)^n: Var (::Z_tilde^n::, f)."""
    table = kernel_power_offset_table(grid, t, n)
    corr = _autocorrelation(grid, f)
    return float(math.factorial(n) * (corr * table).sum() * grid.spacing**2)


def lattice_wick_variance(grid: TorusGrid, t: float, f: np.ndarray, n: int) -> float:
    """Lattice-exact Var((::Z_tilde^n::, f)) = n! h^2 sum_r (f star f)(r) C(r)^n.

    C is the exact lattice covariance function (inverse transform of the mode
    variances); this is the same quantity the quadrature oracle approximates,
    evaluated without any continuum idealisation.
    """
    C = grid.ifft(ou_mode_variances(grid, t))
    corr = _autocorrelation(grid, f)
    return float(math.factorial(n) * (corr * C**n).sum() * grid.spacing**2)


# -- finite-volume difference oracle ---------------------------------------------


@dataclass(frozen=True)
class ProductBump:
    """Compactly supported product test function f(x) = b(x1 - c1) b(x2 - c2).

    The 1-d profile is the polynomial bump (1 - (x/s)^2)^3 on |x| < s, which
    is C^2, supported in [c - s, c + s], and convenient for separable
    quadrature oracles.
    """

    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 0.5

    def profile(self, x: np.ndarray, axis: int) -> np.ndarray:
        u = (np.asarray(x) - self.center[axis]) / self.radius
        return np.where(np.abs(u) < 1.0, (1.0 - u**2) ** 3, 0.0)

    def values(self, grid: TorusGrid) -> np.ndarray:
        return self.profile(grid.xs, 0)[:, None] * self.profile(grid.xs, 1)[None, :]

    @property
    def support_radius(self) -> float:
        return max(abs(c) for c in self.center) + self.radius


def _pair_moment_1d(
    xs: np.ndarray,
    f1: np.ndarray,
    h: float,
    shifts: np.ndarray,
    r: float,
    box: float | None,
) -> np.ndarray:
    """h^2 sum over x, y of f(x) f(y) g(x - y - shift), one value per shift.

    The free factor is the 1-d heat kernel at time 2r,
    g = p_{2r}(x - y - shift) = (8 pi r)^{-1/2} exp(-(x-y-shift)^2 / (8r)).
    With ``box`` set, g carries the boxed-noise correction
    [Phi((box - m)/sqrt(r)) - Phi((-box - m)/sqrt(r))], m = (x+y+shift)/2:
    the exact 1-d cross-covariance factor when the sub-torus is driven by
    noise restricted to [-box, box].
    """
    X = xs[:, None] - xs[None, :]
    M = 0.5 * (xs[:, None] + xs[None, :])
    FF = f1[:, None] * f1[None, :]
    out = np.empty(len(shifts))
    for i, a in enumerate(shifts):
        gauss = np.exp(-((X - a) ** 2) / (8.0 * r)) / np.sqrt(8.0 * np.pi * r)
        if box is not None:
            m = M + 0.5 * a
            sr = np.sqrt(r)
            gauss = gauss * (ndtr((box - m) / sr) - ndtr((-box - m) / sr))
        out[i] = (FF * gauss).sum() * h * h
    return out


def zz_difference_oracle(
    master: TorusGrid, sub_L: float, t: float, f: ProductBump, quad_n: int = 16
) -> float:
    """Continuum-kernel quadrature of E[((Z_t - Z^l_t), f)^2].

    Writing K_MM, K_Ml, K_ll for the covariance kernels of the master process,
    the master/sub cross term, and the sub process, the expectation is the
    double integral of f f (K_MM - 2 K_Ml + K_ll).  The shared short-distance
    singularity cancels exactly, so only smooth correction kernels are
    integrated: master images (a != 0), sub-torus images (a != 0), and the
    boundary defect of the restricted-noise cross term.  All terms factor per
    dimension for a product bump.
    """
    if f.support_radius > (2.0 / 3.0) * sub_L + 1e-12:
        raise ValueError(
            f"test function must be supported in the 2/3 box of the sub-torus: "
            f"support radius {f.support_radius} vs (2/3)*{sub_L}"
        )
    h = master.spacing
    xs = master.xs
    mask = np.abs(xs) <= f.support_radius + h
    xs = xs[mask]
    prof = [f.profile(xs, 0), f.profile(xs, 1)]

    nodes, weights = _u_panels(1e-6 * min(t, 1.0), t, quad_n)

    def corr(kind: str) -> float:
        # 2 * int_0^t e^{-2r} [sum_a prod_i G_i(a_i, r) - free part] dr; the free
        # part is common to all three kernels and cancels in the combination,
        # so only these smooth corrections are ever integrated.
        total = 0.0
        for r, w in zip(nodes, weights):
            if kind in ("master", "sub"):
                shifts = _interval_images(master.L if kind == "master" else sub_L, t)
                G = [
                    _pair_moment_1d(xs, prof[d], h, shifts, r, None) for d in range(2)
                ]
                free = [g[len(shifts) // 2] for g in G]
                term = G[0].sum() * G[1].sum() - free[0] * free[1]
            else:  # cross: boxed image sum minus free kernel
                shifts = _interval_images(sub_L, t)
                G = [
                    _pair_moment_1d(xs, prof[d], h, shifts, r, sub_L) for d in range(2)
                ]
                F = [
                    _pair_moment_1d(xs, prof[d], h, np.array([0.0]), r, None)
                    for d in range(2)
                ]
                term = G[0].sum() * G[1].sum() - F[0][0] * F[1][0]
            total += 2.0 * w * np.exp(-2.0 * r) * term
        return total

    return corr("master") - 2.0 * corr("cross") + corr("sub")


def z_minus_zL_decay(
    policy: RngPolicy,
    master: TorusGrid,
    cases: Sequence[tuple[float, Sequence[float]]],
    f: ProductBump,
    replicas: int,
    steps_per_smallest: int = 32,
    batch: int = 512,
) -> list[dict]:
    """Monte Carlo table of E[((Z_t - Z^l_t), f)^2].

    ``cases`` maps each sub-torus half-length to its observation times; one
    coupled chain per (sub_L, replica batch) records all times.  Master and
    sub-torus processes advance with the exact per-mode transition from the
    same noise slabs (the sub-process sees the restricted increments).  Each
    row carries the estimate, its standard error, and the continuum-kernel
    quadrature oracle.
    """
    rows = []
    for sub_L, ts in cases:
        ts = sorted(float(t) for t in ts)
        if f.support_radius > (2.0 / 3.0) * sub_L + 1e-12:
            raise ValueError(
                f"test function support radius {f.support_radius} violates the "
                f"2/3 box of sub-torus {sub_L}"
            )
        sub = subgrid_for(master, sub_L)
        fm = f.values(master)
        fs = f.values(sub)
        dt = ts[0] / steps_per_smallest
        record = {}
        for t in ts:
            k = t / dt
            if abs(k - round(k)) > 1e-9:
                raise ValueError(f"time {t} is not a multiple of dt={dt}")
            record[int(round(k))] = t
        n_steps = max(record)
        sq = {t: [] for t in ts}
        for lo in range(0, replicas, batch):
            rng_range = range(lo, min(lo + batch, replicas))
            sm = ou_init(master, batch=len(rng_range))
            ss = ou_init(sub, batch=len(rng_range))
            for k in range(n_steps):
                slab = sample_slab_batch(policy, master, dt, k, rng_range)
                sm = ou_step_exact(sm, slab)
                ss = ou_step_exact(ss, periodise_noise(slab, sub_L))
                if k + 1 in record:
                    d = master.pairing(sm.z_tilde(), fm) - sub.pairing(
                        ss.z_tilde(), fs
                    )
                    sq[record[k + 1]].append(d**2)
        for t in ts:
            vals = np.concatenate(sq[t])
            oracle = (
                0.0 if sub_L == master.L else zz_difference_oracle(master, sub_L, t, f)
            )
            rows.append(
                {
                    "L": sub_L,
                    "t": t,
                    "estimate": float(vals.mean()),
                    "stderr": float(vals.std(ddof=1) / np.sqrt(len(vals))),
                    "oracle_value": oracle,
                }
            )
    return rows


def fit_log_decay(rows: Sequence[dict], key: str = "estimate") -> float:
    """Least-squares slope of log E against L^2/t over the table rows."""
    xs = np.array([r["L"] ** 2 / r["t"] for r in rows])
    ys = np.log(np.array([max(r[key], 1e-300) for r in rows]))
    A = np.stack([xs, np.ones_like(xs)], axis=1)
    slope, _ = np.linalg.lstsq(A, ys, rcond=None)[0]
    return float(slope)


def write_decay_csv(path, rows: Sequence[dict]) -> None:
    with open(path, "w") as fh:
        fh.write("L,t,estimate,stderr,oracle_value\n")
        for r in rows:
            fh.write(
                f"{r['L']!r},{r['t']!r},{r['estimate']!r},{r['stderr']!r},"
                f"{r['oracle_value']!r}\n"
            )
