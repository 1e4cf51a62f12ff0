"""Estimators for local and weighted Besov-Hoelder norms, and numerical
stability checks for the inequalities they satisfy.

The negative-regularity norm of f is sup over dyadic scales R <= 1 and
admissible x of R^alpha |Psi_R * f(x)|, with Psi a fixed bump of unit
integral supported in the unit ball and Psi_R(x) = R^{-2} Psi(x/R).
Convolutions are circular FFT products; scales below 8*spacing are excluded
(grid artefacts dominate there).  Weighted variants use the polynomial
weight rho(x) = (1 + |x|^2)^{-sigma/2} restricted to the fundamental domain
[-L, L)^2; the restriction of the sup to the torus is an approximation of
the full-plane sup and is noted in reports.

Inequality "checks" are constant-stability tests, never proofs: they assert
that fitted constants are bounded and stable across samples, not specific
values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .grid import TorusGrid

__all__ = [
    "NormConfig",
    "psi_bump",
    "psi_bump_quartic",
    "dyadic_scales",
    "neg_norm",
    "holder_seminorm",
    "holder_norm",
    "b11_dual_norm",
    "check_heat_smoothing",
    "check_multiplication",
    "check_duality",
    "check_profile_equivalence",
    "check_besov_embedding",
    "write_report_csv",
]


def psi_bump(r2: np.ndarray) -> np.ndarray:
    """Default test-function profile (4/pi)(1 - |x|^2)^3 on the unit ball.

    Polynomial, bit-exact, unit continuum integral; the sampled kernel is
    renormalised to unit lattice integral per (grid, scale).
    """
    return np.where(r2 < 1.0, (4.0 / np.pi) * (1.0 - r2) ** 3, 0.0)


def psi_bump_quartic(r2: np.ndarray) -> np.ndarray:
    """Alternative admissible profile (5/pi)(1 - |x|^2)^4, for equivalence checks."""
    return np.where(r2 < 1.0, (5.0 / np.pi) * (1.0 - r2) ** 4, 0.0)


@dataclass
class NormConfig:
    """Parameters of the norm estimators.

    ``alpha`` is the regularity (the sign selects the branch), ``sigma`` the
    weight exponent, ``j_max`` the deepest requested dyadic scale 2^{-j}.
    Scales below 8*spacing are dropped at evaluation time.
    """

    alpha: float
    sigma: float = 0.0
    j_max: int = 6
    profile: str = "default"


_PROFILES = {"default": psi_bump, "quartic": psi_bump_quartic}


def dyadic_scales(grid: TorusGrid, j_max: int) -> list[float]:
    """Scales 2^{-j}, j = 0..j_max, restricted to R >= 8*spacing."""
    out = [2.0**-j for j in range(j_max + 1) if 2.0**-j >= 8.0 * grid.spacing]
    if not out:
        raise ValueError(
            f"grid too coarse for any admissible scale: 8*spacing = "
            f"{8 * grid.spacing:g} exceeds 1"
        )
    return out


@lru_cache(maxsize=256)
def _kernel_hat(grid: TorusGrid, R: float, profile: str) -> np.ndarray:
    """rfft of the renormalised kernel Psi_R sampled at FFT-order offsets."""
    r = (grid.xs + grid.L) % (2.0 * grid.L)
    r = np.where(r > grid.L, r - 2.0 * grid.L, r)
    r2 = (r[:, None] ** 2 + r[None, :] ** 2) / R**2
    ker = _PROFILES[profile](r2) / R**2
    total = ker.sum() * grid.spacing**2
    if not total > 0:
        raise ValueError(f"kernel at scale {R} has no support on the grid")
    ker = ker / total
    return grid.rfft(ker)


def smooth_at_scale(
    grid: TorusGrid, f: np.ndarray, R: float, profile: str = "default"
) -> np.ndarray:
    """Psi_R * f by circular FFT convolution (unit-integral kernel)."""
    return grid.irfft(grid.rfft(f) * _kernel_hat(grid, R, profile) * grid.volume)


def weight_field(grid: TorusGrid, sigma: float) -> np.ndarray:
    """rho(x) = (1 + |x|^2)^{-sigma/2} on the fundamental domain."""
    x1, x2 = grid.coords
    return (1.0 + x1**2 + x2**2) ** (-sigma / 2.0)


def _admissible_mask(grid: TorusGrid, box: float | None, R: float) -> np.ndarray:
    if box is None:
        return np.ones(grid.shape, dtype=bool)
    x1, x2 = grid.coords
    return (np.abs(x1) <= box - R) & (np.abs(x2) <= box - R)


def neg_norm(
    f: np.ndarray,
    grid: TorusGrid,
    alpha: float,
    sigma: float = 0.0,
    box: float | None = None,
    j_max: int = 6,
    profile: str = "default",
):
    """||f||_{-alpha, .}: max over scales and admissible x of R^alpha |Psi_R*f|.

    ``box`` selects the local branch (sup over x with B_R(x) inside the
    centred box of that half-width); otherwise the weighted branch with
    exponent ``sigma`` is used.  Batched over leading axes of ``f``.
    """
    if not alpha > 0:
        raise ValueError(f"neg_norm computes ||f||_(-alpha) and needs alpha > 0, got {alpha}")
    rho = weight_field(grid, sigma) if box is None else None
    best = None
    for R in dyadic_scales(grid, j_max):
        conv = np.abs(smooth_at_scale(grid, f, R, profile)) * R**alpha
        if box is None:
            conv = conv * rho
        else:
            conv = conv * _admissible_mask(grid, box, R)
        cur = conv.max(axis=(-2, -1))
        best = cur if best is None else np.maximum(best, cur)
    return best


def _offset_list(grid: TorusGrid, max_dist: float, stride: int) -> list[tuple[int, int, float]]:
    """Deterministic strided offsets (di, dj, |delta|) with 0 < |delta| <= max_dist."""
    K = int(max_dist / grid.spacing)
    out = []
    for di in range(-K, K + 1, stride):
        for dj in range(-K, K + 1, stride):
            if di == 0 and dj == 0:
                continue
            d = grid.spacing * np.hypot(di, dj)
            if d <= max_dist:
                out.append((di, dj, d))
    return out


def _auto_stride(grid: TorusGrid, max_dist: float, budget: int = 400) -> int:
    K = max(int(max_dist / grid.spacing), 1)
    stride = 1
    while (2 * K // stride + 1) ** 2 > budget:
        stride += 1
    return stride


def holder_seminorm(
    f: np.ndarray,
    grid: TorusGrid,
    alpha: float,
    sigma: float = 0.0,
    box: float | None = None,
    stride: int | None = None,
):
    """[f]_alpha: max over site pairs |x-y| <= 1 of |f(x)-f(y)| / |x-y|^alpha.

    Pairs are enumerated as strided grid offsets (deterministic stride,
    chosen to keep about 400 offsets when not given).  The weighted variant
    multiplies by rho(x); the local variant restricts both sites to the box.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"holder seminorm needs alpha in (0,1), got {alpha}")
    stride = stride or _auto_stride(grid, 1.0)
    rho = weight_field(grid, sigma) if box is None else None
    if box is not None:
        x1, x2 = grid.coords
        inbox = (np.abs(x1) <= box) & (np.abs(x2) <= box)
    best = None
    for di, dj, d in _offset_list(grid, 1.0, stride):
        diff = np.abs(f - np.roll(f, (di, dj), axis=(-2, -1))) / d**alpha
        if box is None:
            diff = diff * rho
        else:
            pair_ok = inbox & np.roll(inbox, (di, dj), axis=(-2, -1))
            diff = diff * pair_ok
        cur = diff.max(axis=(-2, -1))
        best = cur if best is None else np.maximum(best, cur)
    return best


def holder_norm(
    f: np.ndarray,
    grid: TorusGrid,
    alpha: float,
    sigma: float = 0.0,
    box: float | None = None,
    stride: int | None = None,
):
    """||f||_alpha = sup norm plus Hoelder seminorm (weighted or local)."""
    if box is None:
        sup = (np.abs(f) * weight_field(grid, sigma)).max(axis=(-2, -1))
    else:
        x1, x2 = grid.coords
        inbox = (np.abs(x1) <= box) & (np.abs(x2) <= box)
        sup = (np.abs(f) * inbox).max(axis=(-2, -1))
    return sup + holder_seminorm(f, grid, alpha, sigma, box, stride)


def b11_dual_norm(
    g: np.ndarray,
    grid: TorusGrid,
    beta: float,
    sigma: float = 0.0,
    stride: int | None = None,
):
    """Inverse-weighted B^beta_{1,1}-type norm:

    ||g||_{L1(rho^{-1})} + int rho(x)^{-1} |g(x) - g(x+y)| / |y|^{beta+2}
    over |y| <= 1, both integrals as h^2-weighted lattice sums (the y-sum
    strided deterministically and reweighted by stride^2).
    """
    if not 0 < beta < 1:
        raise ValueError(f"b11 dual norm needs beta in (0,1), got {beta}")
    stride = stride or _auto_stride(grid, 1.0, budget=900)
    inv_rho = 1.0 / weight_field(grid, sigma)
    h2 = grid.spacing**2
    l1 = (np.abs(g) * inv_rho).sum(axis=(-2, -1)) * h2
    semi = 0.0
    for di, dj, d in _offset_list(grid, 1.0, stride):
        diff = (np.abs(g - np.roll(g, (di, dj), axis=(-2, -1))) * inv_rho).sum(
            axis=(-2, -1)
        ) * h2
        semi = semi + diff / d ** (beta + 2.0) * h2 * stride**2
    return l1 + semi


# -- inequality checks -------------------------------------------------------------


def _ratio_report(name: str, ratios: np.ndarray, threshold: float = 2.0) -> dict:
    ratios = np.asarray(ratios, dtype=np.float64)
    med = float(np.median(ratios))
    p95 = float(np.quantile(ratios, 0.95))
    return {
        "inequality": name,
        "samples": int(ratios.size),
        "median_ratio": med,
        "p95_ratio": p95,
        "verdict": "pass" if p95 <= threshold * med else "fail",
    }


def check_heat_smoothing(
    samples: np.ndarray,
    grid: TorusGrid,
    alpha: float,
    ts: tuple[float, ...] = (1e-3, 1e-2, 1e-1, 1.0),
    sigma: float = 0.5,
    bound: float = 20.0,
) -> dict:
    """Stability of ||e^{Delta t} v||_rho <= C t^{-alpha/2} ||v||_{-alpha,rho}.

    For each t, the worst ratio over samples is recorded; the verdict is
    'pass' when the ratios stay within a factor ``bound`` of each other
    across the t-grid (a uniform constant over three decades).
    """
    rho = weight_field(grid, sigma)
    denom_norm = neg_norm(samples, grid, alpha, sigma=sigma)
    ratios = []
    for t in ts:
        heat = grid.irfft(grid.rfft(samples) * np.exp(-t * grid.p_squared[:, : grid.N // 2 + 1]))
        num = (np.abs(heat) * rho).max(axis=(-2, -1))
        ratios.append(float((num / (t ** (-alpha / 2.0) * denom_norm)).max()))
    spread = max(ratios) / min(ratios)
    return {
        "inequality": "heat-smoothing",
        "samples": int(samples.shape[0]),
        "median_ratio": float(np.median(ratios)),
        "p95_ratio": float(max(ratios)),
        "spread": float(spread),
        "per_t": dict(zip([float(t) for t in ts], ratios)),
        "verdict": "pass" if spread < bound else "fail",
    }


def check_multiplication(
    us: np.ndarray,
    vs: np.ndarray,
    grid: TorusGrid,
    alpha: float,
    beta: float,
    sigma: float = 0.5,
) -> dict:
    """Stability of ||u v||_{-alpha, rho rho'} <= C ||v||_{-alpha,rho} ||u||_{beta,rho'}.

    u are smooth samples, v rough ones; the fitted constant is the observed
    ratio and the verdict requires the 95th percentile within twice the
    median.
    """
    if not beta > alpha > 0:
        raise ValueError("multiplication check needs beta > alpha > 0")
    ratios = []
    for u, v in zip(us, vs):
        num = neg_norm(u * v, grid, alpha, sigma=2.0 * sigma)
        den = neg_norm(v, grid, alpha, sigma=sigma) * holder_norm(
            u, grid, beta, sigma=sigma
        )
        ratios.append(num / den)
    return _ratio_report("multiplication", np.array(ratios))


def check_duality(
    fs: np.ndarray,
    gs: np.ndarray,
    grid: TorusGrid,
    alpha: float,
    beta: float,
    sigma: float = 0.5,
) -> dict:
    """Stability of |(f, g)| <= C ||f||_{-alpha,rho} |||g|||_{beta,rho^{-1}}."""
    if not beta > alpha > 0:
        raise ValueError("duality check needs beta > alpha > 0")
    ratios = []
    for f, g in zip(fs, gs):
        num = abs(grid.pairing(f, g))
        den = float(neg_norm(f, grid, alpha, sigma=sigma)) * float(
            b11_dual_norm(g, grid, beta, sigma=sigma)
        )
        ratios.append(num / den)
    return _ratio_report("duality", np.array(ratios))


def check_profile_equivalence(
    samples: np.ndarray,
    grid: TorusGrid,
    alpha: float,
    sigma: float = 0.5,
    factor: float = 3.0,
) -> dict:
    """Norms from two admissible bump profiles agree up to a stable constant.

    The per-sample ratio of the two norms must stay within a factor
    ``factor`` band (p95/p05), the argmax scale being allowed to differ.
    """
    n1 = neg_norm(samples, grid, alpha, sigma=sigma, profile="default")
    n2 = neg_norm(samples, grid, alpha, sigma=sigma, profile="quartic")
    ratios = n1 / n2
    lo, hi = np.quantile(ratios, [0.05, 0.95])
    return {
        "inequality": "profile-equivalence",
        "samples": int(np.size(ratios)),
        "median_ratio": float(np.median(ratios)),
        "p95_ratio": float(hi),
        "spread": float(hi / lo),
        "verdict": "pass" if hi / lo <= factor else "fail",
    }


def _circular_box_sum2d(a: np.ndarray, half: int) -> np.ndarray:
    """Sum of a over the square window [-half, half]^2, circular, via FFT."""
    n = a.shape[-1]
    i = np.arange(n)
    ind1 = (np.minimum(i, n - i) <= half).astype(np.float64)
    ind = ind1[:, None] * ind1[None, :]
    out = np.fft.irfft2(
        np.fft.rfft2(a, axes=(-2, -1)) * np.fft.rfft2(ind), s=a.shape[-2:], axes=(-2, -1)
    )
    return out


def check_besov_embedding(
    samples: np.ndarray,
    grid: TorusGrid,
    alpha: float,
    p: int = 4,
    x_stride: int = 8,
    cap: float = 1e3,
) -> dict:
    """Discrete localised Besov embedding:

    R^{alpha p} |Psi_R * f(x)|^p <= C^p sum_{scales t <= R} t^{p alpha - 2}
    ||Psi_t * f||^p_{L^p(B_{3R}(x))} dlog t, with one fitted C over samples.
    """
    scales = dyadic_scales(grid, j_max=6)
    convs = {R: smooth_at_scale(grid, samples, R) for R in scales}
    h2 = grid.spacing**2
    worst = 0.0
    xs_idx = np.arange(0, grid.N, x_stride)
    for R in scales:
        lhs = R ** (alpha * p) * np.abs(convs[R]) ** p
        # L^p over boxes B_{3R}(x), truncated log-integral over t <= R
        rhs = np.zeros_like(lhs)
        half = max(int(3 * R / grid.spacing), 1)
        for t in [s for s in scales if s <= R]:
            gp = np.abs(convs[t]) ** p
            box = _circular_box_sum2d(gp, half)
            rhs += t ** (p * alpha - 2) * box * h2 * np.log(2.0)
        ratio = lhs[..., xs_idx[:, None], xs_idx[None, :]] / np.maximum(
            rhs[..., xs_idx[:, None], xs_idx[None, :]], 1e-300
        )
        worst = max(worst, float(ratio.max()))
    c_fit = worst ** (1.0 / p)
    return {
        "inequality": "besov-embedding",
        "samples": int(samples.shape[0]),
        "median_ratio": c_fit,
        "p95_ratio": c_fit,
        "verdict": "pass" if np.isfinite(c_fit) and c_fit < cap else "fail",
    }


def write_report_csv(path, reports: list[dict]) -> None:
    with open(path, "w") as fh:
        fh.write("inequality,samples,median_ratio,p95_ratio,verdict\n")
        for r in reports:
            fh.write(
                f"{r['inequality']},{r['samples']},{r['median_ratio']!r},"
                f"{r['p95_ratio']!r},{r['verdict']}\n"
            )
