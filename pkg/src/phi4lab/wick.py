"""Wick powers of Gaussian and full fields on the lattice.

Two counterterm conventions coexist:

* homogeneous ``::X^n::`` subtracts the exact time- and volume-dependent
  variance a(t, L) = Var Z_tilde_t(x), landing each power in a single
  Wiener chaos;
* fixed ``:X^n:`` subtracts the grid's reference counterterm a_ref
  (a late-time variance on the same grid), realising time- and
  volume-independent renormalisation.

The conventions are linked field-by-field by the bridge
f(t, L) = a(t, L) - a_ref:

    :X^2: = ::X^2:: + f(t, L),      :X^3: = ::X^3:: + 3 f(t, L) X.

Powers of the full field Z = e^{-tA} phi0 + Z_tilde and of phi = Z + v are
binomial combinations of centred powers with the smooth parts.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .grid import TorusGrid
from .gaussian import counterterm_variance, reference_counterterm

__all__ = [
    "hermite_apply",
    "WickBundle",
    "wick_centred",
    "wick_with_ic",
    "wick_of_phi",
]


def hermite_apply(x, a: float, n: int):
    """P_n(a, x) = exp(-(a/2) d^2/dx^2) x^n for n = 1..4.

    P1 = x, P2 = x^2 - a, P3 = x^3 - 3ax, P4 = x^4 - 6ax^2 + 3a^2.
    E[P_n(a, G)] = 0 for G ~ N(0, a).
    """
    x = np.asarray(x, dtype=np.float64)
    # explicit multiplication chains keep P_3 exactly odd under x -> -x
    if n == 1:
        return x.copy()
    if n == 2:
        return x * x - a
    if n == 3:
        return x * x * x - (3.0 * a) * x
    if n == 4:
        x2 = x * x
        return x2 * x2 - (6.0 * a) * x2 + 3.0 * a * a
    raise ValueError(f"Wick power n must be in 1..4, got {n}")


@dataclass
class WickBundle:
    """Wick powers of Z at a fixed time under a declared convention.

    ``z_tilde`` is the centred Gaussian field, ``mean`` the smooth part
    e^{-tA} phi0 (zero for the centred bundle).  ``z2`` and ``z3`` hold
    :Z^2: and :Z^3:; higher or intermediate powers come from
    :meth:`power`.
    """

    grid: TorusGrid
    t: float
    convention: str
    a_used: float
    z_tilde: np.ndarray
    mean: np.ndarray | None = None

    def __post_init__(self):
        if self.convention not in ("homogeneous", "fixed"):
            raise ValueError(
                f"convention must be 'homogeneous' or 'fixed', got {self.convention!r}"
            )

    @property
    def z(self) -> np.ndarray:
        return self.z_tilde if self.mean is None else self.z_tilde + self.mean

    def centred_power(self, n: int) -> np.ndarray:
        """:Z_tilde^n: (n = 0..4) under this bundle's convention."""
        if n == 0:
            return np.ones_like(self.z_tilde)
        return hermite_apply(self.z_tilde, self.a_used, n)

    def power(self, n: int) -> np.ndarray:
        """:Z^n: = sum_l C(n,l) :Z_tilde^l: mean^{n-l} (n = 0..4)."""
        if self.mean is None:
            return self.centred_power(n)
        out = np.zeros_like(self.z_tilde)
        for ell in range(n + 1):
            term = self.centred_power(ell)
            if n - ell > 0:
                term = term * self.mean ** (n - ell)
            out += comb(n, ell) * term
        return out

    @property
    def z2(self) -> np.ndarray:
        return self.power(2)

    @property
    def z3(self) -> np.ndarray:
        return self.power(3)


def wick_centred(
    z_tilde: np.ndarray,
    grid: TorusGrid,
    t: float,
    convention: str = "homogeneous",
    a_ref: float | None = None,
) -> WickBundle:
    """Wick bundle of a centred Gaussian sample.

    The per-site counterterm is spatially constant (translation invariance):
    a(t, L) for the homogeneous convention, the grid reference a_ref for the
    fixed one.
    """
    if convention == "homogeneous":
        a = counterterm_variance(t, grid)
        if a_ref is not None:
            raise ValueError("a_ref is only meaningful for the fixed convention")
    elif convention == "fixed":
        a = reference_counterterm(grid) if a_ref is None else float(a_ref)
    else:
        raise ValueError(
            f"convention must be 'homogeneous' or 'fixed', got {convention!r}"
        )
    return WickBundle(grid, t, convention, a, np.asarray(z_tilde, dtype=np.float64))


def wick_with_ic(bundle: WickBundle, phi0: np.ndarray, t: float) -> WickBundle:
    """Attach an initial condition: powers of Z = e^{-tA} phi0 + Z_tilde.

    Requires t > 0 (the smooth part is a heat-regularised field; the
    contract is kept even though every lattice field is smooth).
    """
    if not t > 0:
        raise ValueError(f"wick powers with initial condition need t > 0, got {t}")
    if abs(t - bundle.t) > 1e-12:
        raise ValueError(f"time stamp mismatch: bundle at {bundle.t}, asked {t}")
    grid = bundle.grid
    phi0 = np.asarray(phi0, dtype=np.float64)
    mean = grid.irfft(grid.rfft(phi0) * np.exp(-t * grid.omega_r))
    return WickBundle(grid, bundle.t, bundle.convention, bundle.a_used,
                      bundle.z_tilde, mean)


def wick_of_phi(v: np.ndarray, bundle: WickBundle, n: int) -> np.ndarray:
    """:phi^n: = sum_l C(n,l) :Z^l: v^{n-l} for phi = Z + v, n = 2..4."""
    if not 2 <= n <= 4:
        raise ValueError(f"wick_of_phi supports n in 2..4, got {n}")
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-2:] != bundle.grid.shape:
        raise ValueError(
            f"remainder shape {v.shape} does not match grid {bundle.grid.shape}"
        )
    out = np.zeros(np.broadcast_shapes(v.shape, bundle.z_tilde.shape))
    for ell in range(n + 1):
        term = bundle.power(ell)
        if n - ell > 0:
            term = term * v ** (n - ell)
        out = out + comb(n, ell) * term
    return out
