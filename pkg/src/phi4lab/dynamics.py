"""Dynamics of the renormalized quartic SPDE on the torus.

Three routes to the same law:

* a Gaussian-remainder (exponential/ETD1) scheme: phi = Z + v with Z the
  exact-in-Fourier Ornstein-Uhlenbeck part and v the mild remainder
  v' = -Av - mu v - lam (v^3 + 3 v^2 Z + 3 v :Z^2: + :Z^3:);
* a direct lattice Langevin discretisation
  phi <- phi + dt (Lap_eps phi - (1 + mu - 3 lam a_ref) phi - lam phi^3)
           + sqrt(2) * noise increment,
  whose drift is exactly -(1/h^2) dH/dphi(x) for the lattice Hamiltonian
  H = (1/2)||grad_eps phi||^2 + (lam/4)||phi||_4^4
      + ((1 + mu - 3 lam a_ref)/2)||phi||_2^2;
* a Metropolis-adjusted Langevin sampler targeting exp(-H) exactly, used as
  the equilibrium oracle.

Algebraically the remainder scheme integrates the same drift as the
spectral-symbol Langevin scheme: expanding the binomials with the fixed
counterterm gives -A phi - mu phi - lam (phi^3 - 3 a_ref phi).  The two
schemes therefore agree pathwise to first order in dt when run from the same
noise with the same (spectral) Laplacian symbol; the finite-difference symbol
is the default for the Langevin route because it matches the lattice
Hamiltonian exactly.

All replica parallelism is leading-axis batching; one trajectory is
single-owner mutable state, and observable accumulators merge associatively.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .grid import TorusGrid
from .noise import NoiseSlab, RngPolicy, periodise_initial, periodise_noise, sample_slab_batch
from .gaussian import OuState, ou_init, ou_step_exact, reference_counterterm
from .wick import WickBundle, wick_centred, wick_of_phi, wick_with_ic

__all__ = [
    "SimConfig",
    "BlowUpError",
    "DpdState",
    "dpd_init",
    "dpd_step",
    "run_dpd",
    "laplacian_fd5",
    "langevin_step",
    "hamiltonian",
    "hamiltonian_gradient",
    "mala_sample",
    "Observables",
    "coupled_run",
]


@dataclass
class SimConfig:
    """Configuration of one dynamics run.

    ``mu`` enters with the mass convention of the remainder equation: the
    total quadratic coefficient of the drift is (1 + mu - 3 lam a_ref), so
    the effective mass term reported in manifests is that value.
    """

    grid: TorusGrid
    lam: float
    mu: float
    dt: float
    T: float
    scheme: str = "dpd-exponential"
    policy: RngPolicy = field(default_factory=lambda: RngPolicy(0))
    ic_split: str = "zero-v"  # 'zero-v': Z0 = phi0, v0 = 0; 'zero-z': v0 = phi0
    guard: float = 1e6
    laplacian: str = "fd5"  # for langevin schemes: 'fd5' or 'spectral'
    a_ref: float | None = None

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.scheme not in ("dpd-exponential", "langevin-euler", "langevin-exponential"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.ic_split not in ("zero-v", "zero-z"):
            raise ValueError(f"unknown ic_split {self.ic_split!r}")
        if self.laplacian not in ("fd5", "spectral"):
            raise ValueError(f"unknown laplacian {self.laplacian!r}")
        if self.scheme == "langevin-euler" and self.dt >= self.grid.spacing**2 / 4:
            raise ValueError(
                f"euler scheme needs dt < spacing^2/4 = {self.grid.spacing**2 / 4:g} "
                f"for stability, got dt = {self.dt}"
            )

    @property
    def counterterm(self) -> float:
        """Fixed counterterm a_ref of this grid (cached on first use)."""
        if self.a_ref is None:
            object.__setattr__(self, "a_ref", reference_counterterm(self.grid))
        return self.a_ref

    @property
    def effective_mass(self) -> float:
        """Coefficient of -phi in the linear drift: 1 + mu - 3 lam a_ref."""
        return 1.0 + self.mu - 3.0 * self.lam * self.counterterm

    def n_steps(self) -> int:
        n = self.T / self.dt
        if abs(n - round(n)) > 1e-9:
            raise ValueError(f"T={self.T} is not an integer number of steps of {self.dt}")
        return int(round(n))


class BlowUpError(RuntimeError):
    """Raised when a trajectory exceeds the configured sup-norm guard."""

    def __init__(self, message: str, state=None):
        super().__init__(message)
        self.state = state


@dataclass
class DpdState:
    """State of the Gaussian-remainder scheme: phi = Z + v."""

    t: float
    v: np.ndarray
    ou: OuState

    @property
    def grid(self) -> TorusGrid:
        return self.ou.grid

    def wick(self, cfg: SimConfig) -> WickBundle:
        """Fixed-convention Wick bundle of Z at the current time."""
        bundle = wick_centred(
            self.ou.z_tilde(), self.grid, self.t, "fixed", cfg.counterterm
        )
        if self.ou.phi0_hat is not None:
            bundle = replace(bundle, mean=self.ou.mean_field())
        return bundle

    def phi(self) -> np.ndarray:
        return self.v + self.ou.z()


def dpd_init(
    cfg: SimConfig, phi0: np.ndarray | None = None, batch: int | None = None
) -> DpdState:
    """Initial state with the configured initial-condition split."""
    grid = cfg.grid
    if phi0 is None or cfg.ic_split == "zero-v":
        ou = ou_init(grid, phi0, batch=batch)
        shape = grid.shape if batch is None else (batch,) + grid.shape
        v = np.zeros(shape)
    else:  # 'zero-z': remainder carries the initial condition
        ou = ou_init(grid, None, batch=batch)
        v = np.broadcast_to(
            np.asarray(phi0, dtype=np.float64),
            grid.shape if batch is None else (batch,) + grid.shape,
        ).copy()
    return DpdState(0.0, v, ou)


def _remainder_force(v: np.ndarray, bundle: WickBundle, cfg: SimConfig) -> np.ndarray:
    # The linear term acts on the full field phi = v + Z: expanding the Wick
    # binomials, -Av + F equals the phi-drift -A phi - mu phi
    # - lam (phi^3 - 3 a_ref phi) minus the OU part, which is what makes the
    # remainder and direct Langevin schemes integrate the same equation.
    z = bundle.z
    return -cfg.mu * (v + z) - cfg.lam * (
        v**3 + 3.0 * v**2 * z + 3.0 * v * bundle.z2 + bundle.z3
    )


def dpd_step(state: DpdState, cfg: SimConfig, slab: NoiseSlab) -> DpdState:
    """One ETD1 step of the remainder plus one exact OU step, shared slab.

    v_{t+dt} = e^{-dt A} [v_t + dt F(v_t, Z_t)] with
    F = -mu v - lam (v^3 + 3 v^2 Z + 3 v :Z^2: + :Z^3:).
    """
    grid = state.grid
    if slab.grid != grid:
        raise ValueError("slab grid does not match state grid")
    bundle = state.wick(cfg)
    force = _remainder_force(state.v, bundle, cfg)
    decay = np.exp(-slab.dt * grid.omega_r)
    v_new = grid.irfft(grid.rfft(state.v + slab.dt * force) * decay)
    sup = np.abs(v_new).max()
    if not np.isfinite(sup) or sup > cfg.guard:
        raise BlowUpError(
            f"remainder sup-norm {sup:g} exceeded guard {cfg.guard:g} at "
            f"t={state.t + slab.dt:g}",
            state=state,
        )
    ou_new = ou_step_exact(state.ou, slab)
    return DpdState(state.t + slab.dt, v_new, ou_new)


def run_dpd(
    cfg: SimConfig,
    phi0: np.ndarray | None,
    replicas: range,
    monitor: Callable[[DpdState, SimConfig], None] | None = None,
    record_times: Sequence[float] = (),
    observer: Callable[[float, np.ndarray], None] | None = None,
) -> DpdState:
    """Drive a batch of replicas to T; optionally monitor and record.

    ``observer(t, phi)`` is called at each requested record time with the
    batched field.
    """
    state = dpd_init(cfg, phi0, batch=len(replicas))
    n = cfg.n_steps()
    record = {int(round(t / cfg.dt)): t for t in record_times}
    if monitor is not None:
        monitor(state, cfg)
    for k in range(n):
        slab = sample_slab_batch(cfg.policy, cfg.grid, cfg.dt, k, replicas)
        state = dpd_step(state, cfg, slab)
        if monitor is not None:
            monitor(state, cfg)
        if observer is not None and k + 1 in record:
            observer(record[k + 1], state.phi())
    return state


# -- lattice Langevin -----------------------------------------------------------


def laplacian_fd5(grid: TorusGrid, phi: np.ndarray) -> np.ndarray:
    """5-point Laplacian with periodic wraparound."""
    return (
        np.roll(phi, 1, axis=-2)
        + np.roll(phi, -1, axis=-2)
        + np.roll(phi, 1, axis=-1)
        + np.roll(phi, -1, axis=-1)
        - 4.0 * phi
    ) / grid.spacing**2


def _langevin_drift(phi: np.ndarray, cfg: SimConfig) -> np.ndarray:
    grid = cfg.grid
    if cfg.laplacian == "fd5":
        lap = laplacian_fd5(grid, phi)
    else:
        lap = grid.irfft(grid.rfft(phi) * (-grid.p_squared[:, : grid.N // 2 + 1]))
    return lap - cfg.effective_mass * phi - cfg.lam * phi**3


def langevin_step(phi: np.ndarray, cfg: SimConfig, slab: NoiseSlab) -> np.ndarray:
    """One step of the lattice Langevin SDE.

    Euler: phi + dt * drift + sqrt(2) * increments.  The exponential variant
    treats the linear part exactly in Fourier with the configured Laplacian
    symbol and matches the Ornstein-Uhlenbeck noise variance per mode.
    """
    grid = cfg.grid
    if slab.grid != grid:
        raise ValueError("slab grid does not match field grid")
    dt = slab.dt
    if cfg.scheme == "langevin-exponential":
        sym = grid.fd_omega_r if cfg.laplacian == "fd5" else grid.omega_r
        w = sym + (cfg.effective_mass - 1.0)
        w = np.maximum(w, 1e-12)  # effective mass may push low modes negative
        decay = np.exp(-dt * w)
        sigma = np.sqrt(-np.expm1(-2.0 * dt * w) / (w * dt))
        nonlin = -cfg.lam * phi**3
        out = grid.irfft(
            decay * grid.rfft(phi + dt * nonlin) + sigma * grid.rfft(slab.increments)
        )
    else:  # euler
        out = phi + dt * _langevin_drift(phi, cfg) + np.sqrt(2.0) * slab.increments
    sup = np.abs(out).max()
    if not np.isfinite(sup) or sup > cfg.guard:
        raise BlowUpError(
            f"field sup-norm {sup:g} exceeded guard {cfg.guard:g}", state=phi
        )
    return out


def run_langevin(
    cfg: SimConfig,
    replicas: range,
    burn_time: float,
    sample_time: float,
    obs: "Observables",
    obs_stride: int = 10,
    phi0: np.ndarray | None = None,
) -> "Observables":
    """Long-run lattice Langevin chain feeding an observable accumulator.

    Runs ``len(replicas)`` independent chains for burn_time + sample_time,
    accumulating observables every ``obs_stride`` steps after burn-in.
    """
    grid = cfg.grid
    n_burn = int(round(burn_time / cfg.dt))
    n_samp = int(round(sample_time / cfg.dt))
    if phi0 is None:
        phi = np.zeros((len(replicas),) + grid.shape)
    else:
        phi = np.broadcast_to(phi0, (len(replicas),) + grid.shape).copy()
    for k in range(n_burn + n_samp):
        slab = sample_slab_batch(cfg.policy, grid, cfg.dt, k, replicas)
        phi = langevin_step(phi, cfg, slab)
        if k >= n_burn and (k - n_burn) % obs_stride == 0:
            obs.update(phi)
    return obs


def hamiltonian(grid: TorusGrid, phi: np.ndarray, lam: float, mu: float, a: float):
    """Lattice Hamiltonian H = (1/2)||grad phi||^2 + (lam/4)||phi||_4^4
    + ((1 + mu - 3 lam a)/2)||phi||_2^2 with h^2-weighted lattice norms."""
    h2 = grid.spacing**2
    gx = (np.roll(phi, -1, axis=-2) - phi) / grid.spacing
    gy = (np.roll(phi, -1, axis=-1) - phi) / grid.spacing
    kin = 0.5 * h2 * ((gx**2 + gy**2).sum(axis=(-2, -1)))
    quart = 0.25 * lam * h2 * (phi**4).sum(axis=(-2, -1))
    mass = 0.5 * (1.0 + mu - 3.0 * lam * a) * h2 * (phi**2).sum(axis=(-2, -1))
    return kin + quart + mass


def hamiltonian_gradient(
    grid: TorusGrid, phi: np.ndarray, lam: float, mu: float, a: float
) -> np.ndarray:
    """grad_eps H(phi, x) = h^{-2} dH/dphi(x) = -drift of the Langevin SDE."""
    return -(
        laplacian_fd5(grid, phi)
        - (1.0 + mu - 3.0 * lam * a) * phi
        - lam * phi**3
    )


def mala_sample(
    cfg: SimConfig,
    n_samples: int,
    thin: int = 5,
    burn_in: int = 500,
    step: float | None = None,
    rng: np.random.Generator | None = None,
    batch: int = 16,
    observer: Callable[[np.ndarray], None] | None = None,
    precondition: str | None = "fourier",
) -> dict:
    """Metropolis-adjusted Langevin sampler of exp(-H) on the lattice.

    Proposals follow the (optionally preconditioned) Langevin discretisation:
    with the identity mobility h^{-2} the proposal noise has per-site
    variance 2*step/h^2; the default 'fourier' preconditioner is the fixed
    operator M = (A_eps)^{-1} diagonal in Fourier, which equalises mode
    relaxation times (the zero mode otherwise dominates the mixing time).
    Either way the Metropolis correction keeps the chain exact for exp(-H).
    The step size is tuned during burn-in towards acceptance in [0.4, 0.8]
    and then frozen.
    """
    grid = cfg.grid
    lam, mu, a = cfg.lam, cfg.mu, cfg.counterterm
    rng = rng or cfg.policy.scalar_generator(0xA1A)
    if precondition not in (None, "fourier"):
        raise ValueError(f"unknown preconditioner {precondition!r}")
    if precondition == "fourier":
        m_inv = 1.0 / grid.fd_omega_r  # M, per mode
        tau = step if step is not None else 0.5
    else:
        m_inv = np.ones_like(grid.fd_omega_r)
        tau = step if step is not None else 0.1 * grid.spacing**2
    wts = grid.rfft_weights * grid.volume

    def drift(phi):
        return -hamiltonian_gradient(grid, phi, lam, mu, a)

    def proposal_mean_hat(phi):
        return grid.rfft(phi) + tau * m_inv * grid.rfft(drift(phi))

    def sample_noise(shape_lead):
        white = rng.standard_normal(shape_lead + grid.shape)
        scale = np.sqrt(2.0 * tau * m_inv * grid.N**2 / grid.volume)
        return grid.rfft(white) * scale

    def log_q(mean_hat, to):
        d = grid.rfft(to) - mean_hat
        return -(np.abs(d) ** 2 / m_inv * wts).sum(axis=(-2, -1)) / (4.0 * tau)

    phi = rng.standard_normal((batch,) + grid.shape) * 0.1
    H = hamiltonian(grid, phi, lam, mu, a)
    accepted = 0
    proposed = 0
    n_kept = 0
    samples = []
    n_rounds = burn_in + (n_samples * thin) // batch + thin
    for it in range(n_rounds):
        mean_fwd = proposal_mean_hat(phi)
        prop = grid.irfft(mean_fwd + sample_noise((batch,)))
        H_prop = hamiltonian(grid, prop, lam, mu, a)
        mean_rev = proposal_mean_hat(prop)
        log_alpha = H - H_prop + log_q(mean_rev, phi) - log_q(mean_fwd, prop)
        acc = np.log(rng.uniform(size=log_alpha.shape)) < log_alpha
        phi = np.where(acc[..., None, None], prop, phi)
        H = np.where(acc, H_prop, H)
        if it < burn_in:
            rate = acc.mean()
            if rate < 0.4:
                tau *= 0.85
            elif rate > 0.8:
                tau *= 1.15
        else:
            accepted += int(acc.sum())
            proposed += acc.size
            if (it - burn_in) % thin == 0:
                samples.append(phi.copy())
                if observer is not None:
                    observer(phi)
                n_kept += batch
                if n_kept >= n_samples:
                    break
    rate = accepted / max(proposed, 1)
    if not 0.05 <= rate <= 0.99:
        import warnings

        warnings.warn(
            f"MALA acceptance rate {rate:.3f} outside [0.05, 0.99]: step size "
            f"{tau:g} needs retuning",
            RuntimeWarning,
        )
    out = np.concatenate(samples, axis=0)[:n_samples]
    return {"samples": out, "acceptance": rate, "step": tau}


# -- observables ------------------------------------------------------------------


@dataclass
class Observables:
    """Associatively mergeable accumulators of equilibrium observables."""

    grid: TorusGrid
    test_functions: dict[str, np.ndarray] = field(default_factory=dict)
    n: int = 0
    sum_mag: float = 0.0
    sum_chi: float = 0.0
    sum_chi_sq: float = 0.0
    sum_phi2: float = 0.0
    sum_phi2_sq: float = 0.0
    char_cos: dict[str, float] = field(default_factory=dict)
    char_cos_sq: dict[str, float] = field(default_factory=dict)
    char_sin: dict[str, float] = field(default_factory=dict)

    def update(self, phi: np.ndarray) -> None:
        """Accumulate one batch of field samples (leading axes batched)."""
        phi = phi if phi.ndim == 3 else phi[None]
        vol = self.grid.volume
        tot = self.grid.integrate(phi)
        mag = tot / vol
        chi = tot**2 / vol
        phi2 = (phi**2).mean(axis=(-2, -1))
        self.n += phi.shape[0]
        self.sum_mag += float(mag.sum())
        self.sum_chi += float(chi.sum())
        self.sum_chi_sq += float((chi**2).sum())
        self.sum_phi2 += float(phi2.sum())
        self.sum_phi2_sq += float((phi2**2).sum())
        for name, f in self.test_functions.items():
            pair = self.grid.pairing(phi, f)
            self.char_cos[name] = self.char_cos.get(name, 0.0) + float(
                np.cos(pair).sum()
            )
            self.char_cos_sq[name] = self.char_cos_sq.get(name, 0.0) + float(
                (np.cos(pair) ** 2).sum()
            )
            self.char_sin[name] = self.char_sin.get(name, 0.0) + float(
                np.sin(pair).sum()
            )

    def merge(self, other: "Observables") -> "Observables":
        if other.grid != self.grid:
            raise ValueError("cannot merge observables on different grids")
        self.n += other.n
        self.sum_mag += other.sum_mag
        self.sum_chi += other.sum_chi
        self.sum_chi_sq += other.sum_chi_sq
        self.sum_phi2 += other.sum_phi2
        self.sum_phi2_sq += other.sum_phi2_sq
        for d_self, d_other in (
            (self.char_cos, other.char_cos),
            (self.char_cos_sq, other.char_cos_sq),
            (self.char_sin, other.char_sin),
        ):
            for k, v in d_other.items():
                d_self[k] = d_self.get(k, 0.0) + v
        return self

    def summary(self) -> dict:
        n = max(self.n, 1)

        def mean_err(s, s2):
            m = s / n
            var = max(s2 / n - m**2, 0.0)
            return m, np.sqrt(var / n)

        chi, chi_err = mean_err(self.sum_chi, self.sum_chi_sq)
        phi2, phi2_err = mean_err(self.sum_phi2, self.sum_phi2_sq)
        out = {
            "n": self.n,
            "magnetisation": self.sum_mag / n,
            "susceptibility": chi,
            "susceptibility_err": chi_err,
            "phi2": phi2,
            "phi2_err": phi2_err,
        }
        for name in self.test_functions:
            c, c_err = mean_err(
                self.char_cos.get(name, 0.0), self.char_cos_sq.get(name, 0.0)
            )
            out[f"char_{name}"] = c
            out[f"char_{name}_err"] = c_err
            out[f"char_{name}_sin"] = self.char_sin.get(name, 0.0) / n
        return out


# -- coupled multi-volume runs -----------------------------------------------------


def coupled_run(
    cfg: SimConfig,
    sub_Ls: Sequence[float],
    fs: dict[str, "np.ndarray | object"],
    replicas: range,
    phi0: np.ndarray | None = None,
) -> dict:
    """Run the remainder dynamics on the master torus and every sub-torus
    with shared periodised noise and periodised initial conditions.

    ``fs`` maps names to master-grid test functions (arrays) or objects with
    ``.values(grid)``; each must be supported well inside the smallest
    sub-torus.  Records, at t = T, the paired characteristic-functional gap
    Delta(L) = |E[e^{i(f,phi)} - e^{i(f,phi^L)}]| with standard errors and
    the pathwise diagnostic E|(phi - phi^L, f)|.
    """
    master = cfg.grid
    min_L = min(sub_Ls)
    f_master: dict[str, np.ndarray] = {}
    for name, f in fs.items():
        vals = f if isinstance(f, np.ndarray) else f.values(master)
        support = np.max(np.abs(np.stack(master.coords)) * (np.abs(vals) > 0))
        if support > min_L * (1.0 - 1e-9):
            raise ValueError(
                f"test function {name!r} reaches {support:g}, outside the smallest "
                f"sub-torus [{-min_L}, {min_L})^2"
            )
        f_master[name] = vals

    from .noise import restrict_to_subtorus, subgrid_for

    vols: list[dict] = []
    for sub_L in sorted(set(sub_Ls)):
        if sub_L == master.L:
            sub, phi0_sub, f_sub = master, phi0, dict(f_master)
        else:
            sub = subgrid_for(master, sub_L)
            phi0_sub = None if phi0 is None else periodise_initial(master, phi0, sub_L)
            f_sub = {
                name: restrict_to_subtorus(master, v, sub_L)[1]
                for name, v in f_master.items()
            }
        vols.append(
            {
                "L": sub_L,
                "grid": sub,
                "phi0": phi0_sub,
                "fs": f_sub,
                "cfg": replace(cfg, grid=sub, a_ref=None),
            }
        )

    n = cfg.n_steps()
    master_cfg = replace(cfg, grid=master, a_ref=None)
    pair_master = {name: [] for name in f_master}
    pair_sub: dict[float, dict[str, list]] = {
        v["L"]: {name: [] for name in f_master} for v in vols
    }

    batch = 256
    for lo in range(replicas.start, replicas.stop, batch):
        rng_range = range(lo, min(lo + batch, replicas.stop))
        m_state = dpd_init(master_cfg, phi0, batch=len(rng_range))
        states = {
            v["L"]: dpd_init(v["cfg"], v["phi0"], batch=len(rng_range)) for v in vols
        }
        for k in range(n):
            slab = sample_slab_batch(cfg.policy, master, cfg.dt, k, rng_range)
            m_state = dpd_step(m_state, master_cfg, slab)
            for v in vols:
                sub_slab = (
                    slab if v["L"] == master.L else periodise_noise(slab, v["L"])
                )
                states[v["L"]] = dpd_step(states[v["L"]], v["cfg"], sub_slab)
        phi_m = m_state.phi()
        for name, f in f_master.items():
            pair_master[name].append(master.pairing(phi_m, f))
        for v in vols:
            phi_s = states[v["L"]].phi()
            for name in f_master:
                pair_sub[v["L"]][name].append(v["grid"].pairing(phi_s, v["fs"][name]))

    results = {"T": cfg.T, "volumes": []}
    for v in vols:
        sub_L = v["L"]
        row = {"L": sub_L}
        for name in f_master:
            pm = np.concatenate(pair_master[name])
            ps = np.concatenate(pair_sub[sub_L][name])
            diff = np.exp(1j * pm) - np.exp(1j * ps)
            mean = diff.mean()
            err = np.sqrt(
                diff.real.var(ddof=1) / len(diff) + diff.imag.var(ddof=1) / len(diff)
            )
            row[f"delta_{name}"] = float(abs(mean))
            row[f"delta_{name}_err"] = float(err)
            pw = np.abs(pm - ps)
            row[f"pathwise_{name}"] = float(pw.mean())
            row[f"pathwise_{name}_err"] = float(pw.std(ddof=1) / np.sqrt(len(pw)))
        results["volumes"].append(row)
    return results
