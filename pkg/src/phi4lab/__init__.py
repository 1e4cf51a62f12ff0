"""phi4lab: simulator and verification toolkit for the dynamical phi^4 model
on periodic two-dimensional tori.

The package evolves the renormalized quartic-interaction SPDE by a
Gaussian-remainder decomposition and by a direct lattice Langevin scheme,
couples the dynamics across volumes through shared noise, and checks the
Gaussian formulas, Wick identities, norm inequalities, propagation-speed
decay, and entropy bounds that the constructions rest on.
"""

from .grid import (
    RealField,
    SpectralField,
    TorusGrid,
    apply_multiplier,
    heat_semigroup,
    load_snapshot,
    periodic_heat_kernel,
    save_snapshot,
)
from .noise import (
    NoiseSlab,
    RngPolicy,
    periodise_initial,
    periodise_noise,
    sample_slab,
)
from .gaussian import (
    CovKernel,
    OuState,
    counterterm_bridge_f,
    counterterm_variance,
    cov_kernel_eval,
    ou_init,
    ou_step_exact,
    reference_counterterm,
    sample_gff,
    sample_ou_centred,
)

__version__ = "0.1.0"
