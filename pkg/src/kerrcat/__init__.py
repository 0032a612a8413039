"""Truncated-Fock-space simulation of Kerr evolution with phase diffusion,
with closed-form moment oracles and cat-state diagnostics."""

__version__ = "0.1.0"

from .closed_forms import (  # noqa: E402
    c_factor,
    dephasing_first_moment,
    dephasing_quadrature_variance,
    dephasing_second_moment,
    kerr_first_moment,
    recurrence_envelope,
    sm_first_moment,
)
from .diagnostics import (  # noqa: E402
    GridSpec,
    negativity_volume,
    quadrature_variance,
    wigner,
    x2_tilde_variance,
    ys_fidelity,
)
from .errors import (  # noqa: E402
    DimensionMismatch,
    ExtentTooSmall,
    InvalidParameter,
    KerrCatError,
    OracleMismatch,
    SanityViolation,
    StabilityViolation,
    TruncationLeak,
    TruncationWarning,
)
from .fock import (  # noqa: E402
    DensityMatrix,
    StateVector,
    TruncatedFockSpace,
    annihilation_op,
    coherent_state,
    expectation,
    fidelity_pure,
    number_op,
    purity,
    ys_state,
)
from .models import ModelSpec, generator_apply, preset  # noqa: E402
from .propagator import IntegrationPlan, Trajectory, evolve, stability_dt, step  # noqa: E402
