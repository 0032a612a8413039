"""Fixed-step fourth-order integration of the Lindblad equation.

The step size is bounded by a conservative stability heuristic, so runs at
dim ~ 64 take 10^5 - 10^6 steps. For the dissipation-free and dephasing
models the generator is elementwise in the Fock basis; one classical RK4
step then reduces exactly to multiplication by the RK4 amplification
polynomial, which :func:`evolve` exploits. With amplitude damping the
generator couples rho[n, m] only to rho[n+1, m+1], so the same polynomial
expands into five coefficient arrays acting on diagonal shifts of rho.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameter, SanityViolation, StabilityViolation, TruncationLeak
from .fock import DensityMatrix
from .models import ModelSpec, compile_generator

__all__ = [
    "IntegrationPlan",
    "SanityRecord",
    "Trajectory",
    "stability_dt",
    "step",
    "evolve",
    "TRACE_TOL",
    "HERMITICITY_TOL",
    "LEAK_TOL",
    "TOP_LEVELS",
]

TRACE_TOL = 1e-8
HERMITICITY_TOL = 1e-8
LEAK_TOL = 1e-6
TOP_LEVELS = 3
RENORM_TOL = 1e-12
DEFAULT_MEMORY_BUDGET_MB = 512.0

_EPS = 1e-300
# decayed coherences otherwise drift into subnormal range, where complex
# arithmetic is ~10x slower; 1e-250 is far below any tolerance used here
_TINY = 1e-250
_FLUSH_EVERY = 1000

Observable = Callable[[float, DensityMatrix], complex]


def stability_dt(model: ModelSpec, dim: int) -> float:
    """Largest admissible step: 0.1 / (chi (dim-1)^2 + sum(rates) (dim-1)^2 + eps)."""
    scale = (dim - 1) ** 2
    return 0.1 / (model.chi * scale + model.total_rate * scale + _EPS)


@dataclass(frozen=True)
class IntegrationPlan:
    t_end: float
    dt: float
    sample_every: int = 1

    def __post_init__(self):
        if not (math.isfinite(self.t_end) and self.t_end >= 0):
            raise InvalidParameter(f"t_end must be finite and >= 0, got {self.t_end!r}")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise InvalidParameter(f"dt must be > 0, got {self.dt!r}")
        if int(self.sample_every) != self.sample_every or self.sample_every < 1:
            raise InvalidParameter(f"sample_every must be an integer >= 1, got {self.sample_every!r}")
        object.__setattr__(self, "sample_every", int(self.sample_every))
        steps = self.t_end / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise InvalidParameter(
                f"t_end={self.t_end!r} is not an integer multiple of dt={self.dt!r}"
            )

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    @classmethod
    def for_samples(
        cls,
        t_end: float,
        n_intervals: int,
        dt_max: float,
    ) -> IntegrationPlan:
        """Plan with ``n_intervals + 1`` equally spaced samples and dt <= dt_max.

        The sample spacing is split into the fewest whole steps that respect
        ``dt_max``.
        """
        if n_intervals < 1:
            raise InvalidParameter("need at least one sampling interval")
        if t_end == 0:
            return cls(0.0, dt_max, 1)
        interval = t_end / n_intervals
        per = max(1, math.ceil(interval / dt_max - 1e-12))
        return cls(t_end, interval / per, per)

    def sample_taus(self) -> np.ndarray:
        idx = _sample_indices(self.n_steps, self.sample_every)
        return idx * self.dt


def _sample_indices(n_steps: int, every: int) -> np.ndarray:
    idx = np.arange(0, n_steps + 1, every)
    if idx[-1] != n_steps:
        idx = np.append(idx, n_steps)
    return idx


@dataclass(frozen=True)
class SanityRecord:
    trace_err: float
    herm_defect: float
    top_level_pop: float
    min_eig: float
    purity: float


@dataclass
class Trajectory:
    """Sampled run output.

    ``states`` is None in streaming mode; ``observables`` always holds one
    array per requested observable, aligned with ``taus``.
    """

    taus: np.ndarray
    states: list[DensityMatrix] | None
    sanity: list[SanityRecord]
    observables: dict[str, np.ndarray] = field(default_factory=dict)
    step_purity: np.ndarray | None = None
    dt: float = 0.0
    failed: bool = False

    @property
    def final(self) -> DensityMatrix | None:
        return None if self.states is None else self.states[-1]

    def max_trace_err(self) -> float:
        return max(s.trace_err for s in self.sanity)

    def max_herm_defect(self) -> float:
        return max(s.herm_defect for s in self.sanity)

    def max_top_level_pop(self) -> float:
        return max(s.top_level_pop for s in self.sanity)

    def min_eigenvalue(self) -> float:
        return min(s.min_eig for s in self.sanity)

    def max_sanity_defect(self) -> float:
        return max(self.max_trace_err(), self.max_herm_defect())


def _rk4(rho: np.ndarray, gen, dt: float) -> np.ndarray:
    k1 = gen(rho)
    k2 = gen(rho + (0.5 * dt) * k1)
    k3 = gen(rho + (0.5 * dt) * k2)
    k4 = gen(rho + dt * k3)
    return rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _apply_terms(rho: np.ndarray, terms: list[np.ndarray]) -> np.ndarray:
    out = terms[0] * rho
    for s in range(1, len(terms)):
        out[:-s, :-s] += terms[s] * rho[s:, s:]
    return out


def step(rho: DensityMatrix, model: ModelSpec, dt: float) -> DensityMatrix:
    """One classical RK4 step, without the re-symmetrization evolve applies.

    No stability check is made here; it is meant for convergence studies.
    """
    gen = compile_generator(model, rho.space.dim)
    return DensityMatrix(rho.space, _rk4(rho.matrix, gen, dt))


def evolve(
    rho0: DensityMatrix,
    model: ModelSpec,
    plan: IntegrationPlan,
    observables: Mapping[str, Observable] | None = None,
    *,
    store_states: bool | None = None,
    memory_budget_mb: float = DEFAULT_MEMORY_BUDGET_MB,
    track_step_purity: bool = False,
    strict: bool = True,
) -> Trajectory:
    """Integrate rho0 under ``model`` according to ``plan``.

    Parameters
    ----------
    observables
        Mapping name -> f(tau, rho) evaluated at each sample.
    store_states
        Keep full density-matrix snapshots. By default they are kept unless
        ``samples * dim^2 * 16 bytes`` exceeds ``memory_budget_mb``.
    track_step_purity
        Record trace(rho^2) after every step (not just at samples).
    strict
        Raise on leakage or sanity violations. With ``strict=False`` the run
        completes and the trajectory is flagged ``failed`` instead.

    Raises
    ------
    StabilityViolation
        ``plan.dt`` exceeds :func:`stability_dt`.
    TruncationLeak
        Population of the top three Fock levels exceeds 1e-6 at a sample.
    SanityViolation
        Trace error or hermiticity defect exceeds 1e-8 at a sample.
    """
    dim = rho0.space.dim
    bound = stability_dt(model, dim)
    if plan.dt > bound * (1.0 + 1e-12):
        raise StabilityViolation(f"dt={plan.dt:.6g} exceeds the stability bound {bound:.6g}")

    observables = dict(observables or {})
    n_steps = plan.n_steps
    sample_idx = _sample_indices(n_steps, plan.sample_every)
    n_samples = len(sample_idx)
    if store_states is None:
        store_states = n_samples * dim * dim * 16 <= memory_budget_mb * 2**20

    gen = compile_generator(model, dim)
    factor = gen.rk4_factor(plan.dt) if gen.elementwise else None
    terms = None if gen.elementwise else gen.rk4_terms(plan.dt)

    taus = sample_idx * plan.dt
    states: list[DensityMatrix] | None = [] if store_states else None
    records: list[SanityRecord] = []
    obs_values = {name: [] for name in observables}
    step_purity = np.empty(n_steps + 1) if track_step_purity else None
    failed = False

    def record(k: int, rho: np.ndarray, trace_err: float, herm: float) -> None:
        nonlocal failed
        pops = np.real(np.diag(rho))
        top = float(np.sum(pops[-TOP_LEVELS:]))
        dm = DensityMatrix(rho0.space, rho)
        rec = SanityRecord(
            trace_err=trace_err,
            herm_defect=herm,
            top_level_pop=top,
            min_eig=dm.min_eigenvalue(),
            purity=float(np.sum(np.abs(rho) ** 2)),
        )
        records.append(rec)
        if states is not None:
            states.append(dm)
        for name, fn in observables.items():
            obs_values[name].append(fn(float(taus[k]), dm))
        problem = None
        if top > LEAK_TOL:
            problem = TruncationLeak(
                f"top-{TOP_LEVELS} level population {top:.3e} > {LEAK_TOL:g} at tau={taus[k]:.6g}"
            )
        elif trace_err > TRACE_TOL or herm > HERMITICITY_TOL:
            problem = SanityViolation(
                f"trace error {trace_err:.3e} / hermiticity defect {herm:.3e} at tau={taus[k]:.6g}"
            )
        if problem is not None:
            failed = True
            if strict:
                raise problem

    rho = np.array(rho0.matrix, dtype=complex)
    if step_purity is not None:
        step_purity[0] = np.sum(np.abs(rho) ** 2)
    record(0, rho, abs(np.trace(rho) - 1.0), 0.0)
    next_sample = 1
    worst_trace = 0.0
    for i in range(1, n_steps + 1):
        raw = factor * rho if factor is not None else _apply_terms(rho, terms)
        sampled = next_sample < n_samples and sample_idx[next_sample] == i
        if sampled:
            herm = float(np.max(np.abs(raw - raw.conj().T)))
        rho = 0.5 * (raw + raw.conj().T)
        tr = np.trace(rho).real
        trace_err = abs(tr - 1.0)
        worst_trace = max(worst_trace, trace_err)
        if trace_err > RENORM_TOL:
            rho /= tr
        if i % _FLUSH_EVERY == 0:
            rho[np.abs(rho) < _TINY] = 0.0
        if step_purity is not None:
            step_purity[i] = np.sum(np.abs(rho) ** 2)
        if sampled:
            record(next_sample, rho, worst_trace, herm)
            worst_trace = 0.0
            next_sample += 1

    return Trajectory(
        taus=taus,
        states=states,
        sanity=records,
        observables={k: np.asarray(v) for k, v in obs_values.items()},
        step_purity=step_purity,
        dt=plan.dt,
        failed=failed,
    )
