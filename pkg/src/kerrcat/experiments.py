"""Named, reproducible experiment recipes.

Each recipe is a pure function of a parameter dataclass. Its output table is
written as CSV next to a ``key = value`` manifest that records every
parameter needed to regenerate the CSV byte for byte, plus a gnuplot script.

Defaults use a real positive alpha0 (only |alpha0|^2 is physically
specified) and report time as chi*tau.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, get_args, get_origin, get_type_hints

import numpy as np

from . import __version__
from .closed_forms import (
    dephasing_first_moment,
    dephasing_second_moment,
    first_occurrence_envelope,
    sm_first_moment,
)
from .diagnostics import (
    X2_TILDE_CONVENTION,
    default_grid,
    negativity_volume,
    wigner,
    x2_tilde_variance,
    ys_fidelity,
)
from .errors import InvalidParameter, OracleMismatch
from .fock import (
    DensityMatrix,
    TruncatedFockSpace,
    annihilation_op,
    coherent_state,
    expectation,
    recommended_dim,
)
from .models import ModelSpec, preset
from .propagator import (
    HERMITICITY_TOL,
    LEAK_TOL,
    TRACE_TOL,
    IntegrationPlan,
    evolve,
    stability_dt,
)

__all__ = [
    "Fig1Params",
    "SweepParams",
    "ContrastParams",
    "ValidationParams",
    "ExperimentResult",
    "default_dim",
    "run_fig1",
    "run_chi_sweep",
    "run_damping_contrast",
    "run_moment_validation",
    "run_from_manifest",
    "write_csv",
    "format_value",
    "manifest_value",
    "read_manifest",
    "write_manifest",
    "assert_strictly_decreasing",
]

VALIDATION_TOL = 1e-6


def default_dim(alpha0_sq: float) -> int:
    """Smallest power of two >= 1.5x the truncation rule, and at least 32."""
    need = 1.5 * recommended_dim(math.sqrt(alpha0_sq))
    dim = 32
    while dim < need:
        dim *= 2
    return dim


# ---------------------------------------------------------------- parameters


@dataclass(frozen=True)
class Fig1Params:
    chi: float = 0.3
    alpha0_sq: tuple[float, ...] = (4.0, 1.0)
    dims: tuple[int, ...] = (64, 32)
    samples: int = 601
    chi_tau_end: float = 3 * math.pi
    dt_safety: float = 1.0
    wigner_resolution: int = 101


@dataclass(frozen=True)
class SweepParams:
    chis: tuple[float, ...] = (0.1, 0.2, 0.3, 0.5, 1.0)
    alpha0_sq: float = 4.0
    dim: int = 0  # 0 selects default_dim(alpha0_sq)
    dt_safety: float = 1.0
    wigner_resolution: int = 101


@dataclass(frozen=True)
class ContrastParams:
    chi: float = 0.3
    gamma: float = 0.2
    alpha0_sq: tuple[float, ...] = (1.0, 4.0, 9.0)
    chi_tau: float = math.pi
    dt_safety: float = 1.0


@dataclass(frozen=True)
class ValidationParams:
    chis: tuple[float, ...] = (0.1, 0.3)
    alpha0_sq: tuple[float, ...] = (1.0, 4.0)
    samples: int = 201
    chi_tau_end: float = 2 * math.pi
    dt_safety: float = 1.0
    tolerance: float = VALIDATION_TOL


def _check_params(p) -> None:
    for f in dataclasses.fields(p):
        v = getattr(p, f.name)
        vals = v if isinstance(v, tuple) else (v,)
        for x in vals:
            if isinstance(x, float) and not math.isfinite(x):
                raise InvalidParameter(f"{f.name} must be finite, got {x!r}")
    for name in ("chi", "dt_safety"):
        if hasattr(p, name) and not getattr(p, name) > 0:
            raise InvalidParameter(f"{name} must be > 0")
    if getattr(p, "dt_safety", 1.0) > 1.0:
        raise InvalidParameter("dt_safety must be <= 1 (fraction of the stability bound)")
    for name in ("chis", "alpha0_sq"):
        v = getattr(p, name, None)
        if isinstance(v, tuple):
            if not v:
                raise InvalidParameter(f"{name} must not be empty")
            if name == "chis" and any(c <= 0 for c in v):
                raise InvalidParameter("chis must be > 0")
            if name == "alpha0_sq" and any(a < 0 for a in v):
                raise InvalidParameter("alpha0_sq must be >= 0")


# ---------------------------------------------------------------- manifests and CSV


def format_value(v: Any) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, tuple):
        return ", ".join(format_value(x) for x in v)
    return str(v)


def manifest_value(v: Any) -> str:
    """Like :func:`format_value` but with shortest round-trip floats, so 0.3 reads as 0.3."""
    if isinstance(v, (float, np.floating)) and not isinstance(v, bool):
        return repr(float(v))
    if isinstance(v, tuple):
        return ", ".join(manifest_value(x) for x in v)
    return format_value(v)


def write_manifest(path: Path, entries: dict[str, Any]) -> None:
    lines = [f"{k} = {manifest_value(v)}" for k, v in entries.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path: Path) -> dict[str, str]:
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise InvalidParameter(f"malformed manifest line: {raw!r}")
        out[key.strip()] = value.strip()
    return out


def _parse_field(tp, text: str):
    if get_origin(tp) is tuple:
        inner = get_args(tp)[0]
        return tuple(inner(x.strip()) for x in text.split(",") if x.strip())
    return tp(text)


def params_from_entries(cls, entries: dict[str, str], prefix: str = "param."):
    hints = get_type_hints(cls)
    kwargs = {}
    for f in dataclasses.fields(cls):
        key = prefix + f.name
        if key in entries:
            try:
                kwargs[f.name] = _parse_field(hints[f.name], entries[key])
            except ValueError as exc:
                raise InvalidParameter(f"bad value for {key}: {entries[key]!r}") from exc
    return cls(**kwargs)


def write_csv(path_or_buf, columns: list[str], rows: list[tuple]) -> None:
    own = isinstance(path_or_buf, (str, Path))
    fh = open(path_or_buf, "w", newline="") if own else path_or_buf
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([format_value(v) for v in row])
    finally:
        if own:
            fh.close()


@dataclass
class ExperimentResult:
    name: str
    params: Any
    columns: list[str]
    rows: list[tuple]
    extra_manifest: dict[str, Any] = field(default_factory=dict)
    plot: Callable[[str], str] | None = None
    max_sanity_defect: float = 0.0
    paths: dict[str, Path] = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows])

    def manifest(self) -> dict[str, Any]:
        entries: dict[str, Any] = {"experiment": self.name}
        for f in dataclasses.fields(self.params):
            entries["param." + f.name] = getattr(self.params, f.name)
        entries.update(self.extra_manifest)
        entries.update(
            {
                "alpha0_phase": 0.0,
                "time_axis": "chi_tau",
                "x2_tilde_convention": X2_TILDE_CONVENTION,
                "variance_convention": "vacuum quadrature variance 1/4; other conventions rescale var_x2_tilde",
                "tolerance.trace": TRACE_TOL,
                "tolerance.hermiticity": HERMITICITY_TOL,
                "tolerance.truncation_leak": LEAK_TOL,
                "tolerance.validation": VALIDATION_TOL,
                "csv": f"{self.name}.csv",
                "code_version": __version__,
                "numpy_version": np.__version__,
                "python_version": platform.python_version(),
            }
        )
        return entries

    def csv_text(self) -> str:
        buf = io.StringIO()
        write_csv(buf, self.columns, self.rows)
        return buf.getvalue()

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"csv": out / f"{self.name}.csv", "manifest": out / f"{self.name}.manifest"}
        paths["csv"].write_text(self.csv_text())
        write_manifest(paths["manifest"], self.manifest())
        if self.plot is not None:
            paths["plot"] = out / f"{self.name}.gp"
            paths["plot"].write_text(self.plot(paths["csv"].name))
        self.paths = paths
        return paths


def _finish(result: ExperimentResult, out_dir) -> ExperimentResult:
    if out_dir is not None:
        result.write(out_dir)
    return result


def _pmap(fn, items, jobs: int):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- shared runs


def _plan(model: ModelSpec, dim: int, t_end: float, n_intervals: int, dt_safety: float) -> IntegrationPlan:
    return IntegrationPlan.for_samples(t_end, n_intervals, dt_safety * stability_dt(model, dim))


def _initial(alpha0: float, dim: int) -> DensityMatrix:
    return coherent_state(alpha0, TruncatedFockSpace(dim)).projector()


def _mean_a(dim: int) -> Callable[[float, DensityMatrix], complex]:
    a = annihilation_op(TruncatedFockSpace(dim))
    return lambda tau, rho: expectation(rho, a)


def _mean_a2(dim: int) -> Callable[[float, DensityMatrix], complex]:
    a = annihilation_op(TruncatedFockSpace(dim))
    a2 = a @ a
    return lambda tau, rho: expectation(rho, a2)


# ---------------------------------------------------------------- fig1


def _fig1_curve(args) -> tuple[list[tuple], float]:
    p, a2, dim = args
    alpha0 = math.sqrt(a2)
    model = preset("kerr_dephasing", p.chi)
    plan = _plan(model, dim, p.chi_tau_end / p.chi, p.samples - 1, p.dt_safety)
    grid = default_grid(alpha0, p.wigner_resolution)
    obs = {
        "var": lambda tau, rho: x2_tilde_variance(rho, tau, p.chi, alpha0),
        "abs_a": lambda tau, rho, _m=_mean_a(dim): abs(_m(tau, rho)),
        "ys": lambda tau, rho: ys_fidelity(rho, alpha0).best,
        "neg": lambda tau, rho: negativity_volume(wigner(rho, grid, method="laguerre")),
    }
    traj = evolve(_initial(alpha0, dim), model, plan, obs, store_states=False)
    rows = [
        (a2, p.chi * tau, v, am, f, nv)
        for tau, v, am, f, nv in zip(
            traj.taus, traj.observables["var"], traj.observables["abs_a"], traj.observables["ys"], traj.observables["neg"]
        )
    ]
    return rows, traj.max_sanity_defect()


def _fig1_plot(csv_name: str, p: Fig1Params) -> str:
    styles = ["lw 2", "lw 2 dt 2", "lw 2 dt 3", "lw 2 dt 4"]
    parts = []
    for i, a2 in enumerate(p.alpha0_sq):
        src = f"'{csv_name}'" if i == 0 else "''"
        parts.append(
            f"{src} using 2:($1=={format_value(a2)} ? $3 : 1/0) with lines {styles[i % len(styles)]} "
            f"title '|alpha0|^2 = {format_value(a2)}'"
        )
    return (
        "# gnuplot script; run with: gnuplot fig1.gp\n"
        "set datafile separator ','\n"
        "set terminal pngcairo size 900,600\n"
        "set output 'fig1.png'\n"
        "set xlabel 'chi tau'\n"
        "set ylabel 'Var(X2~)  (vacuum = 1/4)'\n"
        f"set title 'kerr_dephasing, chi = {format_value(p.chi)}'\n"
        "set key top left\n"
        "plot " + ", \\\n     ".join(parts) + "\n"
    )


def run_fig1(params: Fig1Params | None = None, out_dir=None, jobs: int = 1) -> ExperimentResult:
    """X2-tilde variance curves for chi = 0.3 at |alpha0|^2 = 4.0 and 1.0.

    Rows also carry |<a>|, the best Yurke-Stoler fidelity and the Wigner
    negativity volume at every sample of chi tau in [0, chi_tau_end].
    """
    p = params or Fig1Params()
    _check_params(p)
    if len(p.alpha0_sq) != len(p.dims):
        raise InvalidParameter("alpha0_sq and dims must have equal length")
    if p.samples < 2:
        raise InvalidParameter("samples must be >= 2")
    results = _pmap(_fig1_curve, [(p, a2, d) for a2, d in zip(p.alpha0_sq, p.dims)], jobs)
    rows = [r for curve, _ in results for r in curve]
    res = ExperimentResult(
        "fig1",
        p,
        ["alpha0_sq", "chi_tau", "var_x2_tilde", "abs_mean_a", "ys_fidelity", "negativity_volume"],
        rows,
        extra_manifest={
            "model": "kerr_dephasing",
            "dephasing_rate": 2 * p.chi**2,
            "wigner_method": "laguerre",
            "wigner_half_width": "sqrt(alpha0_sq) + 3",
            "ys_fidelity": "max over (|a0> +- i|-a0>)/sqrt2",
        },
        plot=lambda name: _fig1_plot(name, p),
        max_sanity_defect=max(d for _, d in results),
    )
    return _finish(res, out_dir)


# ---------------------------------------------------------------- chi sweep


def _sweep_point(args) -> tuple[tuple, float]:
    p, chi = args
    alpha0 = math.sqrt(p.alpha0_sq)
    dim = p.dim or default_dim(p.alpha0_sq)
    model = preset("kerr_dephasing", chi)
    plan = _plan(model, dim, 0.5 * math.pi / chi, 1, p.dt_safety)
    traj = evolve(_initial(alpha0, dim), model, plan, store_states=True)
    rho = traj.final
    grid = default_grid(alpha0, p.wigner_resolution)
    row = (
        chi,
        p.alpha0_sq,
        dim,
        plan.dt,
        ys_fidelity(rho, alpha0).best,
        negativity_volume(wigner(rho, grid, method="laguerre")),
        first_occurrence_envelope(chi),
    )
    return row, traj.max_sanity_defect()


def run_chi_sweep(params: SweepParams | None = None, out_dir=None, jobs: int = 1) -> ExperimentResult:
    """Cat quality at the first occurrence chi tau = pi/2 across feedback gains."""
    p = params or SweepParams()
    _check_params(p)
    if any(b <= a for a, b in zip(p.chis, p.chis[1:])):
        raise InvalidParameter("chis must be strictly ascending")
    results = _pmap(_sweep_point, [(p, c) for c in p.chis], jobs)
    res = ExperimentResult(
        "chi_sweep",
        p,
        ["chi", "alpha0_sq", "dim", "dt", "ys_fidelity", "negativity_volume", "envelope"],
        [r for r, _ in results],
        extra_manifest={
            "model": "kerr_dephasing",
            "chi_tau": "pi/2",
            "wigner_method": "laguerre",
            "wigner_half_width": "sqrt(alpha0_sq) + 3",
            "envelope": "exp(-pi chi / 2)",
        },
        plot=lambda name: (
            "set datafile separator ','\nset terminal pngcairo size 900,600\n"
            "set output 'chi_sweep.png'\nset xlabel 'chi'\nset logscale x\n"
            f"plot '{name}' using 1:5 with linespoints title 'YS fidelity', "
            "'' using 1:6 with linespoints title 'negativity volume', "
            "'' using 1:7 with lines title 'exp(-pi chi/2)'\n"
        ),
        max_sanity_defect=max(d for _, d in results),
    )
    return _finish(res, out_dir)


def assert_strictly_decreasing(values, label: str = "values") -> None:
    v = list(values)
    for i, (a, b) in enumerate(zip(v, v[1:])):
        if not b < a:
            raise AssertionError(f"{label} not strictly decreasing at index {i + 1}: {a!r} -> {b!r}")


# ---------------------------------------------------------------- damping contrast


def _abs_mean_a_at(args) -> tuple[float, float]:
    model, a2, dim, tau, dt_safety = args
    plan = _plan(model, dim, tau, 1, dt_safety)
    traj = evolve(_initial(math.sqrt(a2), dim), model, plan, {"a": _mean_a(dim)}, store_states=False)
    return abs(traj.observables["a"][-1]), traj.max_sanity_defect()


def run_damping_contrast(params: ContrastParams | None = None, out_dir=None, jobs: int = 1) -> ExperimentResult:
    """|<a>| relative to pure Kerr at chi tau*, for phase diffusion vs amplitude damping."""
    p = params or ContrastParams()
    _check_params(p)
    if p.gamma < 0:
        raise InvalidParameter("gamma must be >= 0")
    tau = p.chi_tau / p.chi
    models = {
        "pure_kerr": preset("pure_kerr", p.chi),
        "kerr_dephasing": preset("kerr_dephasing", p.chi),
        "kerr_damping": preset("kerr_damping", p.chi, p.gamma),
    }
    jobs_list = [
        (models[m], a2, default_dim(a2), tau, p.dt_safety) for m in models for a2 in p.alpha0_sq
    ]
    out = _pmap(_abs_mean_a_at, jobs_list, jobs)
    values = {}
    k = 0
    for m in models:
        for a2 in p.alpha0_sq:
            values[m, a2] = out[k][0]
            k += 1
    envelope = math.exp(-p.chi * p.chi * tau)
    rows = []
    for m in ("kerr_dephasing", "kerr_damping"):
        for a2 in p.alpha0_sq:
            kerr = values["pure_kerr", a2]
            rows.append((m, a2, default_dim(a2), values[m, a2], kerr, values[m, a2] / kerr, envelope))
    res = ExperimentResult(
        "damping_contrast",
        p,
        ["model", "alpha0_sq", "dim", "abs_mean_a_model", "abs_mean_a_kerr", "ratio", "dephasing_envelope"],
        rows,
        extra_manifest={"dephasing_rate": 2 * p.chi**2, "envelope": "exp(-chi^2 tau*)"},
        max_sanity_defect=max(d for _, d in out),
    )
    return _finish(res, out_dir)


# ---------------------------------------------------------------- moment validation


def _validation_curve(args) -> tuple[list[tuple], float, float]:
    p, chi, a2 = args
    alpha0 = math.sqrt(a2)
    dim = default_dim(a2)
    model = preset("kerr_dephasing", chi)
    plan = _plan(model, dim, p.chi_tau_end / chi, p.samples - 1, p.dt_safety)
    traj = evolve(_initial(alpha0, dim), model, plan, {"a": _mean_a(dim), "a2": _mean_a2(dim)}, store_states=False)
    rows = []
    worst = 0.0
    for tau, sim, sim2 in zip(traj.taus, traj.observables["a"], traj.observables["a2"]):
        sm = sm_first_moment(alpha0, chi, tau).value
        d1 = dephasing_first_moment(alpha0, chi, tau)
        d2 = dephasing_second_moment(alpha0, chi, tau)
        dev = max(abs(sim - d1), abs(sim2 - d2))
        worst = max(worst, dev)
        rows.append(
            (chi, a2, dim, chi * tau, sm.real, sm.imag, d1.real, d1.imag, sim.real, sim.imag,
             d2.real, d2.imag, sim2.real, sim2.imag, dev)
        )
    return rows, worst, traj.max_sanity_defect()


def run_moment_validation(params: ValidationParams | None = None, out_dir=None, jobs: int = 1) -> ExperimentResult:
    """Tabulate the feedback first moment next to the dephasing closed forms and
    the simulator; fail if simulator and closed forms differ by more than the tolerance.

    Raises
    ------
    OracleMismatch
        If any |simulated - closed form| exceeds ``params.tolerance``. The
        CSV and manifest are still written first when ``out_dir`` is given.
    """
    p = params or ValidationParams()
    _check_params(p)
    pts = [(p, c, a2) for c in p.chis for a2 in p.alpha0_sq]
    out = _pmap(_validation_curve, pts, jobs)
    worst = max(w for _, w, _ in out)
    res = ExperimentResult(
        "moment_validation",
        p,
        ["chi", "alpha0_sq", "dim", "chi_tau", "sm_re", "sm_im", "deph_re", "deph_im", "sim_re", "sim_im",
         "deph2_re", "deph2_im", "sim2_re", "sim2_im", "deviation"],
        [r for rows, _, _ in out for r in rows],
        extra_manifest={"model": "kerr_dephasing", "max_deviation": worst},
        max_sanity_defect=max(d for _, _, d in out),
    )
    _finish(res, out_dir)
    if worst > p.tolerance:
        raise OracleMismatch(f"simulator deviates from closed forms by {worst:.3e} > {p.tolerance:g}")
    return res


# ---------------------------------------------------------------- re-run

_RECIPES = {
    "fig1": (Fig1Params, run_fig1),
    "chi_sweep": (SweepParams, run_chi_sweep),
    "damping_contrast": (ContrastParams, run_damping_contrast),
    "moment_validation": (ValidationParams, run_moment_validation),
}


def run_from_manifest(path, out_dir=None, jobs: int = 1) -> ExperimentResult:
    """Re-run the experiment described by a manifest file."""
    entries = read_manifest(path)
    name = entries.get("experiment")
    if name not in _RECIPES:
        raise InvalidParameter(f"manifest names unknown experiment {name!r}")
    cls, fn = _RECIPES[name]
    return fn(params_from_entries(cls, entries), out_dir=out_dir, jobs=jobs)

