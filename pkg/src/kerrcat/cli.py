"""Command-line entry point: ``kerrcat <subcommand> [options]``.

Every subcommand writes a CSV and a manifest into ``--out`` (default
``$KERRCAT_OUT_DIR`` or ``./kerrcat_out``) and prints a one-line summary.

Exit codes: 0 success, 2 invalid configuration, 3 truncation leak,
4 numerical sanity violation, 5 I/O failure.
"""

from __future__ import annotations

import argparse
import ast
import math
import operator
import os
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .closed_forms import (
    dephasing_first_moment,
    dephasing_quadrature_variance,
    dephasing_second_moment,
    kerr_first_moment,
    sm_first_moment,
)
from .diagnostics import GridSpec, default_grid, negativity_volume, wigner, x2_tilde_variance, ys_fidelity
from .errors import (
    DimensionMismatch,
    ExtentTooSmall,
    InvalidParameter,
    OracleMismatch,
    SanityViolation,
    StabilityViolation,
    TruncationLeak,
)
from .experiments import (
    _RECIPES,
    ContrastParams,
    ExperimentResult,
    Fig1Params,
    SweepParams,
    ValidationParams,
    assert_strictly_decreasing,
    read_manifest,
    run_chi_sweep,
    run_damping_contrast,
    run_fig1,
    run_from_manifest,
    run_moment_validation,
    write_csv,
    write_manifest,
)
from .fock import TruncatedFockSpace, annihilation_op, coherent_state, expectation, number_op
from .models import preset
from .propagator import DEFAULT_MEMORY_BUDGET_MB, IntegrationPlan, evolve, stability_dt

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_LEAK = 3
EXIT_SANITY = 4
EXIT_IO = 5

MODEL_ALIASES = {
    "kerr": "pure_kerr",
    "pure_kerr": "pure_kerr",
    "dephasing": "kerr_dephasing",
    "kerr_dephasing": "kerr_dephasing",
    "damping": "kerr_damping",
    "kerr_damping": "kerr_damping",
}

_OPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
}


def parse_number(text: str) -> float:
    """Parse a decimal or a pi-expression such as ``pi/2``, ``3pi``, ``1.5*pi``."""
    s = str(text).strip().lower()
    s = re.sub(r"(\d|\))\s*(pi)", r"\1*\2", s)

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        raise ValueError(text)

    try:
        value = ev(ast.parse(s, mode="eval"))
    except (SyntaxError, ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number or pi-expression: {text!r}") from None
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"not finite: {text!r}")
    return value


def parse_list(text: str) -> tuple[float, ...]:
    parts = [p for p in re.split(r"[,\s]+", str(text).strip()) if p]
    if not parts:
        raise argparse.ArgumentTypeError("empty list")
    return tuple(parse_number(p) for p in parts)


def parse_grid(text: str) -> tuple[float, float, int]:
    """``start:stop:count`` with pi-expressions allowed for the bounds."""
    parts = str(text).split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"grid must be start:stop:count, got {text!r}")
    try:
        count = int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid count must be an integer, got {parts[2]!r}") from None
    if count < 1:
        raise argparse.ArgumentTypeError("grid count must be >= 1")
    return parse_number(parts[0]), parse_number(parts[1]), count


def _fmt_list(values) -> str:
    return ",".join(format(v, "g") for v in values)


def default_out_dir() -> str:
    return os.environ.get("KERRCAT_OUT_DIR", "kerrcat_out")


# ---------------------------------------------------------------- parser


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default=default_out_dir(), help="output directory (env KERRCAT_OUT_DIR)")
    p.add_argument("--config", default=None, help="optional 'key = value' file; flags override it")


def _add_state(p: argparse.ArgumentParser, models, default_model: str) -> None:
    p.add_argument("--model", choices=models, default=default_model, help="model / formula")
    p.add_argument("--chi", type=parse_number, default=0.3, help="Kerr strength / feedback gain")
    p.add_argument("--gamma", type=parse_number, default=0.2, help="damping rate (damping model only)")
    p.add_argument("--alpha2", type=parse_number, default=None, help="|alpha0|^2 with alpha0 real positive")
    p.add_argument("--alpha-re", type=parse_number, default=2.0, help="Re alpha0 (when --alpha2 is not given)")
    p.add_argument("--alpha-im", type=parse_number, default=0.0, help="Im alpha0 (when --alpha2 is not given)")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="kerrcat", description=__doc__.splitlines()[0], formatter_class=fmt)
    parser.add_argument("--version", action="version", version=f"kerrcat {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("moments", help="tabulate closed-form moments", formatter_class=fmt)
    _add_state(p, ["sm", "kerr", "dephasing"], "sm")
    p.add_argument("--grid", type=parse_grid, default="0:2pi:201", help="chi*tau grid start:stop:count")
    _add_common(p)

    sim_models = sorted(MODEL_ALIASES)
    p = sub.add_parser("simulate", help="integrate the master equation and write a trajectory", formatter_class=fmt)
    _add_state(p, sim_models, "dephasing")
    p.add_argument("--dim", type=int, default=64, help="Fock truncation dimension")
    p.add_argument("--dt", type=parse_number, default=None, help="max step (default: 0.5 x stability bound)")
    p.add_argument("--t-end-chitau", type=parse_number, default=math.pi, help="final chi*tau")
    p.add_argument("--samples", type=int, default=101, help="number of output rows")
    p.add_argument("--memory-budget-mb", type=float, default=DEFAULT_MEMORY_BUDGET_MB, help="snapshot memory budget before streaming")
    _add_common(p)

    p = sub.add_parser("wigner", help="Wigner grid of an (optionally evolved) coherent state", formatter_class=fmt)
    _add_state(p, sim_models, "dephasing")
    p.add_argument("--dim", type=int, default=64, help="Fock truncation dimension")
    p.add_argument("--dt", type=parse_number, default=None, help="max step (default: 0.5 x stability bound)")
    p.add_argument("--t-end-chitau", type=parse_number, default=math.pi / 2, help="evolve to this chi*tau first")
    p.add_argument("--half-width", type=parse_number, default=None, help="grid half width (default |alpha0| + 3)")
    p.add_argument("--resolution", type=int, default=201, help="grid points per axis")
    p.add_argument("--method", choices=["expm", "laguerre"], default="expm", help="displaced-parity evaluation route")
    _add_common(p)

    d = Fig1Params()
    p = sub.add_parser("fig1", help="X2-tilde variance curves at chi=0.3", formatter_class=fmt)
    p.add_argument("--chi", type=parse_number, default=d.chi, help="feedback gain")
    p.add_argument("--alpha2-list", type=parse_list, default=_fmt_list(d.alpha0_sq), help="comma-separated |alpha0|^2 values")
    p.add_argument("--dims", type=parse_list, default=_fmt_list(d.dims), help="Fock dimension per curve")
    p.add_argument("--samples", type=int, default=d.samples, help="samples per curve")
    p.add_argument("--t-end-chitau", type=parse_number, default=d.chi_tau_end, help="final chi*tau")
    p.add_argument("--wigner-resolution", type=int, default=d.wigner_resolution, help="Wigner grid points per axis")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    _add_common(p)

    d = SweepParams()
    p = sub.add_parser("sweep", help="cat quality at chi*tau=pi/2 versus chi", formatter_class=fmt)
    p.add_argument("--chis", type=parse_list, default=_fmt_list(d.chis), help="comma-separated ascending chi values")
    p.add_argument("--alpha2", type=parse_number, default=d.alpha0_sq, help="|alpha0|^2")
    p.add_argument("--dim", type=int, default=d.dim, help="0 selects the truncation-rule default")
    p.add_argument("--wigner-resolution", type=int, default=d.wigner_resolution, help="Wigner grid points per axis")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    _add_common(p)

    d = ContrastParams()
    p = sub.add_parser("contrast", help="phase diffusion vs amplitude damping at chi*tau=pi", formatter_class=fmt)
    p.add_argument("--chi", type=parse_number, default=d.chi, help="feedback gain")
    p.add_argument("--gamma", type=parse_number, default=d.gamma, help="damping rate")
    p.add_argument("--alpha2-list", type=parse_list, default=_fmt_list(d.alpha0_sq), help="comma-separated |alpha0|^2 values")
    p.add_argument("--chi-tau", type=parse_number, default=d.chi_tau, help="comparison time chi*tau")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    _add_common(p)

    d = ValidationParams()
    p = sub.add_parser("validate", help="simulator vs closed-form moments", formatter_class=fmt)
    p.add_argument("--chis", type=parse_list, default=_fmt_list(d.chis), help="comma-separated ascending chi values")
    p.add_argument("--alpha2-list", type=parse_list, default=_fmt_list(d.alpha0_sq), help="comma-separated |alpha0|^2 values")
    p.add_argument("--samples", type=int, default=d.samples, help="samples per curve")
    p.add_argument("--t-end-chitau", type=parse_number, default=d.chi_tau_end, help="final chi*tau")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    _add_common(p)

    p = sub.add_parser("rerun", help="re-run from a manifest", formatter_class=fmt)
    p.add_argument("manifest", help="path to a .manifest file")
    p.add_argument("--out", default=None, help="output directory (default: the manifest's directory)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    return parser


def _load_config(path: str) -> dict[str, str]:
    entries = read_manifest(path)
    return {k.replace("-", "_"): v for k, v in entries.items()}


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    cfg_path = getattr(args, "config", None)
    if not cfg_path:
        return args
    config = _load_config(cfg_path)
    subparser = parser._subparsers._group_actions[0].choices[args.command]  # noqa: SLF001
    known = {a.dest: a for a in subparser._actions}  # noqa: SLF001
    unknown = sorted(set(config) - set(known))
    if unknown:
        raise InvalidParameter(f"unknown config keys: {', '.join(unknown)}")
    defaults = {}
    for dest, raw in config.items():
        action = known[dest]
        try:
            defaults[dest] = action.type(raw) if action.type else raw
        except (argparse.ArgumentTypeError, ValueError) as exc:
            raise InvalidParameter(f"bad config value for {dest}: {raw!r}") from exc
    subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


# ---------------------------------------------------------------- handlers


def _alpha0(args) -> complex:
    if args.alpha2 is not None:
        if args.alpha2 < 0:
            raise InvalidParameter("--alpha2 must be >= 0")
        return complex(math.sqrt(args.alpha2))
    return complex(args.alpha_re, args.alpha_im)


def _model(args):
    name = MODEL_ALIASES[args.model]
    return preset(name, args.chi, args.gamma if name == "kerr_damping" else None)


def _cli_manifest(command: str, args, extra: dict) -> dict:
    entries = {"experiment": command}
    for k, v in sorted(vars(args).items()):
        if k in ("command", "config", "out"):
            continue
        if isinstance(v, tuple):
            v = ",".join(repr(x) if isinstance(x, float) else str(x) for x in v)
        entries["cli." + k] = v
    entries.update(extra)
    entries["code_version"] = __version__
    entries["numpy_version"] = np.__version__
    return entries


def _write_table(out: Path, name: str, columns, rows, manifest: dict) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{name}.csv"
    write_csv(csv_path, list(columns), rows)
    manifest = dict(manifest)
    manifest["csv"] = csv_path.name
    write_manifest(out / f"{name}.manifest", manifest)
    return csv_path


def cmd_moments(args) -> str:
    alpha0 = _alpha0(args)
    start, stop, count = args.grid
    if args.chi <= 0:
        raise InvalidParameter("--chi must be > 0")
    if start < 0 or stop < start:
        raise InvalidParameter("grid must satisfy 0 <= start <= stop")
    chi_taus = np.linspace(start, stop, count)
    rows = []
    if args.model == "sm":
        columns = ["chi_tau", "tau", "mean_a_re", "mean_a_im", "abs_mean_a",
                   "rotation_re", "rotation_im", "interference_re", "interference_im", "damping"]
        for ct in chi_taus:
            tau = ct / args.chi
            r = sm_first_moment(alpha0, args.chi, tau)
            f = r.factors
            rows.append((ct, tau, r.value.real, r.value.imag, abs(r.value), f.rotation.real, f.rotation.imag,
                         f.interference.real, f.interference.imag, f.damping))
    elif args.model == "kerr":
        columns = ["chi_tau", "tau", "mean_a_re", "mean_a_im", "abs_mean_a"]
        for ct in chi_taus:
            tau = ct / args.chi
            v = kerr_first_moment(alpha0, args.chi, tau)
            rows.append((ct, tau, v.real, v.imag, abs(v)))
    else:
        columns = ["chi_tau", "tau", "mean_a_re", "mean_a_im", "abs_mean_a", "mean_a2_re", "mean_a2_im", "var_x2_tilde"]
        for ct in chi_taus:
            tau = ct / args.chi
            v = dephasing_first_moment(alpha0, args.chi, tau)
            v2 = dephasing_second_moment(alpha0, args.chi, tau)
            rows.append((ct, tau, v.real, v.imag, abs(v), v2.real, v2.imag,
                         dephasing_quadrature_variance(alpha0, args.chi, tau)))
    name = f"moments_{args.model}"
    path = _write_table(Path(args.out), name, columns, rows, _cli_manifest("moments", args, {}))
    return f"moments: wrote {path} ({len(rows)} rows); max sanity defect 0 (closed form)"


def _evolve_for_cli(args, observables=None):
    alpha0 = _alpha0(args)
    model = _model(args)
    if args.dim < 2:
        raise InvalidParameter("--dim must be >= 2")
    if args.t_end_chitau < 0:
        raise InvalidParameter("--t-end-chitau must be >= 0")
    bound = stability_dt(model, args.dim)
    dt_max = 0.5 * bound if args.dt is None else args.dt
    if dt_max <= 0:
        raise InvalidParameter("--dt must be > 0")
    intervals = max(getattr(args, "samples", 2) - 1, 1)
    plan = IntegrationPlan.for_samples(args.t_end_chitau / args.chi, intervals, dt_max)
    if plan.dt > bound * (1 + 1e-12):
        raise StabilityViolation(f"--dt {plan.dt:.6g} exceeds the stability bound {bound:.6g}")
    rho0 = coherent_state(alpha0, TruncatedFockSpace(args.dim)).projector()
    traj = evolve(rho0, model, plan, observables, store_states=False if observables else None,
                  memory_budget_mb=getattr(args, "memory_budget_mb", DEFAULT_MEMORY_BUDGET_MB))
    return alpha0, model, plan, traj


def cmd_simulate(args) -> str:
    if args.samples < 2:
        raise InvalidParameter("--samples must be >= 2")
    space = TruncatedFockSpace(args.dim)
    a = annihilation_op(space)
    n = number_op(space)
    alpha0 = _alpha0(args)
    obs = {
        "a": lambda tau, rho: expectation(rho, a),
        "n": lambda tau, rho: expectation(rho, n).real,
        "var": lambda tau, rho: x2_tilde_variance(rho, tau, args.chi, alpha0),
        "ys": lambda tau, rho: ys_fidelity(rho, alpha0).best,
    }
    _, model, plan, traj = _evolve_for_cli(args, obs)
    rows = []
    for k, tau in enumerate(traj.taus):
        s = traj.sanity[k]
        mean_a = traj.observables["a"][k]
        rows.append((args.chi * tau, tau, mean_a.real, mean_a.imag, abs(mean_a), traj.observables["n"][k],
                     traj.observables["var"][k], traj.observables["ys"][k], s.purity, s.trace_err,
                     s.herm_defect, s.top_level_pop, s.min_eig))
    columns = ["chi_tau", "tau", "mean_a_re", "mean_a_im", "abs_mean_a", "mean_n", "var_x2_tilde",
               "ys_fidelity", "purity", "trace_err", "herm_defect", "top_level_pop", "min_eig"]
    name = f"simulate_{model.name}"
    extra = {"model": model.name, "dt": plan.dt, "steps": plan.n_steps}
    path = _write_table(Path(args.out), name, columns, rows, _cli_manifest("simulate", args, extra))
    return (f"simulate: wrote {path} ({len(rows)} rows, {plan.n_steps} steps); "
            f"max sanity defect {traj.max_sanity_defect():.3e}")


def cmd_wigner(args) -> str:
    alpha0, model, plan, traj = _evolve_for_cli(args)
    rho = traj.final
    grid = GridSpec(args.half_width, args.resolution) if args.half_width else default_grid(abs(alpha0), args.resolution)
    wg = wigner(rho, grid, method=args.method)
    rows = [(x, p, wg.values[i, j]) for i, p in enumerate(wg.p) for j, x in enumerate(wg.x)]
    neg = negativity_volume(wg)
    extra = {"model": model.name, "dt": plan.dt, "half_width": grid.half_width,
             "negativity_volume": neg, "integral": wg.integral()}
    path = _write_table(Path(args.out), f"wigner_{model.name}", ["x", "p", "W"], rows,
                        _cli_manifest("wigner", args, extra))
    return (f"wigner: wrote {path} ({len(rows)} points); negativity volume {neg:.6g}; "
            f"max sanity defect {traj.max_sanity_defect():.3e}")


def _summary(res: ExperimentResult) -> str:
    return (f"{res.name}: wrote {res.paths['csv']} ({len(res.rows)} rows); "
            f"max sanity defect {res.max_sanity_defect:.3e}")


def cmd_fig1(args) -> str:
    p = Fig1Params(chi=args.chi, alpha0_sq=tuple(args.alpha2_list), dims=tuple(int(d) for d in args.dims),
                   samples=args.samples, chi_tau_end=args.t_end_chitau, wigner_resolution=args.wigner_resolution)
    return _summary(run_fig1(p, out_dir=args.out, jobs=args.jobs))


def cmd_sweep(args) -> str:
    p = SweepParams(chis=tuple(args.chis), alpha0_sq=args.alpha2, dim=args.dim,
                    wigner_resolution=args.wigner_resolution)
    res = run_chi_sweep(p, out_dir=args.out, jobs=args.jobs)
    note = ""
    if len(p.chis) > 1:
        try:
            assert_strictly_decreasing(res.column("ys_fidelity"), "ys_fidelity")
            note = "; ys_fidelity strictly decreasing in chi"
        except AssertionError as exc:
            note = f"; WARNING {exc}"
    return _summary(res) + note


def cmd_contrast(args) -> str:
    p = ContrastParams(chi=args.chi, gamma=args.gamma, alpha0_sq=tuple(args.alpha2_list), chi_tau=args.chi_tau)
    return _summary(run_damping_contrast(p, out_dir=args.out, jobs=args.jobs))


def cmd_validate(args) -> str:
    p = ValidationParams(chis=tuple(args.chis), alpha0_sq=tuple(args.alpha2_list), samples=args.samples,
                         chi_tau_end=args.t_end_chitau)
    res = run_moment_validation(p, out_dir=args.out, jobs=args.jobs)
    return _summary(res) + f"; max deviation {res.extra_manifest['max_deviation']:.3e}"


def cmd_rerun(args) -> str:
    path = Path(args.manifest)
    out = args.out or str(path.parent)
    entries = read_manifest(path)
    name = entries.get("experiment")
    if name in _RECIPES:
        return _summary(run_from_manifest(path, out_dir=out, jobs=args.jobs))
    if name not in ("moments", "simulate", "wigner"):
        raise InvalidParameter(f"manifest names unknown experiment {name!r}")
    argv = [name]
    sub = build_parser()._subparsers._group_actions[0].choices[name]  # noqa: SLF001
    options = {a.dest: a.option_strings[0] for a in sub._actions if a.option_strings}  # noqa: SLF001
    for key, value in entries.items():
        if not key.startswith("cli."):
            continue
        dest = key[4:]
        if value == "None" or dest not in options:
            continue
        if dest == "grid":
            value = ":".join(x.strip() for x in value.strip("()").split(","))
        argv += [options[dest], value]
    argv += ["--out", out]
    return _dispatch(build_parser().parse_args(argv))


HANDLERS = {
    "moments": cmd_moments,
    "simulate": cmd_simulate,
    "wigner": cmd_wigner,
    "fig1": cmd_fig1,
    "sweep": cmd_sweep,
    "contrast": cmd_contrast,
    "validate": cmd_validate,
    "rerun": cmd_rerun,
}


def _dispatch(args) -> str:
    return HANDLERS[args.command](args)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        print(_dispatch(args))
    except SystemExit as exc:
        return int(exc.code or 0)
    except (InvalidParameter, StabilityViolation, ExtentTooSmall, DimensionMismatch) as exc:
        print(f"kerrcat: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TruncationLeak as exc:
        print(f"kerrcat: truncation leak: {exc}", file=sys.stderr)
        return EXIT_LEAK
    except (SanityViolation, OracleMismatch) as exc:
        print(f"kerrcat: numerical sanity violation: {exc}", file=sys.stderr)
        return EXIT_SANITY
    except OSError as exc:
        print(f"kerrcat: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
