"""Command-line front end: tableau inspection, single integrations,
convergence studies and the energy-defect level grid.

Exit codes: 0 success, 1 usage error, 2 numerical failure (stage iteration or
root search).  Output files are written atomically (temp file + rename) and
identical invocations produce byte-identical output.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
import tempfile

import numpy as np

from . import __version__
from .conserve import AlphaSearchConfig, NoRootError, StageSolveError, level_grid
from .experiments import (
    IntegrationError,
    RunSpec,
    convergence_table,
    integrate,
    resolve_perturb_index,
)
from .problems import SingularPotentialError, get_problem
from .stepper import SOLVERS, StepConfig
from .tableau import MAX_STAGES, PerturbationSpec, butcher, gauss_quadrature

DEFAULT_T_END = {"kepler": 50.0, "quartic": 50.0, "harmonic": 50.0, "henon-heiles": 500.0}
DEFAULT_H = {"henon-heiles": 0.25}

_POW2 = re.compile(r"^2\^(-?\d+)$")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse variant that raises instead of calling sys.exit, so usage
    problems map to exit code 1."""

    def error(self, message):
        raise UsageError(message)


def parse_stepsize(token):
    """A stepsize literal: plain float or an exact power of two like 2^-5."""
    token = token.strip()
    m = _POW2.match(token)
    if m:
        return 2.0 ** int(m.group(1))
    try:
        return float(token)
    except ValueError:
        raise UsageError(f"cannot parse stepsize {token!r}") from None


def parse_value_list(text):
    """Grid-axis syntax: 'a,b,c' explicit values, 'a:b' halving range from a
    down to b, 'lo:hi:n' n linearly spaced values.  Tokens may use 2^-k."""
    text = text.strip()
    if "," in text:
        return [parse_stepsize(t) for t in text.split(",") if t.strip()]
    parts = text.split(":")
    if len(parts) == 2:
        start, stop = (parse_stepsize(p) for p in parts)
        if not 0 < stop <= start:
            raise UsageError(f"halving range needs 0 < b <= a, got {text!r}")
        values = []
        h = start
        while h >= stop * (1.0 - 1e-12):
            values.append(h)
            h /= 2.0
        return values
    if len(parts) == 3:
        lo, hi = parse_stepsize(parts[0]), parse_stepsize(parts[1])
        try:
            n = int(parts[2])
        except ValueError:
            raise UsageError(f"grid count must be an integer in {text!r}") from None
        if n < 1:
            raise UsageError("grid count must be positive")
        return list(np.linspace(lo, hi, n))
    return [parse_stepsize(text)]


def parse_y0(text):
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"cannot parse --y0 {text!r}") from None


def g17(x):
    return format(float(x), ".17g")


def _write_atomic(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".sympulse-")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(ns, text):
    if ns.output:
        _write_atomic(ns.output, text)
    else:
        sys.stdout.write(text)


def _add_tolerance_flags(p):
    p.add_argument("--stage-tol", type=float, default=1e-14, help="stage-equation tolerance")
    p.add_argument("--stage-solver", choices=SOLVERS, default="fixed_point")
    p.add_argument(
        "--alpha-strategy", choices=("bisection", "secant"), default="bisection",
        help="per-step root search: full-precision dichotomy or warm-started secant",
    )
    p.add_argument("--g-tol", type=float, default=1e-13, help="energy-defect tolerance")
    p.add_argument(
        "--bracket-seed", type=float, default=None,
        help="first probe of the bracket scan (default 10*h^2, capped)",
    )


def _add_problem_flags(p):
    p.add_argument(
        "--problem", required=True, choices=("kepler", "quartic", "henon-heiles", "harmonic")
    )
    p.add_argument("--e", type=float, default=None, help="Kepler eccentricity (default 0.6)")
    p.add_argument("--y0", type=parse_y0, default=None, help="start state override v1,v2,...")


def _add_method_flags(p):
    p.add_argument(
        "--method", choices=("gauss", "fixed-alpha", "ep-gauss", "ep-gauss-type2"),
        default="ep-gauss",
    )
    p.add_argument("--stages", type=int, default=2)
    p.add_argument("--perturb-index", type=int, default=None)
    p.add_argument("--alpha", type=float, default=0.0, help="value for --method fixed-alpha")


def _build_parser():
    parser = _Parser(prog="sympulse", description=__doc__)
    parser.add_argument("--version", action="version", version=f"sympulse {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    p = sub.add_parser("tableau", help="print nodes, weights and the perturbed tableau")
    p.add_argument("--stages", type=int, required=True)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--perturb-index", type=int, default=None)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--output", "-o", default=None)

    p = sub.add_parser("integrate", help="single run, trajectory CSV")
    _add_problem_flags(p)
    _add_method_flags(p)
    p.add_argument("--h", type=parse_stepsize, default=None, help="stepsize (2^-k allowed)")
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--t-end", type=float, default=None)
    _add_tolerance_flags(p)
    p.add_argument("--output", "-o", default=None)

    p = sub.add_parser("converge", help="convergence table over a stepsize list")
    _add_problem_flags(p)
    _add_method_flags(p)
    p.add_argument("--h-list", required=True, help="e.g. 2^-1:2^-7 or 0.5,0.25")
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--t-end", type=float, default=None)
    _add_tolerance_flags(p)
    p.add_argument("--output", "-o", default=None)

    p = sub.add_parser("levelmap", help="energy defect g(alpha, h) on a grid, CSV")
    _add_problem_flags(p)
    p.add_argument("--stages", type=int, default=2)
    p.add_argument("--perturb-index", type=int, default=None)
    p.add_argument("--h-list", default="0.01:0.2:8", help="grid h values")
    p.add_argument(
        "--alpha-list", default="-0.0005:0.004:19", help="grid alpha values (lo:hi:n)"
    )
    p.add_argument("--stage-tol", type=float, default=1e-14)
    p.add_argument("--stage-solver", choices=SOLVERS, default="fixed_point")
    p.add_argument("--output", "-o", default=None)

    return parser


def _header(pairs):
    lines = [f"# sympulse {__version__}"]
    for key, value in pairs:
        if value is None:
            continue
        if isinstance(value, float):
            value = g17(value)
        elif isinstance(value, (tuple, list, np.ndarray)):
            value = ",".join(g17(v) for v in value)
        lines.append(f"# {key} = {value}")
    return "\n".join(lines) + "\n"


def _search_config(ns):
    return AlphaSearchConfig(
        strategy=ns.alpha_strategy,
        g_tol=ns.g_tol,
        bracket_seed=ns.bracket_seed,
    )


def _step_config(ns, h):
    return StepConfig(h=h, stage_tol=ns.stage_tol, solver=ns.stage_solver)


def _run_tableau(ns):
    if not 1 <= ns.stages <= MAX_STAGES:
        raise UsageError(f"--stages must be in 1..{MAX_STAGES}")
    index = ns.perturb_index
    if index is None:
        index = ns.stages - 1 if ns.stages > 1 else None
    if ns.alpha != 0.0 and index is None:
        raise UsageError("a 1-stage tableau has no perturbable coupling")
    pert = (
        PerturbationSpec.none(ns.stages)
        if ns.alpha == 0.0 or index is None
        else PerturbationSpec.single(ns.stages, index, ns.alpha)
    )
    try:
        tab = butcher(gauss_quadrature(ns.stages), pert)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if ns.format == "json":
        payload = {
            "stages": tab.s,
            "alpha": ns.alpha,
            "perturb_index": index,
            "order": tab.order,
            "c": [g17(v) for v in tab.c],
            "b": [g17(v) for v in tab.b],
            "A": [[g17(v) for v in row] for row in tab.A],
        }
        _emit(ns, json.dumps(payload, indent=2) + "\n")
        return
    lines = [
        _header(
            [
                ("subcommand", "tableau"),
                ("stages", ns.stages),
                ("alpha", ns.alpha),
                ("perturb_index", index),
                ("order", tab.order),
            ]
        )
    ]
    lines.append("c," + ",".join(g17(v) for v in tab.c) + "\n")
    lines.append("b," + ",".join(g17(v) for v in tab.b) + "\n")
    for row in tab.A:
        lines.append("A," + ",".join(g17(v) for v in row) + "\n")
    _emit(ns, "".join(lines))


def _resolved_interval(ns):
    t_end = ns.t_end if ns.t_end is not None else DEFAULT_T_END[ns.problem]
    return t_end


def _run_integrate(ns):
    h = ns.h if ns.h is not None else DEFAULT_H.get(ns.problem, 2.0 ** -5)
    t_end = _resolved_interval(ns)
    spec = RunSpec(
        problem=ns.problem,
        method=ns.method,
        s=ns.stages,
        h=h,
        t_end=t_end,
        t0=ns.t0,
        e=ns.e,
        y0=ns.y0,
        alpha=ns.alpha,
        perturb_index=ns.perturb_index,
        search=_search_config(ns),
        step_cfg=_step_config(ns, h),
    )
    record = integrate(spec)
    system, _ = get_problem(ns.problem, e=ns.e, y0=ns.y0)
    inv_names = [inv.name for inv in system.quadratic_invariants]
    header = _header(
        [
            ("subcommand", "integrate"),
            ("problem", ns.problem),
            ("e", ns.e if ns.problem == "kepler" else None),
            ("y0", ns.y0),
            ("method", ns.method),
            ("stages", ns.stages),
            ("perturb_index", spec.resolved_perturb_index()),
            ("alpha", ns.alpha if ns.method == "fixed-alpha" else None),
            ("h", h),
            ("t0", ns.t0),
            ("t_end", t_end),
            ("stage_tol", ns.stage_tol),
            ("stage_solver", ns.stage_solver),
            ("alpha_strategy", ns.alpha_strategy),
            ("g_tol", ns.g_tol),
            ("bracket_seed", ns.bracket_seed),
            ("partial_final", str(record.partial_final).lower()),
        ]
    )
    dim = record.states.shape[1]
    columns = (
        ["step", "t"]
        + [f"y{i + 1}" for i in range(dim)]
        + ["H_err"]
        + [f"{name}_err" for name in inv_names]
        + ["alpha_star", "g_evals", "stage_iters"]
    )
    out = [header, ",".join(columns) + "\n"]
    n_rows = record.times.size
    for k in range(n_rows):
        row = [str(k), g17(record.times[k])]
        row += [g17(v) for v in record.states[k]]
        row.append(g17(record.energy_error[k]))
        row += [g17(record.invariant_errors[name][k]) for name in inv_names]
        if k == 0:
            row += [g17(0.0), "0", "0"]
        else:
            row += [
                g17(record.alpha_trace[k - 1]),
                str(int(record.g_evals[k - 1])),
                str(int(record.stage_iters[k - 1])),
            ]
        out.append(",".join(row) + "\n")
    _emit(ns, "".join(out))


def _run_converge(ns):
    h_list = parse_value_list(ns.h_list)
    if len(h_list) > 1 and any(b >= a for a, b in zip(h_list, h_list[1:])):
        raise UsageError("--h-list values must be strictly decreasing")
    t_end = _resolved_interval(ns)
    rows = convergence_table(
        ns.problem,
        ns.method,
        ns.stages,
        h_list,
        t_end,
        e=ns.e,
        y0=ns.y0,
        alpha=ns.alpha,
        perturb_index=ns.perturb_index,
        search=_search_config(ns),
        step_cfg=_step_config(ns, h_list[0]),
        t0=ns.t0,
    )
    header = _header(
        [
            ("subcommand", "converge"),
            ("problem", ns.problem),
            ("e", ns.e if ns.problem == "kepler" else None),
            ("y0", ns.y0),
            ("method", ns.method),
            ("stages", ns.stages),
            ("perturb_index", resolve_perturb_index(ns.method, ns.stages, ns.perturb_index)
             if ns.method != "gauss" else None),
            ("alpha", ns.alpha if ns.method == "fixed-alpha" else None),
            ("h_list", h_list),
            ("t0", ns.t0),
            ("t_end", t_end),
            ("stage_tol", ns.stage_tol),
            ("stage_solver", ns.stage_solver),
            ("alpha_strategy", ns.alpha_strategy),
            ("g_tol", ns.g_tol),
            ("bracket_seed", ns.bracket_seed),
            ("error_norm", "euclidean"),
        ]
    )
    out = [header, "h,e_h,order,delta_h,delta_scaled\n"]
    for row in rows:
        order = g17(row.order) if row.order is not None else ""
        out.append(
            f"{g17(row.h)},{g17(row.e_h)},{order},{g17(row.delta_h)},{g17(row.delta_scaled)}\n"
        )
    _emit(ns, "".join(out))


def _run_levelmap(ns):
    h_values = parse_value_list(ns.h_list)
    alpha_values = parse_value_list(ns.alpha_list)
    system, ic = get_problem(ns.problem, e=ns.e, y0=ns.y0)
    index = ns.perturb_index if ns.perturb_index is not None else max(ns.stages - 1, 1)
    if ns.stages < 2:
        raise UsageError("levelmap needs at least 2 stages")
    G, failures = level_grid(
        system,
        ns.stages,
        index,
        ic.y0,
        h_values,
        alpha_values,
        StepConfig(h=h_values[0], stage_tol=ns.stage_tol, solver=ns.stage_solver),
    )
    header = _header(
        [
            ("subcommand", "levelmap"),
            ("problem", ns.problem),
            ("e", ns.e if ns.problem == "kepler" else None),
            ("y0", ns.y0),
            ("stages", ns.stages),
            ("perturb_index", index),
            ("h_list", h_values),
            ("alpha_list", alpha_values),
            ("stage_tol", ns.stage_tol),
            ("stage_solver", ns.stage_solver),
            ("failed_cells", len(failures)),
        ]
    )
    out = [header, "h,alpha,g\n"]
    for j, h in enumerate(h_values):
        for i, alpha in enumerate(alpha_values):
            out.append(f"{g17(h)},{g17(alpha)},{g17(G[i, j])}\n")
    _emit(ns, "".join(out))


def run(argv=None) -> int:
    """Parse arguments and execute; returns the process exit code."""
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
    except UsageError as exc:
        print(f"sympulse: error: {exc}", file=sys.stderr)
        return 1
    try:
        if ns.subcommand == "tableau":
            _run_tableau(ns)
        elif ns.subcommand == "integrate":
            _run_integrate(ns)
        elif ns.subcommand == "converge":
            _run_converge(ns)
        else:
            _run_levelmap(ns)
    except UsageError as exc:
        print(f"sympulse: error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"sympulse: error: {exc}", file=sys.stderr)
        return 1
    except IntegrationError as exc:
        print(
            f"sympulse: numerical failure at step {exc.step_index} (t={exc.time!r}): {exc}",
            file=sys.stderr,
        )
        return 2
    except (NoRootError, StageSolveError, SingularPotentialError, RuntimeError) as exc:
        print(f"sympulse: numerical failure: {exc}", file=sys.stderr)
        return 2
    return 0


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
