"""Command-line front end.

Exit codes: 0 when every check passes, 1 for a negative result, 2 for a
usage or problem-file error.
"""

import argparse
import csv
import io
import os
import sys
import tempfile

import numpy as np

from .config import DEFAULT_SEED, chebyshev_grid
from .errors import ProblemFileError, QuadraturaError, ReductionError
from .families import (check_admissible, check_equivalence, check_theta,
                       effective_parameter_test, fundamental_equality_residual)
from .odelab import (nonconstancy_obstruction, prufer_forward, prufer_residual,
                     restricted_integrability_witness, solve_linear_first_order)
from .problemfile import load_problem, parse_box
from .reduction import reduce_to_normal_form
from .systems import check_independence

EXIT_OK, EXIT_NEGATIVE, EXIT_USAGE = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def write_atomic(path, text):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def resolve_seed(value):
    if value is not None:
        return value
    env = os.environ.get("QUADRATURA_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise _UsageError(f"QUADRATURA_SEED is not an integer: {env!r}") from None
    return DEFAULT_SEED


class Report:
    """Line-oriented report whose header records the inputs that fix the result."""

    def __init__(self, command, target, seed, tol):
        self.lines = [f"# quadratura {command} {target}", f"# seed: {seed}",
                      f"# ode_tol: {tol.ode_tol!r} constancy_tol: {tol.constancy_tol!r} "
                      f"equiv_tol: {tol.equiv_tol!r} rank_threshold: {tol.rank_threshold!r}"]
        self.ok = True

    def check(self, name, passed, residual=None, threshold=None, detail=""):
        self.ok = self.ok and bool(passed)
        line = f"{name}: {'PASS' if passed else 'FAIL'}"
        if residual is not None:
            line += f" residual={residual!r}"
        if threshold is not None:
            line += f" threshold={threshold!r}"
        if detail:
            line += f" {detail}"
        self.lines.append(line)

    def note(self, text):
        self.lines.append(text)

    def text(self):
        return "\n".join(self.lines) + "\n"


def _context(args):
    problem = load_problem(args.file)
    tol = problem.tol.with_overrides(ode_tol=args.tol_ode, constancy_tol=args.tol_constancy)
    box = parse_box(args.box) if args.box else problem.box
    return problem, tol, box, resolve_seed(args.seed)


def _emit(args, report, filename):
    text = report.text()
    sys.stdout.write(text)
    if args.out:
        write_atomic(os.path.join(args.out, filename), text)


def cmd_check(args):
    problem, tol, box, seed = _context(args)
    fam = problem.integral(args.target, tol)
    report = Report("check", args.target, seed, tol)
    ind = check_independence(fam.sys, tol=tol, seed=seed, box=box)
    report.check("independence", ind.independent, ind.smallest_singular_value, ind.threshold,
                 f"witness={list(ind.witness_constants)}")
    adm = check_admissible(fam.F, fam.outer_arity(), box, tol, seed)
    report.check("admissibility", adm.admissible, adm.min_abs_partial, None, adm.summary())
    th = check_theta(fam.theta, chebyshev_grid(*fam.interval, 9), np.linspace(-4, 4, 9), tol)
    report.check("theta", th.admissible, th.min_abs_partial, None, th.summary())
    for i in range(1, fam.param_dim + 1):
        for j in range(i + 1, fam.param_dim + 1):
            res = fundamental_equality_residual(fam, i, j, tol=tol, seed=seed, box=box)
            report.check(f"fundamental-equality({i},{j})", res < tol.constancy_tol, res,
                         tol.constancy_tol)
    eff = effective_parameter_test(fam, tol=tol, seed=seed, box=box)
    report.check("effective-parameter", eff.passed, eff.reconstruction_gap, tol.equiv_tol,
                 f"max pair residual={eff.max_residual!r}")
    _emit(args, report, "check.txt")
    return EXIT_OK if report.ok else EXIT_NEGATIVE


def cmd_reduce(args):
    problem, tol, box, seed = _context(args)
    fam = problem.integral(args.target, tol)
    out = args.out or "."
    report = Report("reduce", args.target, seed, tol)
    try:
        result = reduce_to_normal_form(fam, tol, box, seed)
    except ReductionError as exc:
        report.check("reduction", False, getattr(exc.cause, "residual", None),
                     getattr(exc.cause, "threshold", None), str(exc.cause))
        write_atomic(os.path.join(out, "trace.txt"), report.text() + exc.trace.to_text())
        write_atomic(os.path.join(out, "trace.jsonl"), exc.trace.to_jsonl())
        sys.stdout.write(report.text())
        return EXIT_NEGATIVE
    nf, trace = result.nf, result.trace
    eq = result.equivalence
    report.check("reduction", True, detail="rules=" + ",".join(trace.rules))
    report.check("equivalence", eq.equivalent, eq.max_gap, tol.equiv_tol)
    header = "\n".join(report.lines[:3]) + "\n"
    write_atomic(os.path.join(out, "normalform.txt"), header + nf.to_text())
    write_atomic(os.path.join(out, "trace.txt"), header + trace.to_text())
    write_atomic(os.path.join(out, "trace.jsonl"), trace.to_jsonl())
    write_atomic(os.path.join(out, "equivalence.txt"), header + eq.summary() + "\n")
    sys.stdout.write(report.text() + nf.to_text())
    return EXIT_OK if report.ok else EXIT_NEGATIVE


def _grid(interval, count):
    return np.linspace(interval[0], interval[1], count)


def _csv(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def cmd_prufer(args):
    problem, tol, box, seed = _context(args)
    spec = problem.secondorder(args.target)
    eq = spec.eq
    xs = _grid(eq.interval, args.grid)
    traj = prufer_forward(eq, spec.u0, spec.du0, xs, tol)
    out = args.out or "."
    write_atomic(os.path.join(out, "prufer.csv"),
                 _csv(("x", "theta", "logrho", "u", "du"), traj.rows()))
    report = Report("prufer", args.target, seed, tol)
    res = prufer_residual(eq, spec.u0, spec.du0, xs, tol=tol)
    report.note(f"reconstruction residual |u''+Qu|: {res!r}")
    Q = eq.constant_value()
    if Q is not None:
        wit = restricted_integrability_witness(Q, traj, tol)
        report.check("first-integral witness", wit.passed(tol.equiv_tol), wit.deviation,
                     tol.equiv_tol, wit.message)
    else:
        values = [float(v) for v in xs]
        x1, x2 = values[0], values[-1]
        obs = nonconstancy_obstruction(eq, x1, x2, phi="y", tol=tol)
        if not obs.derivable:
            for x in values[1:]:
                obs = nonconstancy_obstruction(eq, x1, x, phi="y", tol=tol)
                if obs.derivable:
                    break
        report.check("obstruction", obs.derivable and obs.max_abs_det > 0, obs.max_abs_det,
                     None, obs.message)
        if obs.derivable:
            report.note(f"Q values: {obs.Q1!r}, {obs.Q2!r}")
            report.note(f"determinants at (pi/4, pi/3): {obs.determinants!r}")
            report.note(f"identity-transform residual: {obs.level_identity_residual!r}")
    _emit(args, report, "prufer.txt")
    return EXIT_OK if report.ok else EXIT_NEGATIVE


def cmd_solve_linear(args):
    problem, tol, box, seed = _context(args)
    spec = problem.linear(args.target)
    xs = _grid(spec.eq.interval, args.grid)
    traj = solve_linear_first_order(spec.eq, spec.y0, xs, tol)
    out = args.out or "."
    write_atomic(os.path.join(out, "linear.csv"), _csv(("x", "y", "dy"),
                                                       zip(traj.grid, traj.y, traj.dy)))
    report = Report("solve-linear", args.target, seed, tol)
    threshold = 10 * tol.ode_tol
    report.check("equation residual", traj.residual < threshold, traj.residual, threshold)
    _emit(args, report, "linear.txt")
    return EXIT_OK if report.ok else EXIT_NEGATIVE


def cmd_equiv(args):
    problem, tol, box, seed = _context(args)
    famA = problem.integral(args.target, tol)
    famB = problem.integral(args.other, tol)
    report = Report("equiv", f"{args.target} {args.other}", seed, tol)
    try:
        eq = check_equivalence(famA, famB, x_grid=chebyshev_grid(*famA.interval, args.grid),
                               tol=tol, seed=seed, box=box)
    except ValueError as exc:
        raise ProblemFileError(str(exc)) from None
    report.check("equivalence", eq.equivalent, eq.max_gap, tol.equiv_tol)
    for line in eq.diagnostics:
        report.note(line)
    _emit(args, report, "equivalence.txt")
    return EXIT_OK if report.ok else EXIT_NEGATIVE


def _positive_int(text):
    value = int(text)
    if value < 2:
        raise argparse.ArgumentTypeError("grid needs at least 2 points")
    return value


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("file", help="problem description file")
    common.add_argument("--tol-ode", type=float, help="ODE and quadrature tolerance")
    common.add_argument("--tol-constancy", type=float, help="constancy tolerance")
    common.add_argument("--box", help="working box, 'lo,hi' or 'lo,hi;lo,hi;...'")
    common.add_argument("--seed", type=int, help="sampling seed (default: $QUADRATURA_SEED)")
    common.add_argument("--grid", type=_positive_int, default=33, help="grid point count")
    common.add_argument("--out", help="output directory")
    parser = _Parser(prog="quadratura", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    commands = {"check": (cmd_check, "run the structural checks on an integral"),
                "reduce": (cmd_reduce, "reduce an integral to its normal form"),
                "prufer": (cmd_prufer, "polar form of u'' + Q u = 0"),
                "solve-linear": (cmd_solve_linear, "closed-form solution of y' + p y = q")}
    for name, (fn, text) in commands.items():
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("target", help="section name")
        p.set_defaults(func=fn)
    p = sub.add_parser("equiv", parents=[common], help="compare two integrals")
    p.add_argument("target", help="first integral section")
    p.add_argument("other", help="second integral section")
    p.set_defaults(func=cmd_equiv)
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        sys.stderr.write(f"quadratura: {exc}\n")
        return EXIT_USAGE
    except (ProblemFileError, ValueError) as exc:
        sys.stderr.write(f"quadratura: {exc}\n")
        return EXIT_USAGE
    except QuadraturaError as exc:
        sys.stderr.write(f"quadratura: {exc}\n")
        return EXIT_NEGATIVE


if __name__ == "__main__":
    sys.exit(main())
