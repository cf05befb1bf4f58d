"""Problem-description files.

A problem file is a flat key/value file with bracketed section headers::

    [tolerances]
    ode_tol = 1e-10

    [box]
    bounds = -2, 2

    [system demo]
    x0 = 0
    interval = 0, 2
    phi1 = 1
    phi2 = x*exp(u1)

    [integral demo]
    system = demo
    F = exp(-v1)*v2
    theta = w

    [linear lin]
    p = 1
    q = x
    interval = 0, 2

    [secondorder airy]
    Q = x
    interval = 0, 2

``#`` starts a comment.  Integrands are numbered ``phi1``, ``phi2``, ...
without gaps.
"""

import configparser
import re
from dataclasses import dataclass, field, fields

from .config import DEFAULT_TOL, ToleranceConfig, WorkingBox
from .errors import ProblemFileError, QuadraturaError
from .expr import parse_expr
from .families import ExponentialShapeIntegral, QuadratureIntegral
from .odelab import LinearFirstOrder, SecondOrderEq
from .systems import QuadratureSystem

SECTION_KINDS = ("system", "integral", "linear", "secondorder")
INTEGRAL_KINDS = {"quadrature": QuadratureIntegral,
                  "exponential-shape": ExponentialShapeIntegral}


@dataclass
class IntegralSpec:
    system: str
    F: object
    theta: object
    kind: str = "quadrature"


@dataclass
class LinearSpec:
    eq: LinearFirstOrder
    y0: float = 0.0


@dataclass
class SecondOrderSpec:
    eq: SecondOrderEq
    u0: float = 0.0
    du0: float = 1.0


@dataclass
class ProblemFile:
    systems: dict = field(default_factory=dict)
    integrals: dict = field(default_factory=dict)
    linears: dict = field(default_factory=dict)
    secondorders: dict = field(default_factory=dict)
    tol: ToleranceConfig = DEFAULT_TOL
    box: WorkingBox = None

    def integral(self, name, tol=None):
        """Build the integral family of the named section."""
        spec = self._lookup(self.integrals, "integral", name)
        cls = INTEGRAL_KINDS[spec.kind]
        try:
            return cls(self.systems[spec.system], spec.F, spec.theta, tol or self.tol)
        except QuadraturaError as exc:
            raise ProblemFileError(f"[integral {name}]: {exc}") from exc

    def linear(self, name):
        return self._lookup(self.linears, "linear", name)

    def secondorder(self, name):
        return self._lookup(self.secondorders, "secondorder", name)

    @staticmethod
    def _lookup(table, kind, name):
        if name not in table:
            known = ", ".join(sorted(table)) or "none"
            raise ProblemFileError(f"no [{kind} {name}] section (known: {known})")
        return table[name]


def parse_floats(text, count=None, what="value"):
    try:
        values = [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise ProblemFileError(f"{what}: cannot read numbers from {text!r}") from None
    if count is not None and len(values) != count:
        raise ProblemFileError(f"{what}: expected {count} numbers, got {text!r}")
    return values


def parse_box(text):
    """``lo, hi`` for a uniform box or ``lo, hi; lo, hi; ...`` per parameter."""
    parts = [p for p in text.split(";") if p.strip()]
    if not parts:
        raise ProblemFileError("box: empty specification")
    try:
        return WorkingBox(tuple(tuple(parse_floats(p, 2, "box")) for p in parts))
    except ValueError as exc:
        raise ProblemFileError(f"box: {exc}") from None


def _expr(section, key, text):
    try:
        return parse_expr(text)
    except QuadraturaError as exc:
        raise ProblemFileError(f"[{section}] {key}: {exc}") from None


def _number(section, key, values, default):
    if key not in values:
        return default
    return parse_floats(values[key], 1, f"[{section}] {key}")[0]


def _interval(section, values):
    if "interval" not in values:
        raise ProblemFileError(f"[{section}]: missing interval")
    return tuple(parse_floats(values["interval"], 2, f"[{section}] interval"))


def _breakpoints(section, values):
    return tuple(parse_floats(values.get("breakpoints", ""), None, f"[{section}] breakpoints"))


def _check_keys(section, values, allowed, pattern=None):
    for key in values:
        if key not in allowed and not (pattern and re.fullmatch(pattern, key)):
            raise ProblemFileError(f"[{section}]: unknown key {key!r}")


def _read_tolerances(values):
    kinds = {f.name: f.type for f in fields(ToleranceConfig)}
    overrides = {}
    for key, text in values.items():
        if key not in kinds:
            raise ProblemFileError(f"[tolerances]: unknown key {key!r}")
        try:
            overrides[key] = int(text) if key == "sample_count" else float(text)
        except ValueError:
            raise ProblemFileError(f"[tolerances] {key}: not a number: {text!r}") from None
    try:
        return DEFAULT_TOL.with_overrides(**overrides)
    except ValueError as exc:
        raise ProblemFileError(f"[tolerances]: {exc}") from None


def _read_system(section, values):
    _check_keys(section, values, {"x0", "interval", "breakpoints"}, r"phi\d+")
    indices = sorted(int(k[3:]) for k in values if re.fullmatch(r"phi\d+", k))
    if not indices:
        raise ProblemFileError(f"[{section}]: no integrands (phi1, phi2, ...)")
    if indices != list(range(1, len(indices) + 1)):
        raise ProblemFileError(f"[{section}]: integrands must be numbered phi1..phi{len(indices)}")
    phis = [_expr(section, f"phi{k}", values[f"phi{k}"]) for k in indices]
    try:
        return QuadratureSystem(phis, _number(section, "x0", values, 0.0),
                                _interval(section, values), _breakpoints(section, values))
    except QuadraturaError as exc:
        raise ProblemFileError(f"[{section}]: {exc}") from None


def _read_integral(section, values):
    _check_keys(section, values, {"system", "F", "theta", "kind"})
    if "system" not in values or "F" not in values:
        raise ProblemFileError(f"[{section}]: needs both system and F")
    kind = values.get("kind", "quadrature").strip()
    if kind not in INTEGRAL_KINDS:
        raise ProblemFileError(f"[{section}] kind: expected one of {sorted(INTEGRAL_KINDS)}")
    return IntegralSpec(values["system"].strip(), _expr(section, "F", values["F"]),
                        _expr(section, "theta", values.get("theta", "w")), kind)


def _read_linear(section, values):
    _check_keys(section, values, {"p", "q", "x0", "interval", "breakpoints", "y0"})
    try:
        eq = LinearFirstOrder(_expr(section, "p", values.get("p", "0")),
                              _expr(section, "q", values.get("q", "0")),
                              _number(section, "x0", values, 0.0), _interval(section, values),
                              _breakpoints(section, values))
    except QuadraturaError as exc:
        raise ProblemFileError(f"[{section}]: {exc}") from None
    return LinearSpec(eq, _number(section, "y0", values, 0.0))


def _read_secondorder(section, values):
    _check_keys(section, values, {"Q", "x0", "interval", "breakpoints", "u0", "du0"})
    if "Q" not in values:
        raise ProblemFileError(f"[{section}]: missing Q")
    try:
        eq = SecondOrderEq(_expr(section, "Q", values["Q"]), _number(section, "x0", values, 0.0),
                           _interval(section, values), _breakpoints(section, values))
    except QuadraturaError as exc:
        raise ProblemFileError(f"[{section}]: {exc}") from None
    u0 = _number(section, "u0", values, 0.0)
    du0 = _number(section, "du0", values, 1.0)
    if u0 == 0 and du0 == 0:
        raise ProblemFileError(f"[{section}]: initial data must not both vanish")
    return SecondOrderSpec(eq, u0, du0)


def parse_problem(text, source="<string>"):
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",),
                                       comment_prefixes=("#",), strict=True)
    parser.optionxform = str
    try:
        parser.read_string(text, source)
    except configparser.Error as exc:
        raise ProblemFileError(f"{source}: {exc}".strip()) from None
    problem = ProblemFile()
    readers = {"system": (_read_system, problem.systems),
               "integral": (_read_integral, problem.integrals),
               "linear": (_read_linear, problem.linears),
               "secondorder": (_read_secondorder, problem.secondorders)}
    for section in parser.sections():
        values = dict(parser.items(section))
        head, _, name = section.partition(" ")
        name = name.strip()
        if section == "tolerances":
            problem.tol = _read_tolerances(values)
        elif section == "box":
            _check_keys(section, values, {"bounds"})
            problem.box = parse_box(values.get("bounds", ""))
        elif head in readers and name:
            reader, table = readers[head]
            table[name] = reader(section, values)
        else:
            raise ProblemFileError(f"unknown section [{section}]")
    for name, spec in problem.integrals.items():
        if spec.system not in problem.systems:
            raise ProblemFileError(f"[integral {name}] refers to missing system {spec.system!r}")
    return problem


def load_problem(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ProblemFileError(f"cannot read {path}: {exc.strerror}") from None
    return parse_problem(text, str(path))


__all__ = ["ProblemFile", "IntegralSpec", "LinearSpec", "SecondOrderSpec", "parse_problem",
           "load_problem", "parse_box", "parse_floats"]
