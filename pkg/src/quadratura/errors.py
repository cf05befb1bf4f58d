"""Exception hierarchy shared by all quadratura modules."""


class QuadraturaError(Exception):
    """Base class for every error raised by this package."""


class ExprError(QuadraturaError):
    pass


class ParseError(ExprError):
    def __init__(self, message, position=None, text=None):
        self.position = position
        self.text = text
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class EvalError(ExprError):
    pass


class UnboundVariableError(EvalError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"unbound variable '{name}'")


class DomainError(EvalError):
    """log or sqrt of a negative argument, or an even root of a negative base."""


class DivisionByZeroError(EvalError):
    pass


class QuadratureError(EvalError):
    """Adaptive quadrature of an integral node failed to converge."""


class CaptureError(ExprError):
    pass


class BoundSymbolError(ExprError):
    pass


class QuadratureSystemError(QuadraturaError):
    pass


class StructureError(QuadraturaError):
    """A numerically verified structural hypothesis does not hold.

    ``residual`` carries the measured deviation and ``threshold`` the
    tolerance it was compared against.
    """

    def __init__(self, message, residual=None, threshold=None):
        self.residual = residual
        self.threshold = threshold
        if residual is not None:
            message = f"{message} (residual {residual:.3e}"
            if threshold is not None:
                message += f", threshold {threshold:.3e}"
            message += ")"
        super().__init__(message)


class StructureAbsentError(StructureError):
    def __init__(self, detail="", residual=None, threshold=None):
        msg = "Fundamental-Equality structure absent"
        if detail:
            msg += f": {detail}"
        super().__init__(msg, residual, threshold)


class RedundancyError(StructureError):
    pass


class FactorizationAbsentError(StructureError):
    def __init__(self, residual=None, threshold=None):
        super().__init__("normal-form factorization absent", residual, threshold)


class PDEStructureError(StructureError):
    pass


class IndependenceLostError(StructureError):
    def __init__(self, message, system=None, report=None):
        self.system = system
        self.report = report
        super().__init__(message)


class ReductionError(QuadraturaError):
    """Wraps a structured failure of the reduction loop with its partial trace."""

    def __init__(self, cause, trace):
        self.cause = cause
        self.trace = trace
        super().__init__(str(cause))


class ProblemFileError(QuadraturaError):
    pass
