'''
Exception hierarchy shared by all permlab modules.

Every error carries a module-qualified code (``<module>.<Name>``) and a details dict
so the command line runner can emit machine-readable error records.
'''

from typing import Any


class PermLabError(Exception):
    '''Base class for algorithm errors raised by permlab'''
    module = "permlab"

    def __init__(self, message: str, **details: Any) -> None:
        super().__init__(message)
        self.message = message
        self.details = details

    @property
    def code(self) -> str:
        return f"{self.module}.{type(self).__name__}"

    def to_record(self) -> dict[str, Any]:
        return {"code": self.code, "message": self.message, "details": self.details}


class ConfigError(PermLabError):
    module = "cli_runner"


class DimensionTooLarge(PermLabError):
    module = "permanent_exact"


class BudgetExceeded(PermLabError):
    module = "interp_poly"


class DegenerateLeadingCoefficient(PermLabError):
    module = "interp_poly"


class NoConvergence(PermLabError):
    '''Aberth iteration hit its sweep limit; ``best`` holds the last iterate'''
    module = "interp_poly"

    def __init__(self, message: str, best: Any = None, **details: Any) -> None:
        super().__init__(message, **details)
        self.best = best


class ZeroConstantTerm(PermLabError):
    module = "cac_engine"


class ScheduleUnderflow(PermLabError):
    module = "cac_engine"


class InsufficientDerivatives(PermLabError):
    module = "cac_engine"


class EpsilonOutOfRange(PermLabError):
    module = "curve_planner"


class NoClearCurve(PermLabError):
    module = "curve_planner"


class RootOnContour(PermLabError):
    module = "stats_lab"


class ParameterViolation(PermLabError):
    module = "stats_lab"


class TooManyErrors(PermLabError):
    module = "hardness_demo"


class SingularSystem(PermLabError):
    module = "hardness_demo"


class NonFiniteTable(PermLabError):
    '''A shifted table or the exponentiated result left the floating range'''
    module = "cac_engine"
