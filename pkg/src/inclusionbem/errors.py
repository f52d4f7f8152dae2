"""Exception hierarchy; ``exit_code`` is what the CLI returns for each."""


class InclusionError(Exception):
    exit_code = 1


class ConfigError(InclusionError):
    exit_code = 1


class ExprSyntaxError(ConfigError):
    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} at offset {offset}"
        super().__init__(message)
        self.offset = offset


class ExprDomainError(InclusionError, ValueError):
    exit_code = 3


class AdmissibilityError(InclusionError):
    exit_code = 2


class ClearanceError(InclusionError, ValueError):
    """Evaluation point too close to a surface for the quadrature in use."""
    exit_code = 2


class AssumptionError(InclusionError):
    """A standing hypothesis on the data (F, G) does not hold."""
    exit_code = 3

    def __init__(self, message, code):
        super().__init__(f"{message} [{code}]")
        self.code = code


class NoRootError(AssumptionError):
    def __init__(self, message):
        super().__init__(message, "zetai-no-root")


class SolveError(InclusionError):
    exit_code = 4


class NewtonError(SolveError):
    def __init__(self, message, trace=None, branch=None):
        super().__init__(message)
        self.trace = trace or []
        self.branch = branch or []


class InsufficientDataError(InclusionError):
    exit_code = 5
