"""Exception hierarchy.

Every error carries a short machine-readable ``code`` so callers (and the
CLI exit-code mapping) can branch without parsing messages.
"""


class AsmlineError(Exception):
    code = "error"

    def __init__(self, message: str, code: str | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code


class AssemblyError(AsmlineError):
    """Invalid assembly description (malformed, duplicate id, dangling ref, ...)."""

    code = "invalid-assembly"


class MeshError(AsmlineError):
    code = "invalid-mesh"


class GeometryError(AsmlineError):
    code = "invalid-geometry"


class PlanningInfeasible(AsmlineError):
    """No feasible full assembly sequence exists."""

    code = "planning-infeasible"


class GraphSizeError(AsmlineError):
    code = "size-limit"


class SolverError(AsmlineError):
    code = "solver-error"


class ConfigError(AsmlineError):
    code = "config"
