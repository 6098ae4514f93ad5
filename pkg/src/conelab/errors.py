"""Exception hierarchy. Every error carries a structured record for the CLI."""

from __future__ import annotations


class ConelabError(Exception):
    """Base error; subclasses set a stable code and owning module."""

    code = "error"
    module = "conelab"

    def __init__(self, message: str, **values):
        super().__init__(message)
        self.values = values

    def record(self) -> dict:
        return {
            "code": self.code,
            "module": self.module,
            "message": str(self),
            "values": {k: _jsonable(v) for k, v in self.values.items()},
        }


def _jsonable(v):
    if isinstance(v, (str, int, float, bool)) or v is None:
        return v
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    return repr(v)


class ValidationError(ConelabError):
    code = "invalid-input"


class SpaceMismatchError(ConelabError, TypeError):
    """Operands live in different model spaces."""

    code = "space-mismatch"
    module = "spaces"


class BudgetError(ConelabError):
    """An enumeration or point budget would be exceeded."""

    code = "budget-exceeded"


class NotAnRPathError(ConelabError):
    """A consecutive pair of points is too far apart at the requested scale."""

    code = "not-an-r-path"
    module = "coarse"


class ScaleConditionError(ConelabError):
    """Jump uniqueness fails (or cannot be certified) at this (t, r)."""

    code = "scale-condition"
    module = "coarse"


class EigensolverError(ConelabError):
    """Iterative eigensolver did not converge; carries the best estimate."""

    code = "no-convergence"
    module = "graphs"

    def __init__(self, message: str, best_estimate: float, residual: float, **values):
        super().__init__(message, best_estimate=best_estimate, residual=residual, **values)
        self.best_estimate = best_estimate
        self.residual = residual
