from typing import Optional, Sequence

__all__ = [
    "AnsatzDomainError",
    "ArtifactNotFoundError",
    "ChainTooShortError",
    "CommandError",
    "CriticalValidityWarning",
    "DerivativeError",
    "GridResolutionWarning",
    "InconsistentObservablesError",
    "InvalidBracketError",
    "InvalidInputError",
    "KondometryError",
    "ResourceError",
    "SpecialFunctionDomainError",
    "SweepValidationError",
    "SymmetryViolationError",
    "ValidityDomainError",
]


class KondometryError(ValueError):
    pass


class CommandError(KondometryError):
    pass


class InvalidInputError(KondometryError):
    pass


class InconsistentObservablesError(KondometryError):
    pass


class AnsatzDomainError(KondometryError):
    pass


class SymmetryViolationError(KondometryError):
    pass


class DerivativeError(KondometryError):
    pass


class ValidityDomainError(KondometryError):
    pass


class SpecialFunctionDomainError(KondometryError):
    pass


class ChainTooShortError(KondometryError):
    pass


class InvalidBracketError(KondometryError):
    pass


class ArtifactNotFoundError(KondometryError):
    pass


class SweepValidationError(KondometryError):
    def __init__(self, message: str, rows: Optional[Sequence[str]] = None):
        self.rows = list(rows or [])
        if self.rows:
            message += "\n" + "\n".join(f"  {row}" for row in self.rows)
        super().__init__(message)


class ResourceError(KondometryError):
    def __init__(self, message: str, shell: Optional[int] = None):
        self.shell = shell
        if shell is not None:
            message = f"shell {shell}: {message}"
        super().__init__(message)


class CriticalValidityWarning(UserWarning):
    pass


class GridResolutionWarning(UserWarning):
    pass
