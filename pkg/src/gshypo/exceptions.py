"""Exception types raised by gshypo.

Every error that signals a violated precondition derives from
:class:`ContractError`; the CLI maps those to exit code 2 and reports the
``contract`` attribute.
"""


class ContractError(ValueError):
    """A documented precondition of an operation was violated."""

    contract = "precondition"

    def __init__(self, message, *, contract=None, payload=None):
        super().__init__(message)
        if contract is not None:
            self.contract = contract
        self.payload = payload


class ShapeError(ContractError):
    contract = "shape"


class OutOfRangeError(ContractError, IndexError):
    contract = "index-range"


class UnsupportedBasisError(ContractError):
    contract = "eigenfunction-basis"


class FitDomainError(ContractError):
    contract = "fit-domain"


class InsufficientDepthError(ContractError):
    contract = "continued-fraction-depth"


class DegenerateSystemError(ContractError):
    contract = "nondegenerate-system"


class AdmissibilityError(ContractError):
    """Raised by ``solve`` when the data vector is not admissible.

    The :class:`~gshypo.solver.AdmissibilityReport` is kept in ``report``.
    """

    contract = "admissible-data"

    def __init__(self, message, report):
        super().__init__(message, payload=report)
        self.report = report


class InvalidWitnessError(ContractError):
    contract = "nonzero-witness"


class RegularityRestrictionError(ContractError):
    contract = "M*mu - 1 <= sigma"


class ResolutionError(ContractError):
    contract = "time-grid-resolution"


class ConfigError(ContractError):
    contract = "config"
