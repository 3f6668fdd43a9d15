"""
Exception hierarchy shared by every lab app.

Each exception carries the exit status the command line reports when it
escapes a subcommand.
"""
from rest_framework.exceptions import APIException


class LabException(APIException):
    status_code = 500
    exit_code = 1
    default_detail = 'The lab could not complete the request.'
    default_code = 'lab_error'


class DomainError(LabException):
    exit_code = 2
    default_detail = 'Argument outside its mathematical domain.'
    default_code = 'domain_error'


class ContractError(LabException):
    exit_code = 2
    default_detail = 'Input violates the data contract of the operation.'
    default_code = 'contract_error'


class DimensionMismatch(LabException):
    exit_code = 2
    default_detail = 'Matrix dimensions do not agree.'
    default_code = 'dimension_mismatch'


class ConvergenceFailure(LabException):
    exit_code = 1
    default_detail = 'Iterative method did not converge.'
    default_code = 'convergence_failure'

    def __init__(self, detail=None, code=None, residuals=None, iterations=None):
        super().__init__(detail, code)
        self.residuals = residuals
        self.iterations = iterations


class BranchError(LabException):
    exit_code = 1
    default_detail = 'No quadratic root satisfies the branch rule Im(w - alpha) > 0.'
    default_code = 'branch_error'


class CheckSkipped(LabException):
    exit_code = 0
    default_detail = 'Diagnostic not applicable to this input.'
    default_code = 'check_skipped'


class AcceptanceFailure(LabException):
    exit_code = 1
    default_detail = 'One or more acceptance checks failed.'
    default_code = 'acceptance_failure'


class ConfigError(LabException):
    exit_code = 2
    default_detail = 'Invalid configuration.'
    default_code = 'config_error'
