"""Exception hierarchy shared by all modules.

The CLI maps these onto process exit codes, so every failure a user can
trigger from the command line should surface as one of them.
"""


class DiracQndError(Exception):
    exit_code = 1


class ConfigurationError(DiracQndError, ValueError):
    exit_code = 2


class DimensionError(ConfigurationError):
    pass


class ContractError(DiracQndError, ValueError):
    pass


class DomainError(DiracQndError, ValueError):
    """A parameter outside the domain of a formula; reported like a bad config."""

    exit_code = 2


class TruncationError(DiracQndError):
    """Probability mass reached the Fock cutoff, or a state would not fit."""

    exit_code = 3

    def __init__(self, message, suggested_cutoff=None, leakage=None):
        super().__init__(message)
        self.suggested_cutoff = suggested_cutoff
        self.leakage = leakage


class AccuracyError(DiracQndError):
    """Step-halving (or tolerance-tightening) disagreement above threshold."""

    exit_code = 4

    def __init__(self, message, recommended_dt=None, discrepancy=None):
        super().__init__(message)
        self.recommended_dt = recommended_dt
        self.discrepancy = discrepancy
