"""Exception hierarchy shared by all modules."""


class TmcdmaError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(TmcdmaError, ValueError):
    """Invalid or contradictory configuration values."""


class ContractError(TmcdmaError, ValueError):
    """Arguments of incompatible shape or length."""


class BasisError(TmcdmaError, ValueError):
    """A basis vector is not of unit length."""


class DomainError(TmcdmaError, ValueError):
    """A formula was evaluated outside the domain where it is defined."""


class SingularCorrelation(TmcdmaError, ArithmeticError):
    """The correlation matrix is singular or too ill-conditioned to invert."""

    def __init__(self, condition):
        self.condition = condition
        super().__init__(
            f"correlation matrix is singular or ill-conditioned "
            f"(condition estimate {condition:.3e})")


class ComplexityGuard(TmcdmaError, RuntimeError):
    """Exhaustive enumeration was requested for too many users."""

    def __init__(self, K, k_max):
        self.K = K
        self.k_max = k_max
        super().__init__(
            f"exhaustive search over 2^{K} candidates refused (k_max={k_max})")
