"""Exception hierarchy shared by the numerics and the CLI."""


class VldpError(Exception):
    """Base class for package errors."""


class ConfigError(VldpError, ValueError):
    """Malformed configuration, unknown family tag, or violated precondition."""


class DomainError(VldpError, ValueError):
    """Argument outside the domain where an asymptotic formula applies."""


class DimensionError(VldpError, ValueError):
    """Array shape does not match the grid it is paired with."""


class ResolutionError(VldpError, ValueError):
    """Coarse grid does not divide the fine grid."""


class NumericalError(VldpError, ArithmeticError):
    """Base for failures of the numerical schemes."""


class DivergenceError(NumericalError):
    def __init__(self, index, what="state"):
        self.index = int(index)
        super().__init__(f"non-finite {what} at grid index {self.index}")


class SingularControlError(NumericalError):
    def __init__(self, index):
        self.index = int(index)
        super().__init__(f"dispersion vanishes at grid index {self.index}; control is singular")
