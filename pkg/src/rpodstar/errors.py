"""Exception hierarchy shared by the library and the command line runner."""


class RpodError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ConfigError(RpodError, ValueError):
    """Invalid configuration or violated precondition."""

    exit_code = 2


class NumericalError(RpodError, ArithmeticError):
    """A numerical procedure broke down (solver failure, defective matrix...)."""

    exit_code = 3


class DefectiveMatrixError(NumericalError):
    """The operator is (numerically) not diagonalizable."""


class SizeSelectionError(RpodError):
    """No admissible reduced-order model size could be found."""

    exit_code = 4
