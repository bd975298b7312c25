"""Exception hierarchy shared by the toolkit and mapped to CLI exit codes."""


class PathanonError(Exception):
    """Base class for toolkit errors."""


class DataError(PathanonError, ValueError):
    """Malformed or insufficient input data (CLI exit code 2)."""


class AudioFormatError(DataError):
    pass


class NumericalError(PathanonError, ArithmeticError):
    """A numerical routine failed to converge (CLI exit code 3)."""


class RootFindingError(NumericalError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual
