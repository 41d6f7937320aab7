class MPQRError(Exception):
    """Base class for library errors."""


class Overflow(MPQRError, ArithmeticError):
    """A value exceeded the largest finite number of a simulated format."""

    def __init__(self, fmt, value=None, where=None):
        self.fmt = fmt
        self.value = value
        self.where = where
        msg = f"overflow in {getattr(fmt, 'name', fmt)}"
        if value is not None:
            msg += f" (value {value!r})"
        if where:
            msg += f" during {where}"
        super().__init__(msg)


class ZeroVector(MPQRError, ValueError):
    """Householder vector requested for a vector whose norm rounds to zero."""


class RankDeficient(MPQRError, ValueError):
    def __init__(self, column):
        self.column = column
        super().__init__(f"matrix is numerically rank deficient at column {column}")


class InvalidLevels(MPQRError, ValueError):
    pass


class DomainError(MPQRError, ValueError):
    """A gamma term was requested outside c*k*u < 1."""
