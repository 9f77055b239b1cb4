"""Exception hierarchy.  Each class maps to one CLI exit code."""


class MLLCError(Exception):
    exit_code = 1


class CapacityError(MLLCError, ValueError):
    """A 2**l enumeration or bitmask bound would be exceeded."""


class DimensionError(MLLCError, ValueError):
    exit_code = 2


class DomainError(MLLCError, ValueError):
    pass


class AdmissibilityError(DomainError):
    """Prediction outside the admissible set of a @k loss."""


class UnsupportedModeError(MLLCError, ValueError):
    pass


class ParseError(MLLCError, ValueError):
    exit_code = 2


class NumericOverflowError(MLLCError, ArithmeticError):
    exit_code = 4


class DivergedError(MLLCError, ArithmeticError):
    exit_code = 4

    def __init__(self, epoch, lr, detail=""):
        self.epoch = epoch
        self.lr = lr
        super().__init__(f"training diverged in epoch {epoch} (learning rate {lr}){detail}")


class LabelRangeError(ParseError):
    """A label index outside ``[0, l)`` in a dataset."""
