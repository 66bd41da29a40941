"""Exception hierarchy shared by every module of the package."""


class PimCollError(Exception):
    """Base class for all errors raised by pimcoll."""


class ConstraintViolation(PimCollError, ValueError):
    """A request breaks one of the hardware usage rules.

    ``rule`` names the constraint in plain words so the CLI can report it.
    """

    def __init__(self, message, rule=None):
        super().__init__(message)
        self.rule = rule or message


# topology
class ZeroDimension(ConstraintViolation):
    pass


class OutOfRange(PimCollError, IndexError):
    pass


# codec
class BadShift(PimCollError, ValueError):
    pass


class BadLength(PimCollError, ValueError):
    pass


# hypercube
class NotPowerOfTwo(ConstraintViolation):
    pass


class TooManyNodes(ConstraintViolation):
    pass


class EmptyDims(ConstraintViolation):
    pass


class CoordOutOfRange(OutOfRange):
    pass


class BadChar(PimCollError, ValueError):
    pass


class EmptyMask(PimCollError, ValueError):
    pass


# machine
class Misaligned(ConstraintViolation):
    pass


class ShortMram(PimCollError, ValueError):
    pass


class OutOfRegion(PimCollError, ValueError):
    pass


class NotAPermutation(PimCollError, ValueError):
    pass


class UnknownHandle(PimCollError, KeyError):
    pass


# collectives / oracle
class IllegalFlags(ConstraintViolation):
    pass


class BufferCountMismatch(ConstraintViolation):
    pass


class SizeMismatch(PimCollError, ValueError):
    pass


class SplitGroupWarning(UserWarning):
    """Emitted when a communication group is smaller than one entangled group."""
