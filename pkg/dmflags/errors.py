"""Exception hierarchy for dmflags.

Verdict-style operations (``dm_check``, ``trc_check``, ``tensor_length_test``)
return reports instead of raising. Everything else signals failure with one
of the exceptions below.
"""

from __future__ import annotations


class DmflagsError(Exception):
    """Base class for all dmflags errors."""


class RingMismatchError(DmflagsError):
    """Operands live in different polynomial rings."""


class CharacteristicError(DmflagsError):
    """The coefficient field has the wrong characteristic for the operation."""


class ExponentOverflowError(DmflagsError):
    """A monomial exponent left the machine-word range."""


class ParseError(DmflagsError):
    """A polynomial string could not be parsed."""


class ShapeError(DmflagsError):
    """Matrix or module dimensions do not line up."""


class NotInImageError(DmflagsError):
    """A vector is not in the image of the matrix it was lifted through."""


class NotInvertibleError(DmflagsError):
    """A matrix or morphism has no inverse of the required kind."""


class NotSmallError(DmflagsError):
    """A perturbation is not small with respect to a homotopy."""

    def __init__(self, message: str, bound: int) -> None:
        super().__init__(message)
        self.bound = bound


class InvariantError(DmflagsError):
    """An exact identity that a construction promises failed to hold."""


class NotFlagError(DmflagsError):
    """A filtration assignment is not strictly dropped by the differential."""

    def __init__(self, message: str, block: tuple | None = None) -> None:
        super().__init__(message)
        self.block = block


class NotExactError(DmflagsError):
    """A sequence that should be exact is not."""


class LengthCapError(DmflagsError):
    """A resolution did not terminate within the length cap."""


class InfiniteLengthError(DmflagsError):
    """A length-based invariant was requested for infinite-length homology."""


class MissingRootOfUnityError(DmflagsError):
    """The coefficient field has no primitive k-th root of unity."""


class SchemaError(DmflagsError):
    """A problem file violates the JSON schema."""

    def __init__(self, message: str, location: str = "$") -> None:
        super().__init__(f"{location}: {message}")
        self.location = location


class InvalidArgumentError(DmflagsError, ValueError):
    """A numeric parameter is outside the range an operation supports."""
