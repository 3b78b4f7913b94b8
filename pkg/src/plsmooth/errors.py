"""Exception types shared across the library."""


class PLSmoothError(Exception):
    """Base class for library errors."""


class ParseError(PLSmoothError):
    pass


class DomainError(PLSmoothError):
    pass


class InvalidInputError(PLSmoothError):
    pass


class DegenerateSimplexError(InvalidInputError):
    pass


class IntersectionError(InvalidInputError):
    pass


class ContinuityError(InvalidInputError):
    pass


class OrientationError(InvalidInputError):
    pass


class NonInjectiveError(InvalidInputError):
    pass


class CertificationError(PLSmoothError):
    pass


class ConstructionError(PLSmoothError):
    pass


class ParameterError(PLSmoothError):
    pass


class NoIsotopyFound(ConstructionError):
    pass
