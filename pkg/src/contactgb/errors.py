"""Exception hierarchy shared by every module."""


class ContactGBError(Exception):
    """Base class for all library errors."""


# expression engine
class ExprSyntaxError(ContactGBError):
    def __init__(self, message, position, expected=()):
        self.position = position
        self.expected = tuple(expected)
        detail = f" (expected {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{message} at position {position}{detail}")


class UnknownIdentifier(ContactGBError):
    pass


class NonSmoothPrimitive(ContactGBError):
    pass


class DomainError(ContactGBError):
    pass


class OrderUnsupported(ContactGBError):
    pass


# contact models
class ContactDegenerate(ContactGBError):
    pass


class OrientationError(ContactGBError):
    pass


class SingularSystem(ContactGBError):
    pass


class UnknownModel(ContactGBError):
    pass


class ModelInvariantError(ContactGBError):
    pass


# surfaces
class DegenerateImmersion(ContactGBError):
    pass


# characteristic points
class NonIsolatedCharacteristicSet(ContactGBError):
    pass


class NotACharacteristicPoint(ContactGBError):
    pass


class EigenvaluesCoalesce(ContactGBError):
    pass


class OrderExceedsKmax(ContactGBError):
    pass


class CurveTracingFailed(ContactGBError):
    pass


class InvalidOrder(ContactGBError):
    pass


class AngleUnwrapFailed(ContactGBError):
    pass


class TraceVanishes(ContactGBError):
    pass


class UnclassifiedPoint(ContactGBError):
    pass


class NotAKernelExtension(ContactGBError):
    pass


class ContactTopologyWarning(UserWarning):
    pass


# curvature and quadrature
class DivergenceOutOfRange(ContactGBError):
    pass


class TooCloseToCharacteristicSet(ContactGBError):
    pass


class QuadratureNotConverged(ContactGBError):
    pass


class DivergentTail(ContactGBError):
    pass


# scenarios
class ParseError(ContactGBError):
    def __init__(self, message, line, column):
        self.line = line
        self.column = column
        super().__init__(f"{message} (line {line}, column {column})")


class ValidationError(ContactGBError):
    def __init__(self, field, reason=None):
        self.field = field
        self.reason = reason
        super().__init__(f"{field} {reason}" if reason else field)


class StageDependencyError(ContactGBError):
    pass


class IoError(ContactGBError):
    def __init__(self, path, reason):
        self.path = path
        super().__init__(f"cannot write {path}: {reason}")
