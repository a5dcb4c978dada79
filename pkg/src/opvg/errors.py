"""Exception hierarchy shared by every module of the package."""


class OpvgError(Exception):
    """Base class for all errors raised by opvg."""


class FiberCountMismatch(OpvgError):
    pass


class NotInvertible(OpvgError):
    def __init__(self, fiber, value=None, what="element"):
        self.fiber = fiber
        self.value = value
        super().__init__(f"{what} not invertible at fiber {fiber} (value {value})")


class NotPositive(OpvgError):
    def __init__(self, fiber, value):
        self.fiber = fiber
        self.value = value
        super().__init__(f"element not positive: worst fiber {fiber} has value {value}")


class NotSelfAdjoint(OpvgError):
    def __init__(self, fiber, value=None):
        self.fiber = fiber
        self.value = value
        super().__init__(f"element not self-adjoint at fiber {fiber} (value {value})")


class NotSquare(OpvgError):
    pass


class DimTooLarge(OpvgError):
    pass


class DimMismatch(OpvgError):
    pass


class SingularMatrix(OpvgError):
    def __init__(self, fiber, value=None):
        self.fiber = fiber
        self.value = value
        super().__init__(f"matrix singular: determinant vanishes at fiber {fiber} (value {value})")


class DegreeZero(OpvgError):
    pass


class WrongDegree(OpvgError):
    pass


class ExprError(OpvgError):
    """Base for expression-language errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message, offset):
        self.offset = offset
        super().__init__(f"{message} at offset {offset}")


class UnknownName(ExprError):
    def __init__(self, name, offset=None):
        self.name = name
        self.offset = offset
        where = "" if offset is None else f" at offset {offset}"
        super().__init__(f"unknown name {name!r}{where}")


class ArityError(ExprError):
    pass


class UnknownConstant(ExprError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"unknown constant {name!r}")


class DomainError(ExprError):
    def __init__(self, fn, fiber, value):
        self.fn = fn
        self.fiber = fiber
        self.value = value
        super().__init__(f"{fn} evaluated outside its domain at fiber {fiber} (value {value})")


class PointDegenerate(OpvgError):
    def __init__(self, point, fiber):
        self.point = point
        self.fiber = fiber
        super().__init__(f"metric degenerate at point {point}, fiber {fiber}")


class OutOfDomain(OpvgError):
    pass


class DegeneratePlane(OpvgError):
    def __init__(self, fiber):
        self.fiber = fiber
        super().__init__(f"tangent plane degenerate: Q not invertible at fiber {fiber}")


class SignatureInconsistent(OpvgError):
    pass


class SupportViolation(OpvgError):
    pass


class SchemaError(OpvgError):
    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class ParseError(OpvgError):
    def __init__(self, path, offset, message):
        self.path = path
        self.offset = offset
        super().__init__(f"{path}: {message}")


class MetricInvalid(OpvgError):
    def __init__(self, point, fiber, message):
        self.point = point
        self.fiber = fiber
        super().__init__(f"metric invalid at grid point {point}, fiber {fiber}: {message}")
