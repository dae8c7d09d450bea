class BaseError(Exception):
    pass


class UserError(BaseError):
    pass


class ParseError(UserError):
    def __init__(self, message, line=None, column=None):
        if line is not None:
            message = '{} (line {}, column {})'.format(message, line, column)
        super(ParseError, self).__init__(message)
        self.line = line
        self.column = column


class ValidationError(UserError):
    def __init__(self, message, key=None):
        if key:
            message = '{}: {}'.format(key, message)
        super(ValidationError, self).__init__(message)
        self.key = key


class LabError(BaseError):
    pass


# domain construction; user input, so these map to validation exit codes
class DomainError(LabError, ValidationError):
    pass


class NonPositiveWeightA(DomainError):
    pass


class WeightBelowMu(NonPositiveWeightA):
    pass


class NonFiniteWeight(DomainError):
    pass


class NegativeWeightB(DomainError):
    pass


class EmptyDomain(DomainError):
    pass


class DisconnectedMask(DomainError):
    pass


class ZeroMassB(DomainError):
    pass


class DomainMismatch(LabError):
    pass


class NegativeField(LabError):
    pass


class ZeroDenominator(LabError):
    pass


class InvalidExponent(LabError, ValidationError):
    pass


class DegenerateDomain(LabError):
    pass


class NotConverged(LabError):
    pass


class BadExponent(LabError, ValidationError):
    pass


class NegativeT(LabError):
    pass


class TooLarge(LabError):
    pass


class TouchesBoundary(LabError):
    pass


class LayerTooThin(LabError):
    pass


class EmptySet(LabError):
    pass


class InsufficientData(LabError):
    pass


class NotComparable(LabError):
    pass
