"""Exception types raised by the simulation engine."""


class FuzzyCAError(Exception):
    """Base class for all engine errors."""


class OrderViolation(FuzzyCAError):
    pass


class NonPositiveFactor(FuzzyCAError):
    pass


class UnknownRule(FuzzyCAError):
    pass


class InvalidRuleTable(FuzzyCAError):
    pass


class VelocityOutOfRange(FuzzyCAError):
    pass


class CollisionDetected(FuzzyCAError):
    pass


class BoundViolation(FuzzyCAError):
    pass


class OutOfRange(FuzzyCAError):
    pass


class EmptySample(FuzzyCAError):
    pass


class QueueExhausted(FuzzyCAError):
    pass


class NeverArrived(FuzzyCAError):
    pass


class Overfull(FuzzyCAError):
    pass


class DimensionMismatch(FuzzyCAError):
    pass


class GeometryError(FuzzyCAError):
    pass


class ConfigError(FuzzyCAError):
    pass
