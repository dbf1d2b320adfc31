"""Exception types raised across planforge."""


class PlanforgeError(Exception):
    """Base class for all planforge errors."""


class FewerThanTwoPoints(PlanforgeError):
    pass


class DegenerateInput(PlanforgeError):
    pass


class InvalidPolygon(PlanforgeError):
    pass


class SelfIntersecting(InvalidPolygon):
    pass


class OutOfBounds(PlanforgeError):
    pass


class DimMismatch(PlanforgeError):
    pass


class LengthMismatch(PlanforgeError):
    pass


class TooFewPoints(PlanforgeError):
    pass


class MissingLabels(PlanforgeError):
    pass


class TooFewSegments(PlanforgeError):
    pass


class BothEmpty(PlanforgeError):
    pass


class SceneParseError(PlanforgeError):
    pass


class VoteMismatch(PlanforgeError):
    pass


class NoRoomsFound(PlanforgeError):
    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result


class InvariantViolation(PlanforgeError):
    """An internal guarantee failed to hold."""
