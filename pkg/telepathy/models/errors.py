"""
Exception hierarchy for Telepathy.

The CLI maps the three branches to exit codes: validation problems exit 2, cap
violations exit 3, harness/network problems exit 4.
"""

from typing import Optional


class TelepathyError(Exception):
    """Base class for all Telepathy errors."""


# --- validation (exit 2) ---


class GameValidationError(TelepathyError):
    """A game, behavior, strategy or scenario violates its invariants."""


class EmptySet(GameValidationError):
    pass


class DuplicateLabel(GameValidationError):
    pass


class ShapeMismatch(GameValidationError):
    pass


class NegativeProbability(GameValidationError):
    pass


class NonNormalizedDistribution(GameValidationError):
    pass


class DomainMismatch(GameValidationError):
    pass


class BadWeights(GameValidationError):
    pass


class SpecInvalid(GameValidationError):
    pass


class InvalidScenario(GameValidationError):
    pass


class NegativeDistance(GameValidationError):
    pass


class InvalidState(GameValidationError):
    pass


class NonProjective(GameValidationError):
    def __init__(self, message: str, party: int, input_index: int):
        super().__init__(message)
        self.party = party
        self.input_index = input_index


class IncompleteMeasurement(GameValidationError):
    def __init__(self, message: str, party: int, input_index: int):
        super().__init__(message)
        self.party = party
        self.input_index = input_index


class NumericalDrift(GameValidationError):
    pass


class SignalingBehavior(GameValidationError):
    def __init__(self, message: str, max_violation: float):
        super().__init__(message)
        self.max_violation = max_violation


# --- caps (exit 3) ---


class CapExceeded(TelepathyError):
    """A computation would exceed a configured size cap."""


class BudgetExceeded(CapExceeded):
    def __init__(self, size: int, budget: int):
        super().__init__(
            f"Strategy space has {size} strategies, exceeding the budget of {budget}"
        )
        self.size = size
        self.budget = budget


class DimensionCap(CapExceeded):
    def __init__(self, total_dimension: int, cap: int):
        super().__init__(
            f"Joint Hilbert space dimension {total_dimension} exceeds the cap of {cap}"
        )
        self.total_dimension = total_dimension
        self.cap = cap


class OutputSetTooLarge(CapExceeded):
    pass


# --- harness (exit 4) ---


class HarnessError(TelepathyError):
    """Network or protocol failure between the referee and its parties."""


class PartyDisconnected(HarnessError):
    def __init__(self, party: Optional[int], message: str = ""):
        super().__init__(message or f"Party {party} disconnected")
        self.party = party


class ProtocolViolation(HarnessError):
    def __init__(self, message: str, code: str = "protocol", party: Optional[int] = None):
        super().__init__(message)
        self.code = code
        self.party = party


class DuplicateQuery(HarnessError):
    pass


class UnknownRound(HarnessError):
    pass


class LateOutputAbort(HarnessError):
    pass
