class CoherenceError(Exception):
    """Base class for all kcoherence errors."""
    pass


class CodecError(CoherenceError):
    """Serialization or deserialization failed."""
    pass


class InvalidStateError(CoherenceError, ValueError):
    """Coefficient vector is not a valid pure state."""
    pass


class InvalidOperatorError(CoherenceError, ValueError):
    """Matrix is not a valid (possibly sub-normalized) density operator."""
    pass


class LevelOutOfRangeError(CoherenceError, ValueError):
    """Coherence level outside the range accepted by an operation."""

    def __init__(self, k: int, low: int, high: int | None):
        self.k = k
        self.low = low
        self.high = high
        if high is None:
            super().__init__(f"coherence level k={k} must be at least {low}")
        else:
            super().__init__(f"coherence level k={k} outside [{low}, {high}]")


class NotAResourceStateError(CoherenceError, ValueError):
    """A state lies in I_k where a resource state is required."""

    def __init__(self, role: str, k: int, rank: int):
        self.role = role
        self.k = k
        self.rank = rank
        super().__init__(
            f"{role} state has coherence rank {rank} <= k={k}, it is not a resource state"
        )


class InvalidEffectError(CoherenceError, ValueError):
    """Effect operator does not satisfy 0 <= A <= I."""
    pass


class InvalidScaleError(CoherenceError, ValueError):
    """Map scale p outside (0, 1]."""
    pass


class BoundViolationError(CoherenceError, ValueError):
    """Requested conversion probability exceeds the guaranteed bound."""

    def __init__(self, p: float, bound: float):
        self.p = p
        self.bound = bound
        super().__init__(f"p={p!r} exceeds the conversion bound {bound!r}")


class InvalidConstraintError(CoherenceError, ValueError):
    """Sampling constraint cannot be satisfied."""
    pass


class OracleError(CoherenceError, RuntimeError):
    """A numerical oracle violated an internal consistency check."""
    pass
