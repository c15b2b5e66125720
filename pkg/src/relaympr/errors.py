"""Exception hierarchy shared across the package."""


class RelayModelError(ValueError):
    """Base class for model-level failures."""


class GeometryError(RelayModelError):
    """A link or node is missing, or the geometry breaks a required symmetry."""


class UnstableQueueError(RelayModelError):
    """Raised when a quantity is requested that only exists for a stable relay queue."""

    def __init__(self, q0: float, q0min: float, message: str | None = None):
        self.q0 = q0
        self.q0min = q0min
        super().__init__(
            message
            or f"relay queue unstable at q0={q0:.6g}; stability requires q0 > q0min={q0min:.6g}"
        )


class ChainError(RelayModelError):
    """Transition probabilities do not form a valid chain."""


class TruncationError(RelayModelError):
    """Truncated solve left too much probability at the boundary; retry with a larger q_max."""

    def __init__(self, q_max: int, tail_mass: float, bound: float):
        self.q_max = q_max
        self.tail_mass = tail_mass
        self.bound = bound
        super().__init__(
            f"tail mass {tail_mass:.3e} at q_max={q_max} exceeds bound {bound:.1e}"
        )


class ConfigError(ValueError):
    """Invalid experiment configuration. Carries the offending key and line when known."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        self.key = key
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
