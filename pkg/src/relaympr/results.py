"""Result containers shared by the two-user and symmetric analyses."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Union


class Divergence(enum.Enum):
    """Tag for quantities that do not exist because the relay queue is unstable."""

    DIVERGED = "diverged"

    def __repr__(self) -> str:
        return "DIVERGED"

    def __str__(self) -> str:
        return self.value


DIVERGED = Divergence.DIVERGED

MaybeFloat = Union[float, Divergence]


@dataclass(frozen=True)
class ArrivalProbabilities:
    """Batch-arrival law of the relay queue.

    ``p[k - 1]`` is the probability that ``k`` packets join the queue in a
    slot where the queue is empty. With a nonempty queue the relay transmits
    with probability ``q0`` and then cannot receive, so every batch
    probability is scaled by ``1 - q0``.
    """

    p: tuple[float, ...]
    q0: float

    def __post_init__(self):
        if any(not 0.0 <= x <= 1.0 + 1e-15 for x in self.p):
            raise ValueError(f"batch probabilities must lie in [0, 1]: {self.p}")
        if sum(self.p) > 1.0 + 1e-12:
            raise ValueError(f"batch probabilities sum to {sum(self.p)} > 1")
        if not 0.0 <= self.q0 <= 1.0:
            raise ValueError(f"q0 must lie in [0, 1], got {self.q0}")

    @property
    def max_batch(self) -> int:
        return len(self.p)

    @property
    def p1(self) -> tuple[float, ...]:
        return tuple((1.0 - self.q0) * x for x in self.p)

    @property
    def lambda0(self) -> float:
        return sum(k * x for k, x in enumerate(self.p, start=1))

    @property
    def lambda1(self) -> float:
        return (1.0 - self.q0) * self.lambda0


@dataclass(frozen=True)
class QueueCharacterization:
    """Relay queue summary. ``prob_empty`` and ``mean_queue`` are ``DIVERGED`` when unstable.

    ``lam`` is the long-run arrival rate; for an unstable queue it equals
    ``lambda1`` because the queue empties only finitely often.
    """

    lambda0: float
    lambda1: float
    lam: float
    mu: float
    prob_empty: MaybeFloat
    mean_queue: MaybeFloat
    q0min: float
    stable: bool

    @property
    def prob_busy(self) -> MaybeFloat:
        if self.prob_empty is DIVERGED:
            return DIVERGED
        return 1.0 - self.prob_empty


@dataclass(frozen=True)
class ThroughputReport:
    """Per-user delivered-packet rates (packets/slot) with and without the relay."""

    per_user: tuple[float, ...]
    no_relay_per_user: tuple[float, ...]

    @property
    def aggregate(self) -> float:
        return sum(self.per_user)

    @property
    def no_relay_aggregate(self) -> float:
        return sum(self.no_relay_per_user)

    @property
    def relay_gain(self) -> float:
        base = self.no_relay_aggregate
        return self.aggregate / base if base > 0 else float("nan")
