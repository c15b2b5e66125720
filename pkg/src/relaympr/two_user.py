"""Relay queue and throughput for two users with arbitrary (non-symmetric) links."""

from __future__ import annotations

from dataclasses import dataclass

from .channel import DEST, RELAY, NetworkGeometry, success_probability
from .errors import GeometryError, UnstableQueueError
from .results import DIVERGED, ArrivalProbabilities, QueueCharacterization, ThroughputReport

REQUIRED_LINKS = ((1, RELAY), (2, RELAY), (1, DEST), (2, DEST), (RELAY, DEST))


@dataclass(frozen=True)
class TwoUserScenario:
    geometry: NetworkGeometry
    q0: float
    q1: float
    q2: float

    def __post_init__(self):
        for name in ("q0", "q1", "q2"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if self.geometry.users != [1, 2]:
            raise GeometryError(f"two-user scenario needs users 1 and 2, got {self.geometry.users}")
        for link in REQUIRED_LINKS:
            if not self.geometry.has_link(*link):
                raise GeometryError(f"missing link {link!r}")

    def p(self, i, j, *transmitters) -> float:
        """Success of link i -> j when ``transmitters`` are active."""
        return success_probability(self.geometry, i, j, transmitters)


def relay_success_rate(s: TwoUserScenario) -> float:
    """Relay -> destination success averaged over user activity (service rate at q0 = 1)."""
    q1, q2 = s.q1, s.q2
    return (
        (1 - q1) * (1 - q2) * s.p(RELAY, DEST, RELAY)
        + q1 * (1 - q2) * s.p(RELAY, DEST, RELAY, 1)
        + q2 * (1 - q1) * s.p(RELAY, DEST, RELAY, 2)
        + q1 * q2 * s.p(RELAY, DEST, RELAY, 1, 2)
    )


def service_rate(s: TwoUserScenario) -> float:
    q0, q1, q2 = s.q0, s.q1, s.q2
    return (
        q0 * (1 - q1) * (1 - q2) * s.p(RELAY, DEST, RELAY)
        + q0 * q1 * (1 - q2) * s.p(RELAY, DEST, RELAY, 1)
        + q0 * q2 * (1 - q1) * s.p(RELAY, DEST, RELAY, 2)
        + q0 * q1 * q2 * s.p(RELAY, DEST, RELAY, 1, 2)
    )


def arrival_probabilities(s: TwoUserScenario) -> ArrivalProbabilities:
    """Probabilities of one and two relay arrivals in a slot with an empty queue."""
    q1, q2 = s.q1, s.q2
    pd1, pr1 = s.p(1, DEST, 1), s.p(1, RELAY, 1)
    pd2, pr2 = s.p(2, DEST, 2), s.p(2, RELAY, 2)
    pd1_12, pr1_12 = s.p(1, DEST, 1, 2), s.p(1, RELAY, 1, 2)
    pd2_12, pr2_12 = s.p(2, DEST, 1, 2), s.p(2, RELAY, 1, 2)

    p1 = (
        q1 * (1 - q2) * (1 - pd1) * pr1
        + q2 * (1 - q1) * (1 - pd2) * pr2
        + q1 * q2 * (1 - pd1_12) * pr1_12 * (pd2_12 + (1 - pd2_12) * (1 - pr2_12))
        + q1 * q2 * (1 - pd2_12) * pr2_12 * (pd1_12 + (1 - pd1_12) * (1 - pr1_12))
    )
    p2 = q1 * q2 * (1 - pd1_12) * (1 - pd2_12) * pr1_12 * pr2_12
    return ArrivalProbabilities(p=(p1, p2), q0=s.q0)


def stability_threshold(s: TwoUserScenario, lambda0: float | None = None) -> float:
    """Smallest relay transmit probability keeping the queue stable (q0min)."""
    if lambda0 is None:
        lambda0 = arrival_probabilities(s).lambda0
    if lambda0 == 0:
        return 0.0
    return lambda0 / (lambda0 + relay_success_rate(s))


def _mean_queue(arr: ArrivalProbabilities, mu: float) -> float:
    p1_0, p2_0 = arr.p
    p1_1, p2_1 = arr.p1
    lam0, lam1 = arr.lambda0, arr.lambda1
    # mu - lam1 + lam0 == mu + q0 lam0, which cannot cancel to zero
    den = mu + arr.q0 * lam0
    return ((lam1 - mu) * (2 * p1_0 + 5 * p2_0) + lam0 * (mu - 2 * p1_1 - 5 * p2_1)) / den / (lam1 - mu)


def mean_queue_as_printed(s: TwoUserScenario) -> float:
    """Mean queue with empty-queue batch probabilities in the second numerator term.

    Kept only for comparison. The two forms agree only in the q0 -> 0 limit
    where both batch laws coincide, so on the stable side this version
    disagrees with the numerically solved chain.
    """
    arr = arrival_probabilities(s)
    mu = service_rate(s)
    p1_0, p2_0 = arr.p
    lam0, lam1 = arr.lambda0, arr.lambda1
    return ((lam1 - mu) * (2 * p1_0 + 5 * p2_0) + lam0 * (mu - 2 * p1_0 - 5 * p2_0)) / (
        (mu - lam1 + lam0) * (lam1 - mu)
    )


def characterize_queue(s: TwoUserScenario) -> QueueCharacterization:
    arr = arrival_probabilities(s)
    mu = service_rate(s)
    lam0, lam1 = arr.lambda0, arr.lambda1
    q0min = stability_threshold(s, lam0)

    if lam0 == 0:
        return QueueCharacterization(lam0, lam1, 0.0, mu, 1.0, 0.0, q0min, True)
    if not lam1 < mu:
        return QueueCharacterization(lam0, lam1, lam1, mu, DIVERGED, DIVERGED, q0min, False)

    den = mu + s.q0 * lam0
    prob_empty = (mu - lam1) / den
    lam = mu * lam0 / den
    return QueueCharacterization(
        lambda0=lam0,
        lambda1=lam1,
        lam=lam,
        mu=mu,
        prob_empty=prob_empty,
        mean_queue=_mean_queue(arr, mu),
        q0min=q0min,
        stable=True,
    )


def no_relay_throughput(s: TwoUserScenario) -> tuple[float, float]:
    q1, q2 = s.q1, s.q2
    mu1 = q1 * (1 - q2) * s.p(1, DEST, 1) + q1 * q2 * s.p(1, DEST, 1, 2)
    mu2 = q2 * (1 - q1) * s.p(2, DEST, 2) + q1 * q2 * s.p(2, DEST, 1, 2)
    return mu1, mu2


def throughput(s: TwoUserScenario) -> ThroughputReport:
    """Per-user delivered rate, counting relay captures as delivered (stable queue only)."""
    queue = characterize_queue(s)
    if not queue.stable:
        raise UnstableQueueError(s.q0, queue.q0min)
    q0, q1, q2 = s.q0, s.q1, s.q2
    relay_on = q0 * queue.prob_busy

    def direct_or_relayed(i, *active):
        pd = s.p(i, DEST, *active)
        return pd + (1 - pd) * s.p(i, RELAY, *active)

    mu1 = relay_on * q1 * ((1 - q2) * s.p(1, DEST, RELAY, 1) + q2 * s.p(1, DEST, RELAY, 1, 2)) + (
        1 - relay_on
    ) * q1 * ((1 - q2) * direct_or_relayed(1, 1) + q2 * direct_or_relayed(1, 1, 2))
    mu2 = relay_on * q2 * ((1 - q1) * s.p(2, DEST, RELAY, 2) + q1 * s.p(2, DEST, RELAY, 1, 2)) + (
        1 - relay_on
    ) * q2 * ((1 - q1) * direct_or_relayed(2, 2) + q1 * direct_or_relayed(2, 1, 2))
    return ThroughputReport(per_user=(mu1, mu2), no_relay_per_user=no_relay_throughput(s))
