"""Closed forms for n statistically identical users sharing one relay."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import optimize

from .channel import SymmetricLinkParams
from .errors import UnstableQueueError
from .results import DIVERGED, ArrivalProbabilities, QueueCharacterization, ThroughputReport

LOG_BINOMIAL_ABOVE = 30


@dataclass(frozen=True)
class SymmetricScenario:
    params: SymmetricLinkParams
    n: int
    q: float
    q0: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        for name in ("q", "q0"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")


def binom_pmf(n: int, k: int, q: float) -> float:
    """C(n, k) q^k (1-q)^(n-k); log-space for large n."""
    if k < 0 or k > n:
        return 0.0
    if q == 0.0:
        return 1.0 if k == 0 else 0.0
    if q == 1.0:
        return 1.0 if k == n else 0.0
    if n <= LOG_BINOMIAL_ABOVE:
        return math.comb(n, k) * q**k * (1.0 - q) ** (n - k)
    log_c = math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
    return math.exp(log_c + k * math.log(q) + (n - k) * math.log1p(-q))


def relay_success_rate_n(params: SymmetricLinkParams, n: int, q: float) -> float:
    return math.fsum(binom_pmf(n, k, q) * params.relay_dest(k) for k in range(n + 1))


def service_rate_n(s: SymmetricScenario) -> float:
    return math.fsum(
        binom_pmf(s.n, k, s.q) * s.q0 * s.params.relay_dest(k) for k in range(s.n + 1)
    )


def _capture_prob(params: SymmetricLinkParams, i: int) -> float:
    """A given user's packet misses the destination but reaches the relay, i users active."""
    return params.user_relay(i) * (1.0 - params.user_dest(i, relay_active=False))


def arrival_probabilities_n(s: SymmetricScenario) -> ArrivalProbabilities:
    n, q = s.n, s.q
    p = []
    for k in range(1, n + 1):
        terms = []
        for i in range(k, n + 1):
            x = _capture_prob(s.params, i)
            terms.append(binom_pmf(n, i, q) * math.comb(i, k) * x**k * (1.0 - x) ** (i - k))
        p.append(math.fsum(terms))
    return ArrivalProbabilities(p=tuple(p), q0=s.q0)


def stability_threshold_n(params: SymmetricLinkParams, n: int, q: float) -> float:
    lam0 = arrival_probabilities_n(SymmetricScenario(params, n, q, 1.0)).lambda0
    if lam0 == 0:
        return 0.0
    return lam0 / (lam0 + relay_success_rate_n(params, n, q))


def characterize_queue_n(s: SymmetricScenario) -> QueueCharacterization:
    arr = arrival_probabilities_n(s)
    mu = service_rate_n(s)
    lam0, lam1 = arr.lambda0, arr.lambda1
    q0min = 0.0 if lam0 == 0 else lam0 / (lam0 + relay_success_rate_n(s.params, s.n, s.q))

    if lam0 == 0:
        return QueueCharacterization(lam0, lam1, 0.0, mu, 1.0, 0.0, q0min, True)
    if not lam1 < mu:
        return QueueCharacterization(lam0, lam1, lam1, mu, DIVERGED, DIVERGED, q0min, False)

    weighted0 = math.fsum(i * (i + 3) * x for i, x in enumerate(arr.p, start=1))
    weighted1 = math.fsum(i * (i + 3) * x for i, x in enumerate(arr.p1, start=1))
    den = mu + s.q0 * lam0  # equals mu - lam1 + lam0 without the cancellation
    mean_queue = ((lam1 - mu) * weighted0 + lam0 * (2 * mu - weighted1)) / (2 * den) / (lam1 - mu)
    return QueueCharacterization(
        lambda0=lam0,
        lambda1=lam1,
        lam=mu * lam0 / den,
        mu=mu,
        prob_empty=(mu - lam1) / den,
        mean_queue=mean_queue,
        q0min=q0min,
        stable=True,
    )


def no_relay_throughput_n(params: SymmetricLinkParams, n: int, q: float) -> float:
    return math.fsum(
        binom_pmf(n - 1, k, q) * q * params.user_dest(k + 1) for k in range(n)
    )


def throughput_n(s: SymmetricScenario) -> ThroughputReport:
    queue = characterize_queue_n(s)
    if not queue.stable:
        raise UnstableQueueError(s.q0, queue.q0min)
    p, n, q = s.params, s.n, s.q
    relay_on = s.q0 * queue.prob_busy
    with_relay = math.fsum(binom_pmf(n - 1, k, q) * q * p.user_dest(k + 1, True) for k in range(n))
    silent = math.fsum(
        binom_pmf(n - 1, k, q)
        * q
        * (p.user_dest(k + 1) + (1.0 - p.user_dest(k + 1)) * p.user_relay(k + 1))
        for k in range(n)
    )
    per_user = relay_on * with_relay + (1.0 - relay_on) * silent
    base = no_relay_throughput_n(p, n, q)
    return ThroughputReport(per_user=(per_user,) * n, no_relay_per_user=(base,) * n)


def _mu_of_q(params: SymmetricLinkParams, n: int, q: float) -> float:
    """Per-user throughput at a stable q0, written in powers of x = q / (1 - q)."""
    x = q / (1.0 - q)
    a_sum = 0.0
    for k in range(1, n + 1):
        for i in range(k, n + 1):
            c = params.user_relay(i) * (1.0 - params.user_dest(i))
            a_ik = k * math.comb(n, i) * math.comb(i, k) * c**k * (1.0 - c) ** (i - k)
            a_sum += a_ik * x**i
    b_sum = math.fsum(math.comb(n, k) * params.relay_dest(k) * x**k for k in range(n + 1))
    busy = a_sum / (b_sum + a_sum)
    with_relay = math.fsum(
        math.comb(n - 1, k) * x ** (k + 1) * params.user_dest(k + 1, True) for k in range(n)
    )
    silent = math.fsum(
        math.comb(n - 1, k)
        * x ** (k + 1)
        * (params.user_dest(k + 1) + (1.0 - params.user_dest(k + 1)) * params.user_relay(k + 1))
        for k in range(n)
    )
    scale = (1.0 - q) ** n
    return scale * busy * with_relay + scale * (1.0 - busy) * silent


@dataclass(frozen=True)
class ThroughputCurve:
    q: np.ndarray
    mu: np.ndarray
    q_star: float
    mu_star: float


def throughput_vs_q(
    params: SymmetricLinkParams,
    n: int,
    grid: Sequence[float] | None = None,
    refine: bool = True,
) -> ThroughputCurve:
    """Per-user throughput over a q grid and its maximizer.

    The maximizer is the best grid point, refined by golden-section search
    between its neighbours when it is interior. Default grid: 999 points in (0, 1).
    """
    qs = np.linspace(0.001, 0.999, 999) if grid is None else np.asarray(grid, dtype=float)
    if qs.size == 0 or np.any((qs <= 0) | (qs >= 1)):
        raise ValueError("q grid must be a nonempty subset of (0, 1)")
    mus = np.array([_mu_of_q(params, n, float(q)) for q in qs])
    best = int(np.argmax(mus))
    q_star, mu_star = float(qs[best]), float(mus[best])
    if refine and 0 < best < qs.size - 1:
        res = optimize.minimize_scalar(
            lambda q: -_mu_of_q(params, n, q),
            bracket=(qs[best - 1], qs[best], qs[best + 1]),
            method="golden",
            tol=1e-10,
        )
        if -res.fun >= mu_star:
            q_star, mu_star = float(res.x), float(-res.fun)
    return ThroughputCurve(q=qs, mu=mus, q_star=q_star, mu_star=mu_star)


def aggregate_vs_n(
    params: SymmetricLinkParams, q: float, q0: float, n_max: int
) -> list[tuple[int, float | None]]:
    """Aggregate throughput for n = 1..n_max; ``None`` where the queue is unstable."""
    out = []
    for n in range(1, n_max + 1):
        s = SymmetricScenario(params, n, q, q0)
        if characterize_queue_n(s).stable:
            out.append((n, throughput_n(s).aggregate))
        else:
            out.append((n, None))
    return out


def optimal_user_count(
    params: SymmetricLinkParams, q: float, q0: float, n_max: int
) -> tuple[int, float]:
    """User count maximizing aggregate throughput among stable n; ties go to smaller n."""
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    best: tuple[int, float] | None = None
    for n, agg in aggregate_vs_n(params, q, q0, n_max):
        if agg is not None and (best is None or agg > best[1]):
            best = (n, agg)
    if best is None:
        raise UnstableQueueError(
            q0,
            stability_threshold_n(params, 1, q),
            f"relay queue unstable for every n in 1..{n_max} at q0={q0}",
        )
    return best
