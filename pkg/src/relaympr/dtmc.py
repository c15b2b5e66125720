"""Lower-Hessenberg queue chains: transform-based closed forms and a truncated numeric oracle.

State ``i`` is the relay queue length at a slot boundary. From the empty
state the queue jumps to ``k`` with probability ``a[k]``; from a nonempty
state ``i`` it moves to ``i - 1 + k`` with probability ``b[k]``, so ``b[0]``
is the departure probability and ``b[k + 1]`` is a batch of ``k`` arrivals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ChainError, TruncationError
from .results import DIVERGED, ArrivalProbabilities, MaybeFloat

ROW_SUM_TOL = 1e-12
DEFAULT_TAIL_BOUND = 1e-10


@dataclass(frozen=True)
class HessenbergChain:
    a: tuple[float, ...]
    b: tuple[float, ...]

    def __post_init__(self):
        if len(self.a) < 1 or len(self.b) < 2:
            raise ChainError("need a_0 and at least b_0, b_1")
        for name, row in (("a", self.a), ("b", self.b)):
            if any(x < 0 for x in row):
                raise ChainError(f"negative entry in {name}: {row}")
            if abs(math.fsum(row) - 1.0) > ROW_SUM_TOL:
                raise ChainError(f"{name} sums to {math.fsum(row)!r}, expected 1")

    @property
    def m(self) -> int:
        """Largest batch size."""
        return max(len(self.a) - 1, len(self.b) - 2)

    @property
    def mu(self) -> float:
        return self.b[0]

    @property
    def arrival_rate_empty(self) -> float:
        return math.fsum(k * x for k, x in enumerate(self.a))

    @property
    def arrival_rate_busy(self) -> float:
        return math.fsum((k - 1) * x for k, x in enumerate(self.b) if k >= 2)

    @property
    def stable(self) -> bool:
        if self.arrival_rate_empty == 0:
            return True
        return self.arrival_rate_busy < self.mu

    def matrix(self, q_max: int) -> sp.csr_matrix:
        """Row-stochastic transition matrix on states ``0..q_max``; overflow lands in ``q_max``."""
        n = q_max + 1
        rows, cols, vals = [], [], []
        for k, x in enumerate(self.a):
            if x:
                rows.append(np.array([0]))
                cols.append(np.array([min(k, q_max)]))
                vals.append(np.array([x]))
        src = np.arange(1, n)
        for k, x in enumerate(self.b):
            if x:
                rows.append(src)
                cols.append(np.minimum(src - 1 + k, q_max))
                vals.append(np.full(src.size, x))
        return sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
        ).tocsr()


def build_chain(arrivals: ArrivalProbabilities, mu: float) -> HessenbergChain:
    """Assemble the chain from the empty-queue batch law and the service rate."""
    p0 = arrivals.p
    p1 = arrivals.p1
    a0 = 1.0 - math.fsum(p0)
    b1 = 1.0 - mu - math.fsum(p1)
    if b1 < -ROW_SUM_TOL:
        raise ChainError(
            f"service rate {mu} plus busy-queue arrival mass {math.fsum(p1)} exceeds 1"
        )
    a = (max(a0, 0.0), *p0)
    b = (mu, max(b1, 0.0), *p1)
    return HessenbergChain(a=a, b=b)


@dataclass(frozen=True)
class SteadyState:
    s0: MaybeFloat
    mean: MaybeFloat
    tail_mass: float
    method: Literal["closed_form", "truncated_numeric"]
    distribution: Optional[np.ndarray] = field(default=None, compare=False, repr=False)


def _laurent_derivative(coeffs: dict[int, float], order: int) -> float:
    """``order``-th derivative at z = 1 of sum(c * z**power)."""
    total = 0.0
    for power, c in coeffs.items():
        falling = 1.0
        for t in range(order):
            falling *= power - t
        total += c * falling
    return total


def steady_state_closed_form(chain: HessenbergChain) -> SteadyState:
    """Empty probability and mean queue length from the z-transform of the chain.

    Uses A(z) = sum a_i z^-i, B(z) = sum b_i z^-i and
    S(z) = s0 (z^-1 A(z) - B(z)) / (z^-1 - B(z)). The mean is -S'(1), taken as
    the double l'Hopital limit s0 K''(1) / L''(1) with K = N'D - ND', L = D^2.
    """
    a_poly = {-i: x for i, x in enumerate(chain.a)}
    b_poly = {-i: x for i, x in enumerate(chain.b)}
    d_a = _laurent_derivative(a_poly, 1)
    d_b = _laurent_derivative(b_poly, 1)

    if d_a == 0:
        # no arrivals ever reach an empty queue
        return SteadyState(s0=1.0, mean=0.0, tail_mass=0.0, method="closed_form")
    if not 1.0 + d_b > 0:
        return SteadyState(s0=DIVERGED, mean=DIVERGED, tail_mass=0.0, method="closed_form")

    s0 = (1.0 + d_b) / (1.0 + d_b - d_a)

    # N(z) = z^-1 A(z) - B(z), D(z) = z^-1 - B(z)
    num = {p - 1: x for p, x in a_poly.items()}
    for p, x in b_poly.items():
        num[p] = num.get(p, 0.0) - x
    den = {p: -x for p, x in b_poly.items()}
    den[-1] = den.get(-1, 0.0) + 1.0

    n1, n2 = _laurent_derivative(num, 1), _laurent_derivative(num, 2)
    d1, d2 = _laurent_derivative(den, 1), _laurent_derivative(den, 2)
    k2 = n2 * d1 - n1 * d2
    l2 = 2.0 * d1 * d1
    mean = -s0 * k2 / l2
    return SteadyState(s0=s0, mean=mean, tail_mass=0.0, method="closed_form")


def steady_state_truncated(
    chain: HessenbergChain, q_max: int, tail_bound: float = DEFAULT_TAIL_BOUND
) -> SteadyState:
    """Solve pi P = pi on states ``0..q_max`` by sparse LU.

    pi_0 is pinned to 1, its balance equation dropped, and the result
    normalized afterwards. The tail mass is the probability of the states
    from which a single slot can overflow the truncation; results above ``tail_bound`` raise
    :class:`TruncationError` so the caller can retry with a larger ``q_max``.
    """
    if q_max < chain.m + 1:
        raise ValueError(f"q_max={q_max} too small for batch size {chain.m}")
    n = q_max + 1
    # pin pi_0 = 1 and drop its balance equation; the rest stays banded
    lhs = (chain.matrix(q_max).T - sp.identity(n, format="csr")).tocsc()
    rest = spla.spsolve(lhs[1:, 1:], -lhs[1:, 0].toarray().ravel())
    pi = np.concatenate(([1.0], np.atleast_1d(rest)))

    if pi.min() < -1e-12 * pi.max():
        raise ChainError(f"truncated solve produced negative mass {pi.min():.3e}")
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()

    tail_mass = float(pi[n - chain.m:].sum()) if chain.m else 0.0
    if tail_mass >= tail_bound:
        raise TruncationError(q_max, tail_mass, tail_bound)
    mean = float(np.dot(np.arange(n), pi))
    return SteadyState(
        s0=float(pi[0]), mean=mean, tail_mass=tail_mass, method="truncated_numeric", distribution=pi
    )


def steady_state_oracle(
    chain: HessenbergChain,
    q_max: int | None = None,
    tail_bound: float = DEFAULT_TAIL_BOUND,
    q_max_limit: int = 1 << 20,
) -> SteadyState:
    """Truncated solve, doubling ``q_max`` until the tail mass is below ``tail_bound``."""
    if not chain.stable:
        raise ChainError("chain is not positive recurrent; no stationary distribution")
    if q_max is None:
        rho = chain.arrival_rate_busy / chain.mu if chain.mu > 0 else 0.0
        q_max = int(max(64, 10 * (chain.m + 1), 10.0 / (1.0 - rho)))
        q_max = min(q_max, q_max_limit)
    while True:
        try:
            return steady_state_truncated(chain, q_max, tail_bound)
        except TruncationError:
            if 2 * q_max > q_max_limit:
                raise
            q_max *= 2
