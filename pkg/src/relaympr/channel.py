"""Link success probabilities under Rayleigh fading with an SINR capture receiver.

Node labels: ``RELAY`` (0), users ``1..n`` and the destination ``DEST``.
The fading factor on link (i, j) is exponential with mean ``v(i, j)``, so the
received power is ``A(i, j) * g(i, j)`` with ``g(i, j) = P_tx(i) * r(i, j)**-alpha``.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Union

from .errors import GeometryError

RELAY = 0
DEST = "d"

NodeId = Union[int, str]

# Numerical setup used throughout the evaluation section of the source model.
BASELINE = {
    "r_user_dest": 130.0,
    "r_user_relay": 60.0,
    "r_relay_dest": 80.0,
    "ptx_user": 1e-3,
    "ptx_relay": 1e-2,
    "eta": 1e-11,
    "alpha": 4.0,
    "v": 1.0,
}


def _check_node(node: NodeId) -> None:
    if node == DEST:
        return
    if not isinstance(node, int) or isinstance(node, bool) or node < 0:
        raise GeometryError(f"invalid node id {node!r}")


@dataclass(frozen=True)
class NetworkGeometry:
    """Distances, powers and receiver parameters for a relay network.

    ``distance`` and ``fading_mean`` are keyed by ordered links ``(tx, rx)``;
    links absent from ``fading_mean`` use a mean of 1. ``noise`` and
    ``threshold`` are keyed by receiver (``RELAY`` or ``DEST``).
    """

    distance: Mapping[tuple[NodeId, NodeId], float]
    tx_power: Mapping[NodeId, float]
    noise: Mapping[NodeId, float]
    threshold: Mapping[NodeId, float]
    alpha: float = 4.0
    fading_mean: Mapping[tuple[NodeId, NodeId], float] = field(default_factory=dict)

    def __post_init__(self):
        if DEST in self.tx_power:
            raise GeometryError("the destination never transmits")
        for node, p in self.tx_power.items():
            _check_node(node)
            if not p > 0:
                raise GeometryError(f"transmit power of node {node!r} must be positive, got {p}")
        for (i, j), r in self.distance.items():
            _check_node(i)
            _check_node(j)
            if i == j:
                raise GeometryError(f"self link ({i!r}, {j!r})")
            if i not in self.tx_power:
                raise GeometryError(f"link ({i!r}, {j!r}) has no transmit power for {i!r}")
            if j not in self.noise or j not in self.threshold:
                raise GeometryError(f"receiver {j!r} lacks noise power or threshold")
            if not r > 0:
                raise GeometryError(f"distance on link ({i!r}, {j!r}) must be positive, got {r}")
        for j, eta in self.noise.items():
            if not eta > 0:
                raise GeometryError(f"noise power at {j!r} must be positive, got {eta}")
        for j, gamma in self.threshold.items():
            if not gamma >= 0:
                raise GeometryError(f"SINR threshold at {j!r} must be >= 0, got {gamma}")
        for link, v in self.fading_mean.items():
            if link not in self.distance:
                raise GeometryError(f"fading mean given for unknown link {link!r}")
            if not v > 0:
                raise GeometryError(f"fading mean on link {link!r} must be positive, got {v}")
        if not 2.0 <= self.alpha <= 4.0:
            warnings.warn(
                f"path-loss exponent {self.alpha} outside the usual range [2, 4]",
                stacklevel=3,
            )

    @property
    def users(self) -> list[int]:
        return sorted(k for k in self.tx_power if k != RELAY)

    @property
    def n_users(self) -> int:
        return len(self.users)

    def has_link(self, i: NodeId, j: NodeId) -> bool:
        return (i, j) in self.distance

    def v(self, i: NodeId, j: NodeId) -> float:
        return self.fading_mean.get((i, j), 1.0)

    def mean_received_power(self, i: NodeId, j: NodeId) -> float:
        """v(i, j) * g(i, j): the mean received power on the link."""
        return self.v(i, j) * received_power_factor(self, i, j)


def star_geometry(
    n: int,
    *,
    gamma: float = 0.5,
    gamma_relay: float | None = None,
    gamma_dest: float | None = None,
    r_user_dest: float = BASELINE["r_user_dest"],
    r_user_relay: float = BASELINE["r_user_relay"],
    r_relay_dest: float = BASELINE["r_relay_dest"],
    ptx_user: float = BASELINE["ptx_user"],
    ptx_relay: float = BASELINE["ptx_relay"],
    eta: float = BASELINE["eta"],
    alpha: float = BASELINE["alpha"],
    v: float = BASELINE["v"],
) -> NetworkGeometry:
    """Build ``n`` identical users, one relay and the destination.

    Defaults reproduce the baseline evaluation setup (distances in meters,
    powers in watts). ``gamma`` applies to both receivers unless overridden.
    """
    if n < 1:
        raise GeometryError(f"need at least one user, got n={n}")
    g_relay = gamma if gamma_relay is None else gamma_relay
    g_dest = gamma if gamma_dest is None else gamma_dest
    distance: dict[tuple[NodeId, NodeId], float] = {(RELAY, DEST): r_relay_dest}
    tx_power: dict[NodeId, float] = {RELAY: ptx_relay}
    for u in range(1, n + 1):
        distance[(u, RELAY)] = r_user_relay
        distance[(u, DEST)] = r_user_dest
        tx_power[u] = ptx_user
    return NetworkGeometry(
        distance=distance,
        tx_power=tx_power,
        noise={RELAY: eta, DEST: eta},
        threshold={RELAY: g_relay, DEST: g_dest},
        alpha=alpha,
        fading_mean={link: v for link in distance} if v != 1.0 else {},
    )


def received_power_factor(geometry: NetworkGeometry, i: NodeId, j: NodeId) -> float:
    """g(i, j) = P_tx(i) * r(i, j) ** -alpha, in watts."""
    try:
        r = geometry.distance[(i, j)]
    except KeyError:
        raise GeometryError(f"unknown link ({i!r}, {j!r})") from None
    return geometry.tx_power[i] * r ** (-geometry.alpha)


def log_success_probability(
    geometry: NetworkGeometry, i: NodeId, j: NodeId, transmitters: Iterable[NodeId]
) -> float:
    transmitters = set(transmitters)
    if i not in transmitters:
        raise ValueError(f"node {i!r} is not in the transmitter set")
    if j in transmitters:
        raise ValueError(f"receiver {j!r} cannot transmit in the same slot")
    gamma = geometry.threshold[j]
    if gamma == 0:
        return 0.0
    signal = geometry.mean_received_power(i, j)
    log_p = -gamma * geometry.noise[j] / signal
    for k in transmitters:
        if k == i:
            continue
        log_p -= math.log1p(gamma * geometry.mean_received_power(k, j) / signal)
    return log_p


def success_probability(
    geometry: NetworkGeometry, i: NodeId, j: NodeId, transmitters: Iterable[NodeId]
) -> float:
    """Probability that j decodes i while every node in ``transmitters`` is active.

    Closed form for exponential fading: a noise term
    ``exp(-gamma_j eta_j / (v g))`` times one factor
    ``1 / (1 + gamma_j * v_k g_k / (v_i g_i))`` per interferer.
    """
    return min(1.0, max(0.0, math.exp(log_success_probability(geometry, i, j, transmitters))))


class LinkKind(enum.Enum):
    USER_RELAY = "user->relay"
    USER_DEST = "user->dest"
    RELAY_DEST = "relay->dest"


@dataclass(frozen=True)
class SymmetricLinkParams:
    """Base success probabilities of a symmetric network.

    ``p_relay``, ``p_dest`` and ``p_relay_dest`` are the single-transmitter
    success probabilities of user->relay, user->destination and
    relay->destination. ``beta`` is the relay/user mean received power ratio at
    the destination. With ``relay_threshold_factor`` the relay's interference
    on a user's packet at the destination uses the relay threshold instead of
    the destination one (the two agree when both thresholds are equal).
    """

    p_relay: float
    p_dest: float
    p_relay_dest: float
    gamma_relay: float
    gamma_dest: float
    beta: float
    relay_threshold_factor: bool = False

    def __post_init__(self):
        for name in ("p_relay", "p_dest", "p_relay_dest"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if self.gamma_relay < 0 or self.gamma_dest < 0:
            raise ValueError("SINR thresholds must be non-negative")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.beta <= 1:
            warnings.warn(
                f"beta={self.beta:.4g} <= 1: relay->destination link is not stronger "
                "than user->destination, the relay is expected to hurt throughput",
                stacklevel=3,
            )

    def user_relay(self, i: int) -> float:
        """User -> relay success with ``i`` users transmitting."""
        if i < 1:
            raise ValueError(f"user link needs at least one transmitting user, got i={i}")
        return self.p_relay * (1.0 + self.gamma_relay) ** -(i - 1)

    def user_dest(self, i: int, relay_active: bool = False) -> float:
        """User -> destination success with ``i`` users transmitting."""
        if i < 1:
            raise ValueError(f"user link needs at least one transmitting user, got i={i}")
        p = self.p_dest * (1.0 + self.gamma_dest) ** -(i - 1)
        if relay_active:
            gamma = self.gamma_relay if self.relay_threshold_factor else self.gamma_dest
            p /= 1.0 + self.beta * gamma
        return p

    def relay_dest(self, i: int) -> float:
        """Relay -> destination success with ``i`` users transmitting."""
        if i < 0:
            raise ValueError(f"negative user count {i}")
        return self.p_relay_dest * (1.0 + self.gamma_dest / self.beta) ** -i


def symmetric_success(
    params: SymmetricLinkParams, kind: LinkKind, i: int, relay_active: bool = False
) -> float:
    if kind is LinkKind.USER_RELAY:
        return params.user_relay(i)
    if kind is LinkKind.USER_DEST:
        return params.user_dest(i, relay_active)
    return params.relay_dest(i)


def _assert_same(geometry: NetworkGeometry, links: list[tuple[NodeId, NodeId]], rtol: float) -> None:
    ref = geometry.mean_received_power(*links[0])
    for link in links[1:]:
        val = geometry.mean_received_power(*link)
        if abs(val - ref) > rtol * abs(ref):
            raise GeometryError(
                f"geometry is not symmetric: link {link!r} has mean received power "
                f"{val:.6e} W, link {links[0]!r} has {ref:.6e} W"
            )


def symmetric_link_params(
    geometry: NetworkGeometry, *, relay_threshold_factor: bool = False, rtol: float = 1e-12
) -> SymmetricLinkParams:
    """Reduce a symmetric geometry to its base success probabilities."""
    users = geometry.users
    if not users:
        raise GeometryError("geometry has no users")
    for u in users:
        for link in ((u, RELAY), (u, DEST)):
            if not geometry.has_link(*link):
                raise GeometryError(f"missing link {link!r}")
    if not geometry.has_link(RELAY, DEST):
        raise GeometryError("missing relay->destination link")
    _assert_same(geometry, [(u, RELAY) for u in users], rtol)
    _assert_same(geometry, [(u, DEST) for u in users], rtol)
    u = users[0]
    return SymmetricLinkParams(
        p_relay=success_probability(geometry, u, RELAY, {u}),
        p_dest=success_probability(geometry, u, DEST, {u}),
        p_relay_dest=success_probability(geometry, RELAY, DEST, {RELAY}),
        gamma_relay=geometry.threshold[RELAY],
        gamma_dest=geometry.threshold[DEST],
        beta=geometry.mean_received_power(RELAY, DEST) / geometry.mean_received_power(u, DEST),
        relay_threshold_factor=relay_threshold_factor,
    )
