"""Slot-level Monte Carlo simulation of the relay-assisted random access protocol.

Each slot: users transmit independently with their own probability; the relay
transmits with probability q0 when its queue is nonempty. Fading on every
active link is redrawn per slot (exponential power gain), and each receiver
decodes every transmitter whose SINR clears its threshold. A user packet the
destination misses but the silent relay decodes joins the relay queue; a
packet missed by both is dropped (sources are saturated).

Fading, decoding and user activity are vectorized per chunk of slots; only
the queue recursion runs slot by slot (compiled with numba).
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

import numba
import numpy as np

from .channel import DEST, RELAY, NetworkGeometry

CHUNK = 1 << 16

# Per-slot trace record. ``active``: bit 0 relay transmitting, bit i user i.
# ``decoded``: bits 0..31 packets decoded at the destination (bit 0 = relay's),
# bits 32..63 user packets decoded at the (silent) relay, bit 32 + i for user i.
TRACE_DTYPE = np.dtype(
    [("slot", "<u8"), ("active", "<u8"), ("decoded", "<u8"), ("queue", "<u8")]
)
TRACE_MAX_USERS = 31


@dataclass(frozen=True)
class SimConfig:
    geometry: NetworkGeometry
    q: tuple[float, ...]
    q0: float
    slots: int = 1_000_000
    warmup: Optional[int] = None
    seed: int = 0
    replications: int = 10
    snapshot_every: Optional[int] = None
    trace_dir: Optional[Path] = None

    def __post_init__(self):
        users = self.geometry.users
        if users != list(range(1, len(users) + 1)):
            raise ValueError(f"users must be labelled 1..n, got {users}")
        if len(self.q) != len(users):
            raise ValueError(f"need one transmit probability per user ({len(users)}), got {len(self.q)}")
        for link in [(RELAY, DEST)] + [(u, x) for u in users for x in (RELAY, DEST)]:
            if not self.geometry.has_link(*link):
                raise ValueError(f"geometry lacks link {link!r}")
        if any(not 0.0 <= p <= 1.0 for p in (*self.q, self.q0)):
            raise ValueError("transmit probabilities must lie in [0, 1]")
        if self.slots < 1 or self.replications < 1:
            raise ValueError("slots and replications must be >= 1")
        if not 0 <= self.effective_warmup < self.slots:
            raise ValueError(f"need 0 <= warmup < slots, got warmup={self.warmup}, slots={self.slots}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.trace_dir is not None and len(users) > TRACE_MAX_USERS:
            raise ValueError(f"tracing supports at most {TRACE_MAX_USERS} users")

    @property
    def n(self) -> int:
        return len(self.q)

    @property
    def effective_warmup(self) -> int:
        return self.slots // 10 if self.warmup is None else self.warmup


@dataclass
class ReplicationCounters:
    """Raw integer counters for one replication (post-warmup slots only)."""

    slots: int = 0
    empty_slots: int = 0
    queue_sum: int = 0
    arrivals: int = 0
    arrivals_when_empty: int = 0
    departures: int = 0
    relay_transmissions: int = 0
    half_duplex_violations: int = 0
    attempts: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    direct: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    enqueued: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    dropped: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    batch_sizes_when_empty: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    final_queue: int = 0
    snapshots: Optional[np.ndarray] = None

    @property
    def delivered(self) -> np.ndarray:
        return self.direct + self.enqueued

    @property
    def busy_slots(self) -> int:
        return self.slots - self.empty_slots

    def estimates(self) -> dict[str, float]:
        busy = self.busy_slots
        per_user = self.delivered / self.slots
        return {
            "lambda0": self.arrivals_when_empty / self.empty_slots if self.empty_slots else math.nan,
            "lambda1": (self.arrivals - self.arrivals_when_empty) / busy if busy else math.nan,
            "lam": self.arrivals / self.slots,
            "mu": self.departures / busy if busy else math.nan,
            "prob_empty": self.empty_slots / self.slots,
            "mean_queue": self.queue_sum / self.slots,
            "per_user": float(per_user.mean()),
            "aggregate": float(per_user.sum()),
        }


@dataclass(frozen=True)
class Estimate:
    mean: float
    se: float

    def within(self, value: float, k: float = 4.0) -> bool:
        return abs(self.mean - value) <= k * self.se


@dataclass(frozen=True)
class SimulationStats:
    lambda0: Estimate
    lambda1: Estimate
    lam: Estimate
    mu: Estimate
    prob_empty: Estimate
    mean_queue: Estimate
    per_user: Estimate
    aggregate: Estimate
    user_throughput: tuple[Estimate, ...]
    replications: tuple[ReplicationCounters, ...]


def _decodes(power: np.ndarray, interference_total: np.ndarray, gamma: float, eta: float) -> np.ndarray:
    """SINR >= gamma for every entry, where total includes the entry's own power."""
    return power * (1.0 + gamma) >= gamma * (eta + interference_total)


def success_draw(
    geometry: NetworkGeometry,
    transmitters: Sequence,
    receiver,
    rng: np.random.Generator,
    draws: int = 1,
) -> np.ndarray:
    """Draw fading for ``draws`` slots and return which transmitters the receiver decodes.

    Returns a boolean array of shape ``(draws, len(transmitters))``; column
    order follows ``transmitters``. Several columns may be true in one row.
    """
    transmitters = list(transmitters)
    if receiver in transmitters:
        raise ValueError(f"receiver {receiver!r} is transmitting")
    if not transmitters:
        return np.zeros((draws, 0), dtype=bool)
    mean_power = np.array([geometry.mean_received_power(i, receiver) for i in transmitters])
    power = rng.standard_exponential((draws, len(transmitters))) * mean_power
    total = power.sum(axis=1, keepdims=True)
    return _decodes(power, total, geometry.threshold[receiver], geometry.noise[receiver])


def _replication_rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, rep])))


# Indices into the scalar accumulator of the slot kernel.
_SLOTS, _EMPTY, _QSUM, _ARR, _ARR_EMPTY, _DEP, _RELAY_TX, _HD = range(8)


@numba.njit(cache=True)
def _slot_kernel(
    tx, coin, expo, start, warmup, queue,
    g_dest, g_relay, g_rd, gam_d, eta_d, gam_r, eta_r,
    acc, attempts, direct, enqueued, dropped, batch_hist,
    trace, q_start, active, decoded,
):
    size, n = tx.shape
    p_dest = np.empty(n)
    p_relay = np.empty(n)
    ok_dest = np.zeros(n, dtype=np.bool_)
    ptr = 0
    for t in range(size):
        # fixed draw order: per active user (dest, relay), then the relay link on a coin
        ntx = 0
        tot_d = 0.0
        tot_r = 0.0
        for i in range(n):
            if tx[t, i]:
                p_dest[i] = expo[ptr] * g_dest[i]
                p_relay[i] = expo[ptr + 1] * g_relay[i]
                ptr += 2
                tot_d += p_dest[i]
                tot_r += p_relay[i]
                ntx += 1
        p_rd = 0.0
        if coin[t]:
            p_rd = expo[ptr] * g_rd
            ptr += 1

        q0_slot = queue
        relay_tx = queue > 0 and coin[t]
        if relay_tx:
            tot_d += p_rd
        relay_ok = relay_tx and p_rd * (1.0 + gam_d) >= gam_d * (eta_d + tot_d)

        arrivals = 0
        dec_bits = np.uint64(0)
        act_bits = np.uint64(0)
        rel_bits = np.uint64(0)
        for i in range(n):
            ok_dest[i] = False
            if not tx[t, i]:
                continue
            bit = np.uint64(1) << np.uint64(i + 1)
            act_bits |= bit
            ok_dest[i] = p_dest[i] * (1.0 + gam_d) >= gam_d * (eta_d + tot_d)
            if ok_dest[i]:
                dec_bits |= bit
            if not relay_tx:
                if p_relay[i] * (1.0 + gam_r) >= gam_r * (eta_r + tot_r):
                    rel_bits |= bit
                    if not ok_dest[i]:
                        arrivals += 1

        if relay_tx:
            act_bits |= np.uint64(1)
            if relay_ok:
                dec_bits |= np.uint64(1)
                queue -= 1
        else:
            queue += arrivals

        if trace:
            q_start[t] = q0_slot
            active[t] = act_bits
            decoded[t] = dec_bits | (rel_bits << np.uint64(32))

        if start + t < warmup:
            continue
        acc[_SLOTS] += 1
        acc[_QSUM] += q0_slot
        acc[_ARR] += arrivals
        if q0_slot == 0:
            acc[_EMPTY] += 1
            acc[_ARR_EMPTY] += arrivals
            batch_hist[arrivals] += 1
        if relay_tx:
            acc[_RELAY_TX] += 1
            if relay_ok:
                acc[_DEP] += 1
            if arrivals > 0:
                acc[_HD] += 1
        for i in range(n):
            if not tx[t, i]:
                continue
            attempts[i] += 1
            if ok_dest[i]:
                direct[i] += 1
            elif not relay_tx and (rel_bits >> np.uint64(i + 1)) & np.uint64(1):
                enqueued[i] += 1
            else:
                dropped[i] += 1
    return queue, ptr


def run_replication(config: SimConfig, rep: int) -> ReplicationCounters:
    g = config.geometry
    n = config.n
    users = range(1, n + 1)
    q = np.asarray(config.q)
    g_dest = np.array([g.mean_received_power(u, DEST) for u in users])
    g_relay = np.array([g.mean_received_power(u, RELAY) for u in users])
    channel = (
        g_dest, g_relay, g.mean_received_power(RELAY, DEST),
        g.threshold[DEST], g.noise[DEST], g.threshold[RELAY], g.noise[RELAY],
    )
    rng = _replication_rng(config.seed, rep)
    acc = np.zeros(8, np.int64)
    c = ReplicationCounters(
        attempts=np.zeros(n, np.int64),
        direct=np.zeros(n, np.int64),
        enqueued=np.zeros(n, np.int64),
        dropped=np.zeros(n, np.int64),
        batch_sizes_when_empty=np.zeros(n + 1, np.int64),
    )
    tracing = config.trace_dir is not None
    every = config.snapshot_every
    snaps = []
    trace_file = None
    if tracing:
        Path(config.trace_dir).mkdir(parents=True, exist_ok=True)
        trace_file = open(Path(config.trace_dir) / f"rep{rep:03d}.bin", "wb")
    keep_states = tracing or bool(every)

    queue = 0
    try:
        for start in range(0, config.slots, CHUNK):
            size = min(CHUNK, config.slots - start)
            tx = rng.random((size, n)) < q
            coin = rng.random(size) < config.q0
            need = 2 * np.count_nonzero(tx) + np.count_nonzero(coin)
            expo = rng.standard_exponential(need)
            q_start = np.zeros(size if keep_states else 0, np.int64)
            active = np.zeros(size if tracing else 0, np.uint64)
            decoded = np.zeros(size if tracing else 0, np.uint64)
            queue, used = _slot_kernel(
                tx, coin, expo, start, config.effective_warmup, queue, *channel,
                acc, c.attempts, c.direct, c.enqueued, c.dropped, c.batch_sizes_when_empty,
                keep_states, q_start, active, decoded,
            )
            assert used == need
            if tracing:
                rec = np.empty(size, dtype=TRACE_DTYPE)
                rec["slot"] = np.arange(start, start + size, dtype=np.uint64)
                rec["active"] = active
                rec["decoded"] = decoded
                rec["queue"] = q_start
                rec.tofile(trace_file)
            if every:
                first = (-start) % every
                snaps.append(q_start[first::every])
    finally:
        if trace_file is not None:
            trace_file.close()

    c.slots, c.empty_slots, c.queue_sum, c.arrivals = (int(x) for x in acc[:4])
    c.arrivals_when_empty, c.departures = int(acc[_ARR_EMPTY]), int(acc[_DEP])
    c.relay_transmissions, c.half_duplex_violations = int(acc[_RELAY_TX]), int(acc[_HD])
    c.final_queue = int(queue)
    if snaps:
        c.snapshots = np.concatenate(snaps)
    return c


def _estimate(values: Sequence[float]) -> Estimate:
    arr = np.asarray(values, dtype=float)
    se = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else math.nan
    return Estimate(float(arr.mean()), se)


def summarize(counters: Sequence[ReplicationCounters]) -> SimulationStats:
    per_rep = [c.estimates() for c in counters]
    names = [f.name for f in fields(SimulationStats) if f.name not in ("user_throughput", "replications")]
    est = {name: _estimate([r[name] for r in per_rep]) for name in names}
    users = np.array([c.delivered / c.slots for c in counters])
    return SimulationStats(
        **est,
        user_throughput=tuple(_estimate(users[:, i]) for i in range(users.shape[1])),
        replications=tuple(counters),
    )


def run(config: SimConfig, workers: int = 1) -> SimulationStats:
    """Run all replications and merge them in replication order."""
    reps = range(config.replications)
    if workers > 1 and config.replications > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            counters = list(pool.map(run_replication, [config] * config.replications, reps))
    else:
        counters = [run_replication(config, r) for r in reps]
    return summarize(counters)


def read_trace(path: str | Path) -> np.ndarray:
    return np.fromfile(path, dtype=TRACE_DTYPE)
