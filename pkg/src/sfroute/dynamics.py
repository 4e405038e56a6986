"""Discrete-time packet dynamics.

One step is generation followed by delivery.  Node ``i`` creates ``lam*k_i``
packets and forwards at most ``1 + beta*k_i`` of them.  Fractional parts of
both are realized as a single Bernoulli draw per node per step.  Queues are
FIFO.  A packet that entered a queue during the current step is ineligible
until the next one, so a packet makes at most one hop per step.

Packets live in a recycled slot pool; each node queue is a singly linked
list threaded through that pool, giving O(1) enqueue and dequeue inside the
numba kernels.
"""

from __future__ import annotations

import csv
import io
import math
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, TextIO

import numba
import numpy as np

from .graph import Network, build_ba, make_rng
from .routing import Strategy, _k_select

__all__ = [
    "Packet",
    "SimConfig",
    "SimState",
    "StepResult",
    "MetricSeries",
    "DegreeProfile",
    "generate",
    "deliver_step",
    "run",
    "degree_profile",
    "network_for",
]

# slot field layout in the int64 pool matrix
_NEXT, _DEST, _BIRTH, _ARRIVAL, _ID, _ORIGIN, _HOPS = range(7)
_NFIELDS = 7


@dataclass(frozen=True)
class Packet:
    id: int
    birth_step: int
    destination: int
    arrival_step: int
    origin: int
    hops: int = 0


@dataclass(frozen=True)
class SimConfig:
    n: int = 1000
    m: int = 3
    m0: int = 3
    lam: float = 0.02
    beta: float = 0.07
    strategy: Strategy = field(default_factory=Strategy.adaptive)
    horizon: int = 3000
    transient: int = 600
    seed: int = 0
    t_window: int = 10

    def __post_init__(self):
        if self.m < 1 or self.m > self.m0 or self.n <= self.m0:
            raise ValueError(f"need 1 <= m <= m0 < n, got n={self.n} m={self.m} m0={self.m0}")
        for name in ("lam", "beta"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")
        if self.horizon < 0 or self.transient < 0:
            raise ValueError("horizon and transient must be >= 0")
        # horizon == 0 is a legal no-op run; otherwise the transient must end inside it
        if self.horizon > 0 and self.transient >= self.horizon:
            raise ValueError(f"transient={self.transient} must be < horizon={self.horizon}")
        if self.t_window < 1:
            raise ValueError("t_window must be >= 1")
        if not isinstance(self.strategy, Strategy):
            raise TypeError("strategy must be a Strategy")

    def replace(self, **changes) -> "SimConfig":
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(changes)
        return SimConfig(**d)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["strategy"] = self.strategy.name
        d["h"] = self.strategy.h
        return d


@dataclass(frozen=True)
class StepResult:
    created: int
    delivered: int
    forwarded: int


# ---------------------------------------------------------------- kernels


@numba.njit(cache=True)
def _k_push(node, slot, pool, head, tail, qlen):
    pool[slot, _NEXT] = -1
    if qlen[node] == 0:
        head[node] = slot
    else:
        pool[tail[node], _NEXT] = slot
    tail[node] = slot
    qlen[node] += 1


@numba.njit(cache=True)
def _k_generate(t, lam, degree, pool, head, tail, qlen, free, counters, rng):
    """counters: [n_free, next_id]."""
    n = degree.shape[0]
    created = 0
    for i in range(n):
        x = lam * degree[i]
        c = int(math.floor(x))
        frac = x - c
        if frac > 0.0 and rng.random() < frac:
            c += 1
        for _ in range(c):
            dest = rng.integers(0, n - 1)
            if dest >= i:
                dest += 1
            counters[0] -= 1
            slot = free[counters[0]]
            pool[slot, _DEST] = dest
            pool[slot, _BIRTH] = t
            pool[slot, _ARRIVAL] = t
            pool[slot, _ID] = counters[1]
            pool[slot, _ORIGIN] = i
            pool[slot, _HOPS] = 0
            counters[1] += 1
            _k_push(i, slot, pool, head, tail, qlen)
            created += 1
    return created


@numba.njit(cache=True)
def _k_deliver(
    t, beta, kind, h, indptr, indices, degree, dist, nxt,
    pool, head, tail, qlen, free, counters, log, rng,
):
    """Returns (delivered, forwarded).  ``log`` rows: id, origin, dest, birth, T, hops."""
    n = degree.shape[0]
    order = rng.permutation(n)
    delivered = 0
    forwarded = 0
    for idx in range(n):
        i = order[idx]
        if qlen[i] == 0:
            continue
        x = beta * degree[i]
        cap = 1 + int(math.floor(x))
        frac = x - math.floor(x)
        if frac > 0.0 and rng.random() < frac:
            cap += 1
        for _ in range(cap):
            if qlen[i] == 0:
                break
            slot = head[i]
            # eligible packets form a FIFO prefix; the first fresh one ends it
            if pool[slot, _ARRIVAL] >= t:
                break
            head[i] = pool[slot, _NEXT]
            qlen[i] -= 1
            j = pool[slot, _DEST]
            pool[slot, _HOPS] += 1
            if dist[i, j] == 1:
                log[delivered, 0] = pool[slot, _ID]
                log[delivered, 1] = pool[slot, _ORIGIN]
                log[delivered, 2] = j
                log[delivered, 3] = pool[slot, _BIRTH]
                log[delivered, 4] = t - pool[slot, _BIRTH] + 1
                log[delivered, 5] = pool[slot, _HOPS]
                free[counters[0]] = slot
                counters[0] += 1
                delivered += 1
            else:
                nb = _k_select(kind, indptr, indices, dist, nxt, qlen, degree, i, j, beta, h, rng)
                pool[slot, _ARRIVAL] = t
                _k_push(nb, slot, pool, head, tail, qlen)
                forwarded += 1
    return delivered, forwarded


# ------------------------------------------------------------------ state


class SimState:
    """Per-node FIFO queues plus global packet accounting.

    ``step`` counts completed steps.  The step currently executing carries
    time index ``state.step``; packets born in it get that ``birth_step``.
    """

    def __init__(
        self,
        net: Network,
        lam: float,
        beta: float,
        strategy: Strategy,
        rng: int | np.random.Generator | None = None,
    ) -> None:
        self.net = net
        self.lam = float(lam)
        self.beta = float(beta)
        self.strategy = strategy
        self.rng = make_rng(rng)
        n = net.node_count
        self.step = 0
        self.total_created = 0
        self.total_delivered = 0
        self.head = np.full(n, -1, dtype=np.int64)
        self.tail = np.full(n, -1, dtype=np.int64)
        self.qlen = np.zeros(n, dtype=np.int64)
        self._pool = np.zeros((0, _NFIELDS), dtype=np.int64)
        self._free = np.zeros(0, dtype=np.int64)
        self._counters = np.zeros(2, dtype=np.int64)  # n_free, next_id
        self.set_rates(self.lam, self.beta)
        self._grow(max(1024, 4 * self._max_gen))
        # touch the tables once so the kernel sees plain arrays
        self._dist = net.dist
        self._nxt = net.next_hop

    def set_rates(self, lam: float, beta: float) -> None:
        self.lam = float(lam)
        self.beta = float(beta)
        deg = self.net.degree
        self._max_gen = int(np.ceil(self.lam * deg).sum())
        # one log row per possible dequeue this step
        self._log = np.zeros((int(len(deg) + np.ceil(self.beta * deg).sum()), 6), dtype=np.int64)
        self.last_deliveries = self._log[:0]

    # -- pool management

    def _grow(self, extra: int) -> None:
        old = len(self._pool)
        size = max(old + extra, 2 * old)
        pool = np.zeros((size, _NFIELDS), dtype=np.int64)
        pool[:old] = self._pool
        nfree = int(self._counters[0])
        free = np.empty(size, dtype=np.int64)
        free[:nfree] = self._free[:nfree]
        # pop order is from the end, so lower new slots come out first
        new = np.arange(size - 1, old - 1, -1, dtype=np.int64)
        free[nfree : nfree + len(new)] = new
        self._pool = pool
        self._free = free
        self._counters[0] = nfree + len(new)

    def _reserve(self, k: int) -> None:
        if self._counters[0] < k:
            self._grow(k)

    # -- views

    @property
    def queue_lengths(self) -> np.ndarray:
        return self.qlen

    @property
    def in_queues(self) -> int:
        return int(self.qlen.sum())

    def _packet(self, slot: int) -> Packet:
        r = self._pool[slot]
        return Packet(
            id=int(r[_ID]),
            birth_step=int(r[_BIRTH]),
            destination=int(r[_DEST]),
            arrival_step=int(r[_ARRIVAL]),
            origin=int(r[_ORIGIN]),
            hops=int(r[_HOPS]),
        )

    def queue(self, node: int) -> list[Packet]:
        out = []
        slot = self.head[node]
        for _ in range(self.qlen[node]):
            out.append(self._packet(slot))
            slot = self._pool[slot, _NEXT]
        return out

    def add_packet(self, node: int, destination: int, birth_step: int | None = None) -> int:
        """Enqueue a hand-made packet at ``node``; returns its id."""
        if destination == node:
            raise ValueError("packet destination must differ from its node")
        self._reserve(1)
        t = self.step if birth_step is None else int(birth_step)
        self._counters[0] -= 1
        slot = self._free[self._counters[0]]
        row = self._pool[slot]
        row[_DEST] = destination
        row[_BIRTH] = t
        row[_ARRIVAL] = t
        row[_ID] = self._counters[1]
        row[_ORIGIN] = node
        row[_HOPS] = 0
        self._counters[1] += 1
        _k_push(node, slot, self._pool, self.head, self.tail, self.qlen)
        self.total_created += 1
        return int(row[_ID])

    # -- dynamics

    def generate(self) -> int:
        self._reserve(self._max_gen)
        created = _k_generate(
            self.step, self.lam, self.net.degree, self._pool, self.head, self.tail,
            self.qlen, self._free, self._counters, self.rng,
        )
        self.total_created += created
        return created

    def deliver(self) -> tuple[int, int]:
        delivered, forwarded = _k_deliver(
            self.step, self.beta, int(self.strategy.kind), float(self.strategy.h),
            self.net.indptr, self.net.indices, self.net.degree, self._dist, self._nxt,
            self._pool, self.head, self.tail, self.qlen, self._free, self._counters,
            self._log, self.rng,
        )
        self.total_delivered += delivered
        self.last_deliveries = self._log[:delivered]
        return delivered, forwarded

    def advance(self) -> StepResult:
        created = self.generate()
        delivered, forwarded = self.deliver()
        self.step += 1
        return StepResult(created, delivered, forwarded)

    def check_conservation(self) -> bool:
        return self.total_created == self.total_delivered + self.in_queues


def generate(state: SimState, net: Network | None = None, lam: float | None = None) -> int:
    """Run the creation half of the current step."""
    if lam is not None and lam != state.lam:
        state.set_rates(lam, state.beta)
    return state.generate()


def deliver_step(state: SimState, net: Network | None = None, cfg: SimConfig | None = None) -> tuple[int, int]:
    """Run the forwarding half of the current step; returns (delivered, forwarded)."""
    return state.deliver()


# ---------------------------------------------------------------- metrics


@dataclass
class DegreeProfile:
    step: int
    degree: np.ndarray
    mean_queue: np.ndarray
    count_nodes: np.ndarray

    def as_dict(self) -> dict[int, float]:
        return {int(k): float(v) for k, v in zip(self.degree, self.mean_queue)}

    def rows(self) -> list[tuple]:
        return [
            (int(k), float(q), int(c), self.step)
            for k, q, c in zip(self.degree, self.mean_queue, self.count_nodes)
        ]


def degree_profile(state: SimState, net: Network | None = None) -> DegreeProfile:
    net = net or state.net
    deg = net.degree
    counts = np.bincount(deg)
    sums = np.bincount(deg, weights=state.qlen)
    ks = np.nonzero(counts)[0]
    return DegreeProfile(
        step=state.step,
        degree=ks,
        mean_queue=sums[ks] / counts[ks],
        count_nodes=counts[ks],
    )


SERIES_COLUMNS = ("step", "mean_packets", "mean_delivery_time", "created", "delivered")
PROFILE_COLUMNS = ("degree", "mean_queue", "count_nodes", "step")


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return "NaN" if math.isnan(x) else repr(float(x))
    return str(int(x))


@dataclass
class MetricSeries:
    step: np.ndarray
    mean_packets: np.ndarray
    mean_delivery_time: np.ndarray
    created: np.ndarray
    delivered: np.ndarray
    profiles: dict[int, DegreeProfile] = field(default_factory=dict)
    network: Network | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.step)

    def rows(self) -> Iterable[tuple]:
        return zip(self.step, self.mean_packets, self.mean_delivery_time, self.created, self.delivered)

    def write_csv(self, fh: TextIO) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SERIES_COLUMNS)
        for row in self.rows():
            w.writerow([_fmt(x) for x in row])

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()

    def write_profiles_csv(self, fh: TextIO) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PROFILE_COLUMNS)
        for s in sorted(self.profiles):
            for row in self.profiles[s].rows():
                w.writerow([_fmt(x) for x in row])


def _streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    graph_seq, dyn_seq = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(graph_seq), np.random.default_rng(dyn_seq)


def network_for(cfg: SimConfig) -> Network:
    """The network ``run(cfg)`` simulates on."""
    net = build_ba(cfg.n, cfg.m, cfg.m0, _streams(cfg.seed)[0])
    net.meta["seed"] = cfg.seed
    return net


def run(
    cfg: SimConfig,
    *,
    net: Network | None = None,
    snapshot_steps: Iterable[int] = (),
    on_step: Callable[[SimState, StepResult], None] | None = None,
) -> MetricSeries:
    """Build the network from ``cfg.seed`` (unless given) and simulate.

    The graph and the dynamics draw from independent children of the seed,
    so every run at a given seed shares one network whatever ``lam`` and
    ``beta`` are.
    """
    if net is None:
        net = network_for(cfg)
    state = SimState(net, cfg.lam, cfg.beta, cfg.strategy, _streams(cfg.seed)[1])

    h = cfg.horizon
    steps = np.arange(1, h + 1, dtype=np.int64)
    mean_packets = np.zeros(h)
    mean_T = np.full(h, np.nan)
    created = np.zeros(h, dtype=np.int64)
    delivered = np.zeros(h, dtype=np.int64)
    snaps = set(int(s) for s in snapshot_steps)
    profiles: dict[int, DegreeProfile] = {}
    if 0 in snaps:
        profiles[0] = degree_profile(state)

    window: deque[tuple[int, int]] = deque(maxlen=cfg.t_window)
    win_n = win_sum = 0
    n = net.node_count
    for t in range(h):
        res = state.advance()
        tsum = int(state.last_deliveries[:, 4].sum())
        if len(window) == window.maxlen:
            old_n, old_sum = window[0]
            win_n -= old_n
            win_sum -= old_sum
        window.append((res.delivered, tsum))
        win_n += res.delivered
        win_sum += tsum
        mean_packets[t] = state.in_queues / n
        if win_n:
            mean_T[t] = win_sum / win_n
        created[t] = res.created
        delivered[t] = res.delivered
        if state.step in snaps:
            profiles[state.step] = degree_profile(state)
        if on_step is not None:
            on_step(state, res)

    return MetricSeries(steps, mean_packets, mean_T, created, delivered, profiles, net)
