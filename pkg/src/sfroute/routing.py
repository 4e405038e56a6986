"""Neighbor selection: shortest path, Echenique, and projected waiting time.

All three strategies share one decision rule.  Deliver directly when the
destination is adjacent.  Otherwise take the neighbor with the lowest cost,
break ties by hop distance to the destination, and break any remaining tie
uniformly at random.

The numba kernels below are what the simulation engine calls.  The
Python-level ``cost_*`` and ``select_neighbor`` wrap the same kernels so
tests exercise the exact code path used during a run.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

from .graph import Network, make_rng

__all__ = [
    "Kind",
    "Strategy",
    "cost_adaptive",
    "cost_echenique",
    "cost_shortest_path",
    "select_neighbor",
]


class Kind(enum.IntEnum):
    SHORTEST_PATH = 0
    ECHENIQUE = 1
    ADAPTIVE = 2


_ALIASES = {
    "sp": Kind.SHORTEST_PATH,
    "shortest": Kind.SHORTEST_PATH,
    "shortest_path": Kind.SHORTEST_PATH,
    "echenique": Kind.ECHENIQUE,
    "ech": Kind.ECHENIQUE,
    "adaptive": Kind.ADAPTIVE,
    "projected": Kind.ADAPTIVE,
}


@dataclass(frozen=True)
class Strategy:
    kind: Kind
    h: float = 0.8

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if not 0.0 <= self.h <= 1.0:
            raise ValueError(f"h must lie in [0, 1], got {self.h}")

    @classmethod
    def shortest_path(cls) -> "Strategy":
        return cls(Kind.SHORTEST_PATH)

    @classmethod
    def echenique(cls, h: float = 0.8) -> "Strategy":
        return cls(Kind.ECHENIQUE, h)

    @classmethod
    def adaptive(cls) -> "Strategy":
        return cls(Kind.ADAPTIVE)

    @classmethod
    def parse(cls, name: str, h: float = 0.8) -> "Strategy":
        try:
            kind = _ALIASES[name.strip().lower()]
        except KeyError:
            raise ValueError(
                f"unknown strategy {name!r}; expected sp, echenique or adaptive"
            ) from None
        return cls(kind, h)

    @property
    def name(self) -> str:
        return {Kind.SHORTEST_PATH: "sp", Kind.ECHENIQUE: "echenique", Kind.ADAPTIVE: "adaptive"}[
            self.kind
        ]

    def __str__(self) -> str:
        if self.kind == Kind.ECHENIQUE:
            return f"echenique(h={self.h:g})"
        return self.name


# ---------------------------------------------------------------- kernels


@numba.njit(cache=True)
def _k_cost_adaptive(nxt, qlen, degree, src, dst, beta):
    total = 0.0
    s = src
    while s != dst:
        total += qlen[s] / (1.0 + beta * degree[s])
        s = nxt[s, dst]
    return total


@numba.njit(cache=True)
def _k_cost_echenique(dist, qlen, degree, src, dst, beta, h):
    return h * dist[src, dst] + (1.0 - h) * qlen[src] / (1.0 + beta * degree[src])


@numba.njit(cache=True)
def _k_cost(kind, dist, nxt, qlen, degree, src, dst, beta, h):
    if kind == 2:
        return _k_cost_adaptive(nxt, qlen, degree, src, dst, beta)
    if kind == 1:
        return _k_cost_echenique(dist, qlen, degree, src, dst, beta, h)
    return float(dist[src, dst])


@numba.njit(cache=True)
def _k_select(kind, indptr, indices, dist, nxt, qlen, degree, i, j, beta, h, rng):
    if dist[i, j] == 1:
        return j
    best = -1
    best_cost = np.inf
    best_d = 0
    ties = 0
    for p in range(indptr[i], indptr[i + 1]):
        l = indices[p]
        c = _k_cost(kind, dist, nxt, qlen, degree, l, j, beta, h)
        d = dist[l, j]
        if best < 0 or c < best_cost or (c == best_cost and d < best_d):
            best = l
            best_cost = c
            best_d = d
            ties = 1
        elif c == best_cost and d == best_d:
            # reservoir sampling keeps each tied neighbor with equal probability
            ties += 1
            if rng.random() * ties < 1.0:
                best = l
    return best


# ------------------------------------------------------------ Python API


def _qarr(queues: Sequence[int] | np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(queues, dtype=np.int64)


def cost_adaptive(net: Network, queues, src: int, dst: int, beta: float) -> float:
    """Projected waiting time from ``src`` to ``dst`` on the canonical path.

    Sums ``n_s / (1 + beta*k_s)`` over every path node except ``dst``,
    including ``src`` itself.
    """
    if src == dst:
        raise ValueError("cost_adaptive needs src != dst")
    return float(_k_cost_adaptive(net.next_hop, _qarr(queues), net.degree, src, dst, beta))


def cost_echenique(net: Network, queues, src: int, dst: int, beta: float, h: float) -> float:
    if src == dst:
        raise ValueError("cost_echenique needs src != dst")
    return float(_k_cost_echenique(net.dist, _qarr(queues), net.degree, src, dst, beta, h))


def cost_shortest_path(net: Network, src: int, dst: int) -> float:
    if src == dst:
        raise ValueError("cost_shortest_path needs src != dst")
    return float(net.dist[src, dst])


def select_neighbor(
    strategy: Strategy,
    net: Network,
    queues,
    i: int,
    j: int,
    beta: float,
    rng: int | np.random.Generator | None = None,
) -> int:
    """Next hop for a packet at ``i`` headed to ``j``."""
    if i == j:
        raise ValueError("select_neighbor needs i != j")
    return int(
        _k_select(
            int(strategy.kind),
            net.indptr,
            net.indices,
            net.dist,
            net.next_hop,
            _qarr(queues),
            net.degree,
            i,
            j,
            float(beta),
            float(strategy.h),
            make_rng(rng),
        )
    )
