"""Barabási-Albert network construction and shortest-path tables.

Every routing strategy reads hop distances and a canonical next hop from the
tables built here.  Ties between equally short routes always go to the lowest
neighbor index, so canonical paths are a pure function of the graph.
"""

from __future__ import annotations

from collections import Counter
from functools import cached_property
from pathlib import Path
from typing import Iterable

import numba
import numpy as np

__all__ = [
    "Network",
    "make_rng",
    "build_ba",
    "all_pairs_bfs",
    "canonical_path",
    "degree_histogram",
    "write_edgelist",
    "read_edgelist",
]


def make_rng(seed: int | np.random.Generator | None = None) -> np.random.Generator:
    """Return a PCG64 stream; passing a Generator returns it unchanged."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


class Network:
    """Immutable simple undirected graph in CSR form.

    ``dist`` and ``next_hop`` are computed on first access, so very large
    graphs that only need degree statistics never pay for all-pairs BFS.
    """

    def __init__(
        self,
        n: int,
        edges: Iterable[tuple[int, int]],
        *,
        meta: dict | None = None,
    ) -> None:
        pairs = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) out of range for n={n}")
            key = (u, v) if u < v else (v, u)
            if key in pairs:
                raise ValueError(f"duplicate edge {key}")
            pairs.add(key)

        self.node_count = int(n)
        self.meta = dict(meta or {})
        edge_arr = np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2)
        self.edges = edge_arr
        self.edges.flags.writeable = False

        both = np.concatenate([edge_arr, edge_arr[:, ::-1]])
        order = np.lexsort((both[:, 1], both[:, 0]))
        both = both[order]
        degree = np.bincount(both[:, 0], minlength=n).astype(np.int64)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(degree, out=indptr[1:])
        self.degree = degree
        self.indptr = indptr
        self.indices = np.ascontiguousarray(both[:, 1])
        for arr in (self.degree, self.indptr, self.indices):
            arr.flags.writeable = False

    @property
    def n(self) -> int:
        return self.node_count

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @property
    def mean_degree(self) -> float:
        return 2.0 * self.edge_count / self.node_count

    @property
    def k_max(self) -> int:
        return int(self.degree.max()) if self.node_count else 0

    @cached_property
    def adjacency(self) -> list[list[int]]:
        return [self.neighbors(i).tolist() for i in range(self.node_count)]

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i] : self.indptr[i + 1]]

    def has_edge(self, u: int, v: int) -> bool:
        nb = self.neighbors(u)
        pos = np.searchsorted(nb, v)
        return bool(pos < len(nb) and nb[pos] == v)

    @cached_property
    def _tables(self) -> tuple[np.ndarray, np.ndarray]:
        dist, nxt = all_pairs_bfs(self)
        dist.flags.writeable = False
        nxt.flags.writeable = False
        return dist, nxt

    @property
    def dist(self) -> np.ndarray:
        return self._tables[0]

    @property
    def next_hop(self) -> np.ndarray:
        return self._tables[1]

    @cached_property
    def diameter_avg(self) -> float:
        """Mean hop distance over ordered pairs i != j."""
        n = self.node_count
        if n < 2:
            return 0.0
        return float(self.dist.sum(dtype=np.int64)) / (n * (n - 1))

    def __repr__(self) -> str:
        return f"Network(n={self.node_count}, edges={self.edge_count}, k_max={self.k_max})"


def build_ba(
    n: int,
    m: int,
    m0: int,
    rng: int | np.random.Generator | None = None,
) -> Network:
    """Grow a BA graph from an ``m0``-clique, ``m`` preferential links per node.

    Targets for one incoming node are drawn without replacement, so the
    result is simple.  Edge count is ``m0*(m0-1)/2 + m*(n-m0)``.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if m > m0:
        raise ValueError(f"m={m} exceeds m0={m0}")
    if n <= m0:
        raise ValueError(f"n={n} must exceed m0={m0}")
    gen = make_rng(rng)

    edges: list[tuple[int, int]] = [(u, v) for u in range(m0) for v in range(u + 1, m0)]
    # each node appears once per incident edge end -> uniform pick is degree-proportional
    ends: list[int] = [x for e in edges for x in e]
    for v in range(m0, n):
        chosen: list[int] = []
        while len(chosen) < m:
            if ends:
                t = ends[int(gen.integers(len(ends)))]
            else:
                # m0 == 1: the seed node has no degree yet
                t = int(gen.integers(v))
            if t not in chosen:
                chosen.append(t)
        for t in chosen:
            edges.append((t, v))
            ends.append(t)
            ends.append(v)

    seed = rng if isinstance(rng, (int, np.integer)) else None
    return Network(n, edges, meta={"model": "ba", "m": m, "m0": m0, "seed": seed})


@numba.njit(cache=True)
def _bfs_tables(n, indptr, indices):
    dist = np.full((n, n), -1, dtype=np.int32)
    queue = np.empty(n, dtype=np.int64)
    for src in range(n):
        row = dist[src]
        row[src] = 0
        queue[0] = src
        head, tail = 0, 1
        while head < tail:
            u = queue[head]
            head += 1
            du = row[u]
            for p in range(indptr[u], indptr[u + 1]):
                w = indices[p]
                if row[w] < 0:
                    row[w] = du + 1
                    queue[tail] = w
                    tail += 1
    nxt = np.full((n, n), -1, dtype=np.int32)
    for src in range(n):
        for dst in range(n):
            if src == dst or dist[src, dst] < 0:
                continue
            want = dist[src, dst] - 1
            # indices are sorted per row, first hit is the lowest index
            for p in range(indptr[src], indptr[src + 1]):
                w = indices[p]
                if dist[w, dst] == want:
                    nxt[src, dst] = w
                    break
    return dist, nxt


def all_pairs_bfs(net: Network) -> tuple[np.ndarray, np.ndarray]:
    """Hop-distance matrix and lowest-index next-hop table.

    ``next_hop[i, i]`` is -1.  Raises ``ValueError`` on a disconnected graph.
    """
    dist, nxt = _bfs_tables(net.node_count, net.indptr, net.indices)
    if net.node_count and (dist < 0).any():
        raise ValueError("network is not connected")
    return dist, nxt


def canonical_path(net: Network, src: int, dst: int) -> list[int]:
    if src == dst:
        raise ValueError("canonical_path needs src != dst")
    nxt = net.next_hop
    path = [int(src)]
    s = src
    while s != dst:
        s = int(nxt[s, dst])
        path.append(s)
    return path


def degree_histogram(net: Network) -> dict[int, int]:
    return dict(sorted(Counter(net.degree.tolist()).items()))


def write_edgelist(net: Network, path: str | Path) -> None:
    meta = net.meta
    header = (
        f"# ba n={net.node_count} m={meta.get('m')} m0={meta.get('m0')} "
        f"seed={meta.get('seed')}\n"
    )
    with open(path, "w") as fh:
        fh.write(header)
        for u, v in net.edges.tolist():
            fh.write(f"{u} {v}\n")


def read_edgelist(path: str | Path) -> Network:
    meta: dict = {}
    edges: list[tuple[int, int]] = []
    n = None
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line.lstrip("#").split():
                    if "=" in tok:
                        key, val = tok.split("=", 1)
                        meta[key] = None if val == "None" else int(val)
                continue
            u, v = line.split()
            edges.append((int(u), int(v)))
    n = meta.pop("n", None)
    if n is None:
        n = 1 + max(max(e) for e in edges) if edges else 0
    meta["model"] = "ba"
    return Network(n, edges, meta=meta)
