"""Order parameter, phase-boundary search and mean-field predictions."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .dynamics import DegreeProfile, MetricSeries, SimConfig, run
from .routing import Strategy

__all__ = [
    "EtaEstimate",
    "PhasePoint",
    "BetaC",
    "MeanFieldParams",
    "estimate_eta",
    "eta_for",
    "evaluate_points",
    "find_beta_c",
    "mf_stationary_nk",
    "mf_jammed_slope",
    "mf_beta_c",
    "mf_beta_c_sp",
    "mf_lambda_min",
    "mf_lambda_min_sp",
    "linear_fit",
    "profile_growth",
]

EPS_JAM = 0.01


@dataclass(frozen=True)
class EtaEstimate:
    eta: float
    slope: float
    fit_window: tuple[int, int]


def linear_fit(x, y) -> tuple[float, float, float]:
    """Least-squares ``(slope, intercept, r2)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def estimate_eta(series: MetricSeries, m: int, lam: float, transient: int) -> EtaEstimate:
    """Long-time growth of ``<n(t)>`` in units of the generation rate ``2*m*lam``.

    The slope is fit over the last half of the post-transient record and the
    ratio is clamped to [0, 1].
    """
    if lam <= 0:
        raise ValueError("eta is undefined for lam <= 0")
    steps = np.asarray(series.step)
    if len(steps) <= 2 * transient or len(steps) - transient < 4:
        raise ValueError(f"series of length {len(steps)} too short for transient={transient}")
    post = len(steps) - transient
    start = transient + post // 2
    x = steps[start:]
    y = np.asarray(series.mean_packets)[start:]
    slope = float(np.polyfit(x, y, 1)[0])
    eta = min(1.0, max(0.0, slope / (2.0 * m * lam)))
    return EtaEstimate(eta, slope, (int(x[0]), int(x[-1])))


@dataclass(frozen=True)
class PhasePoint:
    lam: float
    beta: float
    eta: EtaEstimate
    jammed: bool
    eta_std: float = 0.0
    replicas: int = 1


def eta_for(cfg: SimConfig) -> EtaEstimate:
    """Simulate one configuration and return its order parameter."""
    return estimate_eta(run(cfg), cfg.m, cfg.lam, cfg.transient)


def _map(fn, items: list, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def evaluate_points(
    template: SimConfig,
    points: Iterable[tuple[float, float]],
    replicas: int = 3,
    *,
    eps_jam: float = EPS_JAM,
    workers: int = 1,
) -> list[PhasePoint]:
    """Replica-averaged eta at each ``(lam, beta)``; seeds are ``seed + r``."""
    points = list(points)
    cfgs = [
        template.replace(lam=lam, beta=beta, seed=template.seed + r)
        for lam, beta in points
        for r in range(replicas)
    ]
    etas = _map(eta_for, cfgs, workers)
    out = []
    for idx, (lam, beta) in enumerate(points):
        chunk = etas[idx * replicas : (idx + 1) * replicas]
        vals = np.array([e.eta for e in chunk])
        mean = EtaEstimate(
            float(vals.mean()),
            float(np.mean([e.slope for e in chunk])),
            chunk[0].fit_window,
        )
        std = float(vals.std(ddof=1)) if replicas > 1 else 0.0
        out.append(PhasePoint(lam, beta, mean, mean.eta > eps_jam, std, replicas))
    return out


@dataclass
class BetaC:
    lam: float
    strategy: Strategy
    beta_c: float
    err: float
    bracketed: bool
    replicas: int
    eps_jam: float = EPS_JAM
    points: list[PhasePoint] = field(default_factory=list)

    @property
    def lower(self) -> float:
        return self.beta_c - self.err

    @property
    def upper(self) -> float:
        return self.beta_c + self.err


def _bracket(points: Sequence[PhasePoint]) -> tuple[float, float] | None:
    pts = sorted(points, key=lambda p: p.beta)
    jammed = [p.beta for p in pts if p.jammed]
    if not jammed or all(p.jammed for p in pts):
        return None
    hi_jam = max(jammed)
    above = [p.beta for p in pts if not p.jammed and p.beta > hi_jam]
    if not above:
        return None
    return hi_jam, min(above)


def find_beta_c(
    lam: float,
    strategy: Strategy,
    template: SimConfig,
    beta_grid: Sequence[float],
    replicas: int = 3,
    *,
    eps_jam: float = EPS_JAM,
    refine: int = 0,
    workers: int = 1,
) -> BetaC:
    """Locate the jamming threshold in beta at fixed ``lam``.

    ``beta_c`` is the midpoint between the largest jammed grid point and the
    next free one above it, with half that spacing as uncertainty.  Each
    ``refine`` round bisects the bracket once more.  A grid that is free
    everywhere down to ``beta=0`` gives ``beta_c = 0``.  Any other
    unbracketed grid comes back with ``bracketed=False`` and NaN values.
    """
    grid = [float(b) for b in beta_grid]
    if not grid:
        raise ValueError("empty beta grid")
    if any(b2 <= b1 for b1, b2 in zip(grid, grid[1:])):
        raise ValueError("beta grid must be strictly ascending")
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    tmpl = template.replace(strategy=strategy, lam=lam)
    points = evaluate_points(tmpl, [(lam, b) for b in grid], replicas, eps_jam=eps_jam, workers=workers)

    def result(beta_c, err, ok):
        return BetaC(lam, strategy, beta_c, err, ok, replicas, eps_jam, sorted(points, key=lambda p: p.beta))

    br = _bracket(points)
    if br is None:
        if not any(p.jammed for p in points) and grid[0] <= 0.0:
            return result(0.0, 0.0, True)
        return result(math.nan, math.nan, False)

    lo, hi = br
    for _ in range(refine):
        mid = 0.5 * (lo + hi)
        (pt,) = evaluate_points(tmpl, [(lam, mid)], replicas, eps_jam=eps_jam, workers=workers)
        points.append(pt)
        if pt.jammed:
            lo = mid
        else:
            hi = mid
    return result(0.5 * (lo + hi), 0.5 * (hi - lo), True)


# ------------------------------------------------------------ mean field


@dataclass(frozen=True)
class MeanFieldParams:
    lam: float
    beta: float
    mean_degree: float
    k_max: int
    D: float
    n_mean: float | None = None
    alpha: float = 2.0

    @property
    def mean_packets(self) -> float:
        """Measured ``<n>`` if supplied, else the free-flow estimate ``(D-1)*lam*<k>``."""
        if self.n_mean is not None:
            return self.n_mean
        return (self.D - 1.0) * self.lam * self.mean_degree

    @classmethod
    def from_network(cls, net, lam: float, beta: float = 0.0, **kw) -> "MeanFieldParams":
        return cls(lam, beta, net.mean_degree, net.k_max, net.diameter_avg, **kw)


def mf_stationary_nk(p: MeanFieldParams, k) -> float:
    """Free-flow stationary queue length at degree ``k`` (linear in ``k``)."""
    return (p.lam + p.mean_packets / p.mean_degree) * k - p.lam * p.mean_degree


def mf_jammed_slope(lam: float, mean_degree: float, k) -> float:
    """Per-step growth of ``n_k`` once every queue exceeds its capacity."""
    return k * (lam + 1.0 / mean_degree) - 1.0


def mf_lambda_min(D: float, k_max: float) -> float:
    return 1.0 / (D * k_max)


def mf_lambda_min_sp(D: float, k_max: float, alpha: float = 2.0) -> float:
    return 1.0 / (alpha * D * k_max)


def mf_beta_c(lam: float, D: float, k_max: float) -> float:
    if D <= 0 or k_max <= 0:
        raise ValueError("D and k_max must be positive")
    return max(0.0, D * (lam - mf_lambda_min(D, k_max)))


def mf_beta_c_sp(lam: float, D: float, k_max: float, alpha: float = 2.0) -> float:
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    return max(0.0, alpha * D * (lam - mf_lambda_min_sp(D, k_max, alpha)))


def profile_growth(
    profiles: dict[int, DegreeProfile] | Sequence[DegreeProfile],
    *,
    min_nodes: int = 1,
) -> dict[int, float]:
    """Per-degree slope of ``n_k`` against time across snapshots."""
    profs = sorted(profiles.values() if isinstance(profiles, dict) else profiles, key=lambda p: p.step)
    if len(profs) < 2:
        raise ValueError("need at least two snapshots")
    per_k: dict[int, list[tuple[int, float]]] = {}
    counts: dict[int, int] = {}
    for prof in profs:
        for k, q, c in zip(prof.degree, prof.mean_queue, prof.count_nodes):
            per_k.setdefault(int(k), []).append((prof.step, float(q)))
            counts[int(k)] = int(c)
    out = {}
    for k, pts in sorted(per_k.items()):
        if counts[k] < min_nodes or len(pts) < 2:
            continue
        t, q = zip(*pts)
        out[k] = float(np.polyfit(t, q, 1)[0])
    return out
