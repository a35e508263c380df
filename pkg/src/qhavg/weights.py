"""A_r weights, weighted Staples functionals, union and Hoelder checks."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geometry import DomainSpec, UnionOf, grid_for, rasterize
from .integrals import ls_integral
from .solver import QhField, solve, subset_monotonicity


class WeightError(ValueError):
    pass


@dataclass(frozen=True)
class Weight:
    """w(z) = value (constant) or |z - center|^beta (power)."""

    kind: str = "constant"
    value: float = 1.0
    center: tuple = ()
    beta: float = 0.0

    def __post_init__(self):
        if self.kind == "constant":
            if not self.value > 0:
                raise WeightError("constant weight must be positive")
        elif self.kind == "power":
            if not self.center:
                raise WeightError("power weight needs a center")
            if not self.beta > -len(self.center):
                raise WeightError("power weight needs beta > -n for local integrability")
        else:
            raise WeightError(f"unknown weight kind {self.kind!r}")

    @classmethod
    def constant(cls, value: float = 1.0) -> "Weight":
        return cls("constant", float(value))

    @classmethod
    def power(cls, center, beta: float) -> "Weight":
        return cls("power", 1.0, tuple(float(v) for v in center), float(beta))

    def evaluate(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if self.kind == "constant":
            return np.full(pts.shape[:-1], self.value)
        return np.linalg.norm(pts - np.asarray(self.center), axis=-1) ** self.beta

    def check_ar(self, r: float) -> None:
        if self.kind == "power" and not self.beta / (1.0 - r) > -len(self.center):
            raise WeightError(f"beta={self.beta} makes w^(1/(1-r)) non-integrable for r={r}")

    def to_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "value": self.value}
        return {"kind": "power", "center": list(self.center), "beta": self.beta}

    @classmethod
    def from_dict(cls, d: Optional[dict]) -> Optional["Weight"]:
        if d is None:
            return None
        if d.get("kind", "constant") == "constant":
            return cls.constant(float(d.get("value", 1.0)))
        return cls.power(d["center"], float(d["beta"]))


@dataclass(frozen=True)
class ArEstimate:
    estimate: float
    center: tuple
    radius: float
    n_balls: int
    message: str


def ar_estimate(weight: Weight, raster, r: float, n_balls: int, radius_grid: Sequence[float], seed: int = 0) -> ArEstimate:
    """Largest sampled A_r product over balls inside the domain.

    Ball i uses row i of one uniform (nBalls, 2) draw, so a larger nBalls
    only adds balls and the estimate is nondecreasing in nBalls.
    """
    if not r > 1:
        raise WeightError("A_r needs r > 1")
    weight.check_ar(r)
    radius_grid = [float(v) for v in radius_grid]
    if not radius_grid or min(radius_grid) <= 0:
        raise WeightError("radius grid must be positive")
    idx = np.argwhere(raster.mask)
    if len(idx) == 0:
        raise WeightError("raster has no inside cells")
    draws = np.random.default_rng(seed).random((n_balls, 2))
    h = raster.h
    best, best_c, best_r = -math.inf, None, 0.0
    for u1, u2 in draws:
        cell = idx[min(int(u1 * len(idx)), len(idx) - 1)]
        c = raster.origin + (cell + 0.5) * h
        rad = min(radius_grid[min(int(u2 * len(radius_grid)), len(radius_grid) - 1)], float(raster.dist[tuple(cell)]))
        span = int(math.ceil(rad / h)) + 1
        lo = np.maximum(cell - span, 0)
        hi = np.minimum(cell + span + 1, raster.shape)
        sl = tuple(slice(a, b) for a, b in zip(lo, hi))
        axes = [raster.origin[i] + (np.arange(lo[i], hi[i]) + 0.5) * h for i in range(raster.n)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        sel = (np.linalg.norm(pts - c, axis=-1) <= rad) & raster.mask[sl]
        if not sel.any():
            raise WeightError("ball with no inside cells")
        w = weight.evaluate(pts[sel])
        prod = float(np.mean(w) * np.mean(w ** (1.0 / (1.0 - r))) ** (r - 1.0))
        if prod > best:
            best, best_c, best_r = prod, tuple(float(v) for v in c), rad
    msg = f"no violation found up to {n_balls} balls (sampled lower bound on the A_{r:g} constant)"
    return ArEstimate(best, best_c, best_r, n_balls, msg)


def weighted_ls(field: QhField, s: float, weight: Optional[Weight] = None) -> float:
    """(1/mu * sum k^s w h^n)^(1/s)."""
    if not s > 0:
        raise WeightError("s must be positive")
    return ls_integral(field, s, weight=weight).normalized


def _weighted_mean_power(field: QhField, s: float, weight: Optional[Weight]) -> float:
    val = ls_integral(field, s, weight=weight)
    return val.raw / val.measure


# ---------------------------------------------------------------------------
# union
# ---------------------------------------------------------------------------


@dataclass
class UnionReport:
    s: float
    tol: float
    n_cells: int
    n_pointwise_violations: int
    max_excess: float
    c1: float
    c2: float
    mean_union: float
    mean_sum_bound: float
    bound: float
    subset_violations: tuple
    rows: list = field(repr=False, default_factory=list)

    @property
    def pointwise_ok(self) -> bool:
        return self.n_pointwise_violations == 0

    @property
    def chain_ok(self) -> bool:
        return self.mean_union < self.bound

    @property
    def ok(self) -> bool:
        return self.pointwise_ok and self.chain_ok and not any(self.subset_violations)

    def csv(self) -> str:
        lines = ["cell,k_union,k1_star,k2_star,slack"]
        for cell, ku, k1, k2 in self.rows:
            lines.append(f"{cell},{ku:.17g},{k1:.17g},{k2:.17g},{k1 + k2 - ku:.17g}")
        lines.append("")
        lines.append(f"# C1,{self.c1:.17g}")
        lines.append(f"# C2,{self.c2:.17g}")
        lines.append(f"# bound 2^s(C1+C2),{self.bound:.17g}")
        lines.append(f"# achieved mean,{self.mean_union:.17g}")
        return "\n".join(lines) + "\n"


def union_check(
    g1: DomainSpec,
    g2: DomainSpec,
    z0,
    h: float,
    s: float,
    weight: Optional[Weight] = None,
    tol: Optional[float] = None,
    threads: int = 3,
) -> UnionReport:
    """Pointwise k_union <= k1* + k2* and the mean chain <= 2^s (C1 + C2)."""
    if not (g1.contains(z0) and g2.contains(z0)):
        raise WeightError("z0 must lie in the intersection of both domains")
    union = UnionOf(((g1, None), (g2, None)))
    origin, shape = grid_for(union, h)
    rasters = [rasterize(g, h, origin=origin, shape=shape, policy=False) for g in (g1, g2, union)]
    if not np.any(rasters[0].mask & rasters[1].mask):
        raise WeightError("the domains do not intersect on the grid")

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        f1, f2, fu = pool.map(lambda r: solve(r, z0), rasters)
    if tol is None:
        tol = 5.0 * h * float(np.max(1.0 / rasters[2].dist[rasters[2].mask]))

    cells = fu.reachable
    k1 = np.where(f1.raster.mask, f1.k, 0.0)
    k2 = np.where(f2.raster.mask, f2.k, 0.0)
    ku = fu.k
    excess = ku[cells] - (k1[cells] + k2[cells])
    bad = excess > tol
    c1 = _weighted_mean_power(f1, s, weight)
    c2 = _weighted_mean_power(f2, s, weight)
    mean_u = _weighted_mean_power(fu, s, weight)
    w = np.ones(ku.shape) if weight is None else weight.evaluate(fu.raster.centers())
    mu = float(np.sum(w[cells]))
    sum_bound = float(np.sum(((k1 + k2) ** s * w)[cells]) / mu)
    sub = (
        subset_monotonicity(fu, f1, tol).n_violations,
        subset_monotonicity(fu, f2, tol).n_violations,
    )
    idx = np.argwhere(cells)
    rows = [(":".join(map(str, ix)), float(ku[tuple(ix)]), float(k1[tuple(ix)]), float(k2[tuple(ix)])) for ix in idx]
    return UnionReport(
        s=float(s),
        tol=float(tol),
        n_cells=int(cells.sum()),
        n_pointwise_violations=int(bad.sum()),
        max_excess=float(excess.max()) if excess.size else 0.0,
        c1=c1,
        c2=c2,
        mean_union=mean_u,
        mean_sum_bound=sum_bound,
        bound=2.0 ** s * (c1 + c2),
        subset_violations=sub,
        rows=rows,
    )


def union_chain(specs: Sequence[DomainSpec], points: Sequence, h: float, s: float, weight=None) -> list[UnionReport]:
    """Induction over a finite union: (G1 u G2), then (that union) u G3, and so on.

    ``points[i]`` is the base point for step i and must lie in both operands.
    """
    if len(specs) < 2 or len(points) != len(specs) - 1:
        raise WeightError("need m >= 2 domains and m - 1 base points")
    reports = []
    acc = specs[0]
    for nxt, z0 in zip(specs[1:], points):
        reports.append(union_check(acc, nxt, z0, h, s, weight))
        acc = UnionOf(((acc, None), (nxt, None)))
    return reports


# ---------------------------------------------------------------------------
# Hoelder monotonicity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HolderReport:
    t: float
    s: float
    lt: float
    ls: float

    @property
    def ok(self) -> bool:
        # the discrete inequality is exact; allow only rounding in the final digits
        return self.lt <= self.ls * (1.0 + 1e-12)


def holder_check(field: QhField, weight: Optional[Weight], t: float, s: float) -> HolderReport:
    if not (0 < t <= s):
        raise WeightError("holder_check needs 0 < t <= s")
    return HolderReport(t, s, weighted_ls(field, t, weight), weighted_ls(field, s, weight))
