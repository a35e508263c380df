"""Generalized Whitney subdivisions of the cube, the cusp and the block tower."""
from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from .tubes import SeriesReport, series_report


class WhitneyError(ValueError):
    pass


@dataclass(frozen=True)
class SubdivisionSet:
    id: str
    family: str
    params: dict
    star_center: tuple
    d: float
    delta: float
    layer: int
    neighbors: tuple = ()
    lo: Optional[tuple] = None  # exact box corners (Fractions) for cube cells
    hi: Optional[tuple] = None
    d_x: Optional[float] = None
    d_r: Optional[float] = None
    john: bool = False
    star_checked: bool = True

    def contains(self, pts) -> np.ndarray:
        """Closed-set membership."""
        pts = np.asarray(pts, dtype=float)
        if self.lo is not None:
            lo = np.array([float(v) for v in self.lo])
            hi = np.array([float(v) for v in self.hi])
            return np.all((pts >= lo) & (pts <= hi), axis=-1)
        if self.family == "cusp":
            return _cusp_contains(self.params, pts, closed=True)
        raise WhitneyError(f"set {self.id} has no geometry")

    def interior(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if self.lo is not None:
            lo = np.array([float(v) for v in self.lo])
            hi = np.array([float(v) for v in self.hi])
            return np.all((pts > lo) & (pts < hi), axis=-1)
        return _cusp_contains(self.params, pts, closed=False)

    @property
    def ratio(self) -> float:
        return self.d / self.delta


# ---------------------------------------------------------------------------
# cube
# ---------------------------------------------------------------------------


def edge_count(j: int) -> int:
    """Cubes along one edge of layer j: 2 * 3^j - 1."""
    return 2 * 3 ** j - 1


def edge_count_recurrence(j_max: int) -> list[int]:
    e = [1]
    for _ in range(j_max):
        e.append(3 * e[-1] + 2)
    return e


@dataclass(frozen=True)
class CubeLayer:
    j: int
    e: int
    nu: int
    side: Fraction
    delta: Fraction
    d: float
    measure: Fraction
    nu_bound: int
    measure_bound: Fraction


def cube_layer(n: int, j: int) -> CubeLayer:
    e = edge_count(j)
    nu = 1 if j == 0 else e ** n - (e - 2) ** n
    side = Fraction(1, 2 * 3 ** j)
    delta = Fraction(1, 4 * 3 ** j)
    return CubeLayer(
        j=j,
        e=e,
        nu=nu,
        side=side,
        delta=delta,
        d=math.sqrt(n) * float(side),
        measure=nu * side ** n,
        nu_bound=2 ** n * n * 3 ** (j * (n - 1)),
        measure_bound=Fraction(n, 3 ** j),
    )


def _cube_cell(n: int, j: int, idx: tuple) -> SubdivisionSet:
    # corner of cell i along an axis is (1 + 2i) / (4 * 3^j)
    lo = tuple(Fraction(1 + 2 * i, 4 * 3 ** j) for i in idx)
    side = Fraction(1, 2 * 3 ** j)
    hi = tuple(v + side for v in lo)
    center = tuple(float(v + side / 2) for v in lo)
    return SubdivisionSet(
        id=f"cube:{j}:" + "-".join(map(str, idx)),
        family="cube",
        params={"n": n, "j": j, "index": tuple(idx)},
        star_center=center,
        d=math.sqrt(n) * float(side),
        delta=float(Fraction(1, 4 * 3 ** j)),
        layer=j,
        lo=lo,
        hi=hi,
    )


def _ring(e: int, idx) -> bool:
    return any(i == 0 or i == e - 1 for i in idx)


def _cube_neighbors(n: int, j: int, idx: tuple) -> list[str]:
    e = edge_count(j)
    out = []
    for off in itertools.product((-1, 0, 1), repeat=n):
        if any(off):
            q = tuple(i + o for i, o in zip(idx, off))
            if all(0 <= v < e for v in q) and _ring(e, q):
                out.append(f"cube:{j}:" + "-".join(map(str, q)))
    # cells of the neighbouring layers whose closed boxes touch this one
    for jj in (j - 1, j + 1):
        if jj < 0:
            continue
        ee = edge_count(jj)
        ranges = []
        for i in idx:
            # integer lattice in units of 1/(4*3^max(j,jj)); touching intervals
            J = max(j, jj)
            lo, size = (1 + 2 * i) * 3 ** (J - j), 2 * 3 ** (J - j)
            ssz = 2 * 3 ** (J - jj)
            # cell k of layer jj spans [(1+2k)*3^(J-jj), +ssz]
            base = 3 ** (J - jj)
            kmin = math.ceil((lo - ssz - base) / ssz)
            kmax = math.floor((lo + size - base) / ssz)
            ranges.append(range(max(kmin, 0), min(kmax, ee - 1) + 1))
        for q in itertools.product(*ranges):
            if jj == 0 or _ring(ee, q):
                out.append(f"cube:{jj}:" + "-".join(map(str, q)))
    return out


@dataclass
class CubeSubdivision:
    n: int
    layers: list
    sets: list = field(default_factory=list)

    @property
    def distance_factor(self) -> float:
        return 2 * math.sqrt(self.n)


def cube_subdivision(n: int, j_max: int, enumerate_cells: Optional[bool] = None) -> CubeSubdivision:
    """Layers L_0..L_jMax of the unit cube; cells enumerated for n = 2, 3."""
    if j_max < 0:
        raise WhitneyError("jMax must be >= 0")
    layers = [cube_layer(n, j) for j in range(j_max + 1)]
    sub = CubeSubdivision(n=n, layers=layers)
    if enumerate_cells is None:
        enumerate_cells = n in (2, 3)
    if enumerate_cells:
        if n not in (2, 3):
            raise WhitneyError("cell enumeration supports n in {2, 3}")
        for j in range(j_max + 1):
            e = edge_count(j)
            for idx in itertools.product(range(e), repeat=n):
                if j == 0 or _ring(e, idx):
                    cell = _cube_cell(n, j, idx)
                    nb = [v for v in _cube_neighbors(n, j, idx) if int(v.split(":")[1]) <= j_max]
                    sub.sets.append(_with_neighbors(cell, nb))
    return sub


def _with_neighbors(s: SubdivisionSet, nb) -> SubdivisionSet:
    return SubdivisionSet(**{**s.__dict__, "neighbors": tuple(nb)})


def cube_layer_of(z) -> int:
    """Layer index of a point of the open unit cube."""
    z = np.asarray(z, dtype=float)
    depth = 0.5 - float(np.max(np.abs(z - 0.5)))
    if not depth > 0:
        raise WhitneyError("point is not inside the unit cube")
    if depth >= 0.25:
        return 0
    # layer j covers sup-distance to the boundary in [1/(4*3^j), 1/(4*3^(j-1))]
    j = max(1, math.ceil(math.log(0.25 / depth, 3) - 1e-12))
    while Fraction(1, 4 * 3 ** j) > Fraction(depth):
        j += 1
    while j > 1 and Fraction(1, 4 * 3 ** (j - 1)) <= Fraction(depth):
        j -= 1
    return j


def cube_chain(n: int, z) -> list[SubdivisionSet]:
    """Layer walk S_0 -> ... -> the cell containing z, each step touching the next."""
    z = np.asarray(z, dtype=float)
    j = cube_layer_of(z)
    chain = [_cube_cell(n, j, _cell_at(n, j, z))]
    for i in range(j - 1, -1, -1):
        cur = chain[-1]
        half = Fraction(1, 2) - Fraction(1, 4 * 3 ** i)  # outer half width of layer i
        p = [min(max((a + b) / 2, Fraction(1, 2) - half), Fraction(1, 2) + half) for a, b in zip(cur.lo, cur.hi)]
        chain.append(_cube_cell(n, i, _cell_at(n, i, p)))
    chain.reverse()
    return chain


def _cell_at(n: int, j: int, p) -> tuple:
    if j == 0:
        return (0,) * n
    e = edge_count(j)
    out = []
    for v in p:
        v = Fraction(v) if not isinstance(v, Fraction) else v
        k = math.floor((v * 4 * 3 ** j - 1) / 2)
        out.append(min(max(k, 0), e - 1))
    return tuple(out)


def boxes_touch(a: SubdivisionSet, b: SubdivisionSet) -> bool:
    return all(la <= hb and lb <= ha for la, ha, lb, hb in zip(a.lo, a.hi, b.lo, b.hi))


@dataclass(frozen=True)
class ChainBound:
    ids: tuple
    value: float
    terms: tuple


def chain_bound(sets, chain: Optional[Sequence[str]] = None) -> ChainBound:
    """2 * sum d/delta over a chain whose consecutive sets touch.

    ``sets`` is either the chain itself (a list of sets) or a mapping from id
    to set, in which case ``chain`` lists the ids.
    """
    if chain is None:
        seq = list(sets)
    else:
        seq = [sets[i] for i in chain]
    if not seq:
        raise WhitneyError("empty chain")
    for a, b in zip(seq[:-1], seq[1:]):
        linked = boxes_touch(a, b) if (a.lo is not None and b.lo is not None) else (b.id in a.neighbors or a.id in b.neighbors)
        if not linked:
            raise WhitneyError(f"broken adjacency between {a.id} and {b.id}")
    terms = tuple(2 * s.d / s.delta for s in seq)
    return ChainBound(ids=tuple(s.id for s in seq), value=math.fsum(terms), terms=terms)


def cube_bound_series(n: int, s: float, j_max: int) -> SeriesReport:
    """Terms (2M)^s (j+1)^s |L_j| with M = 2 sqrt(n)."""
    if s < 0:
        raise WhitneyError("s must be nonnegative")
    m = 2 * math.sqrt(n)
    terms = [(2 * m) ** s * (j + 1) ** s * float(cube_layer(n, j).measure) for j in range(j_max + 1)]
    return series_report(list(range(j_max + 1)), terms, s)


# ---------------------------------------------------------------------------
# cusp
# ---------------------------------------------------------------------------


def layer_of(m: int) -> int:
    if m < 1:
        raise WhitneyError("m must be >= 1")
    return int(m).bit_length()


def lambda_chain(m: int) -> list[int]:
    """m, then m with its rightmost binary digit removed, and so on down to 1."""
    if m < 1:
        raise WhitneyError("m must be >= 1")
    out = [int(m)]
    while out[-1] > 1:
        out.append(out[-1] >> 1)
    return out


def c1_constant(alpha: float) -> float:
    """Tangent-line distance over vertical gap, worst case at x = 1/2."""
    slope = alpha * 2.0 ** (-(alpha - 1))
    return 1.0 / math.sqrt(1.0 + slope * slope)


def c_constant(alpha: float) -> float:
    return c1_constant(alpha) * 2.0 ** (-alpha)


def cusp_k_constant(alpha: float) -> float:
    """K with k <= K (1 + l) 2^((alpha-1) j); horizontal leg summed as a geometric series."""
    return max(2.0 / (1.0 - 2.0 ** (1.0 - alpha)), 4.0) / c_constant(alpha)


def _cusp_contains(p: dict, pts, closed: bool) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    x = pts[..., 0]
    r = np.linalg.norm(pts[..., 1:], axis=-1)
    a = p["alpha"]
    lo_f, hi_f = p["r_lo_factor"], p["r_hi_factor"]
    xa = np.power(np.maximum(x, 0.0), a)
    if closed:
        ok = (x >= p["x0"]) & (x <= p["x1"]) & (r >= lo_f * xa) & (r <= hi_f * xa)
    else:
        ok = (x > p["x0"]) & (x < p["x1"]) & (r > lo_f * xa) & (r < hi_f * xa)
    sign = p.get("sign", 0)
    if sign:
        y = pts[..., 1]
        ok &= (y >= 0) if (closed and sign > 0) else (y <= 0) if closed else (y > 0) if sign > 0 else (y < 0)
    return ok


def cusp_set(alpha: float, j: int, m: int, n: int = 2, sign: int = 0) -> SubdivisionSet:
    """S_{j,m}; for n = 2 and m > 1, ``sign`` = +1/-1 selects the half above/below the axis."""
    if not alpha > 1:
        raise WhitneyError("cusp needs alpha > 1")
    if j < 1:
        raise WhitneyError("j must be >= 1")
    ell = layer_of(m)
    dx = 2.0 ** (-(j + ell))
    x0, x1 = m * dx, (m + 1) * dx
    lo_f, hi_f = 1.0 - 2.0 ** (1 - ell), 1.0 - 2.0 ** (-ell)
    d_r = x1 ** alpha * 2.0 ** (-ell)
    delta = c_constant(alpha) * 2.0 ** (-(alpha * j + ell))
    xm = 0.5 * (x0 + x1)
    rm = 0.5 * (lo_f + hi_f) * xm ** alpha
    if m == 1 or n != 2:
        center = (xm,) + (0.0,) * (n - 1)
    else:
        center = (xm, sign * rm if sign else rm)
    params = {
        "alpha": alpha,
        "n": n,
        "j": j,
        "m": m,
        "ell": ell,
        "x0": x0,
        "x1": x1,
        "r_lo_factor": lo_f,
        "r_hi_factor": hi_f,
        "sign": sign,
        "measure_ub": 2.0 ** (-j * (alpha * (n - 1) + 1)) * 2.0 ** (-2 * ell),
    }
    tag = "" if not sign else ("+" if sign > 0 else "-")
    return SubdivisionSet(
        id=f"cusp:{j}:{m}{tag}",
        family="cusp",
        params=params,
        star_center=center,
        d=dx,
        delta=delta,
        layer=ell,
        d_x=dx,
        d_r=d_r,
        star_checked=(n == 2 or m == 1),
    )


def cusp_chain_value(alpha: float, j: int, m: int) -> float:
    """L-shaped path bound: 2 sum d_x/delta along the axis plus 2 sum d_r/delta radially."""
    axis = [cusp_set(alpha, i, 1) for i in range(1, j + 1)]
    radial = [cusp_set(alpha, j, lam) for lam in lambda_chain(m)]
    return math.fsum(2 * s.d_x / s.delta for s in axis) + math.fsum(2 * s.d_r / s.delta for s in radial)


def cusp_k_bound(alpha: float, j: int, m: int) -> float:
    return cusp_k_constant(alpha) * (1 + layer_of(m)) * 2.0 ** ((alpha - 1) * j)


def cusp_m_sum(s: float, m_max: int) -> np.ndarray:
    """Partial sums of (2 + log2 m)^s / m^2 for m = 1..mMax."""
    m = np.arange(1, m_max + 1, dtype=float)
    return np.cumsum((2.0 + np.log2(m)) ** s / m ** 2)


@dataclass
class CuspUpperSeries:
    series: SeriesReport
    j_ratio: float
    exponent: float
    converges: bool
    tube_condition: bool
    m_sum: float

    @property
    def classification(self) -> str:
        return self.series.classification


def cusp_upper_series(alpha: float, n: int, s: float, j_max: int, m_max: int) -> CuspUpperSeries:
    """sum_j sum_m kBound^s * measureUB, grouped by j (the m-sum is inner)."""
    if not alpha > 1:
        raise WhitneyError("cusp needs alpha > 1")
    ms = np.arange(1, m_max + 1)
    ells = np.array([layer_of(int(m)) for m in ms], dtype=float)
    m_part = float(np.sum((1.0 + ells) ** s * 2.0 ** (-2 * ells)))
    k = cusp_k_constant(alpha)
    terms = []
    for j in range(1, j_max + 1):
        terms.append((k * 2.0 ** ((alpha - 1) * j)) ** s * 2.0 ** (-j * (alpha * (n - 1) + 1)) * m_part)
    exponent = (alpha - 1) * s - (alpha * (n - 1) + 1)
    return CuspUpperSeries(
        series=series_report(list(range(1, j_max + 1)), terms, s),
        j_ratio=2.0 ** exponent,
        exponent=exponent,
        converges=exponent < 0,
        tube_condition=(alpha - 1) * (s - n + 1) < n,
        m_sum=m_part,
    )


def cusp_family(alpha: float, j_max: int, ell_max: int, n: int = 2) -> list[SubdivisionSet]:
    """Sets S_{j,m} for j <= jMax and layers l <= lMax plus the John piece {x > 1/2}.

    For n = 2 the sets with m > 1 are split into their upper and lower halves.
    """
    sets = {}
    for j in range(1, j_max + 1):
        for m in range(1, 2 ** ell_max):
            signs = (1, -1) if (n == 2 and m > 1) else (0,)
            for sg in signs:
                s = cusp_set(alpha, j, m, n, sg)
                sets[s.id] = s
    john = SubdivisionSet(
        id="cusp:john",
        family="cusp",
        params={"alpha": alpha, "n": n, "x0": 0.5, "x1": 1.0, "r_lo_factor": 0.0, "r_hi_factor": 1.0, "sign": 0},
        star_center=(0.75,) + (0.0,) * (n - 1),
        d=math.sqrt(0.25 + 4.0),
        delta=0.0 + 1e-300,
        layer=0,
        john=True,
        star_checked=False,
    )
    links: dict[str, set] = {k: set() for k in sets}
    links[john.id] = set()

    def ids(j, m):
        if m == 1 or n != 2:
            return [f"cusp:{j}:{m}"]
        return [f"cusp:{j}:{m}+", f"cusp:{j}:{m}-"]

    def link(a, b):
        if a in links and b in links:
            links[a].add(b)
            links[b].add(a)

    for key, s in sets.items():
        j, m, sg = s.params["j"], s.params["m"], s.params["sign"]
        if m > 1:
            parent = m >> 1
            for pid in ids(j, parent):
                if parent == 1 or pid.endswith("+" if sg > 0 else "-") or n != 2:
                    link(key, pid)
            if layer_of(m + 1) == layer_of(m):
                for qid in ids(j, m + 1):
                    if qid[-1] == key[-1] or n != 2:
                        link(key, qid)
        if m == 1 and j > 1:
            link(key, f"cusp:{j - 1}:1")
        if j == 1 and m + 1 == 2 ** layer_of(m):
            link(key, john.id)
    out = [_with_neighbors(s, sorted(links[k])) for k, s in sets.items()]
    out.append(_with_neighbors(john, sorted(links[john.id])))
    return out


def cusp_distance_factor(sets: Iterable[SubdivisionSet]) -> float:
    """max d/delta over the given (non-John) sets; grows like 2^((alpha-1) j)."""
    return max(s.ratio for s in sets if not s.john)


# ---------------------------------------------------------------------------
# block tower
# ---------------------------------------------------------------------------


def block_counts(m: int) -> dict:
    if m < 1:
        raise WhitneyError("blocks are numbered from 1")
    g = int(m).bit_length() - 1
    return {"size_exponent": g, "edge": Fraction(1, 3 ** g)}


@dataclass
class BlockUpperSeries:
    series: SeriesReport
    exponent: float
    converges: bool
    majorant_converges: bool
    limit_ratio: float

    @property
    def classification(self) -> str:
        return self.series.classification


def block_upper_series(n: int, s: float, m_max: int, i_max: int) -> BlockUpperSeries:
    """(i+1+3m)^s m^(-n log2 3) 3^(-i), summed over i and grouped by dyadic generation of m."""
    if s < 1:
        raise WhitneyError("s must be >= 1")
    expo = n * math.log2(3.0)
    i = np.arange(i_max + 1, dtype=float)
    groups = []
    m = 1
    while 2 * m - 1 <= m_max:  # complete generations only
        ms = np.arange(m, 2 * m, dtype=float)[:, None]
        groups.append(float(np.sum((i + 1 + 3 * ms) ** s * ms ** (-expo) * 3.0 ** (-i))))
        m *= 2
    return BlockUpperSeries(
        series=series_report(list(range(len(groups))), groups, s),
        exponent=s - expo,
        converges=s < expo - 1,
        majorant_converges=(s - expo) < -1,
        limit_ratio=2.0 ** (s + 1) / 3.0 ** n,
    )


# ---------------------------------------------------------------------------
# validation and export
# ---------------------------------------------------------------------------


@dataclass
class ValidationReport:
    ok: bool
    overlap_measure: float
    overlaps: list
    coverage: float
    coverage_without_john: float
    connected: bool
    star_violations: list
    skipped_star: list
    john_ids: list


def _lattice(box_sets: list) -> tuple[np.ndarray, np.ndarray, int]:
    den = 1
    for s in box_sets:
        for v in s.lo + s.hi:
            den = den * v.denominator // math.gcd(den, v.denominator)
    if den > 2 ** 40:
        raise WhitneyError("box lattice too fine for exact integer checks")
    lo = np.array([[int(v * den) for v in s.lo] for s in box_sets], dtype=np.int64)
    hi = np.array([[int(v * den) for v in s.hi] for s in box_sets], dtype=np.int64)
    return lo, hi, den


def _box_overlaps(box_sets: list) -> tuple[float, list]:
    """Exact pairwise interior overlap of boxes with rational corners."""
    if len(box_sets) < 2:
        return 0.0, []
    lo, hi, den = _lattice(box_sets)
    order = np.argsort(lo[:, 0], kind="stable")
    lo, hi = lo[order], hi[order]
    total = Fraction(0)
    pairs = []
    for a in range(len(order)):
        # candidates start before box a ends along the sorted axis
        stop = int(np.searchsorted(lo[:, 0], hi[a, 0], side="left"))
        if stop <= a + 1:
            continue
        w = np.minimum(hi[a], hi[a + 1:stop]) - np.maximum(lo[a], lo[a + 1:stop])
        for b in np.nonzero(np.all(w > 0, axis=1))[0]:
            total += Fraction(int(np.prod(w[b].astype(object))), den ** lo.shape[1])
            pairs.append((box_sets[order[a]].id, box_sets[order[a + 1 + b]].id))
    return float(total), pairs


def _box_coverage(box_sets: list, raster) -> np.ndarray:
    """Grid-shaped mask of cell centers lying in some closed box."""
    cover = np.zeros(raster.shape, dtype=bool)
    h, org = raster.h, raster.origin
    for s in box_sets:
        sl = []
        for ax in range(raster.n):
            first = math.ceil((float(s.lo[ax]) - org[ax]) / h - 0.5 - 1e-9)
            last = math.floor((float(s.hi[ax]) - org[ax]) / h - 0.5 + 1e-9)
            sl.append(slice(max(first, 0), max(min(last + 1, raster.shape[ax]), 0)))
        cover[tuple(sl)] = True
    return cover


def validate_subdivision(sets: Sequence[SubdivisionSet], raster, n_star: int = 12, seed: int = 0) -> ValidationReport:
    """Overlap, coverage, connectivity and star-shapedness checks on a raster.

    Overlaps are exact for box sets and sampled at cell centers otherwise.
    """
    sets = list(sets)
    mask = raster.mask
    pts = raster.inside_centers()
    cv = raster.cell_volume
    box_sets = [s for s in sets if s.lo is not None]
    other = [s for s in sets if s.lo is None]
    overlap, pairs = _box_overlaps(box_sets)
    covered = _box_coverage(box_sets, raster)[mask] if box_sets else np.zeros(len(pts), dtype=bool)
    in_john = np.zeros(len(pts), dtype=bool)
    if other:
        hits = np.zeros(len(pts), dtype=int)
        for s in other:
            hits += s.interior(pts)
            c = s.contains(pts)
            covered |= c
            if s.john:
                in_john |= c
        extra = int(np.sum(np.maximum(hits - 1, 0)))
        if extra:
            overlap += extra * cv
            pairs.append(("sampled", f"{extra} cells in more than one set"))
    coverage = float(covered.mean())
    rest = ~in_john
    cov_nj = float(covered[rest].mean()) if rest.any() else 1.0

    ids = {s.id for s in sets}
    adj = {s.id: [v for v in s.neighbors if v in ids] for s in sets}
    seen = {sets[0].id}
    queue = deque([sets[0].id])
    while queue:
        for v in adj[queue.popleft()]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    connected = len(seen) == len(ids)

    rng = np.random.default_rng(seed)
    star_bad, skipped = [], []
    ts = np.linspace(0.0, 1.0, 9)[:, None, None]
    for s in sets:
        if not s.star_checked:
            skipped.append(s.id)
            continue
        if s.lo is not None:
            lo = np.array([float(v) for v in s.lo])
            hi = np.array([float(v) for v in s.hi])
            take = lo + rng.random((n_star, len(lo))) * (hi - lo)
        else:
            inside = pts[s.contains(pts)]
            if len(inside) == 0:
                continue
            take = inside[rng.choice(len(inside), size=min(n_star, len(inside)), replace=False)]
        c = np.asarray(s.star_center)
        seg = c + ts * (take[None] - c)
        if not np.all(s.contains(seg.reshape(-1, len(c)))):
            star_bad.append(s.id)
    ok = overlap == 0 and connected and not star_bad
    return ValidationReport(
        ok=ok,
        overlap_measure=overlap,
        overlaps=pairs,
        coverage=coverage,
        coverage_without_john=cov_nj,
        connected=connected,
        star_violations=star_bad,
        skipped_star=skipped,
        john_ids=[s.id for s in sets if s.john],
    )


SUBDIVISION_CSV_HEADER = "id,family,layer,d,delta,neighbors"


def subdivision_csv(sets: Iterable[SubdivisionSet]) -> str:
    lines = [SUBDIVISION_CSV_HEADER]
    for s in sets:
        lines.append(f"{s.id},{s.family},{s.layer},{s.d:.17g},{s.delta:.17g},{';'.join(s.neighbors)}")
    return "\n".join(lines) + "\n"
