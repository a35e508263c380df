"""Essential tubes: sampled verification, the lower-bound theorem and E_T series."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from .geometry import (
    BlockTower,
    Cusp,
    DiskAndRooms,
    DomainSpec,
    RoomsAndHalls,
    unit_ball_volume,
)

DIVERGES = "diverges"
CONVERGES = "converges"
INCONCLUSIVE = "inconclusive"

TAIL = 10
DIVERGE_RATIO = 0.999
CONVERGE_RATIO = 0.99


class TubeError(ValueError):
    pass


class AmbiguousComponent(TubeError):
    def __init__(self, sizes):
        super().__init__(f"tube meets {len(sizes)} components of the domain (sizes {sizes}); pass select=")
        self.sizes = sizes


@dataclass(frozen=True)
class Tube:
    """Closed cylinder end_a + [0, l] * axis with radius r and slice fraction c."""

    end_a: tuple
    axis: tuple
    l: float
    r: float
    c: float = 1.0
    index: int = 0

    def __post_init__(self):
        ax = np.asarray(self.axis, dtype=float)
        norm = float(np.linalg.norm(ax))
        if norm == 0:
            raise TubeError("tube axis must be nonzero")
        if not (self.l > 0 and self.r > 0):
            raise TubeError("tube needs l > 0 and r > 0")
        if not (0 < self.c <= 1):
            raise TubeError("tube slice fraction c must lie in (0, 1]")
        if len(self.end_a) != len(self.axis):
            raise TubeError("end point and axis differ in dimension")
        object.__setattr__(self, "axis", tuple(float(v) for v in ax / norm))
        object.__setattr__(self, "end_a", tuple(float(v) for v in self.end_a))

    @property
    def n(self) -> int:
        return len(self.axis)

    def frame(self) -> np.ndarray:
        """Rows: axis followed by an orthonormal basis of its complement."""
        a = np.asarray(self.axis)
        q, _ = np.linalg.qr(np.column_stack([a, np.eye(self.n)]))
        basis = q[:, : self.n].T
        basis[0] = a
        return basis

    def local(self, pts) -> tuple[np.ndarray, np.ndarray]:
        """Axial coordinate t and transverse radius of each point."""
        basis = self.frame()
        d = np.asarray(pts, dtype=float) - np.asarray(self.end_a)
        coords = d @ basis.T
        return coords[..., 0], np.linalg.norm(coords[..., 1:], axis=-1)

    def interior(self, pts) -> np.ndarray:
        t, rad = self.local(pts)
        return (t > 0) & (t < self.l) & (rad < self.r)

    def term(self, s: float) -> float:
        return self.c * self.r ** self.n * (self.l / self.r) ** (s + 1)

    def scaled(self, lam: float) -> "Tube":
        return replace(self, end_a=tuple(lam * v for v in self.end_a), l=lam * self.l, r=lam * self.r)

    def to_dict(self) -> dict:
        return {"index": self.index, "end_a": list(self.end_a), "axis": list(self.axis), "l": self.l, "r": self.r, "c": self.c}


def tube_lower_bound(tube: Tube, s: float, n: Optional[int] = None) -> float:
    """V_{n-1} / ((s+1) 2^(s+1)) * c * r^n * (l/r)^(s+1)."""
    if s < 1:
        raise TubeError("tube_lower_bound needs s >= 1")
    n = tube.n if n is None else n
    v = unit_ball_volume(n - 1)
    return v / ((s + 1) * 2.0 ** (s + 1)) * tube.c * tube.r ** n * (tube.l / tube.r) ** (s + 1)


@dataclass
class TubeCheck:
    tube: Tube
    ok: bool
    c_hat: float
    wall_clear: bool
    c_used: float
    component_sizes: list
    points: np.ndarray = field(repr=False)


def _wall_directions(n: int, count: int) -> np.ndarray:
    if n == 2:
        return np.array([[-1.0], [1.0]])
    ang = (np.arange(count) + 0.5) * (2 * math.pi / count)
    return np.stack([np.cos(ang), np.sin(ang)], axis=-1)


def verify_essential(
    spec: DomainSpec,
    tube: Tube,
    n_slices: int = 64,
    samples: int = 64,
    tol: float = 0.02,
    select: Optional[int] = None,
) -> TubeCheck:
    """Check the essential-tube conditions on a local raster in the tube frame.

    ``samples`` is the number of cells across the diameter along each
    transverse axis.  The component of T & domain is found by flood fill.
    The wall is sampled exactly: a wall point just outside radius r that lies
    in the domain, next to a component cell, means the component crosses it.
    """
    if tube.n != spec.ndim:
        raise TubeError("tube and domain differ in dimension")
    lo, hi = spec.bounds()
    ends = np.array([tube.end_a, np.asarray(tube.end_a) + tube.l * np.asarray(tube.axis)])
    if np.any(ends.max(axis=0) + tube.r < lo) or np.any(ends.min(axis=0) - tube.r > hi):
        raise TubeError("tube misses the bounding box of the domain")
    basis = tube.frame()
    origin = np.asarray(tube.end_a)
    dt = tube.l / n_slices
    du = 2 * tube.r / samples
    t = (np.arange(n_slices) + 0.5) * dt
    u = (np.arange(samples) + 0.5) * du - tube.r
    grids = np.meshgrid(t, *([u] * (tube.n - 1)), indexing="ij")
    coords = np.stack(grids, axis=-1)
    pts = origin + coords @ basis
    disk = np.linalg.norm(coords[..., 1:], axis=-1) <= tube.r
    inside = np.asarray(spec.contains(pts), dtype=bool)

    labels, count = ndimage.label(disk & inside)
    if count == 0:
        raise TubeError("tube does not meet the domain")
    sizes = ndimage.sum_labels(np.ones_like(labels), labels, index=np.arange(1, count + 1)).astype(int).tolist()
    if count > 1 and select is None:
        raise AmbiguousComponent(sizes)
    pick = 1 + (int(np.argmax(sizes)) if select is None else int(select))
    comp = labels == pick

    per_slice = comp.reshape(n_slices, -1).sum(axis=1)
    disk_slice = disk.reshape(n_slices, -1).sum(axis=1)
    c_hat = float(np.min(per_slice / disk_slice))

    dirs = _wall_directions(tube.n, 4 * samples)
    wall_clear = True
    for dvec in dirs:
        outer = np.concatenate([t[:, None], np.tile(dvec * tube.r * (1 + 1e-9), (n_slices, 1))], axis=1)
        inner = dvec * (tube.r - 0.5 * du)
        cell = np.clip(np.floor((inner + tube.r) / du).astype(int), 0, samples - 1)
        hit = np.asarray(spec.contains(origin + outer @ basis), dtype=bool)
        hit &= comp[(slice(None),) + tuple(cell)]
        if hit.any():
            wall_clear = False
            break
    ok = wall_clear and c_hat >= tube.c * (1 - tol)
    return TubeCheck(
        tube=tube,
        ok=ok,
        c_hat=c_hat,
        wall_clear=wall_clear,
        c_used=min(tube.c, c_hat * (1 + tol)),
        component_sizes=sizes,
        points=pts[comp],
    )


def components_disjoint(checks: Sequence[TubeCheck]) -> bool:
    """Sampled collision test: no component sample of one tube lies inside another tube."""
    for i, a in enumerate(checks):
        for j, b in enumerate(checks):
            if i != j and np.any(b.tube.interior(a.points)):
                return False
    return True


@dataclass
class TubeFamily:
    name: str
    tubes: list
    disjoint: bool = True
    spec: Optional[DomainSpec] = None

    def upto(self, j_max: int) -> "TubeFamily":
        return replace(self, tubes=[t for t in self.tubes if t.index <= j_max])

    def scaled(self, lam: float) -> "TubeFamily":
        return replace(self, tubes=[t.scaled(lam) for t in self.tubes], spec=None)


@dataclass
class SeriesReport:
    s: float
    indices: list
    terms: list
    partial_sums: list
    ratios: list
    classification: str
    rule: str = (
        f"diverges if the last {TAIL} term ratios are >= {DIVERGE_RATIO} or the tail terms are nondecreasing; "
        f"converges if every tail ratio is <= {CONVERGE_RATIO}"
    )

    @property
    def tail_ratio(self) -> float:
        return self.ratios[-1] if self.ratios else float("nan")


def classify_series(terms: Sequence[float]) -> tuple[str, list]:
    terms = [float(v) for v in terms]
    ratios = [b / a if a > 0 else math.inf for a, b in zip(terms[:-1], terms[1:])]
    if len(terms) < 3:
        return INCONCLUSIVE, ratios
    tail = ratios[-TAIL:]
    tail_terms = terms[-(len(tail) + 1):]
    if (len(tail) >= TAIL and min(tail) >= DIVERGE_RATIO) or all(b >= a for a, b in zip(tail_terms[:-1], tail_terms[1:])):
        return DIVERGES, ratios
    if max(tail) <= CONVERGE_RATIO:
        return CONVERGES, ratios
    return INCONCLUSIVE, ratios


def series_report(indices, terms, s: float) -> SeriesReport:
    terms = [float(v) for v in terms]
    label, ratios = classify_series(terms)
    return SeriesReport(
        s=float(s),
        indices=list(indices),
        terms=terms,
        partial_sums=np.cumsum(terms).tolist() if terms else [],
        ratios=ratios,
        classification=label,
    )


def family_series(family: TubeFamily, s: float, j_max: Optional[int] = None) -> SeriesReport:
    """E_T = sum of c r^n (l/r)^(s+1) over the family, in index order."""
    tubes = sorted(family.tubes if j_max is None else family.upto(j_max).tubes, key=lambda t: t.index)
    return series_report([t.index for t in tubes], [t.term(s) for t in tubes], s)


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------


def _check_j(j_max: int, start: int):
    if j_max < 3:
        raise TubeError("tube families need jMax >= 3")
    return range(start, j_max + 1)


def rooms_halls_tubes(j_max: int) -> TubeFamily:
    """Vertical tubes [x'_j, x_{j+1}] x [1/2, 3/4] inside the right-hand rooms."""
    tubes = []
    for j in _check_j(j_max, 1):
        r = 2.0 ** (-(j + 3))
        tubes.append(Tube((RoomsAndHalls.x_prime(j) + r, 0.5), (0.0, 1.0), 0.25, r, 1.0, j))
    return TubeFamily("rooms_halls", tubes, True, RoomsAndHalls(j_max=j_max))


def disk_rooms_tubes(j_max: int) -> TubeFamily:
    """Rectangles on the chord z_j z_{j+1} reaching the circle of radius 2."""
    tubes = []
    for j in _check_j(j_max, 1):
        mid, _, normal, half, depth = DiskAndRooms.room_frame(j, 2.0)
        tubes.append(Tube(tuple(mid), tuple(normal), depth, half, 1.0, j))
    return TubeFamily("disk_rooms", tubes, True, DiskAndRooms(j_max=j_max))


def disk_rooms_bound_term(j: int, s: float) -> float:
    """Series term with r = pi / 2^(j+1) and l = 1, a lower bound for the exact term."""
    r = math.pi / 2.0 ** (j + 1)
    return r ** 2 * (1.0 / r) ** (s + 1)


def cusp_tubes(alpha: float, n: int, j_max: int) -> TubeFamily:
    """Tubes over [2^-j, 2^-(j-1)] with radius b^alpha and c = (a/b)^(alpha n), j >= 3."""
    tubes = []
    for j in _check_j(j_max, 3):
        a, b = 2.0 ** (-j), 2.0 ** (-(j - 1))
        axis = (1.0,) + (0.0,) * (n - 1)
        tubes.append(Tube((a,) + (0.0,) * (n - 1), axis, b - a, b ** alpha, (a / b) ** (alpha * n), j))
    return TubeFamily("cusp", tubes, True, Cusp(alpha=alpha, n=n))


def cusp_term_ratio(alpha: float, n: int, s: float) -> float:
    return 2.0 ** ((alpha - 1) * (s - n + 1) - n)


def block_tubes(n: int, j_max: int) -> TubeFamily:
    """One tube per generation j around the stack of its 2^j cubes of edge 3^-j.

    The radius circumscribes the square cross-section, so the wall touches
    the blocks only along their edges; c is the cross-section fraction.
    """
    tower = BlockTower(n=n, m_max=2 ** (j_max + 1) - 1)
    tubes = []
    for j in _check_j(j_max, 1):
        e = 3.0 ** (-j)
        base = tower.block(2 ** j)[0][-1]
        r = e * math.sqrt(n - 1) / 2
        c = e ** (n - 1) / (unit_ball_volume(n - 1) * r ** (n - 1))
        axis = (0.0,) * (n - 1) + (1.0,)
        tubes.append(Tube((0.5,) * (n - 1) + (base,), axis, (2.0 ** j) * e, r, min(c, 1.0), j))
    return TubeFamily("block", tubes, True, tower)


def block_term_ratio(n: int, s: float) -> float:
    return 2.0 ** (s + 1) / 3.0 ** n


BUILDERS = {
    "rooms_halls": lambda p: rooms_halls_tubes(int(p["j_max"])),
    "disk_rooms": lambda p: disk_rooms_tubes(int(p["j_max"])),
    "cusp": lambda p: cusp_tubes(float(p["alpha"]), int(p.get("n", 2)), int(p["j_max"])),
    "block": lambda p: block_tubes(int(p.get("n", 2)), int(p["j_max"])),
}


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------


@dataclass
class Certificate:
    certified: bool
    s: float
    reason: str
    series: Optional[SeriesReport]
    checks: list = field(default_factory=list)

    def to_text(self) -> str:
        lines = [f"certified: {str(self.certified).lower()}", f"s: {self.s:.17g}", f"reason: {self.reason}"]
        if self.series is not None:
            lines.append(f"rule: {self.series.rule}")
            lines.append(f"classification: {self.series.classification}")
        lines.append("tubes:")
        for chk in self.checks:
            t = chk.tube
            lines.append(
                f"  - index {t.index}: end_a {list(t.end_a)}, axis {list(t.axis)}, l {t.l:.17g}, r {t.r:.17g}, "
                f"c {t.c:.17g}, c_hat {chk.c_hat:.6g}, wall_clear {str(chk.wall_clear).lower()}"
            )
        if self.series is not None:
            lines.append("terms:")
            for i, term, ps in zip(self.series.indices, self.series.terms, self.series.partial_sums):
                lines.append(f"  - {i}: {term:.17g} (partial {ps:.17g})")
        return "\n".join(lines) + "\n"


def certify_not_averaging(
    spec: Optional[DomainSpec],
    family: TubeFamily,
    s: float,
    n_slices: int = 64,
    samples: int = 64,
    tol: float = 0.02,
) -> Certificate:
    """Certificate when every tube verifies, components are disjoint and E_T diverges."""
    spec = spec if spec is not None else family.spec
    if spec is None:
        raise TubeError("no domain to verify the tubes against")
    checks = []
    for tube in family.tubes:
        try:
            chk = verify_essential(spec, tube, n_slices=n_slices, samples=samples, tol=tol)
        except TubeError as exc:
            return Certificate(False, s, f"tube {tube.index} could not be verified: {exc}", None, checks)
        checks.append(chk)
        if not chk.ok:
            why = "wall is not clear" if not chk.wall_clear else f"c_hat {chk.c_hat:.4g} below claimed c {tube.c:.4g}"
            return Certificate(False, s, f"tube {tube.index} is not essential: {why}", None, checks)
    if family.disjoint and not components_disjoint(checks):
        return Certificate(False, s, "tube components overlap", None, checks)
    used = [replace(chk.tube, c=chk.c_used) for chk in checks]
    series = series_report([t.index for t in used], [t.term(s) for t in used], s)
    if series.classification != DIVERGES:
        return Certificate(False, s, f"E_T series {series.classification} (tail ratio {series.tail_ratio:.6g})", series, checks)
    return Certificate(True, s, "E_T diverges over verified, disjoint essential tubes", series, checks)


def numeric_tube_integral(qh_field, tube: Tube, s: float) -> float:
    """Grid integral of k^s over the inside cells whose centers lie in the tube."""
    r = qh_field.raster
    idx = np.nonzero(r.mask)
    pts = r.centers(idx)
    sel = tube.interior(pts)
    k = qh_field.k[idx][sel]
    if np.any(~np.isfinite(k)):
        raise TubeError("tube contains cells unreachable from the base point")
    return float(np.sum(k ** s) * r.cell_volume)
