"""Domain catalog, exact membership tests and rasterization.

Every domain family is a frozen dataclass with a vectorized ``contains``.
Points are arrays whose last axis is the ambient dimension.  Rasterization
samples membership at cell centers and computes the distance to the
boundary with an exact Euclidean distance transform of the complement mask,
clamped from above by whatever closed-form distance the family provides.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np
import yaml
from scipy import ndimage


class GeometryError(ValueError):
    """Raised for invalid specs, dimension mismatches and empty rasters."""


def unit_ball_volume(k: int) -> float:
    """Volume of the unit ball in R^k (V_1 = 2, V_2 = pi)."""
    if k == 0:
        return 1.0
    return math.pi ** (k / 2) / math.gamma(k / 2 + 1)


def _as_points(z, n: int) -> np.ndarray:
    pts = np.asarray(z, dtype=float)
    if pts.shape[-1] != n:
        raise GeometryError(f"point dimension {pts.shape[-1]} does not match domain dimension {n}")
    return pts


# ---------------------------------------------------------------------------
# box helpers
# ---------------------------------------------------------------------------

Box = tuple  # ((lo_1, ..., lo_n), (hi_1, ..., hi_n))


def _boxes_array(boxes: Sequence[Box]) -> np.ndarray:
    arr = np.asarray(boxes, dtype=float)
    if arr.ndim != 3 or arr.shape[1] != 2:
        raise GeometryError("boxes must be a sequence of (lo, hi) pairs")
    if np.any(arr[:, 1] <= arr[:, 0]):
        raise GeometryError("every box needs hi > lo on each axis")
    return arr


def box_union_interior(boxes: np.ndarray, pts: np.ndarray, chunk: int = 65536) -> np.ndarray:
    """Membership in the interior of a finite union of closed boxes.

    A point is interior iff every open orthant around it is locally covered
    by a single box that contains the point and extends past it in that
    orthant's directions; boxes touching the point only along a face cover
    a null set of the orthant.
    """
    pts = np.asarray(pts, dtype=float)
    flat = pts.reshape(-1, pts.shape[-1])
    n = flat.shape[1]
    lo = boxes[None, :, 0, :]
    hi = boxes[None, :, 1, :]
    out = np.empty(len(flat), dtype=bool)
    signs = list(itertools.product((False, True), repeat=n))
    for start in range(0, len(flat), chunk):
        p = flat[start:start + chunk, None, :]
        closed = np.all((p >= lo) & (p <= hi), axis=2)
        below = p > lo
        above = p < hi
        ok = np.ones(len(p), dtype=bool)
        for sign in signs:
            ext = np.where(np.asarray(sign)[None, None, :], above, below)
            ok &= np.any(closed & np.all(ext, axis=2), axis=1)
            if not ok.any():
                break
        out[start:start + chunk] = ok
    return out.reshape(pts.shape[:-1])


def _outside_cells(boxes: np.ndarray) -> np.ndarray:
    """Closed cells of the box arrangement that lie outside the union and
    touch it; their union contains the part of the complement nearest to
    any interior point."""
    n = boxes.shape[2]
    coords = [np.unique(np.concatenate([boxes[:, 0, i], boxes[:, 1, i]])) for i in range(n)]
    edges = [np.concatenate([[-np.inf], c, [np.inf]]) for c in coords]
    shape = tuple(len(e) - 1 for e in edges)
    mids = []
    for e in edges:
        lo, hi = e[:-1], e[1:]
        m = 0.5 * (np.where(np.isinf(lo), hi - 1.0, lo) + np.where(np.isinf(hi), lo + 1.0, hi))
        mids.append(m)
    grid = np.stack(np.meshgrid(*mids, indexing="ij"), axis=-1)
    inside = np.zeros(shape, dtype=bool)
    flat = grid.reshape(-1, n)
    inside_flat = np.any(
        np.all((flat[:, None, :] > boxes[None, :, 0, :]) & (flat[:, None, :] < boxes[None, :, 1, :]), axis=2),
        axis=1,
    )
    inside = inside_flat.reshape(shape)
    # outside cells sharing at least a vertex with an inside cell
    near = ndimage.binary_dilation(inside, structure=np.ones((3,) * n, dtype=bool)) & ~inside
    idx = np.argwhere(near)
    lo = np.stack([edges[i][idx[:, i]] for i in range(n)], axis=1)
    hi = np.stack([edges[i][idx[:, i] + 1] for i in range(n)], axis=1)
    return np.stack([lo, hi], axis=1)


def box_union_distance(boxes: np.ndarray, pts: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """Exact Euclidean distance from interior points to the complement of a
    union of boxes."""
    cells = _outside_cells(boxes)
    flat = np.asarray(pts, dtype=float).reshape(-1, boxes.shape[2])
    out = np.empty(len(flat))
    lo = cells[None, :, 0, :]
    hi = cells[None, :, 1, :]
    for start in range(0, len(flat), chunk):
        p = flat[start:start + chunk, None, :]
        gap = np.maximum(np.maximum(lo - p, p - hi), 0.0)
        out[start:start + chunk] = np.sqrt(np.min(np.sum(gap * gap, axis=2), axis=1))
    return out.reshape(np.shape(pts)[:-1])


# ---------------------------------------------------------------------------
# domain families
# ---------------------------------------------------------------------------


class DomainSpec:
    """Common interface of the catalog families."""

    kind: str = ""

    @property
    def ndim(self) -> int:  # pragma: no cover - overridden
        raise NotImplementedError

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:  # pragma: no cover
        raise NotImplementedError

    def _contains(self, pts: np.ndarray) -> np.ndarray:  # pragma: no cover
        raise NotImplementedError

    def contains(self, z) -> np.ndarray | bool:
        pts = _as_points(z, self.ndim)
        res = self._contains(pts)
        return bool(res) if pts.ndim == 1 else res

    def distance_bound(self, pts: np.ndarray) -> Optional[np.ndarray]:
        """Closed-form upper bound on the distance to the boundary, or None."""
        return None

    def boxes(self) -> Optional[np.ndarray]:
        """Box decomposition when the domain is the interior of a box union."""
        return None

    # truncation -----------------------------------------------------------
    def truncation_value(self):
        """Current truncation depth (None for families without features)."""
        return None

    def with_truncation(self, value) -> "DomainSpec":
        return self

    def max_resolved_truncation(self, h: float):
        """Deepest truncation whose features all have size >= 2h."""
        return None

    def dropped_measure(self, value) -> float:
        """Upper bound on the measure removed by truncating at ``value``."""
        return 0.0

    def window(self, pts: np.ndarray, value) -> np.ndarray:
        """Cells belonging to the truncation-``value`` part of the domain."""
        return np.ones(np.shape(pts)[:-1], dtype=bool)

    def deeper(self, a, b) -> bool:
        """True when truncation ``b`` is strictly deeper than ``a``."""
        return b > a

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class UnitCube(DomainSpec):
    """The open unit cube (0, 1)^n.

    Its truncation axis is the Whitney layer index: depth ``t`` keeps the
    points whose sup-distance from the center is at most ``(1 - 3^-t/2)/2``.
    """

    n: int = 2
    kind = "UnitCube"

    def __post_init__(self):
        if self.n not in (2, 3):
            raise GeometryError("UnitCube supports n in {2, 3}")

    @property
    def ndim(self):
        return self.n

    def bounds(self):
        return np.zeros(self.n), np.ones(self.n)

    def _contains(self, pts):
        return np.all((pts > 0.0) & (pts < 1.0), axis=-1)

    def distance_bound(self, pts):
        return np.min(np.minimum(pts, 1.0 - pts), axis=-1)

    def boxes(self):
        return np.array([[np.zeros(self.n), np.ones(self.n)]])

    def window(self, pts, value):
        half = 0.5 * (1.0 - 0.5 * 3.0 ** (-int(value)))
        return np.max(np.abs(pts - 0.5), axis=-1) <= half + 1e-15

    def to_dict(self):
        return {"kind": self.kind, "n": self.n}


@dataclass(frozen=True)
class Ball(DomainSpec):
    """Open Euclidean ball; used for the disk oracle."""

    center: tuple = (0.0, 0.0)
    radius: float = 1.0
    kind = "Ball"

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if len(self.center) not in (2, 3) or self.radius <= 0:
            raise GeometryError("Ball needs n in {2, 3} and radius > 0")

    @property
    def ndim(self):
        return len(self.center)

    def bounds(self):
        c = np.asarray(self.center)
        return c - self.radius, c + self.radius

    def _contains(self, pts):
        return np.linalg.norm(pts - np.asarray(self.center), axis=-1) < self.radius

    def distance_bound(self, pts):
        return self.radius - np.linalg.norm(pts - np.asarray(self.center), axis=-1)

    def to_dict(self):
        return {"kind": self.kind, "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Cusp(DomainSpec):
    """{0 < x < 1, |y| < x^alpha}, optionally cut at x > x_min.

    Truncation values are the cut positions ``x_min``; smaller is deeper.
    """

    alpha: float = 2.0
    n: int = 2
    x_min: float = 0.0
    kind = "Cusp"

    def __post_init__(self):
        if not self.alpha > 1:
            raise GeometryError("Cusp requires alpha > 1")
        if self.n not in (2, 3):
            raise GeometryError("Cusp supports n in {2, 3}")
        if not 0.0 <= self.x_min < 1.0:
            raise GeometryError("Cusp cut x_min must lie in [0, 1)")

    @property
    def ndim(self):
        return self.n

    def bounds(self):
        lo = np.full(self.n, -1.0)
        lo[0] = self.x_min
        return lo, np.ones(self.n)

    def _radial(self, pts):
        return np.linalg.norm(pts[..., 1:], axis=-1)

    def _contains(self, pts):
        x = pts[..., 0]
        xs = np.clip(x, 0.0, None)
        return (x > self.x_min) & (x > 0.0) & (x < 1.0) & (self._radial(pts) < xs ** self.alpha)

    def distance_bound(self, pts):
        x = pts[..., 0]
        gap = np.clip(x, 0.0, None) ** self.alpha - self._radial(pts)
        bound = np.minimum(gap, 1.0 - x)
        if self.x_min > 0:
            bound = np.minimum(bound, x - self.x_min)
        return bound

    def truncation_value(self):
        return self.x_min

    def with_truncation(self, value):
        return replace(self, x_min=float(value))

    def max_resolved_truncation(self, h):
        # cross-section diameter 2 x^alpha must be at least 2h
        return max(self.x_min, h ** (1.0 / self.alpha))

    def dropped_measure(self, value):
        k = self.alpha * (self.n - 1) + 1
        return unit_ball_volume(self.n - 1) * value ** k / k

    def window(self, pts, value):
        return pts[..., 0] >= value

    def deeper(self, a, b):
        return b < a

    def to_dict(self):
        return {"kind": self.kind, "alpha": self.alpha, "n": self.n, "x_min": self.x_min}


def _rooms_halls_boxes(j_max: int) -> list[tuple[Box, int]]:
    """Closed boxes of the right half with their feature index."""
    xs = lambda j: 1.0 - 2.0 ** (-j)  # noqa: E731
    xp = lambda j: 0.0 if j == 0 else xs(j) + 2.0 ** (-(j + 2))  # noqa: E731
    out = []
    for j in range(j_max + 1):
        out.append((((xp(j), 0.0), (xs(j + 1), 1.0)), j))
        if j >= 1:
            out.append((((xs(j), 0.0), (xp(j), 1.0 / math.factorial(j + 1))), j))
    return out


@dataclass(frozen=True)
class RoomsAndHalls(DomainSpec):
    """Rooms R_0..R_J joined by halls H_1..H_J, mirrored by (x, y) -> (-x, y)."""

    j_max: int = 4
    kind = "RoomsAndHalls"

    def __post_init__(self):
        if int(self.j_max) != self.j_max or self.j_max < 1:
            raise GeometryError("RoomsAndHalls needs integer j_max >= 1")

    @property
    def ndim(self):
        return 2

    @staticmethod
    def x(j: int) -> float:
        return 1.0 - 2.0 ** (-j)

    @staticmethod
    def x_prime(j: int) -> float:
        return 0.0 if j == 0 else 1.0 - 2.0 ** (-j) + 2.0 ** (-(j + 2))

    def room(self, j: int) -> Box:
        return ((self.x_prime(j), 0.0), (self.x(j + 1), 1.0))

    def hall(self, j: int) -> Box:
        if j < 1:
            raise GeometryError("halls start at j = 1")
        return ((self.x(j), 0.0), (self.x_prime(j), 1.0 / math.factorial(j + 1)))

    def labelled_boxes(self) -> list[tuple[Box, int]]:
        right = _rooms_halls_boxes(self.j_max)
        left = [(((-hi[0], lo[1]), (-lo[0], hi[1])), j) for (lo, hi), j in right]
        return right + left

    def boxes(self):
        return _boxes_array([b for b, _ in self.labelled_boxes()])

    def bounds(self):
        return np.array([-self.x(self.j_max + 1), 0.0]), np.array([self.x(self.j_max + 1), 1.0])

    def _contains(self, pts):
        return box_union_interior(self.boxes(), pts)

    def distance_bound(self, pts):
        return box_union_distance(self.boxes(), pts)

    def truncation_value(self):
        return self.j_max

    def with_truncation(self, value):
        return replace(self, j_max=int(value))

    @staticmethod
    def feature_size(j: int) -> float:
        size = 2.0 ** (-(j + 2))
        if j >= 1:
            size = min(size, 1.0 / math.factorial(j + 1))
        return size

    def max_resolved_truncation(self, h):
        j = 0
        while j + 1 <= self.j_max and self.feature_size(j + 1) >= 2 * h:
            j += 1
        return j

    def dropped_measure(self, value):
        total = 0.0
        for j in range(int(value) + 1, self.j_max + 1):
            total += 2.0 ** (-(j + 2)) * (1.0 + 1.0 / math.factorial(j + 1))
        return 2.0 * total

    def feature_index(self, pts) -> np.ndarray:
        """Room/hall index j of each point (mirrored half included)."""
        ax = np.abs(np.asarray(pts, dtype=float)[..., 0])
        j = np.zeros(ax.shape, dtype=int)
        for k in range(1, self.j_max + 1):
            j[ax >= self.x(k)] = k
        return j

    def window(self, pts, value):
        return self.feature_index(pts) <= int(value)

    def to_dict(self):
        return {"kind": self.kind, "j_max": int(self.j_max)}


@dataclass(frozen=True)
class DiskAndRooms(DomainSpec):
    """Unit disk with rectangular rooms R_j on the chords z_j z_{j+1}.

    Each room is extruded outward along the chord normal until its outer two
    vertices lie on the circle of radius ``outer``.
    """

    j_max: int = 6
    outer: float = 3.0
    kind = "DiskAndRooms"

    def __post_init__(self):
        if int(self.j_max) != self.j_max or self.j_max < 1:
            raise GeometryError("DiskAndRooms needs integer j_max >= 1")

    @property
    def ndim(self):
        return 2

    @staticmethod
    def theta(j: int) -> float:
        return (1.0 - 0.5 ** (j - 1)) * math.pi

    @classmethod
    def vertex(cls, j: int) -> np.ndarray:
        t = cls.theta(j)
        return np.array([math.cos(t), math.sin(t)])

    @classmethod
    def room_frame(cls, j: int, radius: float):
        """(chord midpoint, chord unit vector, outward normal, half chord, depth)."""
        # closed form in the half angle; b - a cancels badly for small rooms
        phi = 0.5 * (cls.theta(j) + cls.theta(j + 1))
        gap = 0.5 * (cls.theta(j + 1) - cls.theta(j))
        normal = np.array([math.cos(phi), math.sin(phi)])
        t = np.array([-math.sin(phi), math.cos(phi)])
        half = math.sin(gap)
        mid = math.cos(gap) * normal
        depth = math.sqrt(radius ** 2 - half ** 2) - math.cos(gap)
        return mid, t, normal, half, depth

    def _room_coords(self, j, pts, radius):
        mid, t, normal, half, depth = self.room_frame(j, radius)
        d = pts - mid
        return d @ t, d @ normal, half, depth

    def bounds(self):
        return np.array([-self.outer, -1.0]), np.array([self.outer, self.outer])

    def _contains(self, pts):
        inside = np.linalg.norm(pts, axis=-1) < 1.0
        for j in range(1, self.j_max + 1):
            u, v, half, depth = self._room_coords(j, pts, self.outer)
            inside |= (np.abs(u) < half) & (v > 0.0) & (v < depth)
        return inside

    def distance_bound(self, pts):
        # room walls beyond the chord are boundary; disk points fall back to the transform
        bound = np.full(pts.shape[:-1], np.inf)
        for j in range(1, self.j_max + 1):
            u, v, half, depth = self._room_coords(j, pts, self.outer)
            hit = (np.abs(u) < half) & (v > 0.0) & (v < depth)
            bound = np.where(hit, np.minimum(bound, np.minimum(half - np.abs(u), depth - v)), bound)
        return bound

    def truncation_value(self):
        return self.j_max

    def with_truncation(self, value):
        return replace(self, j_max=int(value))

    def max_resolved_truncation(self, h):
        j = 1
        while j + 1 <= self.j_max and 2 * math.sin(math.pi / 2 ** (j + 2)) >= 2 * h:
            j += 1
        return j

    def dropped_measure(self, value):
        total = 0.0
        for j in range(int(value) + 1, self.j_max + 1):
            _, _, _, half, depth = self.room_frame(j, self.outer)
            total += 2 * half * depth
        return total

    def feature_index(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        idx = np.zeros(pts.shape[:-1], dtype=int)
        for j in range(1, self.j_max + 1):
            u, v, half, depth = self._room_coords(j, pts, self.outer)
            idx[(np.abs(u) < half) & (v > 0.0) & (v < depth) & (np.linalg.norm(pts, axis=-1) >= 1.0)] = j
        return idx

    def window(self, pts, value):
        return self.feature_index(pts) <= int(value)

    def to_dict(self):
        return {"kind": self.kind, "j_max": int(self.j_max), "outer": self.outer}


def block_generation(m: int) -> int:
    return int(m).bit_length() - 1


@dataclass(frozen=True)
class BlockTower(DomainSpec):
    """Unit cube with a centered tower of blocks Omega_2..Omega_mMax on top.

    Blocks 2^j..2^(j+1)-1 have edge 3^-j and are stacked along the last axis.
    """

    n: int = 2
    m_max: int = 7
    kind = "BlockTower"

    def __post_init__(self):
        if self.n not in (2, 3):
            raise GeometryError("BlockTower supports n in {2, 3}")
        if int(self.m_max) != self.m_max or self.m_max < 1:
            raise GeometryError("BlockTower needs integer m_max >= 1")

    @property
    def ndim(self):
        return self.n

    @staticmethod
    def edge(m: int) -> float:
        return 3.0 ** (-block_generation(m))

    def block(self, m: int) -> Box:
        if m < 1:
            raise GeometryError("blocks are numbered from 1")
        if m == 1:
            return (tuple([0.0] * self.n), tuple([1.0] * self.n))
        base = 1.0 + sum(self.edge(k) for k in range(2, m))
        e = self.edge(m)
        lo = [0.5 - e / 2] * (self.n - 1) + [base]
        hi = [0.5 + e / 2] * (self.n - 1) + [base + e]
        return tuple(lo), tuple(hi)

    def boxes(self):
        return _boxes_array([self.block(m) for m in range(1, self.m_max + 1)])

    def bounds(self):
        b = self.boxes()
        return b[:, 0].min(axis=0), b[:, 1].max(axis=0)

    def _contains(self, pts):
        return box_union_interior(self.boxes(), pts)

    def distance_bound(self, pts):
        return box_union_distance(self.boxes(), pts)

    def truncation_value(self):
        return self.m_max

    def with_truncation(self, value):
        return replace(self, m_max=int(value))

    def max_resolved_truncation(self, h):
        m = 1
        while m + 1 <= self.m_max and self.edge(m + 1) >= 2 * h:
            m += 1
        return m

    def dropped_measure(self, value):
        return sum(self.edge(m) ** self.n for m in range(int(value) + 1, self.m_max + 1))

    def block_index(self, pts) -> np.ndarray:
        y = np.asarray(pts, dtype=float)[..., -1]
        idx = np.ones(y.shape, dtype=int)
        for m in range(2, self.m_max + 1):
            idx[y >= self.block(m)[0][-1]] = m
        return idx

    def window(self, pts, value):
        return self.block_index(pts) <= int(value)

    def to_dict(self):
        return {"kind": self.kind, "n": self.n, "m_max": int(self.m_max)}


@dataclass(frozen=True)
class BoxUnion(DomainSpec):
    """Interior of a finite union of closed axis-aligned boxes."""

    box_list: tuple = ()
    kind = "BoxUnion"

    def __post_init__(self):
        arr = _boxes_array(self.box_list)
        object.__setattr__(self, "box_list", tuple((tuple(b[0]), tuple(b[1])) for b in arr.tolist()))
        if arr.shape[2] not in (2, 3):
            raise GeometryError("BoxUnion supports n in {2, 3}")

    @property
    def ndim(self):
        return len(self.box_list[0][0])

    def boxes(self):
        return _boxes_array(self.box_list)

    def bounds(self):
        b = self.boxes()
        return b[:, 0].min(axis=0), b[:, 1].max(axis=0)

    def _contains(self, pts):
        return box_union_interior(self.boxes(), pts)

    def distance_bound(self, pts):
        return box_union_distance(self.boxes(), pts)

    def to_dict(self):
        return {"kind": self.kind, "boxes": [[list(lo), list(hi)] for lo, hi in self.box_list]}


@dataclass(frozen=True)
class UnionOf(DomainSpec):
    """Union of translated member domains; membership is membership in any member."""

    members: tuple = ()
    kind = "UnionOf"

    def __post_init__(self):
        norm = []
        for item in self.members:
            spec, offset = item if isinstance(item, tuple) and len(item) == 2 and isinstance(item[0], DomainSpec) else (item, None)
            if offset is None:
                offset = (0.0,) * spec.ndim
            norm.append((spec, tuple(float(o) for o in offset)))
        if not norm:
            raise GeometryError("UnionOf needs at least one member")
        dims = {s.ndim for s, _ in norm}
        if len(dims) != 1 or any(len(o) != s.ndim for s, o in norm):
            raise GeometryError("UnionOf members must share a dimension")
        object.__setattr__(self, "members", tuple(norm))

    @property
    def ndim(self):
        return self.members[0][0].ndim

    def bounds(self):
        los, his = [], []
        for spec, off in self.members:
            lo, hi = spec.bounds()
            los.append(lo + np.asarray(off))
            his.append(hi + np.asarray(off))
        return np.min(los, axis=0), np.max(his, axis=0)

    def _contains(self, pts):
        res = np.zeros(pts.shape[:-1], dtype=bool)
        for spec, off in self.members:
            res |= spec._contains(pts - np.asarray(off))
        return res

    def boxes(self):
        parts = []
        for spec, off in self.members:
            b = spec.boxes()
            if b is None:
                return None
            parts.append(b + np.asarray(off)[None, None, :])
        return np.concatenate(parts)

    def distance_bound(self, pts):
        b = self.boxes()
        return None if b is None else box_union_distance(b, pts)

    def to_dict(self):
        return {
            "kind": self.kind,
            "members": [{"spec": s.to_dict(), "offset": list(o)} for s, o in self.members],
        }


def translated(spec: DomainSpec, offset: Iterable[float]) -> UnionOf:
    return UnionOf(((spec, tuple(offset)),))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def spec_from_dict(d: dict) -> DomainSpec:
    d = dict(d)
    kind = d.pop("kind", None)
    try:
        if kind == "UnitCube":
            return UnitCube(n=int(d.get("n", 2)))
        if kind == "Ball":
            return Ball(center=tuple(d.get("center", (0.0, 0.0))), radius=float(d.get("radius", 1.0)))
        if kind == "Cusp":
            return Cusp(alpha=float(d["alpha"]), n=int(d.get("n", 2)), x_min=float(d.get("x_min", 0.0)))
        if kind == "RoomsAndHalls":
            return RoomsAndHalls(j_max=int(d["j_max"]))
        if kind == "DiskAndRooms":
            return DiskAndRooms(j_max=int(d["j_max"]), outer=float(d.get("outer", 3.0)))
        if kind == "BlockTower":
            return BlockTower(n=int(d.get("n", 2)), m_max=int(d["m_max"]))
        if kind == "BoxUnion":
            return BoxUnion(box_list=tuple((tuple(lo), tuple(hi)) for lo, hi in d["boxes"]))
        if kind == "UnionOf":
            return UnionOf(tuple((spec_from_dict(m["spec"]), tuple(m.get("offset", ()) or ())) for m in d["members"]))
    except KeyError as exc:
        raise GeometryError(f"{kind}: missing field {exc.args[0]!r}") from None
    raise GeometryError(f"unknown spec kind {kind!r}")


def dump_spec(spec: DomainSpec) -> str:
    return yaml.safe_dump(spec.to_dict(), sort_keys=True)


def load_spec(text: str) -> DomainSpec:
    return spec_from_dict(yaml.safe_load(text))


def contains(spec: DomainSpec, z) -> bool | np.ndarray:
    return spec.contains(z)


# ---------------------------------------------------------------------------
# truncation and rasterization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Truncation:
    """Result of the 2h feature policy."""

    spec: DomainSpec
    requested: object
    effective: object
    dropped_measure: float

    @property
    def changed(self) -> bool:
        return self.requested != self.effective


def truncation_policy(spec: DomainSpec, h: float) -> Truncation:
    """Drop rooms, halls, blocks or the cusp tip whose smallest dimension is < 2h."""
    if h <= 0:
        raise GeometryError("h must be positive")
    requested = spec.truncation_value()
    if requested is None:
        return Truncation(spec, None, None, 0.0)
    effective = spec.max_resolved_truncation(h)
    eff_spec = spec.with_truncation(effective)
    if isinstance(spec, Cusp):
        dropped = spec.dropped_measure(effective) if effective > 0 else 0.0
    else:
        dropped = spec.dropped_measure(effective)
    return Truncation(eff_spec, requested, effective, dropped)


@dataclass(frozen=True, eq=False)
class RasterDomain:
    """Cell-center sampled domain on a regular grid.

    ``dist`` is zero outside the mask; ``origin`` is the lower corner of
    cell (0, ..., 0).  The grid always carries at least one outside cell
    on every side so that neighbor lookups never leave the array.
    """

    spec: DomainSpec
    truncation: Truncation
    h: float
    origin: np.ndarray
    mask: np.ndarray
    dist: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.mask.ndim

    @property
    def shape(self) -> tuple:
        return self.mask.shape

    @property
    def effective_spec(self) -> DomainSpec:
        return self.truncation.spec

    @property
    def cell_volume(self) -> float:
        return self.h ** self.n

    @property
    def n_inside(self) -> int:
        return int(self.mask.sum())

    @property
    def volume_estimate(self) -> float:
        return self.n_inside * self.cell_volume

    def centers(self, index=None) -> np.ndarray:
        """Cell centers; all cells if ``index`` is None, else for the given
        tuple of index arrays (as returned by ``np.nonzero``)."""
        if index is None:
            axes = [self.origin[i] + (np.arange(s) + 0.5) * self.h for i, s in enumerate(self.shape)]
            return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        return np.stack([self.origin[i] + (np.asarray(ix) + 0.5) * self.h for i, ix in enumerate(index)], axis=-1)

    def inside_centers(self) -> np.ndarray:
        return self.centers(np.nonzero(self.mask))

    def cell_index(self, z) -> tuple:
        z = _as_points(z, self.n)
        return tuple(int(math.floor((z[i] - self.origin[i]) / self.h)) for i in range(self.n))

    def nearest_inside_cell(self, z) -> tuple:
        """Inside cell whose center is nearest to z (ties: lexicographic)."""
        z = _as_points(z, self.n)
        idx = self.cell_index(z)
        if all(0 <= idx[i] < self.shape[i] for i in range(self.n)) and self.mask[idx]:
            return idx
        inside = np.argwhere(self.mask)
        c = self.origin + (inside + 0.5) * self.h
        d2 = np.sum((c - z) ** 2, axis=1)
        return tuple(int(v) for v in inside[int(np.argmin(d2))])

    def same_grid(self, other: "RasterDomain") -> bool:
        return (
            self.shape == other.shape
            and self.h == other.h
            and np.array_equal(self.origin, other.origin)
        )

    # export ----------------------------------------------------------------
    def header(self) -> dict:
        return {
            "n": self.n,
            "h": self.h,
            "origin": [float(o) for o in self.origin],
            "dims": list(self.shape),
            "spec": self.spec.to_dict(),
            "truncation": {
                "requested": self.truncation.requested,
                "effective": self.truncation.effective,
                "dropped_measure": self.truncation.dropped_measure,
            },
        }

    def write_mask(self, stem) -> None:
        """Write ``<stem>.hdr`` (YAML header) and ``<stem>.mask`` (uint8, C order)."""
        stem = str(stem)
        with open(stem + ".hdr", "w") as fh:
            yaml.safe_dump(self.header(), fh, sort_keys=True)
        self.mask.astype(np.uint8).tofile(stem + ".mask")

    def write_centers_csv(self, path) -> None:
        c = self.inside_centers()
        d = self.dist[self.mask]
        cols = ["x", "y", "z"][: self.n] + ["dist"]
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for row, dv in zip(c, d):
                fh.write(",".join(f"{v:.17g}" for v in row) + f",{dv:.17g}\n")


def read_mask(stem) -> tuple[dict, np.ndarray]:
    stem = str(stem)
    with open(stem + ".hdr") as fh:
        header = yaml.safe_load(fh)
    mask = np.fromfile(stem + ".mask", dtype=np.uint8).reshape(header["dims"]).astype(bool)
    return header, mask


def grid_for(spec: DomainSpec, h: float, pad: int = 1) -> tuple[np.ndarray, tuple]:
    """Origin and shape of the padded grid aligned to multiples of h."""
    lo, hi = spec.bounds()
    start = np.floor(np.asarray(lo) / h + 1e-9) - pad
    stop = np.ceil(np.asarray(hi) / h - 1e-9) + pad
    return start * h, tuple(int(v) for v in (stop - start))


def rasterize(
    spec: DomainSpec,
    h: float,
    *,
    origin=None,
    shape=None,
    policy: bool = True,
) -> RasterDomain:
    """Sample ``spec`` on a grid of spacing ``h``.

    ``origin``/``shape`` pin the grid (for aligned comparisons); otherwise
    the grid is the bounding box padded by one cell.  With ``policy`` the
    2h truncation rule is applied first and recorded.
    """
    if not h > 0:
        raise GeometryError("h must be positive")
    trunc = truncation_policy(spec, h) if policy else Truncation(spec, spec.truncation_value(), spec.truncation_value(), 0.0)
    eff = trunc.spec
    if origin is None or shape is None:
        origin, shape = grid_for(eff, h)
    origin = np.asarray(origin, dtype=float)
    shape = tuple(int(s) for s in shape)
    if len(shape) != spec.ndim:
        raise GeometryError("grid dimension does not match spec")
    if spec.ndim > 3:
        raise GeometryError("rasterization supports n <= 3")
    axes = [origin[i] + (np.arange(s) + 0.5) * h for i, s in enumerate(shape)]
    centers = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    mask = np.asarray(eff.contains(centers), dtype=bool)
    # keep a ring of outside cells so the stencil never leaves the array
    border = np.zeros(shape, dtype=bool)
    for ax in range(len(shape)):
        sl = [slice(None)] * len(shape)
        sl[ax] = 0
        border[tuple(sl)] = True
        sl[ax] = -1
        border[tuple(sl)] = True
    if np.any(mask & border):
        raise GeometryError("grid does not enclose the domain with an outside margin")
    if not mask.any():
        raise GeometryError(f"empty rasterization at h={h}: no cell center lies inside the domain")
    dist = ndimage.distance_transform_edt(mask, sampling=h)
    bound = eff.distance_bound(centers[mask])
    if bound is not None:
        dist[mask] = np.minimum(dist[mask], bound)
    if np.any(dist[mask] <= 0):
        raise GeometryError("non-positive distance to boundary at an inside cell")
    return RasterDomain(spec=spec, truncation=trunc, h=float(h), origin=origin, mask=mask, dist=dist)
