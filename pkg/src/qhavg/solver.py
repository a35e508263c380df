"""Discrete quasihyperbolic distance fields on rasterized domains.

The grid graph joins neighboring inside cells; the edge weight is the
trapezoid rule for the integral of 1/d along the straight segment between
the two cell centers.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import yaml
from scipy import ndimage

from . import kernels
from .geometry import RasterDomain


class SolveError(ValueError):
    pass


def stencil_offsets(n: int, stencil: str = "full") -> list[tuple[int, ...]]:
    """Neighbor offsets in lexicographic order (8/26 for full, 4/6 for axis)."""
    if stencil == "full":
        return [d for d in itertools.product((-1, 0, 1), repeat=n) if any(d)]
    if stencil == "axis":
        return [d for d in itertools.product((-1, 0, 1), repeat=n) if sum(map(abs, d)) == 1]
    raise SolveError(f"unknown stencil {stencil!r}")


def _flat_offsets(shape, offsets):
    strides = np.cumprod((1,) + tuple(shape[::-1]))[:-1][::-1]
    return np.array([int(np.dot(d, strides)) for d in offsets], dtype=np.intp)


@dataclass(frozen=True, eq=False)
class QhField:
    raster: RasterDomain
    base_cell: tuple
    base_point: np.ndarray
    requested_point: np.ndarray
    k: np.ndarray = field(repr=False)
    pred: np.ndarray = field(repr=False)
    stencil: str = "full"
    backend: str = kernels.BACKEND

    @property
    def h(self) -> float:
        return self.raster.h

    @property
    def reachable(self) -> np.ndarray:
        return np.isfinite(self.k) & self.raster.mask

    def value_at(self, z) -> float:
        return float(self.k[self.raster.nearest_inside_cell(z)])

    def edge_weight(self, p: tuple, q: tuple) -> float:
        r = self.raster
        length = r.h * math.sqrt(sum((a - b) ** 2 for a, b in zip(p, q)))
        return length * 0.5 * (1.0 / r.dist[p] + 1.0 / r.dist[q])

    def write_csv(self, path) -> None:
        r = self.raster
        idx = np.nonzero(r.mask)
        c = r.centers(idx)
        k = self.k[idx]
        cols = ["x", "y", "z"][: r.n] + ["k"]
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for row, kv in zip(c, k):
                fh.write(",".join(f"{v:.17g}" for v in row) + f",{kv:.17g}\n")

    def write_binary(self, stem) -> None:
        """``<stem>.hdr`` (raster header plus base point) and ``<stem>.field`` (float64, C order)."""
        stem = str(stem)
        header = self.raster.header()
        header["base_point"] = [float(v) for v in self.base_point]
        header["stencil"] = self.stencil
        with open(stem + ".hdr", "w") as fh:
            yaml.safe_dump(header, fh, sort_keys=True)
        np.asarray(self.k, dtype="<f8").tofile(stem + ".field")


def read_field(stem) -> tuple[dict, np.ndarray]:
    stem = str(stem)
    with open(stem + ".hdr") as fh:
        header = yaml.safe_load(fh)
    k = np.fromfile(stem + ".field", dtype="<f8").reshape(header["dims"])
    return header, k


def solve(raster: RasterDomain, z0, stencil: str = "full", backend: Optional[str] = None) -> QhField:
    """Quasihyperbolic distance from z0 to every inside cell of ``raster``."""
    z0 = np.asarray(z0, dtype=float)
    spec, eff = raster.spec, raster.effective_spec
    if not spec.contains(z0):
        raise SolveError(f"base point {z0.tolist()} lies outside the domain")
    if not eff.contains(z0):
        raise SolveError(
            f"base point {z0.tolist()} lies in a region dropped by truncation at h={raster.h} "
            f"(effective truncation {raster.truncation.effective})"
        )
    base = raster.nearest_inside_cell(z0)
    offsets = stencil_offsets(raster.n, stencil)
    flat_off = _flat_offsets(raster.shape, offsets)
    lengths = np.array([raster.h * math.sqrt(sum(d * d for d in off)) for off in offsets])
    inv_d = np.zeros(raster.mask.size)
    m = raster.mask.ravel()
    inv_d[m] = 1.0 / raster.dist.ravel()[m]
    fn = kernels.grid_dijkstra if backend is None else kernels.available_backends()[backend]
    source = int(np.ravel_multi_index(base, raster.shape))
    dist, pred = fn(np.ascontiguousarray(m, dtype=np.uint8), inv_d, flat_off, lengths, source)
    k = dist.reshape(raster.shape)
    k[~raster.mask] = np.inf
    return QhField(
        raster=raster,
        base_cell=base,
        base_point=raster.centers(tuple(np.array([b]) for b in base))[0],
        requested_point=z0,
        k=k,
        pred=pred,
        stencil=stencil,
        backend=backend or kernels.BACKEND,
    )


def component_labels(field: QhField) -> np.ndarray:
    structure = np.ones((3,) * field.raster.n, dtype=bool)
    if field.stencil == "axis":
        structure = ndimage.generate_binary_structure(field.raster.n, 1)
    labels, _ = ndimage.label(field.raster.mask, structure=structure)
    return labels


def geodesic(field: QhField, z) -> np.ndarray:
    """Cell-center polyline from the base cell to the cell nearest z."""
    r = field.raster
    cell = r.nearest_inside_cell(z)
    if not np.isfinite(field.k[cell]):
        label = int(component_labels(field)[cell])
        raise SolveError(f"cell {cell} is unreachable from the base point (component {label})")
    flat = int(np.ravel_multi_index(cell, r.shape))
    chain = [flat]
    while field.pred[chain[-1]] >= 0:
        chain.append(int(field.pred[chain[-1]]))
    chain.reverse()
    idx = np.unravel_index(np.array(chain), r.shape)
    return r.centers(idx)


def geodesic_cells(field: QhField, z) -> list[tuple]:
    r = field.raster
    pts = geodesic(field, z)
    return [r.cell_index(p) for p in pts]


def path_weight(field: QhField, cells: list[tuple]) -> float:
    """Sum of edge weights along ``cells``, accumulated base-first like the solver."""
    total = 0.0
    for p, q in zip(cells[:-1], cells[1:]):
        total = total + field.edge_weight(p, q)
    return total


@dataclass(frozen=True)
class MonotonicityReport:
    max_violation: float
    n_violations: int
    n_cells: int
    tol: float

    @property
    def ok(self) -> bool:
        return self.n_violations == 0


def subset_monotonicity(field_g: QhField, field_d: QhField, tol: float = 0.0) -> MonotonicityReport:
    """Check k_G <= k_D + tol on every reachable cell of D (D inside G)."""
    if not field_g.raster.same_grid(field_d.raster):
        raise SolveError("fields live on misaligned grids")
    if field_g.base_cell != field_d.base_cell:
        raise SolveError("fields use different base cells")
    cells = field_d.reachable
    if np.any(cells & ~field_g.raster.mask):
        raise SolveError("D has inside cells that are outside G")
    excess = field_g.k[cells] - field_d.k[cells]
    bad = excess > tol
    return MonotonicityReport(
        max_violation=float(max(excess.max(), 0.0)) if excess.size else 0.0,
        n_violations=int(bad.sum()),
        n_cells=int(cells.sum()),
        tol=float(tol),
    )


def discretization_tol(raster: RasterDomain, factor: float = 5.0) -> float:
    """factor * h * max(1/d) over the raster, the boundary-layer allowance."""
    return factor * raster.h * float(np.max(1.0 / raster.dist[raster.mask]))
