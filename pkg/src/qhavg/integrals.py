"""L^s integrals of the quasihyperbolic distance and their refinement sweeps."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geometry import DomainSpec, RasterDomain, RoomsAndHalls, rasterize
from .solver import QhField, solve

SATURATING = "saturating"
GROWING = "growing"
INCONCLUSIVE = "inconclusive"

# classification conventions, copied into every report
SATURATE_RATIO = 0.8
GROWTH_RATIO = 1.0
FIT_WINDOW = 3


class IntegralError(ValueError):
    pass


@dataclass(frozen=True)
class LsValue:
    raw: float
    normalized: float
    measure: float
    n_cells: int
    n_unreachable: int


def ls_integral(field: QhField, s: float, weight=None, window: Optional[np.ndarray] = None) -> LsValue:
    """raw = sum k^s w h^n over reachable cells; normalized = (raw / mu)^(1/s).

    ``window`` restricts the sum to a boolean sub-mask of the raster.
    """
    if not s > 0:
        raise IntegralError("s must be positive")
    r = field.raster
    cells = r.mask if window is None else (r.mask & window)
    reach = cells & np.isfinite(field.k)
    n_unreach = int(cells.sum() - reach.sum())
    if not reach.any():
        raise IntegralError("no reachable cells to integrate over")
    k = field.k[reach]
    if weight is None:
        w = np.ones_like(k)
    else:
        w = np.asarray(weight.evaluate(r.centers(np.nonzero(reach))), dtype=float)
    cv = r.cell_volume
    raw = float(np.sum(k ** s * w) * cv)
    mu = float(np.sum(w) * cv)
    if mu <= 0:
        raise IntegralError("zero measure")
    return LsValue(raw=raw, normalized=(raw / mu) ** (1.0 / s), measure=mu, n_cells=int(reach.sum()), n_unreachable=n_unreach)


@dataclass(frozen=True)
class SweepRow:
    h: float
    truncation: object
    raw: float
    normalized: float
    resolved: bool


@dataclass
class IntegralReport:
    spec: dict
    z0: tuple
    s: float
    rows: list = field(default_factory=list)
    classification: str = INCONCLUSIVE
    slope: float = float("nan")
    fitted_ratio: float = float("nan")
    ratios: list = field(default_factory=list)
    rule: str = (
        f"least-squares fit of log(increment) over the last {FIT_WINDOW} truncation increments at the "
        f"finest h; saturating if fitted ratio <= {SATURATE_RATIO}, growing if >= {GROWTH_RATIO}"
    )

    def csv_rows(self, spec_id: str) -> list[str]:
        out = []
        for row in self.rows:
            out.append(
                f"{spec_id},{self.s:.17g},{row.h:.17g},{row.truncation},{row.raw:.17g},"
                f"{row.normalized:.17g},{self.classification},{self.slope:.17g}"
            )
        return out


CSV_HEADER = "spec_id,s,h,truncation,raw,normalized,classification,slope"


def classify_increments(raws: Sequence[float]) -> tuple[str, float, float, list]:
    """Classify a raw-integral sequence along deepening truncation.

    Returns (classification, slope, fitted ratio, consecutive ratios).
    """
    raws = np.asarray(raws, dtype=float)
    if len(raws) < 3:
        return INCONCLUSIVE, float("nan"), float("nan"), []
    inc = np.diff(raws)
    ratios = [float(b / a) if a > 0 else float("inf") for a, b in zip(inc[:-1], inc[1:])]
    tail = inc[-FIT_WINDOW:]
    if np.any(tail <= 0):
        return INCONCLUSIVE, float("nan"), float("nan"), ratios
    steps = np.arange(len(tail), dtype=float)
    slope = float(np.polyfit(steps, np.log(tail), 1)[0])
    fitted = math.exp(slope)
    if fitted <= SATURATE_RATIO:
        label = SATURATING
    elif fitted >= GROWTH_RATIO:
        label = GROWING
    else:
        label = INCONCLUSIVE
    return label, slope, fitted, ratios


def _check_lists(spec: DomainSpec, h_list, truncations):
    if len(h_list) == 0 or any(b >= a for a, b in zip(h_list[:-1], h_list[1:])):
        raise IntegralError("hList must be strictly decreasing")
    if any(not spec.deeper(a, b) for a, b in zip(truncations[:-1], truncations[1:])):
        raise IntegralError("truncationList must be strictly deepening")


def _resolved(spec: DomainSpec, raster: RasterDomain, t) -> bool:
    eff = raster.truncation.effective
    if eff is None:
        return True
    return not spec.deeper(eff, t)


@dataclass
class SweepFields:
    """Solved fields per h; truncation windows reuse one solve per h."""

    spec: DomainSpec
    z0: tuple
    h_list: list
    truncations: list
    fields: dict


def solve_sweep(spec: DomainSpec, z0, h_list, truncations, threads: int = 1, stencil: str = "full") -> SweepFields:
    """Rasterize at the deepest requested truncation (clipped by the 2h rule)
    and solve once per h."""
    h_list = [float(h) for h in h_list]
    truncations = list(truncations)
    _check_lists(spec, h_list, truncations)
    deepest = spec.with_truncation(truncations[-1]) if truncations and spec.truncation_value() is not None else spec

    def run(h):
        r = rasterize(deepest, h)
        return h, solve(r, z0, stencil=stencil)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, h_list))
    else:
        results = [run(h) for h in h_list]
    return SweepFields(spec=deepest, z0=tuple(z0), h_list=h_list, truncations=truncations, fields=dict(results))


def report_from_fields(sf: SweepFields, s: float, weight=None) -> IntegralReport:
    rep = IntegralReport(spec=sf.spec.to_dict(), z0=tuple(float(v) for v in sf.z0), s=float(s))
    finest = []
    for h in sf.h_list:
        fld = sf.fields[h]
        r = fld.raster
        centers = r.centers()
        for t in sf.truncations or [None]:
            win = None if t is None else sf.spec.window(centers, t)
            ok = t is None or _resolved(sf.spec, r, t)
            try:
                val = ls_integral(fld, s, weight=weight, window=win)
                raw, norm = val.raw, val.normalized
            except IntegralError:
                raw, norm = 0.0, 0.0
            rep.rows.append(SweepRow(h=h, truncation=t, raw=raw, normalized=norm, resolved=ok))
            if h == sf.h_list[-1] and ok:
                finest.append(raw)
    rep.classification, rep.slope, rep.fitted_ratio, rep.ratios = classify_increments(finest)
    return rep


def refinement_sweep(spec: DomainSpec, z0, s: float, h_list, truncations, weight=None, threads: int = 1) -> IntegralReport:
    """Classify the growth of the Staples functional along the truncation axis."""
    return report_from_fields(solve_sweep(spec, z0, h_list, truncations, threads=threads), s, weight)


@dataclass
class ThresholdScan:
    s_grid: list
    classifications: dict
    bracket: Optional[tuple]
    estimate: Optional[float]
    resolution: Optional[float]
    reports: dict = field(repr=False, default_factory=dict)

    @property
    def found(self) -> bool:
        return self.estimate is not None


def threshold_scan(spec: DomainSpec, z0, s_grid, h_list, truncations, weight=None, threads: int = 1) -> ThresholdScan:
    """Midpoint between the largest saturating and the smallest growing s."""
    s_grid = sorted(float(s) for s in s_grid)
    sf = solve_sweep(spec, z0, h_list, truncations, threads=threads)
    reports = {s: report_from_fields(sf, s, weight) for s in s_grid}
    cls = {s: rep.classification for s, rep in reports.items()}
    sat = [s for s in s_grid if cls[s] == SATURATING]
    grow = [s for s in s_grid if cls[s] == GROWING]
    if sat and grow and max(sat) < min(grow):
        lo, hi = max(sat), min(grow)
        return ThresholdScan(s_grid, cls, (lo, hi), 0.5 * (lo + hi), 0.5 * (hi - lo), reports)
    return ThresholdScan(s_grid, cls, None, None, None, reports)


def cusp_critical_s(alpha: float, n: int) -> float:
    """Exact threshold of (alpha - 1)(s - n + 1) < n."""
    return n / (alpha - 1.0) + n - 1.0


def block_critical_s(n: int) -> float:
    return n * math.log2(3.0) - 1.0


# ---------------------------------------------------------------------------
# rooms-and-halls Poincare ratio
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PoincareRatio:
    j: int
    p: float
    j_max: int
    numerator: float
    denominator: float
    ratio: float
    lower_bound: float


def poincare_lower_bound(j: int, p: float) -> float:
    return (math.factorial(j + 1) / (2.0 ** (j + 2)) ** p) ** (1.0 / p)


def u_function(j: int):
    """The odd, piecewise linear test function u_j(x, y)."""
    xj = RoomsAndHalls.x(j)
    xpj = RoomsAndHalls.x_prime(j)

    def u(pts):
        pts = np.asarray(pts, dtype=float)
        ax = np.abs(pts[..., 0])
        v = np.where(ax < xj, 0.0, np.where(ax > xpj, 1.0, 2.0 ** (j + 2) * (ax - xj)))
        return np.sign(pts[..., 0]) * v

    return u


def poincare_ratio(j: int, p: float, h: float, j_max: int = 64) -> PoincareRatio:
    """||u_j - mean||_p / ||grad u_j||_p on rooms-and-halls truncated by the 2h rule.

    Integrals are exact per box: u_j is 0 left of hall j, linear across it
    and 1 beyond it on the right half, odd under x -> -x, so its mean is 0.
    """
    if j < 1 or p < 1:
        raise IntegralError("poincare_ratio needs j >= 1 and p >= 1")
    eff = RoomsAndHalls(j_max=j_max).max_resolved_truncation(h)
    if eff < j:
        raise IntegralError(f"room/hall {j} is truncated away at h={h} (deepest resolved index {eff})")
    w = lambda i: 2.0 ** (-(i + 2))  # noqa: E731  width of R_i and H_i
    height = lambda i: 1.0 / math.factorial(i + 1)  # noqa: E731
    half = sum(w(i) for i in range(j, eff + 1))  # rooms R_j..R_J, u = 1
    half += sum(w(i) * height(i) for i in range(j + 1, eff + 1))  # halls beyond j, u = 1
    half += w(j) * height(j) / (p + 1.0)  # hall j, u = t / w
    num = (2.0 * half) ** (1.0 / p)
    den = (2.0 * (2.0 ** (j + 2)) ** p * w(j) * height(j)) ** (1.0 / p)
    return PoincareRatio(j, p, eff, num, den, num / den, poincare_lower_bound(j, p))
