"""Command-line experiment runner.

    qhavg <subcommand> --config run.yaml --out results/ [--seed N] [--threads N] [--tol X]

Every subcommand writes its CSV artifacts plus ``manifest.<subcommand>.json``
into the output directory.  ``report`` merges those manifests into
``manifest.json`` and refuses when their config hashes disagree.

Exit codes: 0 success, 1 error, 2 inconclusive classification,
3 certificate refused.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import scipy
import yaml

from . import __version__, integrals, kernels, tubes, weights, whitney
from .geometry import GeometryError, rasterize, spec_from_dict
from .solver import SolveError, solve

log = logging.getLogger("qhavg")

EXIT_OK, EXIT_ERROR, EXIT_INCONCLUSIVE, EXIT_REFUSED = 0, 1, 2, 3
SUBCOMMANDS = ("rasterize", "solve", "integrate", "sweep", "scan", "poincare", "tubes", "whitney", "union", "report")

# top-level keys accepted in a config file
SCHEMA = {
    "spec", "spec_id", "z0", "h", "h_list", "s", "s_grid", "truncations", "stencil", "weight", "ar",
    "targets", "tubes", "whitney", "poincare", "union", "seed", "tol", "threads", "inputs",
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------


def _num(v) -> float:
    """Numbers may be written as fractions, e.g. ``1/128``."""
    if isinstance(v, str):
        try:
            return float(Fraction(v.strip()))
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"not a number: {v!r}") from None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"not a number: {v!r}")
    return float(v)


def _nums(v, name) -> list:
    if v is None:
        raise ConfigError(f"missing {name!r}")
    if not isinstance(v, (list, tuple)):
        v = [v]
    return [_num(x) for x in v]


def _point(v, name):
    if not isinstance(v, (list, tuple)) or not v:
        raise ConfigError(f"{name!r} must be a coordinate list")
    return tuple(_num(x) for x in v)


def load_config(path) -> dict:
    text = Path(path).read_text()
    try:
        cfg = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a mapping")
    unknown = sorted(set(cfg) - SCHEMA)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return cfg


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, default=str).encode()).hexdigest()


def _spec(cfg, key="spec"):
    if key not in cfg:
        raise ConfigError(f"missing {key!r}")
    if not isinstance(cfg[key], dict):
        raise ConfigError(f"{key!r} must be a mapping")
    return spec_from_dict(cfg[key])


def _weight(cfg):
    try:
        return weights.Weight.from_dict(cfg.get("weight"))
    except KeyError as exc:
        raise ConfigError(f"weight: missing field {exc.args[0]!r}") from None


def _h_list(cfg):
    hs = _nums(cfg.get("h_list", cfg.get("h")), "h_list")
    if any(h <= 0 for h in hs):
        raise ConfigError("grid spacings must be positive")
    return hs


def _truncations(cfg, spec):
    t = cfg.get("truncations")
    if t is None:
        return []
    cast = float if spec.kind == "Cusp" else int
    return [cast(_num(v)) for v in t]


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


class Run:
    def __init__(self, sub: str, cfg: dict, out: Path):
        self.sub, self.cfg, self.out = sub, cfg, out
        self.t0 = time.perf_counter()
        self.artifacts: list = []
        self.results: dict = {}
        out.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, text: str) -> None:
        (self.out / name).write_text(text)
        self.artifacts.append(name)

    def write_csv(self, name: str, header: str, rows) -> None:
        self.write(name, "\n".join([header, *rows]) + "\n")

    def manifest(self, status: str, exit_code: int) -> dict:
        return {
            "subcommand": self.sub,
            "config_hash": config_hash(self.cfg),
            "config": self.cfg,
            "status": status,
            "exit_code": exit_code,
            "artifacts": sorted(self.artifacts),
            "results": self.results,
            "versions": versions(),
            "wall_time_s": round(time.perf_counter() - self.t0, 6),
        }

    def finish(self, status: str, exit_code: int) -> int:
        path = self.out / f"manifest.{self.sub}.json"
        path.write_text(json.dumps(self.manifest(status, exit_code), indent=2, sort_keys=True, default=str) + "\n")
        return exit_code


def versions() -> dict:
    return {
        "qhavg": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "kernel_backend": kernels.BACKEND,
    }


def _g(v: float) -> str:
    return f"{v:.17g}"


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_rasterize(run: Run, cfg, args) -> int:
    spec = _spec(cfg)
    rows = []
    for h in _h_list(cfg):
        r = rasterize(spec, h)
        stem = f"raster_h{len(rows)}"
        r.write_mask(run.out / stem)
        run.artifacts += [stem + ".hdr", stem + ".mask"]
        t = r.truncation
        rows.append(f"{_g(h)},{r.n_inside},{_g(r.volume_estimate)},{t.requested},{t.effective},{_g(t.dropped_measure)}")
    run.write_csv("rasterize.csv", "h,n_inside,volume,truncation_requested,truncation_effective,dropped_measure", rows)
    return run.finish("ok", EXIT_OK)


def cmd_solve(run: Run, cfg, args) -> int:
    spec = _spec(cfg)
    z0 = _point(cfg.get("z0"), "z0")
    stencil = cfg.get("stencil", "full")
    rows = []
    for i, h in enumerate(_h_list(cfg)):
        fld = solve(rasterize(spec, h), z0, stencil=stencil)
        fld.write_csv(run.out / f"field_h{i}.csv")
        run.artifacts.append(f"field_h{i}.csv")
        for z in cfg.get("targets", []) or []:
            z = _point(z, "targets")
            rows.append(f"{_g(h)}," + ",".join(map(_g, z)) + f",{_g(fld.value_at(z))}")
    if rows:
        n = len(z0)
        run.write_csv("targets.csv", "h," + ",".join("xyz"[:n]) + ",k", rows)
    return run.finish("ok", EXIT_OK)


def cmd_integrate(run: Run, cfg, args) -> int:
    spec = _spec(cfg)
    z0 = _point(cfg.get("z0"), "z0")
    w = _weight(cfg)
    s_list = _nums(cfg.get("s", cfg.get("s_grid")), "s")
    rows = []
    for h in _h_list(cfg):
        raster = rasterize(spec, h)
        fld = solve(raster, z0)
        for s in s_list:
            v = integrals.ls_integral(fld, s, weight=w)
            rows.append(f"{_g(s)},{_g(h)},{_g(v.raw)},{_g(v.normalized)},{_g(v.measure)},{v.n_cells},{v.n_unreachable}")
        if cfg.get("ar") and w is not None:
            a = cfg["ar"]
            est = weights.ar_estimate(
                w, raster, _num(a.get("r", 2)), int(a.get("n_balls", 200)),
                _nums(a.get("radii", [0.05, 0.1, 0.2]), "ar.radii"), seed=args.seed,
            )
            run.results.setdefault("ar", []).append(
                {"h": h, "estimate": est.estimate, "center": est.center, "radius": est.radius, "message": est.message}
            )
    run.write_csv("integrate.csv", "s,h,raw,normalized,measure,n_cells,n_unreachable", rows)
    return run.finish("ok", EXIT_OK)


def _sweep_inputs(cfg):
    spec = _spec(cfg)
    return spec, _point(cfg.get("z0"), "z0"), _h_list(cfg), _truncations(cfg, spec)


def cmd_sweep(run: Run, cfg, args) -> int:
    spec, z0, hs, ts = _sweep_inputs(cfg)
    sf = integrals.solve_sweep(spec, z0, hs, ts, threads=args.threads)
    sid = cfg.get("spec_id", spec.kind)
    rows, labels = [], {}
    for s in _nums(cfg.get("s_grid", cfg.get("s")), "s_grid"):
        rep = integrals.report_from_fields(sf, s, _weight(cfg))
        rows += rep.csv_rows(sid)
        labels[s] = rep.classification
    run.write_csv("sweep.csv", integrals.CSV_HEADER, rows)
    run.results = {"classifications": {_g(k): v for k, v in labels.items()}, "rule": integrals.IntegralReport.rule}
    if any(v == integrals.INCONCLUSIVE for v in labels.values()):
        return run.finish("inconclusive", EXIT_INCONCLUSIVE)
    return run.finish("ok", EXIT_OK)


def cmd_scan(run: Run, cfg, args) -> int:
    spec, z0, hs, ts = _sweep_inputs(cfg)
    scan = integrals.threshold_scan(spec, z0, _nums(cfg.get("s_grid"), "s_grid"), hs, ts, _weight(cfg), threads=args.threads)
    sid = cfg.get("spec_id", spec.kind)
    rows = []
    for s in scan.s_grid:
        rep = scan.reports[s]
        rows.append(f"{sid},{_g(s)},{rep.classification},{_g(rep.slope)},{_g(rep.fitted_ratio)}")
    run.write_csv("scan.csv", "spec_id,s,classification,slope,fitted_ratio", rows)
    run.results = {
        "bracket": list(scan.bracket) if scan.bracket else None,
        "estimate": scan.estimate,
        "resolution": scan.resolution,
        "classifications": {_g(k): v for k, v in scan.classifications.items()},
    }
    if not scan.found:
        return run.finish("inconclusive", EXIT_INCONCLUSIVE)
    return run.finish("ok", EXIT_OK)


def cmd_poincare(run: Run, cfg, args) -> int:
    p_cfg = cfg.get("poincare") or {}
    p = _num(p_cfg.get("p", 2))
    h = _num(p_cfg.get("h", 1 / 4096))
    rows = []
    for j in p_cfg.get("j", [2, 3, 4, 5]):
        pr = integrals.poincare_ratio(int(j), p, h)
        rows.append(f"{pr.j},{_g(p)},{_g(h)},{pr.j_max},{_g(pr.ratio)},{_g(pr.lower_bound)}")
    run.write_csv("poincare.csv", "j,p,h,truncation,ratio,lower_bound", rows)
    return run.finish("ok", EXIT_OK)


def cmd_tubes(run: Run, cfg, args) -> int:
    t_cfg = dict(cfg.get("tubes") or {})
    name = t_cfg.pop("family", None)
    if name not in tubes.BUILDERS:
        raise ConfigError(f"tubes.family must be one of {sorted(tubes.BUILDERS)}")
    s_list = _nums(t_cfg.pop("s", cfg.get("s", 1)), "tubes.s")
    try:
        family = tubes.BUILDERS[name](t_cfg)
    except KeyError as exc:
        raise ConfigError(f"tubes: missing field {exc.args[0]!r}") from None
    spec = _spec(cfg) if "spec" in cfg else None
    tol = 0.02 if args.tol is None else args.tol
    rows, certified = [], {}
    for s in s_list:
        cert = tubes.certify_not_averaging(spec, family, s, tol=tol)
        run.write(f"certificate_s{_g(s)}.txt", cert.to_text())
        certified[_g(s)] = cert.certified
        if cert.series is not None:
            for i, term, ps in zip(cert.series.indices, cert.series.terms, cert.series.partial_sums):
                rows.append(f"{name},{_g(s)},{i},{_g(term)},{_g(ps)}")
    run.write_csv("tubes.csv", "family,s,index,term,partial_sum", rows)
    run.results = {"certified": certified}
    if not all(certified.values()):
        return run.finish("refused", EXIT_REFUSED)
    return run.finish("ok", EXIT_OK)


def cmd_whitney(run: Run, cfg, args) -> int:
    w_cfg = cfg.get("whitney") or {}
    fam = w_cfg.get("family")
    s = _num(w_cfg.get("s", cfg.get("s", 1)))
    n = int(w_cfg.get("n", 2))
    if fam == "cube":
        sub = whitney.cube_subdivision(n, int(w_cfg.get("j_max", 3)))
        sets = sub.sets
        series = whitney.cube_bound_series(n, s, int(w_cfg.get("series_j_max", 60)))
        spec_cfg = {"kind": "UnitCube", "n": n}
    elif fam == "cusp":
        alpha = _num(w_cfg["alpha"]) if "alpha" in w_cfg else 3.0
        sets = whitney.cusp_family(alpha, int(w_cfg.get("j_max", 4)), int(w_cfg.get("ell_max", 3)), n)
        up = whitney.cusp_upper_series(alpha, n, s, int(w_cfg.get("series_j_max", 60)), int(w_cfg.get("m_max", 2 ** 14)))
        series = up.series
        run.results["exponent"] = up.exponent
        spec_cfg = {"kind": "Cusp", "alpha": alpha, "n": n}
    elif fam == "block":
        up = whitney.block_upper_series(n, s, int(w_cfg.get("m_max", 2 ** 12 - 1)), int(w_cfg.get("i_max", 60)))
        sets, series = [], up.series
        run.results["limit_ratio"] = up.limit_ratio
        spec_cfg = None
    else:
        raise ConfigError("whitney.family must be cube, cusp or block")
    if sets:
        run.write("whitney_sets.csv", whitney.subdivision_csv(sets))
    if sets and w_cfg.get("validate_h") and n == 2:
        raster = rasterize(spec_from_dict(spec_cfg), _num(w_cfg["validate_h"]), policy=False)
        rep = whitney.validate_subdivision(sets, raster, seed=args.seed)
        run.results["validation"] = {
            "ok": rep.ok, "overlap_measure": rep.overlap_measure, "coverage": rep.coverage,
            "coverage_without_john": rep.coverage_without_john, "connected": rep.connected,
        }
    rows = [f"{fam},{_g(s)},{i},{_g(t)},{_g(p)}" for i, t, p in zip(series.indices, series.terms, series.partial_sums)]
    run.write_csv("whitney_series.csv", "family,s,index,term,partial_sum", rows)
    run.results["classification"] = series.classification
    if series.classification == integrals.INCONCLUSIVE:
        return run.finish("inconclusive", EXIT_INCONCLUSIVE)
    return run.finish("ok", EXIT_OK)


def cmd_union(run: Run, cfg, args) -> int:
    u = cfg.get("union") or {}
    specs = [spec_from_dict(d) for d in u.get("specs", [])]
    points = [_point(p, "union.points") for p in u.get("points", [])]
    if len(specs) < 2 or len(points) != len(specs) - 1:
        raise ConfigError("union needs at least two specs and one base point per union step")
    h = _num(u.get("h", cfg.get("h", 1 / 128)))
    s = _num(u.get("s", cfg.get("s", 2)))
    reps = weights.union_chain(specs, points, h, s, _weight(cfg)) if len(specs) > 2 else [
        weights.union_check(specs[0], specs[1], points[0], h, s, _weight(cfg), tol=args.tol, threads=args.threads)
    ]
    summary = []
    for i, rep in enumerate(reps):
        run.write(f"union_step{i}.csv", rep.csv())
        summary.append(
            f"{i},{rep.n_cells},{rep.n_pointwise_violations},{_g(rep.tol)},{_g(rep.mean_union)},"
            f"{_g(rep.mean_sum_bound)},{_g(rep.bound)},{int(rep.ok)}"
        )
    run.write_csv("union.csv", "step,n_cells,pointwise_violations,tol,mean_union,mean_sum_bound,bound,ok", summary)
    run.results = {"ok": all(r.ok for r in reps)}
    if not run.results["ok"]:
        log.error("union check failed")
        return run.finish("failed", EXIT_ERROR)
    return run.finish("ok", EXIT_OK)


def cmd_report(out: Path, cfg, args) -> int:
    dirs = [out] + [Path(p) for p in (cfg.get("inputs") or [])]
    manifests = []
    for d in dirs:
        manifests += [json.loads(p.read_text()) for p in sorted(d.glob("manifest.*.json"))]
    if not manifests:
        raise ConfigError(f"no manifests found in {', '.join(map(str, dirs))}")
    hashes = sorted({m["config_hash"] for m in manifests})
    if len(hashes) > 1:
        raise ConfigError(f"refusing to aggregate artifacts from {len(hashes)} different config hashes")
    report = {
        "config_hash": hashes[0],
        "versions": versions(),
        "runs": {m["subcommand"]: {k: m[k] for k in ("status", "exit_code", "artifacts", "results", "wall_time_s")} for m in manifests},
    }
    (out / "manifest.json").write_text(json.dumps(report, indent=2, sort_keys=True, default=str) + "\n")
    return EXIT_OK


COMMANDS = {
    "rasterize": cmd_rasterize, "solve": cmd_solve, "integrate": cmd_integrate, "sweep": cmd_sweep,
    "scan": cmd_scan, "poincare": cmd_poincare, "tubes": cmd_tubes, "whitney": cmd_whitney, "union": cmd_union,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qhavg", description="Quasihyperbolic L^s-averaging experiments")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", type=Path, help="YAML experiment config")
    ap.add_argument("--out", type=Path, default=Path("qhavg_out"))
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--tol", type=float, default=None)
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config) if args.config else {}
        # flags override the config; the effective values enter the hash
        for key in ("seed", "threads", "tol"):
            if getattr(args, key) is not None:
                cfg[key] = getattr(args, key)
        args.seed = int(cfg.get("seed", 0))
        args.threads = int(cfg.get("threads", 1))
        args.tol = cfg.get("tol")
        if args.subcommand == "report":
            return cmd_report(args.out, cfg, args)
        run = Run(args.subcommand, cfg, args.out)
        return COMMANDS[args.subcommand](run, cfg, args)
    except (ConfigError, GeometryError, SolveError, integrals.IntegralError, tubes.TubeError,
            whitney.WhitneyError, weights.WeightError, OSError) as exc:
        print(f"qhavg {args.subcommand}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
