import json
import subprocess
import sys
from pathlib import Path

import pytest
import yaml

from qhavg.cli import EXIT_ERROR, EXIT_INCONCLUSIVE, EXIT_OK, EXIT_REFUSED, config_hash, main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write(tmp_path, name, cfg):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(cfg))
    return p


def test_solve_and_targets(tmp_path):
    cfg = write(tmp_path, "c.yaml", {"spec": {"kind": "UnitCube", "n": 2}, "z0": [0.5, 0.1], "h": "1/64", "targets": [[0.5, 0.4]]})
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_OK
    lines = (tmp_path / "o" / "targets.csv").read_text().splitlines()
    assert lines[0] == "h,x,y,k" and len(lines) == 2
    m = json.loads((tmp_path / "o" / "manifest.solve.json").read_text())
    assert m["config_hash"] == config_hash(m["config"])
    assert {"numpy", "scipy", "python", "kernel_backend"} <= set(m["versions"])


def test_solve_outside_is_an_error(tmp_path, capsys):
    cfg = write(tmp_path, "c.yaml", {"spec": {"kind": "UnitCube", "n": 2}, "z0": [1.5, 0.1], "h": "1/32"})
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_ERROR
    assert "outside" in capsys.readouterr().err


@pytest.mark.parametrize(
    "cfg",
    [{"spec": {"kind": "Torus"}, "z0": [0, 0], "h": 0.1}, {"bogus": 1}, {"spec": {"kind": "UnitCube"}, "z0": [0.5, 0.5], "h": "x"}],
)
def test_config_errors(tmp_path, cfg):
    p = write(tmp_path, "c.yaml", cfg)
    assert main(["integrate", "--config", str(p), "--out", str(tmp_path / "o")]) == EXIT_ERROR


def test_tubes_certificate_and_refusal(tmp_path):
    ok = write(tmp_path, "a.yaml", {"tubes": {"family": "rooms_halls", "j_max": 12, "s": [1]}})
    assert main(["tubes", "--config", str(ok), "--out", str(tmp_path / "a")]) == EXIT_OK
    assert "certified: true" in (tmp_path / "a" / "certificate_s1.txt").read_text()
    no = write(tmp_path, "b.yaml", {"tubes": {"family": "block", "n": 2, "j_max": 5, "s": [1]}})
    assert main(["tubes", "--config", str(no), "--out", str(tmp_path / "b")]) == EXIT_REFUSED


def test_sweep_inconclusive_exit(tmp_path):
    cfg = write(tmp_path, "c.yaml", {"spec": {"kind": "UnitCube", "n": 2}, "z0": [0.5, 0.5], "h_list": ["1/32"], "truncations": [0, 1], "s_grid": [1]})
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_INCONCLUSIVE


def test_rerun_is_byte_identical(tmp_path):
    cfg = CONFIGS / "cusp_scan.yaml"
    outs = []
    for tag in ("a", "b"):
        assert main(["scan", "--config", str(cfg), "--out", str(tmp_path / tag), "--seed", "3"]) == EXIT_OK
        outs.append((tmp_path / tag / "scan.csv").read_bytes())
    assert outs[0] == outs[1]


def test_integrate_with_ar_is_seed_reproducible(tmp_path):
    cfg = CONFIGS / "weighted_integrate.yaml"
    res = []
    for tag in ("a", "b"):
        assert main(["integrate", "--config", str(cfg), "--out", str(tmp_path / tag), "--seed", "5"]) == EXIT_OK
        m = json.loads((tmp_path / tag / "manifest.integrate.json").read_text())
        res.append((m["results"], (tmp_path / tag / "integrate.csv").read_bytes()))
    assert res[0] == res[1]


def test_report_aggregates_and_refuses_mismatch(tmp_path):
    base = {"spec": {"kind": "UnitCube", "n": 2}, "z0": [0.5, 0.5], "h": "1/32", "s": 1}
    p = write(tmp_path, "c.yaml", base)
    out = tmp_path / "o"
    assert main(["rasterize", "--config", str(p), "--out", str(out)]) == EXIT_OK
    assert main(["integrate", "--config", str(p), "--out", str(out)]) == EXIT_OK
    assert main(["report", "--config", str(p), "--out", str(out)]) == EXIT_OK
    rep = json.loads((out / "manifest.json").read_text())
    assert set(rep["runs"]) == {"rasterize", "integrate"}
    q = write(tmp_path, "d.yaml", {**base, "s": 2})
    assert main(["integrate", "--config", str(q), "--out", str(out)]) == EXIT_OK
    assert main(["report", "--config", str(p), "--out", str(out)]) == EXIT_ERROR


def test_union_and_whitney_and_poincare(tmp_path):
    assert main(["union", "--config", str(CONFIGS / "union_squares.yaml"), "--out", str(tmp_path / "u")]) == EXIT_OK
    assert main(["whitney", "--config", str(CONFIGS / "whitney_cube.yaml"), "--out", str(tmp_path / "w")]) == EXIT_OK
    m = json.loads((tmp_path / "w" / "manifest.whitney.json").read_text())
    assert m["results"]["validation"]["ok"]
    p = write(tmp_path, "p.yaml", {"poincare": {"j": [2, 3], "p": 2, "h": "1/1024"}})
    assert main(["poincare", "--config", str(p), "--out", str(tmp_path / "p")]) == EXIT_OK


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "qhavg.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "rasterize" in r.stdout
