import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from fidsus.errors import ConfigError, InsufficientData
from fidsus.experiments import (
    CSV_COLUMNS,
    SweepConfig,
    SweepRow,
    default_out_dir,
    detect_peak,
    loglog_slope,
    read_csv,
    run_scaling_study,
    run_sweep,
)
from fidsus.models import ModelSpec, dense_model
from fidsus.susceptibility import chi_f_exact_sum


def cfg_dict(**kw):
    d = {"model": {"family": "tfim", "n_qubits": 3}, "grid": [0.5, 1.0], "mode": "exact_only",
         "outputs": {"csv": "s.csv", "svg": "s.svg"}}
    d.update(kw)
    return d


def test_config_round_trip():
    cfg = SweepConfig.from_dict(cfg_dict(eps=0.1, seeds=[1, 2]))
    assert SweepConfig.from_dict(cfg.to_dict()) == cfg


@pytest.mark.parametrize("bad", [
    {"colour": "red"},
    {"grid": []},
    {"mode": "fast"},
    {"eps": 0.0},
    {"n_runs": 2},
    {"grid": {"start": 1.0, "stop": 0.0, "step": 0.1}},
    {"outputs": {"png": "x.png"}},
    {"mode": "ff"},
    {"backend": "gpu"},
])
def test_config_errors(bad):
    with pytest.raises(ConfigError):
        SweepConfig.from_dict(cfg_dict(**bad))


def test_config_missing_key_and_bad_json(tmp_path):
    d = cfg_dict()
    del d["model"]
    with pytest.raises(ConfigError):
        SweepConfig.from_dict(d)
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        SweepConfig.load(p)
    with pytest.raises(ConfigError):
        SweepConfig.load(tmp_path / "missing.json")


def test_grid_dict():
    cfg = SweepConfig.from_dict(cfg_dict(grid={"start": 0.2, "stop": 1.6, "step": 0.1}))
    assert len(cfg.lambda_grid) == 15
    assert cfg.lambda_grid[0] == 0.2 and cfg.lambda_grid[-1] == 1.6


def test_single_point(tmp_path):
    res = run_sweep(SweepConfig.from_dict(cfg_dict(grid=[0.7])), tmp_path)
    assert len(res.rows) == 1
    H, HI = dense_model(ModelSpec("tfim", 3, 0.7))
    assert res.rows[0].chi_f_exact == chi_f_exact_sum(H, HI)


def test_csv_round_trip_and_determinism(tmp_path):
    cfg = SweepConfig.from_dict(cfg_dict(mode="both", eps=0.1, seeds=[3, 4], grid=[0.9, 1.2]))
    a = run_sweep(cfg, tmp_path / "a")
    b = run_sweep(cfg, tmp_path / "b")
    assert a.csv_path.read_bytes() == b.csv_path.read_bytes()
    assert a.svg_path.read_bytes() == b.svg_path.read_bytes()
    text = a.csv_path.read_text()
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    back = read_csv(a.csv_path)
    assert back == a.rows
    for r in back:
        assert r.abs_err == abs(r.chi_f_hat - r.chi_f_exact)
        assert r.queries_total > 0


def test_timestamp_only_when_not_deterministic(tmp_path):
    cfg = SweepConfig.from_dict(cfg_dict())
    res = run_sweep(cfg, tmp_path, deterministic=False)
    lines = res.csv_path.read_text().splitlines()
    assert lines[0].startswith("# generated")
    assert read_csv(res.csv_path) == res.rows


def test_svg_is_xml(tmp_path):
    res = run_sweep(SweepConfig.from_dict(cfg_dict(grid=[0.4, 0.8, 1.2])), tmp_path)
    root = ET.fromstring(res.svg_path.read_text())
    assert root.tag.endswith("svg")
    assert any(el.tag.endswith("polyline") for el in root.iter())


def test_workers_keep_grid_order(tmp_path):
    grid = [1.4, 0.3, 0.9, 0.6, 1.1]
    serial = run_sweep(SweepConfig.from_dict(cfg_dict(grid=grid)), write=False)
    pooled = run_sweep(SweepConfig.from_dict(cfg_dict(grid=grid, workers=4)), write=False)
    assert [r.lam for r in pooled.rows] == grid
    assert pooled.rows == serial.rows


def test_degenerate_point_marked():
    cfg = SweepConfig.from_dict(cfg_dict(model={"family": "tfim", "n_qubits": 2}, grid=[0.0, 0.5],
                                         mode="both", eps=0.2))
    rows = run_sweep(cfg, write=False).rows
    assert rows[0].error == "degenerate" and rows[0].chi_f_hat is None
    assert rows[1].error == "" and rows[1].chi_f_hat is not None


def test_resource_cap_marked():
    cfg = SweepConfig.from_dict(cfg_dict(model={"family": "tfim", "n_qubits": 4}, grid=[0.05],
                                         mode="quantum", eps=0.001))
    assert run_sweep(cfg, write=False).rows[0].error == "resource_cap"


def test_ff_mode_sweep():
    cfg = SweepConfig.from_dict(cfg_dict(model={"family": "ff_projector_chain", "n_qubits": 2},
                                         grid=[0.0], mode="ff", eps=0.1, n_runs=15))
    (row,) = run_sweep(cfg, write=False).rows
    assert row.abs_err <= 0.1


def test_env_out_dir(monkeypatch, tmp_path):
    monkeypatch.setenv("FIDSUS_OUT_DIR", str(tmp_path / "env"))
    assert default_out_dir() == tmp_path / "env"
    res = run_sweep(SweepConfig.from_dict(cfg_dict(grid=[1.0])))
    assert res.csv_path.parent == tmp_path / "env"


def test_peak_parabola():
    xs = np.linspace(0, 2, 9)
    rows = [(x, 3.0 - 2.0 * (x - 0.83) ** 2) for x in xs]
    pk = detect_peak(rows)
    assert abs(pk.lam_c - 0.83) <= 1e-10
    assert pk.curvature == pytest.approx(-4.0)
    assert not pk.boundary


def test_peak_boundary_and_errors():
    pk = detect_peak([(x, x) for x in range(6)])
    assert pk.boundary and pk.lam_c == 5 and "boundary" in pk.message
    with pytest.raises(InsufficientData):
        detect_peak([(0, 1), (1, 2), (2, 1)])


def test_peak_from_rows_averages_seeds():
    rows = [SweepRow(x, s, chi_f_hat=1 - (x - 1) ** 2 + 0.01 * s) for x in (0, 0.5, 1, 1.5, 2) for s in (0, 1)]
    assert detect_peak(rows).lam_c == pytest.approx(1.0)


def test_loglog_slope():
    assert loglog_slope([1, 2, 4], [3, 6, 12]) == pytest.approx(1.0)
    with pytest.raises(InsufficientData):
        loglog_slope([1, 2], [1, 2])


def test_scaling_errors():
    with pytest.raises(ConfigError):
        run_scaling_study("speed")
    with pytest.raises(ConfigError):
        run_scaling_study("heisenberg")
    with pytest.raises(InsufficientData):
        run_scaling_study("gap_general", values=[0.5, 0.25])


def test_scaling_gap_general(tmp_path):
    out = tmp_path / "g.csv"
    res = run_scaling_study("gap_general", out_path=out)
    assert abs(res.slopes["inverse_degree"] - 1.0) <= 0.15
    text = out.read_text()
    assert text.startswith("series,control,value\n")
    assert "# slope,inverse_degree," in text


def test_scaling_gap_ff():
    res = run_scaling_study("gap_ff")
    assert abs(res.slopes["ff_degree"] - 0.5) <= 0.15


def test_scaling_heisenberg():
    cfg = SweepConfig.from_dict(cfg_dict(model={"family": "tfim", "n_qubits": 2}, grid=[1.0],
                                         eps=0.1, mode="quantum"))
    res = run_scaling_study("heisenberg", cfg)
    assert abs(res.slopes["grover_queries"] - 1.0) <= 0.1
