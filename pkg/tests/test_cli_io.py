import json
import os

import numpy as np
import pytest

from dotrecon import io
from dotrecon.cli import main
from dotrecon.config import (ConfigError, RunConfig, apply_overrides,
                             parse_config, serialize_config)
from dotrecon.forward import ExperimentSet
from dotrecon.mesh import build_uniform_mesh
from dotrecon.phantoms import make_excitations
from dotrecon.reconstruct import IterationRecord


def test_empty_config_is_paper_defaults():
    cfg = parse_config("")
    assert cfg.nx == cfg.ny == 50
    assert cfg.eps == 0.1
    assert cfg.beta_a == 0.0 and cfg.beta_c == 0.0
    assert cfg.delta == 0.0
    assert cfg.schedule.k1 == 250 and cfg.schedule.k2 == 750
    assert cfg.schedule.ratio == (2, 1)
    assert cfg.levels.a1 == 10.0 and cfg.levels.a2 == 1.0
    assert cfg.alpha == "auto"


def test_config_rejects_unknown_and_invalid_keys():
    with pytest.raises(ConfigError, match="bogus"):
        parse_config('{"bogus": 1}')
    with pytest.raises(ConfigError, match="eps"):
        parse_config('{"eps": -1}')
    with pytest.raises(ConfigError, match="phantom"):
        parse_config('{"phantom": "mystery"}')
    with pytest.raises(ConfigError, match="JSON"):
        parse_config("{not json")
    with pytest.raises(ConfigError, match="schedule"):
        parse_config('{"schedule": {"k1": 100, "k2": 50}}')
    with pytest.raises(ConfigError, match="mode"):
        parse_config('{"mode": "sideways"}')


def test_config_round_trip():
    text = json.dumps({
        "nx": 25, "ny": 25, "phantom": "overlapping", "eps": 0.2,
        "alpha": {"a": 2.0, "c": 3.0}, "delta": 0.01, "seed": 7,
        "mode": "c-only",
        "schedule": {"k1": 10, "k2": 20, "ratio": [3, 1], "max_iter": 40},
        "init_c": {"type": "paraboloid", "center": [0.4, 0.4], "radius": 0.1},
        "solver": {"method": "cg", "rel_tol": 1e-8, "max_iter": 5000},
    })
    cfg = parse_config(text)
    again = parse_config(serialize_config(cfg))
    assert again == cfg


def test_apply_overrides_beats_file():
    cfg = parse_config('{"delta": 0.5, "phantom": "near"}')
    cfg2 = apply_overrides(cfg, {"delta": 0.0, "schedule.max_iter": 800})
    assert cfg2.delta == 0.0
    assert cfg2.phantom == "near"
    assert cfg2.schedule.max_iter == 800
    with pytest.raises(ConfigError, match="schedule"):
        apply_overrides(cfg, {"schedule.max_iter": 99})  # below k2


def test_outdir_env(monkeypatch):
    cfg = RunConfig()
    monkeypatch.delenv("DOTRECON_OUTDIR", raising=False)
    assert cfg.resolved_out_dir() == "."
    monkeypatch.setenv("DOTRECON_OUTDIR", "/tmp/somewhere")
    assert cfg.resolved_out_dir() == "/tmp/somewhere"
    cfg.out_dir = "explicit"
    assert cfg.resolved_out_dir() == "explicit"


def test_field_grid_round_trip(tmp_path):
    mesh = build_uniform_mesh(9, 7)
    rng = np.random.default_rng(0)
    field = rng.normal(size=mesh.n_nodes)
    path = tmp_path / "field.csv"
    io.write_field_grid(mesh, field, path)
    back = io.read_field_grid(path)
    assert np.array_equal(back, field)  # 17 significant digits round-trip


def test_field_grid_constant_and_pgm(tmp_path):
    mesh = build_uniform_mesh(6, 6)
    ones = np.full(mesh.n_nodes, 1.0)
    io.write_field_grid(mesh, ones, tmp_path / "c.csv")
    assert np.all(io.read_field_grid(tmp_path / "c.csv") == 1.0)
    io.write_pgm(mesh, ones, tmp_path / "c.pgm")
    lines = (tmp_path / "c.pgm").read_text().splitlines()
    assert lines[0] == "P2"
    assert lines[1] == "6 6"
    assert lines[2] == "255"
    grays = {int(v) for line in lines[3:] for v in line.split()}
    assert len(grays) == 1  # single gray level

    ramp = mesh.nodes[:, 0]
    io.write_pgm(mesh, ramp, tmp_path / "r.pgm")
    vals = [int(v) for line in
            (tmp_path / "r.pgm").read_text().splitlines()[3:]
            for v in line.split()]
    assert min(vals) == 0 and max(vals) == 255


def test_history_round_trip(tmp_path):
    records = [
        IterationRecord(iter=0, stage="c-only", misfit=0.5, err_a=1.0,
                        err_c=0.25, err_a_abs=2.0, err_c_abs=0.5,
                        step_a=0.0, step_c=0.0),
        IterationRecord(iter=1, stage="joint", misfit=0.25, err_a=None,
                        err_c=None, step_a=0.125, step_c=1e-17),
    ]
    path = tmp_path / "history.csv"
    io.write_history(records, path)
    header = path.read_text().splitlines()[0]
    assert header == "iter,stage,misfit,err_a,err_c,step_a,step_c"
    back = io.read_history(path)
    assert back[0]["misfit"] == 0.5
    assert back[0]["err_a"] == 1.0
    assert back[1]["err_a"] is None
    assert back[1]["step_c"] == 1e-17


def test_measurements_round_trip(tmp_path):
    mesh = build_uniform_mesh(12, 12)
    gs = make_excitations(mesh)
    rng = np.random.default_rng(4)
    hs = [rng.normal(size=len(mesh.boundary_nodes)) for _ in gs]
    exps = ExperimentSet(excitations=gs, measurements=hs)
    path = tmp_path / "meas.csv"
    io.write_measurements(mesh, exps, path)
    back = io.read_measurements(mesh, path)
    assert len(back) == 4
    for g0, g1 in zip(exps.excitations, back.excitations):
        assert np.array_equal(g0, g1)
    for h0, h1 in zip(exps.measurements, back.measurements):
        assert np.array_equal(h0, h1)
    wrong_mesh = build_uniform_mesh(11, 11)
    with pytest.raises(ValueError):
        io.read_measurements(wrong_mesh, path)


def test_cli_unknown_subcommand():
    assert main(["frobnicate"]) == 1


def test_cli_invalid_config_value(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"eps": -1}')
    assert main(["synthesize", "--config", str(cfg),
                 "--out", str(tmp_path / "m.csv")]) == 1


def test_cli_synthesize_writes_csv(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"nx": 12, "ny": 12, "phantom": "separated"}))
    out = tmp_path / "m.csv"
    assert main(["synthesize", "--config", str(cfg), "--out", str(out)]) == 0
    mesh = build_uniform_mesh(12, 12)
    exps = io.read_measurements(mesh, out)
    assert len(exps) == 4


def test_cli_phantom_exports(tmp_path):
    assert main(["phantom", "--name", "overlapping", "--out-dir",
                 str(tmp_path), "--config", "/dev/null", "--images",
                 "--no-figures"]) == 0
    a = io.read_field_grid(tmp_path / "a_true_overlapping.csv")
    assert set(np.unique(a)) == {1.0, 10.0}
    assert (tmp_path / "a_true_overlapping.pgm").exists()


def test_cli_reconstruct_small_run(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({
        "nx": 15, "ny": 15, "phantom": "separated", "mode": "three-stage",
        "schedule": {"k1": 2, "k2": 4, "max_iter": 6},
        "out_dir": str(tmp_path / "run"),
    }))
    assert main(["reconstruct", "--config", str(cfg), "--no-figures"]) == 0
    hist = io.read_history(tmp_path / "run" / "history.csv")
    assert len(hist) == 7
    assert [row["iter"] for row in hist] == list(range(7))
    assert (tmp_path / "run" / "a_final.csv").exists()
    assert (tmp_path / "run" / "c_final.csv").exists()
    assert (tmp_path / "run" / "phi_c_final.csv").exists()


def test_cli_reconstruct_deterministic_history(tmp_path):
    cfg = tmp_path / "c.json"
    base = {"nx": 13, "ny": 13, "phantom": "separated", "mode": "joint",
            "delta": 0.01, "seed": 3,
            "schedule": {"k1": 2, "k2": 4, "max_iter": 5}}
    for out in ("r1", "r2"):
        base["out_dir"] = str(tmp_path / out)
        cfg.write_text(json.dumps(base))
        assert main(["reconstruct", "--config", str(cfg), "--no-figures"]) == 0
    h1 = (tmp_path / "r1" / "history.csv").read_bytes()
    h2 = (tmp_path / "r2" / "history.csv").read_bytes()
    assert h1 == h2


def test_cli_reconstruct_from_measurement_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"nx": 12, "ny": 12, "phantom": "separated"}))
    meas = tmp_path / "m.csv"
    assert main(["synthesize", "--config", str(cfg), "--out", str(meas)]) == 0
    cfg.write_text(json.dumps({
        "nx": 12, "ny": 12, "phantom": "separated", "mode": "c-only",
        "data_file": str(meas),
        "schedule": {"k1": 1, "k2": 2, "max_iter": 3},
        "out_dir": str(tmp_path / "run2"),
    }))
    assert main(["reconstruct", "--config", str(cfg), "--no-figures"]) == 0
    hist = io.read_history(tmp_path / "run2" / "history.csv")
    # no truth available: error columns stay empty
    assert all(row["err_a"] is None and row["err_c"] is None for row in hist)


def test_cli_reconstruct_figures(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({
        "nx": 12, "ny": 12, "phantom": "separated", "mode": "joint",
        "schedule": {"k1": 1, "k2": 2, "max_iter": 3},
        "out_dir": str(tmp_path / "run"),
    }))
    assert main(["reconstruct", "--config", str(cfg)]) == 0
    assert (tmp_path / "run" / "error_evolution.png").exists()
    assert (tmp_path / "run" / "fields_final.png").exists()
