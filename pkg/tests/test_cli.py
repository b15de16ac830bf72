"""End-to-end checks of the command-line interface.

Every test drives main() in process and inspects exit codes, stdout
records and the files written under --out.
"""

import json
from pathlib import Path

import pytest

from thinrod.cli import main
from thinrod.section import disc

RUN_TOML = """\
schema_version = 1

[material]
family = "svk_logdet"
mu = 1.0
lambda = 1.0

[section]
kind = "disc"
rings = 1

[loads]
f2 = "const:0.01"

[run]
alpha = 3.0
h = 0.2
length = 0.5
n_axial = 4
tol = 1e-9
max_iter = 200
"""

LADDER_TOML = """\
schema_version = 1

[material]
family = "svk_logdet"
mu = 1.0
lambda = 1.0

[section]
kind = "disc"
rings = 1

[loads]
f2 = "const:0.01"

[run]
alpha = 3.0
length = 0.5
h_values = [0.4, 0.2, 0.1]
n_axial = [2, 4, 8]
rod_elements = 8
tol = 1e-9
max_iter = 200
"""


def write_mesh(tmp_path: Path) -> Path:
    path = tmp_path / "S.json"
    disc(1).to_json(str(path))
    return path


def tree_bytes(root: Path) -> dict:
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


def test_version_flag(capsys):
    assert main(["--version"]) == 0
    assert "0.1.0" in capsys.readouterr().out


def test_missing_required_option_names_it(capsys):
    rc = main(["rod", "solve", "--alpha", "3", "--length", "1",
               "--nodes", "8"])
    assert rc == 1
    assert "--stiffness" in capsys.readouterr().err


def test_unknown_group_is_a_usage_error(capsys):
    assert main(["frobnicate"]) == 1


def test_material_check_emits_json_records(tmp_path, capsys):
    out = tmp_path / "probes"
    rc = main(["material", "check", "--mu", "1", "--lambda", "1",
               "--samples", "50", "--seed", "3", "--out", str(out)])
    assert rc == 0
    lines = capsys.readouterr().out.strip().splitlines()
    records = [json.loads(line) for line in lines]
    assert len(records) == 4
    for rec in records:
        assert set(rec) == {"hypothesis", "max_violation", "fitted_constant",
                            "samples", "seed"}
        assert rec["samples"] == 50
        assert rec["seed"] == 3
    names = {rec["hypothesis"] for rec in records}
    assert "frame_indifference" in names
    for name in ("probes.json", "config_snapshot.json", "manifest.json"):
        assert (out / name).is_file()


def test_section_info_prints_csv_row(tmp_path, capsys):
    mesh = write_mesh(tmp_path)
    assert main(["section", "info", str(mesh)]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "area,I2,I3,I23,muS"
    values = [float(v) for v in lines[1].split(",")]
    assert len(values) == 5
    assert values[0] == pytest.approx(1.0, rel=1e-8)


def test_cell_solve_rerun_is_byte_identical(tmp_path, capsys):
    mesh = write_mesh(tmp_path)
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        rc = main(["cell", "solve", "--mesh", str(mesh), "--mu", "1",
                   "--lambda", "1", "--out", str(out)])
        assert rc == 0
        outs.append(out)
    stiff = json.loads((outs[0] / "reduced_stiffness.json").read_text())
    assert {"E_mod", "Q1", "mesh_stats", "residuals"} <= set(stiff)
    assert stiff["E_mod"] > 0
    assert tree_bytes(outs[0]) == tree_bytes(outs[1])
    manifest = json.loads((outs[0] / "manifest.json").read_text())
    assert manifest["command"] == "cell solve"
    assert len(manifest["config_sha256"]) == 64


def test_rod_solve_writes_state_and_residuals(tmp_path, capsys):
    mesh = write_mesh(tmp_path)
    cell_out = tmp_path / "cell"
    assert main(["cell", "solve", "--mesh", str(mesh), "--mu", "1",
                 "--lambda", "1", "--out", str(cell_out)]) == 0
    rod_out = tmp_path / "rod"
    rc = main(["rod", "solve", "--stiffness",
               str(cell_out / "reduced_stiffness.json"), "--alpha", "3",
               "--f2", "const:1", "--length", "1", "--nodes", "8",
               "--out", str(rod_out)])
    assert rc == 0
    lines = (rod_out / "rod_state.csv").read_text().strip().splitlines()
    assert lines[0] == "x1,u,v2,v2p,v3,v3p,w"
    assert len(lines) == 9  # header plus one row per node
    first = [float(v) for v in lines[1].split(",")]
    assert first == [0.0] * 7  # clamped end
    res = json.loads((rod_out / "residuals.json").read_text())
    assert {"solver", "equilibrium"} <= set(res)
    assert max(abs(v) for v in res["equilibrium"].values()) <= 1e-8


def test_beam_minimize_artifacts(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text(RUN_TOML)
    out = tmp_path / "beam"
    assert main(["beam3d", "minimize", "--config", str(cfg),
                 "--out", str(out)]) == 0
    assert (out / "deformation.bin").is_file()
    lines = (out / "observables.csv").read_text().strip().splitlines()
    assert lines[0] == "x1,u_h,v2_h,v3_h,w_h"
    assert len(lines) == 6  # header plus n_axial+1 rows
    diag = json.loads((out / "diagnostics.json").read_text())
    assert {"energy", "scaling_ratio", "rotation", "moments",
            "stationarity"} <= set(diag)
    assert diag["stationarity"]["converged"] == 1
    # the snapshot is a byte copy of the input config
    assert (out / "config_snapshot.toml").read_bytes() == cfg.read_bytes()


def test_bad_schema_version_is_a_validation_error(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text(RUN_TOML.replace("schema_version = 1",
                                    "schema_version = 2"))
    rc = main(["beam3d", "minimize", "--config", str(cfg),
               "--out", str(tmp_path / "x")])
    assert rc == 1
    assert "schema_version" in capsys.readouterr().err


def test_unknown_config_key_is_rejected_by_name(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text(RUN_TOML + "bogus_knob = 5\n")
    rc = main(["beam3d", "minimize", "--config", str(cfg),
               "--out", str(tmp_path / "x")])
    assert rc == 1
    assert "bogus_knob" in capsys.readouterr().err


def test_config_extension_must_be_known(tmp_path, capsys):
    cfg = tmp_path / "run.yaml"
    cfg.write_text(RUN_TOML)
    rc = main(["beam3d", "minimize", "--config", str(cfg),
               "--out", str(tmp_path / "x")])
    assert rc == 1


def test_numerical_failure_exits_two(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text(RUN_TOML.replace("max_iter = 200", "max_iter = 0"))
    rc = main(["beam3d", "minimize", "--config", str(cfg),
               "--out", str(tmp_path / "x")])
    assert rc == 2
    assert "numerical failure" in capsys.readouterr().err


def test_converge_requires_out(tmp_path, capsys):
    cfg = tmp_path / "ladder.toml"
    cfg.write_text(LADDER_TOML)
    assert main(["converge", "run", "--spec", str(cfg)]) == 1
    assert "--out" in capsys.readouterr().err


def test_converge_run_layout_and_rerun(tmp_path, capsys):
    cfg = tmp_path / "ladder.toml"
    cfg.write_text(LADDER_TOML)
    outs = []
    for name in ("run1", "run2"):
        out = tmp_path / name
        rc = main(["converge", "run", "--spec", str(cfg), "--out", str(out)])
        assert rc == 0
        outs.append(out)
    out = outs[0]
    assert (out / "config_snapshot.toml").read_bytes() == cfg.read_bytes()
    for name in ("ladder.csv", "rates.json", "manifest.json"):
        assert (out / name).is_file()
    svgs = sorted(p.name for p in out.glob("*.svg"))
    assert len(svgs) >= 4
    for k in range(3):
        rung = out / f"rung-{k:02d}"
        for name in ("deformation.bin", "observables.csv",
                     "diagnostics.json", "manifest.json"):
            assert (rung / name).is_file()
    lines = (out / "ladder.csv").read_text().strip().splitlines()
    assert len(lines) == 4
    rates = json.loads((out / "rates.json").read_text())
    assert rates["n_ok_rungs"] == 3
    assert rates["rates"]["y_dist_w12"]["slope"] == pytest.approx(1.0,
                                                                  abs=0.2)
    # rung manifests carry per-rung hashes, all distinct
    hashes = [json.loads((out / f"rung-{k:02d}" / "manifest.json")
                         .read_text())["config_sha256"] for k in range(3)]
    assert len(set(hashes)) == 3
    assert tree_bytes(outs[0]) == tree_bytes(outs[1])


def test_report_plot_reemits_svgs(tmp_path, capsys):
    cfg = tmp_path / "ladder.toml"
    cfg.write_text(LADDER_TOML)
    run_dir = tmp_path / "run"
    assert main(["converge", "run", "--spec", str(cfg),
                 "--out", str(run_dir)]) == 0
    plot_dir = tmp_path / "plots"
    rc = main(["report", "plot", "--ladder", str(run_dir / "ladder.csv"),
               "--out", str(plot_dir)])
    assert rc == 0
    names = sorted(p.name for p in plot_dir.glob("*.svg"))
    assert "err_v2.svg" in names
    assert (plot_dir / "err_v2.svg").read_bytes() == \
        (run_dir / "err_v2.svg").read_bytes()


def test_threads_above_one_notes_sequential_fallback(tmp_path, capsys):
    mesh = write_mesh(tmp_path)
    rc = main(["section", "info", str(mesh), "--threads", "4"])
    assert rc == 0
    assert "sequential" in capsys.readouterr().err
