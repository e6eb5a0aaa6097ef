from pathlib import Path

import numpy as np
import pytest

from stefanhom.cli import main
from stefanhom.dumps import write_dump

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.yaml")))
def test_validate_shipped_configs(name):
    assert main(["validate", str(CONFIGS / name)]) == 0


def test_reference_rho(capsys):
    assert main(["reference", "--rho", "n=3", "A=1", "L=1", "t=1"]) == 0
    assert capsys.readouterr().out.strip() == "1.4422496"


def test_reference_tables(capsys):
    assert main(["reference", "--front", "a=0.5", "b=1", "A=1", "L=1", "n=3", "T=1", "dt=0.01"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "t,R,R_over_rho" and out[1].startswith("0.0,1.0,")
    assert main(["reference", "--v", "n=3", "A=1", "L=1", "t=1", "r=1"]) == 0
    assert capsys.readouterr().out.strip().startswith("0.30663")


def test_usage_errors(tmp_path, capsys):
    assert main([]) == 2
    assert main(["reference", "--rho", "n=3"]) == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("geometry:\n  core: {radius: 0.6}\nmedia: {kind: random-checkerboard, m: 0.5, M: 1}\n")
    assert main(["validate", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "media.seed" in err and "geometry.core.radius" in err
    assert main(["validate", str(tmp_path / "missing.yaml")]) == 2


def test_run_and_audit_dumps(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", str(CONFIGS / "homogeneous_2d.yaml"), "--out", str(out)]) == 0
    names = {p.name for p in out.iterdir()}
    assert {"steplog.csv", "fronts.csv", "front_metrics.csv", "manifest.yaml", "snapshot_0000.stfh"} <= names
    assert "directory: " + str(out) in (out / "manifest.yaml").read_text()
    assert main(["audit", "--dumps", str(out)]) == 0


def test_audit_injected_fault(tmp_path, capsys):
    U = np.zeros((6, 6))
    V = np.zeros((6, 6))
    write_dump(tmp_path / "snapshot_0000.stfh", U, V, 0.1, 0.0)
    V2 = V.copy()
    V2[2, 3] = -0.5
    write_dump(tmp_path / "snapshot_0001.stfh", U, V2, 0.1, 1.0)
    assert main(["audit", "--dumps", str(tmp_path)]) == 1
    assert "(2, 3)" in capsys.readouterr().out


def test_audit_config_run(tmp_path):
    assert main(["audit", str(CONFIGS / "homogeneous_2d.yaml"), "--out", str(tmp_path)]) == 0


def test_numerical_failure_exit_code(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(
        "geometry: {h: 0.0625, extent: 0.75, core: {radius: 0.25}, omega0: {radius: 0.5}}\n"
        "time: {T: 5.0, dt: 0.1}\n"
        f"output: {{directory: {tmp_path / 'o'}}}\n"
    )
    assert main(["run", str(cfg)]) == 3


def test_study_with_jobs_env(tmp_path, monkeypatch, capsys):
    cfg = tmp_path / "s.yaml"
    cfg.write_text(
        "geometry: {h: 0.0625, extent: 4.0, core: {radius: 1.2}, omega0: {radius: 2.4}}\n"
        "media: {kind: constant, m: 1.0, M: 1.0}\n"
        "solver: {omega: 1.9}\n"
        "study: {lambdas: [100.0], rescaled_times: [0.5], target_h: 0.015625, dtau: 0.05}\n"
        f"output: {{directory: {tmp_path / 'o'}}}\n"
    )
    monkeypatch.setenv("STEFAN_HOMOG_JOBS", "1")
    assert main(["study", str(cfg)]) == 0
    assert (tmp_path / "o" / "study.csv").read_text().startswith("lambda,t_rescaled,sup_err_v")
    assert (tmp_path / "o" / "amplitude_probes.csv").exists()
