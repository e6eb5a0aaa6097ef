import dataclasses
import math

import numpy as np
import pytest

from oracles import howard_lcp
from stefanhom.geometry import make_grid
from stefanhom.harness import (
    REPORT_COLUMNS,
    StudyConfig,
    audit_comparison,
    audit_enthalpy,
    audit_monotonicity,
    comparison_pair,
    convergence_study,
    ladder_checks,
    write_manifest,
)
from stefanhom.media import LatentHeatField, build_f
from stefanhom.obstacle import ObstacleState, SolverParams, assemble_step, initial_state, run

UNIT = LatentHeatField("constant", 1.0, 1.0)
PERIODIC = LatentHeatField("periodic-checkerboard", 0.5, 1.0, period=1.0)

SMALL = StudyConfig(
    dimension=2,
    core_radius=1.2,
    omega0_radius=2.4,
    field=LatentHeatField("constant", 1 / 1.5, 1 / 1.5),
    lambdas=(1e2, 1e3),
    rescaled_times=(0.5, 1.0),
    annulus=(0.25, 1.0),
    target_h=1 / 64,
    target_extent=2.0,
    dtau=0.05,
    solver=SolverParams(omega=1.9),
)


@pytest.fixture(scope="module")
def small_report():
    return convergence_study(SMALL)


def test_small_ladder_decreases(small_report):
    assert [r["lambda"] for r in small_report.rows] == [100.0, 100.0, 1000.0, 1000.0]
    for t in SMALL.rescaled_times:
        errs = small_report.column("sup_err_v", t)
        assert errs[1] <= 1.1 * errs[0]
    assert small_report.cstar == 1.0 and small_report.L_hom == pytest.approx(1.5)
    for audits in small_report.audits.values():
        assert all(a.passed for a in audits)


def test_report_csv_layout(small_report):
    lines = small_report.to_csv().splitlines()
    assert lines[0] == ",".join(REPORT_COLUMNS)
    assert len(lines) == 1 + len(small_report.rows)
    keys = {(r["lambda"], r["t_rescaled"]) for r in small_report.rows}
    assert len(keys) == len(small_report.rows)


def test_parallel_matches_serial(small_report):
    par = convergence_study(SMALL, jobs=2)
    assert par.to_csv() == small_report.to_csv()


def test_sanity_row_identity_factors():
    cfg = StudyConfig(
        dimension=3,
        core_radius=0.25,
        omega0_radius=0.75,
        field=UNIT,
        lambdas=(1.0, 8.0),
        rescaled_times=(0.1,),
        annulus=(0.3, 0.6),
        target_h=1 / 16,
        target_extent=1.5,
        dtau=0.02,
        solver=SolverParams(omega=1.7),
    )
    rep = convergence_study(cfg)
    row = rep.row(1.0, 0.1)
    assert math.isfinite(row["sup_err_v"])
    assert rep.cstar == 0.25


def test_failure_rows_are_marked():
    cfg = dataclasses.replace(SMALL, lambdas=(1e2,), target_extent=0.625, rescaled_times=(1.0,))
    rep = convergence_study(cfg)
    assert 100.0 in rep.failures and "DomainOverflowError" in rep.failures[100.0]
    assert math.isnan(rep.rows[0]["sup_err_v"])
    assert "nan" in rep.to_csv()


def test_periodic_and_random_share_limit_metadata():
    rnd = LatentHeatField("random-checkerboard", 0.5, 1.0, period=0.5, seed=11)
    from stefanhom.harness import homogenized_constants

    a = homogenized_constants(dataclasses.replace(SMALL, field=PERIODIC))
    b = homogenized_constants(dataclasses.replace(SMALL, field=rnd))
    assert a[0] == b[0]
    assert b[1] == pytest.approx(a[1], rel=0.01)


def test_config_validation():
    with pytest.raises(ValueError):
        dataclasses.replace(SMALL, lambdas=(1e3, 1e2))
    with pytest.raises(ValueError):
        dataclasses.replace(SMALL, annulus=(0.0, 1.0))
    with pytest.raises(ValueError):
        dataclasses.replace(SMALL, rescaled_times=(0.33,))


def _run(field=UNIT, profile="linear", datum=1.0):
    g = make_grid(2, 1 / 64, 1.5, 0.25, 0.5, datum, profile)
    # the enthalpy defect is O(h) against a gain that grows with t; skip the earliest times
    return run(g, field, 0.2, 0.01, SolverParams(omega=1.8), [0, 0.1, 0.15, 0.2])


def test_monotonicity_pass_and_injected_fault():
    tr = _run()
    res = audit_monotonicity(tr)
    assert res.passed and res.stats["C_mono"] >= 1.0
    bad = [dataclasses.replace(s, V=s.V.copy()) for s in tr.snapshots]
    bad[2].V[80, 81] = -1e-3
    res = audit_monotonicity(bad)
    assert not res.passed
    assert any("(80, 81)" in w for w in res.witnesses)


def test_monotonicity_detects_shrinking_support():
    U1 = np.zeros((5, 5))
    U1[2, 2] = 1.0
    s = [ObstacleState(U1, np.zeros((5, 5)), 1.0), ObstacleState(np.zeros((5, 5)), np.zeros((5, 5)), 2.0)]
    res = audit_monotonicity(s)
    assert not res.passed


def test_comparison_audits():
    g = make_grid(2, 1 / 32, 1.5, 0.25, 0.5)
    lo = LatentHeatField("constant", 0.5, 0.5)
    hi = LatentHeatField("constant", 1.0, 1.0)
    res = comparison_pair(g, lo, hi, 0.2, 0.02, SolverParams(omega=1.8), [0.1, 0.2])
    assert res.passed
    same = audit_comparison(_run(), _run())
    assert same.passed and same.stats["max_excess"] == 0.0
    with pytest.raises(ValueError):
        comparison_pair(g, hi, lo, 0.2, 0.02)


def test_comparison_ordered_initial_data_against_policy_iteration():
    # cubic profile dominates the linear one with the same medium
    gl = make_grid(2, 1 / 8, 2.0, 0.25, 0.75, 1.0, "linear")
    gc = make_grid(2, 1 / 8, 2.0, 0.25, 0.75, 1.0, "cubic")
    assert gl.shape == (33, 33) and np.all(gl.v0 <= gc.v0)
    fl, fc = build_f(PERIODIC, gl.v0, gl.points), build_f(PERIODIC, gc.v0, gc.points)
    sl, sc = initial_state(gl), initial_state(gc)
    for k in range(3):
        ul = howard_lcp(*assemble_step(sl, 0.05, fl, gl).to_sparse())
        uc = howard_lcp(*assemble_step(sc, 0.05, fc, gc).to_sparse())
        assert np.all(ul <= uc + 1e-12)
        sl = ObstacleState(ul.reshape(gl.shape), (ul.reshape(gl.shape) - sl.U) / 0.05, sl.t + 0.05)
        sc = ObstacleState(uc.reshape(gc.shape), (uc.reshape(gc.shape) - sc.U) / 0.05, sc.t + 0.05)
    a = run(gl, PERIODIC, 0.15, 0.05, SolverParams(tol=1e-12), [0.05, 0.1, 0.15])
    b = run(gc, PERIODIC, 0.15, 0.05, SolverParams(tol=1e-12), [0.05, 0.1, 0.15])
    assert audit_comparison(a, b).passed
    assert np.allclose(a.snapshots[-1].U, sl.U, atol=1e-9)


def test_enthalpy_audit_reports_failures():
    tr = _run()
    assert audit_enthalpy(tr).passed
    tr.flux[-1] *= 2
    res = audit_enthalpy(tr)
    assert not res.passed and res.witnesses


def test_ladder_checks():
    assert ladder_checks([1.0, 0.8, 0.45])[0]
    assert not ladder_checks([1.0, 1.2, 0.4])[0]
    assert not ladder_checks([1.0, 0.9, 0.6])[0]
    assert not ladder_checks([1.0, float("nan")])[0]


def test_manifest(tmp_path):
    write_manifest(tmp_path / "m.yaml", {"a": np.float64(1.5), "b": (1, 2)}, {"note": "x"})
    text = (tmp_path / "m.yaml").read_text()
    assert "a: 1.5" in text and "package_version" in text
