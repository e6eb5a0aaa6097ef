import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import hele_shaw_invariant, quad_U
from stefanhom import reference as R
from stefanhom.harness import audit_bound, audit_enthalpy, audit_monotonicity


def test_rho_examples():
    assert R.rho(1, 1, 3, 1) == pytest.approx(3 ** (1 / 3), abs=1e-12)
    assert round(R.rho(1, 1, 3, 1), 7) == 1.4422496
    assert R.rho(1, 1, 3, 0) == 0.0 and R.rho(5, 2, 2, 0) == 0.0
    assert R.rho(2, 1, 2, 1) == pytest.approx(2.0)


@settings(max_examples=50, deadline=None)
@given(t=st.floats(1e-3, 1e3), lam=st.floats(1.0, 1e4), n=st.sampled_from([3, 4]))
def test_rho_scaling(t, lam, n):
    assert R.rho(1.3, 0.7, n, lam * t) == pytest.approx(lam ** (1 / n) * R.rho(1.3, 0.7, n, t), rel=1e-12)


def test_v_examples_and_errors():
    sol = R.SelfSimilarSolution(1, 1, 3)
    assert R.self_similar_v(sol, [1.0, 0.0, 0.0], 1.0) == pytest.approx(1 - 3 ** (-1 / 3), abs=1e-12)
    assert R.self_similar_v(sol, [1.0, 0, 0], 1.0) == pytest.approx(0.3066389, abs=5e-7)
    assert R.v_radial(sol, sol.rho(2.0), 2.0) == 0.0
    with pytest.raises(R.OriginEvaluationError):
        R.self_similar_v(sol, [0.0, 0.0, 0.0], 1.0)
    with pytest.raises(ValueError):
        R.SelfSimilarSolution(0, 1, 3)


@settings(max_examples=40, deadline=None)
@given(
    r=st.floats(0.1, 3.0),
    t=st.floats(0.01, 10.0),
    lam=st.floats(1.0, 1e3),
)
def test_v_scaling_identity(r, t, lam):
    sol = R.SelfSimilarSolution(1.0, 1.5, 3)
    lhs = R.v_radial(sol, r, t)
    rhs = lam ** (1 / 3) * R.v_radial(sol, lam ** (1 / 3) * r, lam * t)
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("n,A,L,r,t", [(3, 1, 1, 1, 1), (3, 2, 0.5, 0.7, 3), (2, 1, 1.5, 0.5, 1), (4, 1, 1, 1.1, 2)])
def test_U_matches_quadrature(n, A, L, r, t):
    sol = R.SelfSimilarSolution(A, L, n)
    assert R.u_radial(sol, r, t) == pytest.approx(quad_U(A, L, n, r, t), abs=1e-10)


def test_U_zero_before_onset_and_monotone():
    sol = R.SelfSimilarSolution(1, 1, 3)
    s0 = R.onset_time(sol, 1.0)
    assert R.u_radial(sol, 1.0, 0.5 * s0) == 0.0
    ts = np.linspace(0, 5, 50)
    us = [R.u_radial(sol, 1.0, t) for t in ts]
    assert np.all(np.diff(us) >= 0)


def test_v_harmonic_inside_support():
    sol = R.SelfSimilarSolution(1, 1, 3)
    h = 1e-2
    x = np.array([0.6, 0.3, 0.2])
    lap = sum(
        R.self_similar_v(sol, x + h * e, 5.0) + R.self_similar_v(sol, x - h * e, 5.0) - 2 * R.self_similar_v(sol, x, 5.0)
        for e in np.eye(3)
    ) / h**2
    assert abs(lap) < 1e-2


def test_cstar_values():
    assert R.cstar(0.5, 1, 3) == 0.5
    assert R.cstar(1, 1, 3) == 1
    assert R.cstar(0.5, 2, 4) == 0.5
    assert R.cstar(1.6, 1.0, 2) == 1.0


@pytest.mark.parametrize("n", [2, 3])
def test_hele_shaw_front_algebraic_invariant(n):
    a, b, A, L = 0.5, 1.0, 1.0, 1.5
    fr = R.radial_hele_shaw_front(a, b, A, L, n, 50.0, 1e-3)
    assert fr.R[0] == b and fr.t[0] == 0
    assert np.all(np.diff(fr.R) > 0)
    c = hele_shaw_invariant(fr.R, fr.t, a, A, L, n)
    assert np.max(np.abs(c - c[0])) < 1e-9 * max(1.0, abs(c[0]))


def test_hele_shaw_richardson_and_asymptotics():
    a, b, A, L = 0.5, 1.0, 1.0, 1.0
    coarse = R.radial_hele_shaw_front(a, b, A, L, 3, 100.0, 0.01).R[-1]
    fine = R.radial_hele_shaw_front(a, b, A, L, 3, 100.0, 0.005).R[-1]
    assert abs(coarse - fine) / fine < 1e-8
    T = 1e6 * (b / 3 ** (1 / 3)) ** 3
    late = R.radial_hele_shaw_front(a, b, A, L, 3, T, 0.02).R[-1]
    assert abs(late / R.rho(A, L, 3, T) - 1) < 0.01


def test_hele_shaw_step_error():
    with pytest.raises(R.StepSizeError):
        R.radial_hele_shaw_front(0.5, 0.51, 10.0, 0.01, 3, 10.0, 1.0)


def test_front_csv_rows():
    fr = R.radial_hele_shaw_front(0.5, 1.0, 1.0, 1.0, 3, 1.0, 0.01)
    rows = list(fr.rows())
    assert set(rows[0]) == {"t", "R", "R_over_rho"}
    assert rows[-1]["t"] == pytest.approx(1.0)


def test_radial_stefan_invariants_and_audits():
    res = R.radial_stefan_solve(0.5, 1.0, 1.0, 1.0, None, 20.0, 0.02, 0.05, n=3, snapshot_times=[0, 1, 5, 10, 20])
    assert audit_monotonicity(res).passed
    enth = audit_enthalpy(res)
    assert enth.passed, enth.witnesses
    assert audit_bound(res).passed
    assert np.all(np.diff(res.front.R) >= 0)


def test_radial_direct_and_psor_agree():
    from stefanhom.obstacle import SolverParams

    kw = dict(a=0.5, b=1.0, A=1.0, L=2.0, theta0="cubic", T=2.0, dr=0.02, dt=0.02, n=3, snapshot_times=[2.0],
              params=SolverParams(tol=1e-14))
    d = R.radial_stefan_solve(**kw)
    p = R.radial_stefan_solve(**kw, solver="psor")
    assert np.max(np.abs(d.snapshots[-1].U - p.snapshots[-1].U)) < 1e-8


def test_stefan_front_below_hele_shaw():
    # p(., 0) >= theta(., 0) and a larger initial front keep the Hele-Shaw front ahead
    a, A, L = 0.5, 1.0, 1.0
    st = R.radial_stefan_solve(a, 1.0, A, L, None, 10.0, 0.01, 0.01, n=3)
    hs = R.radial_hele_shaw_front(a, 1.1, A, L, 3, 10.0, 0.01)
    assert np.all(np.interp(st.front.t, hs.t, hs.R) >= st.front.R - 0.01)


def test_radial_front_bound_fit():
    res = R.radial_stefan_solve(0.5, 1.0, 1.0, 1.0, None, 2000.0, 0.05, 1.0, n=3)
    t, Rt = res.front.t[100:], res.front.R[100:]
    C = np.max(Rt / t ** (1 / 3))
    assert C < 1.5 * 3 ** (1 / 3)


def test_radial_overflow():
    with pytest.raises(R.DomainOverflowError):
        R.radial_stefan_solve(0.5, 1.0, 1.0, 1.0, None, 100.0, 0.05, 1.0, n=3, r_max=3.0)


def test_interpolation_bound_positive():
    sol = R.SelfSimilarSolution(1.0, 1.0, 3)
    b = R.interpolation_error_bound(sol, np.array([0.5, 1.0]), 1.0, 0.1)
    assert np.all(b > 0) and b[0] > b[1]
    assert math.isfinite(float(b[1]))
