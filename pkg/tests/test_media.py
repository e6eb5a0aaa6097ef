import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from oracles import random_cell_value
from stefanhom.media import LatentHeatField, SamplingWindowError, averaged_latent_heat, build_f, eval_g

PERIODIC = LatentHeatField("periodic-checkerboard", 0.5, 1.0, period=1.0)
RANDOM = LatentHeatField("random-checkerboard", 0.5, 1.0, period=1.0, seed=42)


def test_constant_value():
    assert eval_g(LatentHeatField("constant", 2.0, 2.0), [3.7, -1.2]) == 2.0


def test_checkerboard_examples():
    assert eval_g(PERIODIC, [0.25, 0.25]) == 0.5
    assert eval_g(PERIODIC, [0.75, 0.25]) == 1.0


def test_random_is_deterministic():
    x = [12.3, -4.5]
    assert eval_g(RANDOM, x) == eval_g(RANDOM, x)
    assert eval_g(LatentHeatField("random-checkerboard", 0.5, 1.0, seed=42), x) == eval_g(RANDOM, x)


def test_random_matches_integer_oracle():
    rng = np.random.default_rng(3)
    pts = rng.uniform(-50, 50, (200, 2))
    got = eval_g(RANDOM, pts)
    want = [random_cell_value(42, tuple(int(v) for v in np.floor(p)), 0.5, 1.0) for p in pts]
    assert np.array_equal(got, want)


@settings(max_examples=60, deadline=None)
@given(
    x=st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=2),
    kind=st.sampled_from(["periodic-checkerboard", "random-checkerboard"]),
    mollify=st.booleans(),
)
def test_bounds(x, kind, mollify):
    fld = LatentHeatField(kind, 0.3, 1.7, period=0.8, seed=7, mollify=mollify)
    assert 0.3 <= eval_g(fld, x) <= 1.7


@settings(max_examples=60, deadline=None)
@given(x=st.lists(st.floats(-100, 100), min_size=3, max_size=3), axis=st.integers(0, 2))
def test_periodicity(x, axis):
    fld = LatentHeatField("periodic-checkerboard", 0.5, 1.0, period=1.25, dimension=3)
    y = np.array(x)
    frac = y / 0.625 - np.floor(y / 0.625)
    assume(np.all((frac > 1e-9) & (frac < 1 - 1e-9)))  # float shifts can cross a face
    y[axis] += 1.25
    assert eval_g(fld, x) == eval_g(fld, y)


def test_mollified_continuous_across_face():
    fld = LatentHeatField("periodic-checkerboard", 0.5, 1.0, period=1.0, mollify=True)
    xs = np.linspace(0.4, 0.6, 2001)
    vals = eval_g(fld, np.column_stack([xs, np.full_like(xs, 0.25)]))
    assert np.max(np.abs(np.diff(vals))) < 0.01
    assert eval_g(fld, [0.25, 0.25]) == 0.5


def test_averages():
    assert averaged_latent_heat(LatentHeatField("constant", 2.0, 2.0), 1.0) == 0.5
    assert averaged_latent_heat(PERIODIC, 1.0) == 1.5
    assert averaged_latent_heat(PERIODIC, 2.0) == averaged_latent_heat(PERIODIC, 1.0)
    val = averaged_latent_heat(RANDOM, 100.0)
    assert abs(val - 1.5) <= 0.015


def test_random_average_matches_integer_oracle():
    cells = [(i, j) for i in range(60) for j in range(60)]
    want = np.mean([1.0 / random_cell_value(9, c, 0.5, 1.0) for c in cells])
    fld = LatentHeatField("random-checkerboard", 0.5, 1.0, period=1.0, seed=9)
    assert averaged_latent_heat(fld, 60.0) == pytest.approx(want, rel=1e-13)


def test_average_within_bounds_and_window_error():
    fld = LatentHeatField("random-checkerboard", 0.4, 2.0, seed=1)
    assert 1 / 2.0 <= averaged_latent_heat(fld, 50.0) <= 1 / 0.4
    with pytest.raises(SamplingWindowError):
        averaged_latent_heat(fld, 10.0)
    with pytest.raises(SamplingWindowError):
        averaged_latent_heat(PERIODIC, 0.5)


def test_build_f():
    pts = np.array([[0.25, 0.25], [0.75, 0.25], [0.1, 0.1]])
    v0 = np.array([0.0, 0.0, 0.7])
    f = build_f(LatentHeatField("constant", 2.0, 2.0), v0, pts)
    assert f.tolist() == [-0.5, -0.5, 0.7]
    f = build_f(LatentHeatField("constant", 1.0, 1.0), v0, pts)
    assert f[0] == -1.0
    f = build_f(PERIODIC, v0, pts)
    assert np.all((f >= -1 / 0.5) & (f <= 0.7))


def test_validation():
    with pytest.raises(ValueError):
        LatentHeatField("constant", 1.0, 2.0)
    with pytest.raises(ValueError):
        LatentHeatField("periodic-checkerboard", 2.0, 1.0)
    with pytest.raises(ValueError):
        LatentHeatField("stripes", 1.0, 1.0)
