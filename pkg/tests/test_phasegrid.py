import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from moyalrel.phasegrid import (
    GridField,
    MomentumLine,
    PhaseGrid,
    UnitSystem,
    dft_q,
    from_mixed,
    half_grid,
    integrate,
    make_grid,
    to_mixed,
)


def test_make_grid_small():
    g = make_grid(8, 8.0)
    assert g.dq == 1.0
    assert g.dp == pytest.approx(2 * math.pi / 8, rel=1e-15)
    assert g.q[0] == -4.0 and g.p[0] == pytest.approx(-math.pi)


def test_make_grid_256():
    g = make_grid(256, 25.6)
    assert g.dq == pytest.approx(0.1, rel=1e-14)
    assert g.dp == pytest.approx(0.245436926, rel=1e-8)


@pytest.mark.parametrize("n", [6, 100, 4, 0, 8.0])
def test_make_grid_rejects_bad_n(n):
    with pytest.raises(ValueError):
        make_grid(n, 8.0)


@pytest.mark.parametrize("ext", [0.0, -1.0])
def test_make_grid_rejects_bad_extent(ext):
    with pytest.raises(ValueError):
        make_grid(8, ext)


def test_units_validation():
    with pytest.raises(ValueError):
        UnitSystem(hbar=0.0)
    u = UnitSystem(hbar=2.0, mass=3.0, c=5.0)
    assert u.rest_energy == 75.0
    assert u.compton_length == pytest.approx(2.0 / 15.0)


def test_non_conjugate_grid_rejected():
    with pytest.raises(ValueError, match="non-conjugate"):
        PhaseGrid(8, -4.0, 4.0, -1.0, 1.0)


@given(
    st.sampled_from([8, 16, 32, 64, 128]),
    st.floats(0.1, 500.0),
    st.floats(-5.0, 5.0),
    st.floats(0.1, 4.0),
)
def test_conjugacy_holds(n, ext, pc, hbar):
    g = make_grid(n, ext, pc, UnitSystem(hbar=hbar))
    assert math.isclose(g.dq * g.dp * g.n, 2 * math.pi * hbar, rel_tol=1e-12)
    assert g.p_min + 0.5 * n * g.dp == pytest.approx(pc, abs=1e-12 * max(1, abs(pc)) + 1e-12)


def test_gridfield_shape_and_reality(small_grid):
    with pytest.raises(ValueError):
        GridField(small_grid, np.zeros((3, 3)))
    f = GridField(small_grid, np.ones((64, 64)) + 1e-12j)
    assert f.is_real()
    assert not GridField(small_grid, np.ones((64, 64)) * (1 + 1e-3j)).is_real()
    with pytest.raises(ValueError):
        MomentumLine(small_grid, np.zeros(10))


def test_dft_roundtrip(small_grid):
    rng = np.random.default_rng(0)
    v = rng.normal(size=(64, 64)) + 1j * rng.normal(size=(64, 64))
    f = GridField(small_grid, v)
    back = dft_q(dft_q(f, "forward"), "inverse")
    assert np.max(np.abs(back.values - v)) <= 1e-12 * np.max(np.abs(v))
    back = dft_q(dft_q(f, "forward", density=True), "inverse", density=True)
    assert np.max(np.abs(back.values - v)) <= 1e-12 * np.max(np.abs(v))


def test_dft_parseval(small_grid):
    rng = np.random.default_rng(1)
    v = rng.normal(size=(64, 64)) + 1j * rng.normal(size=(64, 64))
    g = small_grid
    F = dft_q(GridField(g, v)).values
    lhs = np.sum(np.abs(v) ** 2) * g.dq
    rhs = np.sum(np.abs(F) ** 2) * g.dp / (2 * math.pi * g.hbar)
    assert rhs == pytest.approx(lhs, rel=1e-12)


def test_dft_gaussian():
    # Oracle: continuum integral of exp(-q^2/2) exp(-i P q) dq = sqrt(2 pi) exp(-P^2/2).
    g = make_grid(128, 40.0)
    P, Q = g.mesh()
    F = dft_q(GridField(g, np.exp(-(Q**2) / 2)), density=True).values
    expected = math.sqrt(2 * math.pi) * np.exp(-(g.P**2) / 2) / (2 * math.pi)
    assert np.max(np.abs(F - expected[None, :])) < 1e-12
    assert F[0, 64].real == pytest.approx(math.sqrt(2 * math.pi) / (2 * math.pi), rel=1e-12)


def test_dft_constant_is_delta(small_grid):
    g = small_grid
    F = dft_q(GridField(g, np.ones((64, 64))), density=True).values
    zero = g.n // 2
    assert np.allclose(F[:, zero], g.n * g.dq / (2 * math.pi * g.hbar), rtol=1e-13)
    F[:, zero] = 0
    assert np.max(np.abs(F)) < 1e-12


def test_dft_bad_direction(small_grid):
    with pytest.raises(ValueError):
        dft_q(GridField(small_grid, np.zeros((64, 64))), "sideways")


def test_integrate_box():
    g = make_grid(8, 8.0)
    assert integrate(GridField(g, np.ones((8, 8)))) == pytest.approx(8 * 2 * math.pi, rel=1e-14)


def test_integrate_normalized_gaussian():
    g = make_grid(256, 40.0)
    P, Q = g.mesh()
    w = np.exp(-(Q**2) - P**2) / math.pi
    assert abs(integrate(GridField(g, w)) - 1) < 1e-8


def test_integrate_odd_field():
    g = make_grid(64, 16.0)
    P, Q = g.mesh()
    # The unpaired edge row at -L/2 carries exp(-64) weight.
    v = P * np.exp(-(P**2) - Q**2)
    assert abs(integrate(GridField(g, v))) < 1e-12


@settings(max_examples=30)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_integrate_linear(a, b):
    g = make_grid(16, 5.0)
    rng = np.random.default_rng(2)
    X = GridField(g, rng.normal(size=(16, 16)))
    Y = GridField(g, rng.normal(size=(16, 16)))
    lhs = integrate(GridField(g, a * X.values + b * Y.values))
    rhs = a * integrate(X) + b * integrate(Y)
    assert abs(lhs - rhs) <= 1e-13 * (abs(a) + abs(b) + 1) * 50


def test_mixed_roundtrip(small_grid):
    rng = np.random.default_rng(3)
    v = rng.normal(size=(64, 64)) + 1j * rng.normal(size=(64, 64))
    assert np.max(np.abs(from_mixed(to_mixed(v, small_grid), small_grid) - v)) < 1e-12


def test_half_grid_interpolates_band_limited():
    g = make_grid(32, 10.0)
    x = 2 * math.pi * np.arange(32) / 32
    vals = np.exp(1j * 3 * x) + np.cos(5 * x)
    xh = 2 * math.pi * np.arange(64) / 64
    expected = np.exp(1j * 3 * xh) + np.cos(5 * xh)
    assert np.max(np.abs(half_grid(vals) - expected)) < 1e-13
    assert len(MomentumLine(g, vals).half_grid()) == 64


def test_pair_indices_match_momenta(small_grid):
    g = small_grid
    right, left = g.pair_momenta()
    ri, li = g.pair_indices()
    period = g.n * g.dp
    for lit, idx in ((right, ri), (left, li)):
        wrapped = g.p_half[idx]
        d = (lit - wrapped) / period
        assert np.allclose(d, np.round(d), atol=1e-12)
