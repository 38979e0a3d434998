import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from heatlab import presets
from heatlab.errors import InvalidProblem, LeftChart, OutOfChart
from heatlab.geometry import (LaplaceProblem, christoffel, geodesic_bvp, geodesic_ivp, metric_pack,
                              reversed_geodesic, wilson_line)


def test_metric_pack_flat():
    mp = metric_pack(presets.flat(2), [0.3, -1.0])
    assert np.allclose(mp.metric_inv, np.eye(2))
    assert mp.det == pytest.approx(1.0)
    assert mp.sqrt_det == pytest.approx(1.0)


def test_metric_pack_polar():
    mp = metric_pack(presets.polar_flat(), [2.0, 0.0])
    assert np.allclose(mp.metric, np.diag([1.0, 4.0]))
    assert mp.det == pytest.approx(4.0)
    assert mp.sqrt_det == pytest.approx(2.0)


def test_metric_pack_outside_chart():
    with pytest.raises(OutOfChart):
        metric_pack(presets.flat(2), [7.0, 0.0])


def test_christoffel_flat_vanishes():
    assert np.all(christoffel(presets.flat(2), [0.4, 1.1]) == 0.0)


def test_christoffel_polar():
    gam = christoffel(presets.polar_flat(), [2.0, 0.0])
    expected = np.zeros((2, 2, 2))
    expected[0, 1, 1] = -2.0
    expected[1, 0, 1] = expected[1, 1, 0] = 0.5
    assert np.allclose(gam, expected, atol=1e-8)


def test_christoffel_stencil_guard():
    prob = presets.polar_flat()
    lo = prob.chart_domain[0, 0]
    with pytest.raises(OutOfChart):
        christoffel(prob, [lo + 0.1 * prob.fd_step, 0.5])


@settings(max_examples=20, deadline=None)
@given(st.floats(0.5, 3.5), st.floats(-1.0, 2.5))
def test_christoffel_symmetric_lower_indices(r, th):
    gam = christoffel(presets.polar_flat(), [r, th])
    assert np.abs(gam - np.swapaxes(gam, 1, 2)).max() <= 1e-14


def test_ivp_flat_straight_line():
    geo = geodesic_ivp(presets.flat(2), [0.0, 0.0], [1.0, 0.0])
    assert np.allclose(geo.positions[:, 0], geo.lam)
    assert np.allclose(geo.positions[:, 1], 0.0)


def test_ivp_polar_matches_cartesian_line():
    prob = presets.polar_flat()
    # Cartesian start (1, 0) with velocity (0.3, 0.8); in polar v = (0.3, 0.8)
    geo = geodesic_ivp(prob, [1.0, 0.0], [0.3, 0.8])
    cart = np.array([1.0, 0.0]) + geo.lam[:, None] * np.array([0.3, 0.8])
    err = np.abs(geo.positions - presets.cartesian_to_polar(cart)).max()
    assert err < 10 * prob.tol.ode_tol
    assert geo.energy_drift(prob) <= 10 * prob.tol.ode_tol


def test_ivp_leaving_chart():
    with pytest.raises(LeftChart):
        geodesic_ivp(presets.polar_flat(), [1.0, 0.0], [50.0, 0.0])


def test_bvp_flat_segment():
    geo = geodesic_bvp(presets.flat(2), [0.0, 0.0], [1.0, 1.0])
    assert geo.energy == pytest.approx(2.0)
    assert np.allclose(geo.positions[-1], [1.0, 1.0])


def test_bvp_polar_chord():
    geo = geodesic_bvp(presets.polar_flat(), [1.0, 0.0], [1.0, np.pi / 2])
    assert geo.energy == pytest.approx(2.0, abs=1e-7)


def test_bvp_degenerate():
    geo = geodesic_bvp(presets.polar_flat(), [1.5, 0.2], [1.5, 0.2])
    assert np.all(geo.v0 == 0.0)
    assert geo.energy == 0.0


@settings(max_examples=10, deadline=None)
@given(st.floats(1.0, 2.5), st.floats(0.0, 1.5), st.floats(1.0, 2.5), st.floats(0.0, 1.5))
def test_bvp_ivp_round_trip(r1, t1, r2, t2):
    prob = presets.polar_flat()
    y, x = np.array([r1, t1]), np.array([r2, t2])
    geo = geodesic_bvp(prob, y, x)
    back = geodesic_ivp(prob, y, geo.v0)
    assert np.abs(back.end - x).max() <= prob.tol.bvp_tol
    assert back.energy_drift(prob) <= 10 * prob.tol.ode_tol


def test_wilson_line_zero_connection():
    prob = presets.flat(2)
    geo = geodesic_bvp(prob, [0.0, 0.0], [0.5, 0.3])
    assert np.allclose(wilson_line(prob, geo), np.eye(1))


def test_wilson_line_abelian():
    xi = np.array([0.3, -0.2])
    prob = presets.constant_abelian(tuple(xi))
    x, y = np.array([0.4, 0.2]), np.array([-0.1, 0.3])
    W = wilson_line(prob, geodesic_bvp(prob, y, x))
    assert W[0, 0] == pytest.approx(np.exp(-(x - y) @ xi), abs=1e-9)


def test_wilson_line_non_abelian_segment():
    prob = presets.non_abelian()
    y, x = np.array([-0.2, 0.1]), np.array([0.3, 0.4])
    u = x - y
    W = wilson_line(prob, geodesic_bvp(prob, y, x))
    B = prob.B(np.zeros(2))
    expected = expm(-np.einsum("d,dab->ab", u, B))
    # dense ordered product as an independent route
    n = 10_000
    step = expm(-np.einsum("d,dab->ab", u, B) / n)
    dense = np.linalg.matrix_power(step, n)
    assert np.abs(W - expected).max() < 1e-9
    assert np.abs(dense - expected).max() < 1e-9


def test_wilson_line_reversal_is_inverse():
    prob = presets.non_abelian()
    geo = geodesic_bvp(prob, [-0.3, 0.2], [0.4, -0.1])
    W = wilson_line(prob, geo)
    Wr = wilson_line(prob, reversed_geodesic(geo))
    assert np.abs(Wr @ W - np.eye(2)).max() <= 10 * prob.tol.ode_tol


def test_invalid_problem_rejected():
    with pytest.raises(InvalidProblem):
        LaplaceProblem(2, 1, lambda x: -np.eye(2), np.array([[0, 1], [0, 1]]))
    with pytest.raises(InvalidProblem):
        LaplaceProblem(2, 1, lambda x: np.eye(2), np.array([[1, 0], [0, 1]]))
