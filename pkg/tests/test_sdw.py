import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heatlab import presets
from heatlab.errors import CostBudgetExceeded, OutOfChart
from heatlab.geometry import geodesic_bvp, wilson_line
from heatlab.sdw import (a0, apply_A, clear_memo, heat_kernel_expansion, recurrence_residual,
                         sdw_coefficients, sdw_diagonal)

# Off-diagonal coefficients of the harmonic problem (v = -x^2) at x = 0.3,
# y = 0.1, frozen from a series expansion of the exact Mehler kernel.
HARMONIC_OFFDIAG = [1.0, -0.0433333333333, -0.332394444444, 0.0279864383, 0.0990997765]


def test_a0_trivial_and_abelian():
    assert np.allclose(a0(presets.flat(2), [0.3, 0.1], [-0.2, 0.4]), np.eye(1))
    xi = np.array([0.3, -0.2])
    prob = presets.constant_abelian(tuple(xi))
    x, y = np.array([0.4, 0.2]), np.array([-0.1, 0.3])
    assert a0(prob, x, y)[0, 0] == pytest.approx(np.exp(-(x - y) @ xi), abs=1e-9)
    assert np.allclose(a0(presets.non_abelian(), x, x), np.eye(2))


def test_a0_matches_wilson_line():
    prob = presets.non_abelian()
    x, y = np.array([0.3, -0.2]), np.array([-0.1, 0.25])
    W = wilson_line(prob, geodesic_bvp(prob, y, x))
    assert np.abs(a0(prob, x, y) - W).max() <= 10 * prob.tol.ode_tol


def test_apply_A_examples():
    const = presets.constant_potential(2.5, d=2)
    out = apply_A(const, lambda p: np.broadcast_to(np.eye(1), p.shape[:-1] + (1, 1)), [0.2, 0.1])
    assert out[0, 0] == pytest.approx(-2.5, abs=1e-9)
    flat = presets.flat(2)
    out = apply_A(flat, lambda p: (p[..., 0] ** 2)[..., None, None] * np.ones((1, 1)), [0.3, -0.4])
    assert out[0, 0] == pytest.approx(-2.0, abs=1e-7)
    tau = 0.7
    gauss = lambda p: np.exp(-np.sum(p * p, axis=-1) / (4 * tau))[..., None, None] * np.ones((1, 1))
    out = apply_A(flat, gauss, [0.0, 0.0])
    assert out[0, 0] == pytest.approx(2 / (2 * tau), rel=1e-6)


def test_apply_A_near_boundary():
    flat = presets.flat(1)
    with pytest.raises(OutOfChart):
        apply_A(flat, lambda p: np.ones(p.shape[:-1] + (1, 1)), [4.999])


def test_harmonic_offdiagonal_against_mehler_series():
    tab = sdw_coefficients(presets.harmonic(), [0.3], [0.1], 4)
    assert np.allclose(tab.column().real, HARMONIC_OFFDIAG, atol=1e-8)
    assert np.abs(tab.column().imag).max() == 0.0


def test_harmonic_diagonal():
    prob = presets.harmonic()
    diag = sdw_diagonal(prob, [0.7], 2)
    assert diag[1][0, 0].real == pytest.approx(-0.49, abs=1e-6)
    assert diag[2][0, 0].real == pytest.approx(0.7 ** 4 / 2 - 1 / 3, abs=1e-6)
    at0 = sdw_diagonal(prob, [0.0], 2)
    assert abs(at0[1][0, 0]) < 1e-6
    assert at0[2][0, 0].real == pytest.approx(-1 / 3, abs=1e-6)


@pytest.mark.parametrize("c", [1.0, -0.7, 2.0])
def test_constant_potential_closed_form(c):
    prob = presets.constant_potential(c)
    exact = [c ** k / math.factorial(k) for k in range(4)]
    assert np.allclose(sdw_coefficients(prob, [0.4], [0.1], 3).column(), exact, atol=1e-6)
    diag = sdw_diagonal(prob, [0.4], 3)
    assert np.allclose([a[0, 0] for a in diag], exact, atol=1e-6)
    assert np.allclose(diag[0], np.eye(1))


def test_recurrence_residual_small():
    res = recurrence_residual(presets.harmonic(), [0.3], [0.1], 3)
    assert res.max() < presets.harmonic().tol.recur_tol


def test_expansion_tau_zero_limit():
    prob = presets.harmonic()
    tab = sdw_coefficients(prob, [0.3], [0.28], 2)
    for tau in (1e-4, 1e-6):
        kern = heat_kernel_expansion(prob, [0.3], [0.28], tau, 2, table=tab)[0, 0].real
        free = np.exp(-0.02 ** 2 / (4 * tau)) / np.sqrt(4 * np.pi * tau)
        assert kern / free == pytest.approx(1.0, abs=2 * tau)


def test_gauge_covariance():
    # B_mu = d_mu chi for chi = 0.3 x1^2 - 0.2 x1 x2 + 0.1 x2
    chi = lambda p: 0.3 * p[..., 0] ** 2 - 0.2 * p[..., 0] * p[..., 1] + 0.1 * p[..., 1]

    def grad(p):
        p = np.asarray(p)
        g = np.stack([0.6 * p[..., 0] - 0.2 * p[..., 1], -0.2 * p[..., 0] + 0.1], axis=-1)
        return g[..., None, None].astype(complex)

    base = presets.linear_potential(0.8)
    gauged = base.replace(connection=grad)
    x, y = np.array([0.3, 0.2]), np.array([-0.2, 0.1])
    plain = sdw_coefficients(base, x, y, 2)
    tab = sdw_coefficients(gauged, x, y, 2)
    phase = np.exp(-chi(x) + chi(y))
    for k in range(3):
        assert abs(tab.coeffs[k][0, 0] - phase * plain.coeffs[k][0, 0]) < 1e-6


@settings(max_examples=4, deadline=None)
@given(st.tuples(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5)),
       st.tuples(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5)))
def test_hermitian_symmetry_property(x, y):
    prob = presets.non_abelian()
    f = sdw_coefficients(prob, x, y, 1)
    b = sdw_coefficients(prob, y, x, 1)
    for k in range(2):
        assert np.linalg.norm(f.coeffs[k].conj().T - b.coeffs[k]) < prob.tol.sym_tol


def test_cost_budget():
    with pytest.raises(CostBudgetExceeded):
        sdw_coefficients(presets.flat(2, potential=None), [0.3, 0.1], [0.0, 0.0], 2, grid_n=200)


def test_memo_concurrent_identical():
    clear_memo()
    prob = presets.harmonic()
    with ThreadPoolExecutor(4) as pool:
        tabs = list(pool.map(lambda _: sdw_coefficients(prob, [0.3], [0.1], 2), range(4)))
    for t in tabs[1:]:
        for a, b in zip(tabs[0].coeffs, t.coeffs):
            assert np.array_equal(a, b)
