import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heatlab import presets
from heatlab.errors import OddDimension, TruncationWarning
from heatlab.psi import (binomial_partial_sum, check_psi_recursion, delta_regularization_check,
                         expansion_partial_sum, kernel_from_psi, kernel_split, psi, psi_series,
                         rgamma, rising_factorial, shift_check, split_heat_residual,
                         split_window_kernel)

X2, Y2 = np.array([0.3, 0.2]), np.array([0.0, -0.1])
FREE_1D = math.exp(-0.5) / math.sqrt(2 * math.pi)


def test_rgamma_exact_zeros():
    for z in (0, -1, -2, -7):
        assert rgamma(z) == 0.0
    assert rgamma(1) == 1.0
    assert rgamma(5) == pytest.approx(1 / 24)
    assert rgamma(0.5) == pytest.approx(1 / math.sqrt(math.pi))


def test_rising_factorial():
    assert rising_factorial(3, 0) == 1.0
    assert rising_factorial(3, 2) == 12.0
    assert rising_factorial(0, 3) == 0.0
    assert rising_factorial(-2, 3) == 0.0


def test_terms_below_k_never_formed():
    coeffs = np.ones((1, 6, 1, 1))
    coeffs[:, :3] = np.nan
    val, _ = psi_series(coeffs, np.array([0.2]), np.array([1.0]), 3, 5)
    assert np.isfinite(val).all()


@pytest.mark.parametrize("k", [-3, -2, -1, 0, 1, 2])
def test_free_psi_closed_form(k):
    sigma = 0.5 * np.sum((X2 - Y2) ** 2)
    value = psi(presets.flat(2), k, X2, Y2, 6).value[0, 0]
    if k <= 0:
        expected = (-sigma / 2) ** (-k) * rgamma(1 - k)
    else:
        expected = 0.0
    assert value == pytest.approx(expected, abs=1e-12)


def test_psi_coincident_constant_potential():
    x = np.array([0.2, 0.1])
    assert psi(presets.constant_potential(1.7, d=2), 1, x, x, 4).value[0, 0] == pytest.approx(1.7, abs=1e-8)


def test_truncation_warning():
    with pytest.warns(TruncationWarning):
        psi(presets.constant_potential(3.0, d=2), -1, X2, Y2, 1)


def test_zero_mode_free():
    assert check_psi_recursion(presets.flat(2), 0, X2, Y2, 8) < 1e-6


def test_recursion_constant_potential():
    assert check_psi_recursion(presets.constant_potential(1.0, d=2), 1, X2, Y2, 8) < 1e-4


def test_recursion_residual_decreases_with_N():
    prob = presets.constant_potential(1.0, d=2)
    for k in (0, 1, 2):
        r = [check_psi_recursion(prob, k, X2, Y2, N) for N in (4, 8, 16)]
        # once truncation is gone the residual sits at the finite-difference floor
        assert r[1] <= r[0] + 1e-9 and r[2] <= r[1] + 1e-9


def test_kernel_from_psi_free():
    # the Gaussian factor is resummed from negative k, so go deep enough
    val = kernel_from_psi(presets.flat(1), [1.0], [0.0], 0.5, k_min=-16)
    assert val[0, 0] == pytest.approx(FREE_1D, abs=1e-12)


def test_kernel_from_psi_constant_potential():
    val = kernel_from_psi(presets.constant_potential(1.0), [1.0], [0.0], 0.5, k_min=-16, k_max=8, N=8)
    assert val[0, 0].real == pytest.approx(math.exp(0.5) * FREE_1D, rel=1e-6)


def test_rearrangement_identity():
    prob = presets.harmonic()
    a = kernel_from_psi(prob, [0.3], [0.1], 0.2, k_min=-4, k_max=4, N=4)
    b = expansion_partial_sum(prob, [0.3], [0.1], 0.2, k_min=-4, N=4)
    assert np.abs(a - b).max() < 1e-12


def test_split_free_and_recombination():
    km, kp = kernel_split(presets.flat(2), X2, Y2, 0.3, 12)
    assert np.all(kp == 0)
    free = np.exp(-np.sum((X2 - Y2) ** 2) / 1.2) / (4 * np.pi * 0.3)
    assert km[0, 0].real == pytest.approx(free, rel=1e-12)
    const = presets.constant_potential(1.0, d=2)
    km, kp = kernel_split(const, X2, Y2, 0.3, 5)
    assert np.abs(km + kp - split_window_kernel(const, X2, Y2, 0.3, 5)).max() < 1e-12


def test_split_heat_equation():
    res = split_heat_residual(presets.constant_potential(1.0, d=2), X2, Y2, 0.3, 6)
    assert max(res) < 1e-4


def test_split_odd_dimension():
    with pytest.raises(OddDimension):
        kernel_split(presets.flat(1), [0.3], [0.1], 0.3, 2)


def test_shift_check():
    assert shift_check(presets.flat(1), [1.0], [0.0], 0.4, 0.0) == 0.0
    assert shift_check(presets.flat(1), [1.0], [0.0], 0.4, 0.05, 12) < 1e-8
    assert shift_check(presets.constant_potential(1.0), [1.0], [0.0], 0.4, 0.05, 12) < 1e-6


def test_binomial_examples():
    assert binomial_partial_sum(1, 0.2, 0.4, 40) == pytest.approx(1 / 0.6, abs=1e-10)
    assert binomial_partial_sum(-2, 0.1, 0.4, 2) == pytest.approx(0.5 ** 2, abs=1e-15)
    for N in (0, 1, 5, 20):
        assert binomial_partial_sum(0, 0.1, 0.4, N) == 1.0


@settings(max_examples=25, deadline=None)
@given(st.floats(0.5, 1.5), st.floats(0.1, 0.6))
def test_binomial_geometric_convergence(k, ratio):
    # residuals behave like n^(k-1) ratio^n; keep k near 1 so the log-linear fit is unbiased
    tau = 1.0
    s = ratio * tau
    exact = (tau + s) ** (-k)
    ns = np.arange(5, 40)
    r = np.array([abs(binomial_partial_sum(k, s, tau, int(n)) - exact) for n in ns])
    keep = r > 1e-12 * exact
    ns, r = ns[keep], r[keep]
    assert len(ns) >= 5
    fitted = math.exp(np.polyfit(ns, np.log(r), 1)[0])
    assert fitted == pytest.approx(ratio, rel=0.1)


def test_delta_regularization():
    bump = lambda z: np.exp(-np.sum((np.asarray(z) - 0.1) ** 2, axis=-1) / (2 * 0.5 ** 2))
    prob = presets.flat(1)
    e1 = delta_regularization_check(prob, [0.0], 1e-3, bump)
    e2 = delta_regularization_check(prob, [0.0], 5e-4, bump)
    assert e1 < 1e-2
    assert e1 / e2 == pytest.approx(2.0, abs=0.4)
    mass = delta_regularization_check(prob, [0.0], 1e-3, lambda z: np.ones(len(z)))
    assert mass < 1e-8


def test_delta_regularization_two_dims():
    bump = lambda z: np.exp(-np.sum(np.asarray(z) ** 2, axis=-1))
    err = delta_regularization_check(presets.flat(2), [0.1, 0.0], 1e-3, bump)
    assert err < 1e-2
