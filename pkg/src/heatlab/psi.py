"""The Psi_k family and the kernel identities built from it.

    Psi_k = Delta^{1/2} sum_{n >= max(0, k)} (-sigma/2)^{n-k} a_n / Gamma(n-k+1)

satisfies ``A Psi_k = (d/2 - 1 - k) Psi_{k+1}`` and resums the short-time series
as ``K(tau) = (4 pi tau)^{-d/2} sum_k tau^k Psi_k``.  All sums here are finite
partial sums; identities between them are checked at the stated truncations.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad_vec

from .errors import OddDimension, QuadratureError, TruncationWarning
from .geometry import LaplaceProblem, sqrt_det_metric
from .sdw import apply_A, transport_box, transport_field

DEFAULT_K_MIN = -4


def rgamma(z) -> float:
    """``1/Gamma(z)``, exactly zero at the poles ``z = 0, -1, -2, ...``."""
    if float(z) == int(z) and z <= 0:
        return 0.0
    if float(z) == int(z):
        return 1.0 / math.factorial(int(z) - 1)
    return 0.0 if z > 171 else 1.0 / math.gamma(z)


def rising_factorial(k, n: int) -> float:
    """Pochhammer ``(k)_n = Gamma(k+n)/Gamma(k)``, continued to the poles of ``Gamma(k)``."""
    out = 1.0
    for i in range(n):
        out *= k + i
    return out


@dataclass(frozen=True)
class PsiValue:
    k: int
    x: np.ndarray
    y: np.ndarray
    N: int
    value: np.ndarray
    tail_estimate: float


def psi_series(coeffs, sigma, sqrt_delta, k: int, N: int):
    """Partial sum of Psi_k over ``n = max(0, k) .. N``.

    ``coeffs`` has shape ``(P, >=N+1, m, m)``; ``sigma`` and ``sqrt_delta`` shape ``(P,)``.
    Terms with ``n < k`` carry ``1/Gamma`` of a non-positive integer and are never
    formed.  Returns ``(values (P, m, m), last_term_norm (P,))``.
    """
    coeffs = np.asarray(coeffs)
    P = coeffs.shape[0]
    half = -0.5 * np.asarray(sigma, dtype=float)
    val = np.zeros((P,) + coeffs.shape[2:], dtype=complex)
    last = np.zeros(P)
    for n in range(max(0, k), N + 1):
        j = n - k
        term = (half ** j * rgamma(j + 1))[:, None, None] * coeffs[:, n]
        val += term
        last = np.linalg.norm(term, axis=(1, 2))
    s = np.asarray(sqrt_delta, dtype=float)[:, None, None]
    return s * val, np.asarray(sqrt_delta) * last


class _PointData:
    """Coefficients ``a_0..a_N``, sigma and Delta at points ``pts`` for fixed ``y``."""

    def __init__(self, problem: LaplaceProblem, pts, y, N: int, box=None, grid_n=None):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        y = np.asarray(y, dtype=float)
        box = transport_box(problem, pts, y) if box is None else box
        self.field = transport_field(problem, y, box, N, grid_n)
        res = self.field.evaluate(pts)
        self.coeffs = res["coeffs"]
        self.sigma = res["sigma"]
        self.sqrt_delta = np.sqrt(res["vanvleck"])
        self.quad_err = res["quad_err"]

    def psi(self, k: int, N: int):
        return psi_series(self.coeffs, self.sigma, self.sqrt_delta, k, N)


def psi(problem: LaplaceProblem, k: int, x, y, N: int, warn: bool = True) -> PsiValue:
    """``Psi_k(x, y)`` truncated at ``n = N``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    data = _PointData(problem, x, y, max(N, 0))
    val, last = data.psi(k, N)
    value, tail = val[0], float(last[0])
    if warn and tail > 1e-3 * np.linalg.norm(value):
        warnings.warn(f"Psi_{k} tail {tail:.3g} exceeds 1e-3 of its value; raise N",
                      TruncationWarning, stacklevel=2)
    return PsiValue(k, x, y, N, value, tail)


def _psi_field(problem: LaplaceProblem, y, k: int, N: int, box, grid_n=None) -> Callable:
    """``z -> Psi_k(z, y)`` as a batched field for ``apply_A``."""
    def f(pts):
        return _PointData(problem, pts, y, N, box=box, grid_n=grid_n).psi(k, N)[0]
    return f


def _stencil_box(problem: LaplaceProblem, x, y):
    fld_box = transport_box(problem, np.asarray(x, dtype=float)[None], y)
    return fld_box


def check_psi_recursion(problem: LaplaceProblem, k: int, x, y, N: int, grid_n=None) -> float:
    """``|| A Psi_k - (d/2 - 1 - k) Psi_{k+1} ||_F`` at ``x``, with ``A`` acting on ``x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    box = _stencil_box(problem, x, y)
    fld = transport_field(problem, y, box, N, grid_n)
    lhs = apply_A(problem, _psi_field(problem, y, k, N, box, grid_n), x, step=fld.h)
    rhs = (problem.dim / 2 - 1 - k) * psi(problem, k + 1, x, y, N, warn=False).value
    return float(np.linalg.norm(lhs - rhs))


def _kernel_from_data(data: _PointData, d: int, tau, k_min: int, k_max: int, N: int):
    tau = np.asarray(tau, dtype=float)
    out = 0.0
    for k in range(k_min, k_max + 1):
        val = data.psi(k, N)[0]
        out = out + (tau[..., None, None, None] ** k) * val
    return (4 * np.pi * tau[..., None, None, None]) ** (-d / 2) * out


def kernel_from_psi(problem: LaplaceProblem, x, y, tau, k_min: int = DEFAULT_K_MIN,
                    k_max: Optional[int] = None, N: Optional[int] = None) -> np.ndarray:
    """``(4 pi tau)^{-d/2} sum_{k=k_min}^{k_max} tau^k Psi_k`` with each Psi truncated at ``N``.

    ``N`` defaults to ``k_max`` (itself defaulting to 4).
    """
    k_max = 4 if k_max is None else k_max
    N = max(k_max, 0) if N is None else N
    data = _PointData(problem, x, y, N)
    out = _kernel_from_data(data, problem.dim, tau, k_min, k_max, N)
    return out[..., 0, :, :]


def expansion_partial_sum(problem: LaplaceProblem, x, y, tau, k_min: int = DEFAULT_K_MIN,
                          N: int = 4) -> np.ndarray:
    """The short-time series summed as the matching triangle of ``(n, j)`` terms.

    ``Delta^{1/2} (4 pi tau)^{-d/2} sum_{n<=N} tau^n a_n sum_{j<=n-k_min} (-sigma/2tau)^j / j!``
    is term-for-term the array that the Psi-sum over ``k >= k_min`` reorganises.
    """
    data = _PointData(problem, x, y, N)
    tau = np.asarray(tau, dtype=float)
    z = -data.sigma[0] / (2 * tau)
    total = 0.0
    for n in range(N + 1):
        expo = sum(z ** j / math.factorial(j) for j in range(0, n - k_min + 1))
        total = total + (tau ** n * expo)[..., None, None] * data.coeffs[0, n]
    pref = data.sqrt_delta[0] * (4 * np.pi * tau) ** (-problem.dim / 2)
    return pref[..., None, None] * total


def _split_from_data(data: _PointData, d: int, tau, N: int):
    h = d // 2
    order = N + h
    tau = np.asarray(tau, dtype=float)[..., None, None, None]
    km = sum(data.psi(h - 1 - k, order)[0] / tau ** (1 + k) for k in range(N + 1))
    kp = sum(tau ** k * data.psi(h + k, order)[0] for k in range(N + 1))
    c = (4 * np.pi) ** (-d / 2)
    return c * km, c * kp


def kernel_split(problem: LaplaceProblem, x, y, tau, N: int):
    """``(K_minus, K_plus)`` for even ``d``, each with ``N + 1`` terms.

    ``K_minus`` collects ``Psi_{d/2-1-k} / tau^{1+k}``, ``K_plus`` collects
    ``tau^k Psi_{d/2+k}``; all Psi are summed to ``n = N + d/2``.
    """
    d = problem.dim
    if d % 2:
        raise OddDimension(f"the K_minus/K_plus split needs even dimension, got d={d}")
    data = _PointData(problem, x, y, N + d // 2)
    km, kp = _split_from_data(data, d, tau, N)
    return km[..., 0, :, :], kp[..., 0, :, :]


def split_window_kernel(problem: LaplaceProblem, x, y, tau, N: int) -> np.ndarray:
    """``kernel_from_psi`` over the index window that ``kernel_split`` partitions."""
    h = problem.dim // 2
    return kernel_from_psi(problem, x, y, tau, k_min=h - 1 - N, k_max=h + N, N=N + h)


def split_heat_residual(problem: LaplaceProblem, x, y, tau: float, N: int,
                        dtau: Optional[float] = None, grid_n=None):
    """``||(d/dtau + A) K_minus||`` and the same for ``K_plus`` at ``x``.

    The time derivative is a Richardson-improved central difference.
    """
    d = problem.dim
    if d % 2:
        raise OddDimension(f"the K_minus/K_plus split needs even dimension, got d={d}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    order = N + d // 2
    box = _stencil_box(problem, x, y)
    fld = transport_field(problem, y, box, order, grid_n)
    dt = 1e-3 * tau if dtau is None else dtau
    taus = np.array([tau - dt, tau + dt, tau - dt / 2, tau + dt / 2])
    data = _PointData(problem, x, y, order, box=box, grid_n=grid_n)
    km, kp = _split_from_data(data, d, taus, N)
    out = []
    for idx, K in enumerate((km, kp)):
        Kt = K[:, 0]
        d1 = (Kt[1] - Kt[0]) / (2 * dt)
        d2 = (Kt[3] - Kt[2]) / dt
        dK = (4 * d2 - d1) / 3

        def f(pts, idx=idx):
            pd = _PointData(problem, pts, y, order, box=box, grid_n=grid_n)
            return _split_from_data(pd, d, tau, N)[idx]

        AK = apply_A(problem, f, x, step=fld.h)
        out.append(float(np.linalg.norm(dK + AK)))
    return tuple(out)


def _taylor_shift(data: _PointData, d: int, tau: float, s: float, k_min: int, k_max: int,
                  N: int, n_taylor: int):
    """``e^{s d/dtau}`` of the finite power sum ``(4 pi)^{-d/2} sum_k tau^{k-d/2} Psi_k``."""
    out = 0.0
    for k in range(k_min, k_max + 1):
        p = k - d / 2
        val = data.psi(k, N)[0][0]
        # Taylor coefficients of tau^p: falling factorial p (p-1) ... (p-j+1) / j!
        coef, series = 1.0, 0.0
        for j in range(n_taylor + 1):
            series += coef * s ** j * tau ** (p - j)
            coef *= (p - j) / (j + 1)
        out = out + series * val
    return (4 * np.pi) ** (-d / 2) * out


def shift_check(problem: LaplaceProblem, x, y, tau: float, s: float, n_taylor: int = 12,
                k_min: int = DEFAULT_K_MIN, k_max: int = 4, N: Optional[int] = None) -> float:
    """Frobenius distance between the Taylor-shifted ``K(tau)`` and ``K(tau + s)``."""
    if not (tau > 0 and tau + s > 0 and abs(s) < tau):
        raise ValueError("need tau > 0, tau + s > 0 and |s| < tau")
    N = k_max if N is None else N
    data = _PointData(problem, x, y, N)
    d = problem.dim
    shifted = _taylor_shift(data, d, tau, s, k_min, k_max, N, n_taylor)
    direct = _kernel_from_data(data, d, tau + s, k_min, k_max, N)[0]
    return float(np.linalg.norm(shifted - direct))


def binomial_partial_sum(k, s: float, tau: float, N: int) -> float:
    """``tau^{-k} sum_{n=0}^{N} Gamma(k+n) (-s/tau)^n / (Gamma(k) n!)``, which tends to ``(tau+s)^{-k}``."""
    if not (tau > 0 and abs(s / tau) < 1):
        raise ValueError("need tau > 0 and |s/tau| < 1")
    r = -s / tau
    total = 0.0
    for n in range(N + 1):
        total += rising_factorial(k, n) * r ** n / math.factorial(n)
    return tau ** (-k) * total


def delta_regularization_check(problem: LaplaceProblem, x, eps: float, test_fn: Callable,
                               K: int = 2, width: float = 12.0, n_gauss: int = 48,
                               support=None) -> float:
    """``| int sqrt(g) K(x, z; eps) f(z) dz - f(x) |`` for a scalar test function ``f``.

    ``K(x, z)`` is taken as ``K(z, x)^dagger`` so one transport field (fixed
    second argument ``x``) serves every quadrature node.  The window is ``x``
    plus or minus ``width * sqrt(eps)`` (optionally intersected with ``support``);
    d = 1 uses adaptive Gauss-Kronrod, higher dimensions a tensor Gauss-Legendre rule.
    """
    x = np.asarray(x, dtype=float)
    d = problem.dim
    m = problem.fiber_dim
    half = width * np.sqrt(eps)
    lo, hi = x - half, x + half
    if support is not None:
        support = np.asarray(support, dtype=float)
        lo, hi = np.maximum(lo, support[:, 0]), np.minimum(hi, support[:, 1])
    box = np.stack([lo, hi], axis=1)
    problem.require_inside(box.T, what="regularisation window")
    fld = transport_field(problem, x, transport_box(problem, box.T, x), K)

    def kernel_times_f(Z):
        res = fld.evaluate(Z)
        series = np.einsum("k,pkab->pab", eps ** np.arange(K + 1), res["coeffs"])
        pref = (np.sqrt(res["vanvleck"]) * (4 * np.pi * eps) ** (-d / 2)
                * np.exp(-res["sigma"] / (2 * eps)) * sqrt_det_metric(problem, Z))
        kern = np.conj(np.swapaxes(series, 1, 2)) * pref[:, None, None]
        return kern * np.asarray(test_fn(Z))[:, None, None]

    if d == 1:
        val, err = quad_vec(lambda z: kernel_times_f(np.array([[z]]))[0].ravel(), lo[0], hi[0],
                            epsabs=1e-10, epsrel=1e-10)
        if not np.all(np.isfinite(val)):
            raise QuadratureError("non-finite regularisation integral")
        val = val.reshape(m, m)
    else:
        t, w = np.polynomial.legendre.leggauss(n_gauss)
        axes = [0.5 * (a + b) + 0.5 * (b - a) * t for a, b in zip(lo, hi)]
        wts = [0.5 * (b - a) * w for a, b in zip(lo, hi)]
        Z = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=-1)
        W = np.prod(np.stack([g.ravel() for g in np.meshgrid(*wts, indexing="ij")], axis=-1), axis=-1)
        val = np.einsum("p,pab->ab", W, kernel_times_f(Z))
    target = np.asarray(test_fn(x[None]))[0] * np.eye(m)
    return float(np.linalg.norm(val - target))
