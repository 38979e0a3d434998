"""Off-diagonal Seeley-DeWitt coefficients from the transport recurrence.

Along the affine geodesic ``gamma`` from ``y`` (``s = 0``) to ``z`` (``s = 1``)
the operator ``sigma^mu D_mu`` acts as ``s (d/ds + gamma_dot . B)``.  Writing
``a_{k+1} = W(s) b(s)`` with ``W`` the parallel propagator turns the recurrence
into an ordinary integral, and the solution regular at ``s = 0`` is

    a_{k+1}(z) = W(1) int_0^1 s^k W(s)^{-1} R_k(gamma(s)) ds,
    R_k = -Delta^{-1/2} A (Delta^{1/2} a_k).

``R_k`` needs second derivatives of ``a_k`` in its first argument.  For a fixed
``y`` the coefficients are therefore tabulated level by level on a Chebyshev
grid covering the geodesic; ``apply_A`` then acts on the interpolant.  One grid
serves every ``x`` near ``y`` and every order, so the cost is linear in ``K``.
"""
from __future__ import annotations

import threading
import weakref
from collections import OrderedDict
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from .chebyshev import ChebInterpolant, grid_nodes
from .errors import CostBudgetExceeded
from .geometry import LaplaceProblem, _shoot, _wilson_batch, sqrt_det_metric

MAX_EVALS = 1_000_000
DEFAULT_GRID = {1: 24, 2: 12, 3: 8}
DEFAULT_QUAD = 24


@dataclass(frozen=True)
class SdwTable:
    x: np.ndarray
    y: np.ndarray
    order: int
    coeffs: List[np.ndarray]
    sigma: float
    vanvleck: float
    stencil_width: float
    transport_tol: float
    grid_n: int = 0

    def column(self, i: int = 0, j: int = 0) -> np.ndarray:
        """Entry ``(i, j)`` of every coefficient, as a complex vector."""
        return np.array([c[i, j] for c in self.coeffs])


def _stencil_width(scale: float) -> float:
    return float(np.clip(1e-2 * scale, 1e-4, 5e-2))


def _apply_A_h(problem: LaplaceProblem, f: Callable, X: np.ndarray, h: float) -> np.ndarray:
    """Second-order flux-form discretisation of ``A`` at the points ``X`` (N, d)."""
    N, d = X.shape
    m = problem.fiber_dim
    offs = np.zeros((2 * d + 1, d))
    for mu in range(d):
        offs[1 + 2 * mu, mu] = 1.0
        offs[2 + 2 * mu, mu] = -1.0
    # flux points X + h*o_j, each with its own gradient stencil
    Pj = X[None, :, :] + h * offs[:, None, :]                       # (J, N, d)
    pts = Pj[:, None, :, :] + h * offs[None, :, None, :]           # (J, S, N, d)
    fv = np.asarray(f(pts.reshape(-1, d)), dtype=complex).reshape(2 * d + 1, 2 * d + 1, N, m, m)
    f0 = fv[:, 0]                                                   # (J, N, m, m)
    grad = np.stack([(fv[:, 1 + 2 * nu] - fv[:, 2 + 2 * nu]) / (2 * h) for nu in range(d)], axis=2)
    flatP = Pj.reshape(-1, d)
    B = problem.B(flatP)
    if B is not None:
        B = B.reshape(2 * d + 1, N, d, m, m)
        grad = grad + np.einsum("jnvab,jnbc->jnvac", B, f0)
    ginv = problem.g_inv(flatP).reshape(2 * d + 1, N, d, d)
    sg = sqrt_det_metric(problem, flatP).reshape(2 * d + 1, N)
    J = sg[..., None, None, None] * np.einsum("jnuv,jnvab->jnuab", ginv, grad)
    div = np.zeros((N, m, m), dtype=complex)
    for mu in range(d):
        div += (J[1 + 2 * mu, :, mu] - J[2 + 2 * mu, :, mu]) / (2 * h)
    if B is not None:
        div += np.einsum("nuab,nubc->nac", B[0], J[0])
    return -div / sg[0][:, None, None] - problem.v(X) @ f0[0]


def apply_A(problem: LaplaceProblem, f: Callable, x, step: Optional[float] = None,
            richardson: bool = True) -> np.ndarray:
    """Apply ``A = -g^{-1/2} D_mu g^{1/2} g^{mu nu} D_nu - v`` to a matrix field ``f``.

    ``f`` maps points ``(P, d)`` to matrices ``(P, m, m)``.  Derivatives are
    central differences of width ``step``; with ``richardson`` the results at
    ``step`` and ``step/2`` are combined to fourth order.  ``x`` may be a single
    point or a batch ``(N, d)``.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    h = _stencil_width(problem.diameter) if step is None else float(step)
    problem.require_inside(X, margin=2 * h, what="apply_A stencil at")
    out = _apply_A_h(problem, f, X, h)
    if richardson:
        out = (4.0 * _apply_A_h(problem, f, X, 0.5 * h) - out) / 3.0
    return out[0] if single else out


def _gauss_legendre(q: int):
    t, w = np.polynomial.legendre.leggauss(q)
    return 0.5 * (t + 1.0), 0.5 * w


class _Paths:
    """Geodesics from ``y`` to a batch of targets, sampled at the quadrature nodes."""

    def __init__(self, problem: LaplaceProblem, y, targets, s):
        n = len(targets)
        Y = np.broadcast_to(y, targets.shape)
        shot = _shoot(problem, Y, targets, dense=True)
        self.shot = shot
        self.v0 = shot.v0
        self.pos = np.stack([shot.flow.path(si)[0] for si in s])     # (Q, N, d)
        vel_end = shot.flow.end_vel
        g_y = np.linalg.inv(problem.g_inv(Y))
        g_x = np.linalg.inv(problem.g_inv(shot.flow.end_pos))
        lower = np.einsum("nab,nb->na", g_x, vel_end)
        self.sigma = (0.5 * np.einsum("nab,na,nb->n", g_y, shot.v0, shot.v0)
                      - np.einsum("na,na->n", lower, shot.residual))
        W = _wilson_batch(problem, shot.flow.path, n, np.append(s, 1.0))
        self.W1 = W[-1]                                                  # (N, m, m)
        if problem.connection is None:
            self.Winv = None
        else:
            self.Winv = np.linalg.inv(W[:-1])                            # (Q, N, m, m)


class TransportField:
    """Seeley-DeWitt coefficients ``a_0..a_K`` at fixed ``y`` tabulated over a box.

    The box should contain every geodesic from ``y`` to the points where the
    coefficients are wanted.  Levels are built bottom-up: grid values of
    ``a_k`` give the interpolant of ``Delta^{1/2} a_k``, on which ``apply_A``
    yields the source of the next transport integral.
    """

    def __init__(self, problem: LaplaceProblem, y, box, order: int,
                 grid_n: Optional[int] = None, quad_n: int = DEFAULT_QUAD,
                 stencil_width: Optional[float] = None):
        d = problem.dim
        self.problem = problem
        self.y = np.asarray(y, dtype=float)
        self.box = np.asarray(box, dtype=float)
        self.order = int(order)
        self.grid_n = grid_n or DEFAULT_GRID.get(d, 6)
        self.quad_n = quad_n
        self.diam = float(np.linalg.norm(self.box[:, 1] - self.box[:, 0]))
        self.h = _stencil_width(self.diam) if stencil_width is None else float(stencil_width)
        n_bvp = (self.grid_n ** d) * (d + 1) * problem.tol.max_newton
        if n_bvp > MAX_EVALS:
            raise CostBudgetExceeded(f"transport grid needs up to {n_bvp} shooting solves "
                                     f"(budget {MAX_EVALS})")
        self.s, self.w = _gauss_legendre(quad_n)
        self.nodes = grid_nodes(self.box, self.grid_n)
        problem.require_inside(self.nodes, what="transport grid node")
        paths = _Paths(problem, self.y, self.nodes, self.s)
        self._sqrt_delta = self._delta_field(paths)
        self.values = []        # grid values of a_k, k = 0..K
        self.sources = []       # interpolants of Delta^{1/2} a_k, k = 0..K-1
        self.values.append(paths.W1)
        for k in range(self.order):
            self.sources.append(self._source_interpolant(self.values[k]))
            self.values.append(self._transport(paths, k, self.sources[k]))
        self.coeff_interpolants = [ChebInterpolant(self.box, v) for v in self.values]

    # Van Vleck field: with sigma_nu(y-side) = -g_{nu rho}(y) v0^rho, the mixed
    # Hessian is g(y) dv0/dz, hence Delta = det(dv0/dz) sqrt(det g(y) / det g(z)).
    def _delta_field(self, paths: _Paths) -> Optional[ChebInterpolant]:
        problem = self.problem
        if problem.constant_metric:
            return None
        d = problem.dim
        v0 = ChebInterpolant(self.box, paths.v0)
        jac = np.stack([v0.derivative(mu)(self.nodes) for mu in range(d)], axis=-1)  # (P, rho, mu)
        ratio = sqrt_det_metric(problem, self.y[None])[0] / sqrt_det_metric(problem, self.nodes)
        delta = np.linalg.det(jac) * ratio
        return ChebInterpolant(self.box, np.sqrt(delta))

    def sqrt_delta(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        if self._sqrt_delta is None:
            return np.ones(len(pts))
        return np.real(self._sqrt_delta(pts))

    def _source_interpolant(self, values) -> ChebInterpolant:
        return ChebInterpolant(self.box, self.sqrt_delta(self.nodes)[:, None, None] * values)

    def source(self, k: int, pts) -> np.ndarray:
        """``R_k = -Delta^{-1/2} A (Delta^{1/2} a_k)`` at ``pts`` (P, d)."""
        Af = apply_A(self.problem, self.sources[k], pts, step=self.h)
        return -Af / self.sqrt_delta(pts)[:, None, None]

    def _transport(self, paths: _Paths, k: int, src: ChebInterpolant, weights=None, s=None):
        s = self.s if s is None else s
        w = self.w if weights is None else weights
        Q, N, d = paths.pos.shape
        R = self.source(k, paths.pos.reshape(-1, d)).reshape(Q, N, *self.values[0].shape[1:])
        if paths.Winv is not None:
            R = paths.Winv @ R
        integral = np.einsum("q,qnab->nab", w * s ** k, R)
        return paths.W1 @ integral

    def evaluate(self, X) -> dict:
        """Coefficients at the points ``X`` (N, d) by direct transport along their geodesics."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        paths = _Paths(self.problem, self.y, X, self.s)
        coeffs = [paths.W1]
        err = 0.0
        # a lower-order rule on the same integrand gives the quadrature error estimate
        q2 = max(self.quad_n * 2 // 3, 4)
        s2, w2 = _gauss_legendre(q2)
        paths2 = _Paths(self.problem, self.y, X, s2)
        for k in range(self.order):
            hi = self._transport(paths, k, self.sources[k])
            lo = self._transport(paths2, k, self.sources[k], weights=w2, s=s2)
            coeffs.append(hi)
            err = max(err, float(np.abs(hi - lo).max()))
        delta = self.sqrt_delta(X) ** 2
        return {"coeffs": np.stack(coeffs, axis=1), "sigma": paths.sigma, "vanvleck": delta,
                "quad_err": err}

    def coefficient(self, k: int, pts) -> np.ndarray:
        """Interpolated grid value of ``a_k`` (cheap, used by residual checks)."""
        return self.coeff_interpolants[k](np.atleast_2d(pts))


# ---------------------------------------------------------------------------
# memo: one field per (problem, y, box, K, grid, quadrature); insert-if-absent

_MEMO_LIMIT = 64
_memo: "weakref.WeakKeyDictionary[LaplaceProblem, OrderedDict]" = weakref.WeakKeyDictionary()
_memo_lock = threading.Lock()


def _quantize(a) -> tuple:
    return tuple(np.round(np.asarray(a, dtype=float).ravel(), 12).tolist())


def transport_field(problem: LaplaceProblem, y, box, order: int, grid_n=None,
                    quad_n: int = DEFAULT_QUAD) -> TransportField:
    key = (_quantize(y), _quantize(box), int(order), grid_n, quad_n)
    with _memo_lock:
        table = _memo.setdefault(problem, OrderedDict())
        hit = table.get(key)
        if hit is not None:
            table.move_to_end(key)
            return hit
    fld = TransportField(problem, np.asarray(y, dtype=float), box, order, grid_n, quad_n)
    with _memo_lock:
        table = _memo.setdefault(problem, OrderedDict())
        fld = table.setdefault(key, fld)
        while len(table) > _MEMO_LIMIT:
            table.popitem(last=False)
    return fld


def clear_memo():
    with _memo_lock:
        _memo.clear()


def transport_box(problem: LaplaceProblem, x, y) -> np.ndarray:
    """Box around ``x``, ``y`` and their geodesic, padded and clipped to the chart.

    The clipping margin leaves room for the ``apply_A`` stencil.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float)
    pts = np.vstack([x, y[None]])
    if not problem.constant_metric:
        s = np.linspace(0.0, 1.0, 17)
        shot = _shoot(problem, np.broadcast_to(y, x.shape), x, dense=True)
        pts = np.vstack([pts] + [shot.flow.path(si)[0] for si in s])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    sep = float(np.linalg.norm(x - y, axis=1).max())
    pad = max(0.25 * sep, 0.1)
    lo, hi = lo - pad, hi + pad
    scale = float(np.linalg.norm(hi - lo))
    margin = 2.5 * _stencil_width(scale) + 2.0 * problem.fd_step
    dom = problem.chart_domain
    lo = np.maximum(lo, dom[:, 0] + margin)
    hi = np.minimum(hi, dom[:, 1] - margin)
    return np.stack([lo, hi], axis=1)


def sdw_coefficients(problem: LaplaceProblem, x, y, K: int, grid_n: Optional[int] = None,
                     quad_n: int = DEFAULT_QUAD, box=None) -> SdwTable:
    """Seeley-DeWitt coefficients ``a_0(x, y) .. a_K(x, y)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    problem.require_inside(np.stack([x, y]))
    if K < 0:
        raise ValueError("order K must be >= 0")
    box = transport_box(problem, x, y) if box is None else np.asarray(box, dtype=float)
    fld = transport_field(problem, y, box, K, grid_n, quad_n)
    res = fld.evaluate(x[None])
    coeffs = [res["coeffs"][0, k] for k in range(K + 1)]
    return SdwTable(x, y, K, coeffs, float(res["sigma"][0]), float(res["vanvleck"][0]),
                    fld.h, res["quad_err"], fld.grid_n)


def a0(problem: LaplaceProblem, x, y) -> np.ndarray:
    """Parallel propagator along the geodesic from ``y`` to ``x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    problem.require_inside(np.stack([x, y]))
    if np.array_equal(x, y):
        return np.eye(problem.fiber_dim, dtype=complex)
    shot = _shoot(problem, y[None], x[None], dense=True)
    return _wilson_batch(problem, shot.flow.path, 1, [1.0])[0, 0]


DIAG_EPS = 1e-3


def sdw_diagonal(problem: LaplaceProblem, x, K: int, eps: float = DIAG_EPS,
                 direction=None, grid_n: Optional[int] = None) -> List[np.ndarray]:
    """Coincidence values ``a_k(x, x)`` from displaced pairs, Richardson-extrapolated.

    The pairs ``(x + eps u, x)`` and ``(x + eps u / 2, x)`` share one transport
    field, and ``2 f(eps/2) - f(eps)`` removes the linear term in ``eps``.
    """
    x = np.asarray(x, dtype=float)
    d = problem.dim
    u = np.ones(d) / np.sqrt(d) if direction is None else np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    X = np.stack([x + eps * u, x + 0.5 * eps * u])
    problem.require_inside(X)
    box = transport_box(problem, X, x)
    fld = transport_field(problem, x, box, K, grid_n)
    c = fld.evaluate(X)["coeffs"]
    ext = 2.0 * c[1] - c[0]
    return [ext[k] for k in range(K + 1)]


def heat_kernel_expansion(problem: LaplaceProblem, x, y, tau, K: int, table: Optional[SdwTable] = None):
    """Truncated short-time series ``Delta^{1/2} (4 pi tau)^{-d/2} e^{-sigma/2tau} sum_k tau^k a_k``.

    ``tau`` may be a scalar or an array; the result has shape ``tau.shape + (m, m)``.
    """
    tab = sdw_coefficients(problem, x, y, K) if table is None else table
    tau = np.asarray(tau, dtype=float)
    d = problem.dim
    coeffs = np.stack(tab.coeffs[:K + 1])
    powers = tau[..., None] ** np.arange(K + 1)
    series = np.einsum("...k,kab->...ab", powers, coeffs)
    pref = np.sqrt(tab.vanvleck) * (4 * np.pi * tau) ** (-d / 2) * np.exp(-tab.sigma / (2 * tau))
    return pref[..., None, None] * series


def recurrence_residual(problem: LaplaceProblem, x, y, K: int, lambdas=(0.5, 1.0),
                        grid_n: Optional[int] = None) -> np.ndarray:
    """Residuals of ``(k+1+sigma^mu D_mu) a_{k+1} + Delta^{-1/2} A Delta^{1/2} a_k``.

    Evaluated on the geodesic from ``y`` to ``x`` at the affine parameters
    ``lambdas``; ``sigma^mu D_mu`` is applied as ``lambda (d/dlambda + gamma_dot.B)``
    with a central difference in ``lambda`` of the tabulated coefficients.
    Returns the Frobenius norms, shape ``(K, len(lambdas))``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    box = transport_box(problem, x, y)
    fld = transport_field(problem, y, box, K, grid_n)
    shot = _shoot(problem, y[None], x[None], dense=True)
    dl = 1e-3
    out = np.zeros((K, len(lambdas)))
    for j, lam in enumerate(lambdas):
        lp, lm = min(lam + dl, 1.0), lam - dl
        p0, v0 = shot.flow.path(lam)
        pp, pm = shot.flow.path(lp)[0], shot.flow.path(lm)[0]
        B = problem.B(p0)
        for k in range(K):
            a_p = fld.coefficient(k + 1, pp)[0]
            a_m = fld.coefficient(k + 1, pm)[0]
            a_c = fld.coefficient(k + 1, p0)[0]
            if lp - lam < dl:       # one-sided second-order difference at the end point
                a_mm = fld.coefficient(k + 1, shot.flow.path(lam - 2 * dl)[0])[0]
                deriv = (3 * a_c - 4 * a_m + a_mm) / (2 * dl)
            else:
                deriv = (a_p - a_m) / (2 * dl)
            trans = deriv
            if B is not None:
                trans = trans + np.einsum("u,uab,bc->ac", v0[0], B[0], a_c)
            lhs = (k + 1) * a_c + lam * trans
            rhs = fld.source(k, p0)[0]
            out[k, j] = np.linalg.norm(lhs - rhs)
    return out
