"""Chart-local geometry: metric data, Christoffel symbols, geodesics, Wilson lines.

Every field of a :class:`LaplaceProblem` is a vectorised callable: it takes
points of shape ``(..., d)`` and returns arrays with the leading ``...``
preserved (``(..., d, d)`` for the inverse metric, ``(..., d, m, m)`` for the
connection, ``(..., m, m)`` for the potential).  Batched geodesic solvers rely
on this to integrate many geodesics with one shared step sequence, which keeps
the endpoint map smooth in its arguments.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.integrate import solve_ivp

from .errors import InvalidProblem, LeftChart, NoConvergence, OutOfChart, SingularMetric

Field = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Tolerances:
    ode_tol: float = 1e-10
    bvp_tol: float = 1e-8
    max_newton: int = 50
    sym_tol: float = 1e-6
    recur_tol: float = 1e-4


@dataclass(frozen=True, eq=False)
class LaplaceProblem:
    """Coefficients of ``A = -g^{-1/2} D_mu g^{1/2} g^{mu nu} D_nu - v`` on one chart.

    ``connection`` and ``potential`` may be ``None`` (identically zero).
    ``constant_metric`` declares that ``metric_inv`` does not depend on the
    point; geodesics are then straight lines and are written down directly.
    All fields are assumed smooth on ``chart_domain``; this is not checked.
    """

    dim: int
    fiber_dim: int
    metric_inv: Field
    chart_domain: np.ndarray
    connection: Optional[Field] = None
    potential: Optional[Field] = None
    constant_metric: bool = False
    name: str = "custom"
    tol: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        dom = np.asarray(self.chart_domain, dtype=float)
        if self.dim < 1 or self.fiber_dim < 1:
            raise InvalidProblem("dim and fiber_dim must be positive")
        if dom.shape != (self.dim, 2) or np.any(dom[:, 1] <= dom[:, 0]):
            raise InvalidProblem(f"chart_domain must be a ({self.dim}, 2) box with lo < hi")
        object.__setattr__(self, "chart_domain", dom)
        self._validate()

    def _validate(self, per_axis: int = 5):
        d, m = self.dim, self.fiber_dim
        axes = [np.linspace(lo, hi, per_axis) for lo, hi in self.chart_domain]
        pts = np.stack([a.ravel() for a in np.meshgrid(*axes, indexing="ij")], axis=-1)
        ginv = self.g_inv(pts)
        if ginv.shape != (len(pts), d, d) or not np.all(np.isfinite(ginv)):
            raise InvalidProblem("metric_inv must be finite with shape (..., d, d)")
        if not np.allclose(ginv, np.swapaxes(ginv, -1, -2), rtol=1e-12, atol=1e-14):
            raise InvalidProblem("metric_inv is not symmetric")
        try:
            np.linalg.cholesky(ginv)
        except np.linalg.LinAlgError as exc:
            raise InvalidProblem("metric_inv is not positive definite on the chart") from exc
        B = self.B(pts)
        if B is not None and (B.shape != (len(pts), d, m, m) or not np.all(np.isfinite(B))):
            raise InvalidProblem("connection must be finite with shape (..., d, m, m)")
        v = self.v(pts)
        if v.shape != (len(pts), m, m) or not np.all(np.isfinite(v)):
            raise InvalidProblem("potential must be finite with shape (..., m, m)")
        scale = max(1.0, float(np.abs(v).max()))
        if np.abs(v - np.conj(np.swapaxes(v, -1, -2))).max() > 1e-10 * scale:
            raise InvalidProblem("potential is not Hermitian")

    # field access -----------------------------------------------------------

    def g_inv(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        out = np.asarray(self.metric_inv(pts), dtype=float)
        return np.broadcast_to(out, pts.shape[:-1] + (self.dim, self.dim))

    def B(self, pts) -> Optional[np.ndarray]:
        if self.connection is None:
            return None
        pts = np.asarray(pts, dtype=float)
        out = np.asarray(self.connection(pts), dtype=complex)
        return np.broadcast_to(out, pts.shape[:-1] + (self.dim, self.fiber_dim, self.fiber_dim))

    def v(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        shape = pts.shape[:-1] + (self.fiber_dim, self.fiber_dim)
        if self.potential is None:
            return np.zeros(shape, dtype=complex)
        return np.broadcast_to(np.asarray(self.potential(pts), dtype=complex), shape)

    # chart ------------------------------------------------------------------

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.chart_domain[:, 1] - self.chart_domain[:, 0]))

    @property
    def fd_step(self) -> float:
        return 1e-4 * self.diameter

    def contains(self, pts, margin: float = 0.0) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        lo, hi = self.chart_domain[:, 0], self.chart_domain[:, 1]
        return np.all((pts >= lo + margin) & (pts <= hi - margin), axis=-1)

    def require_inside(self, pts, margin: float = 0.0, what: str = "point"):
        pts = np.asarray(pts, dtype=float)
        if not np.all(self.contains(pts, margin)):
            bad = np.atleast_2d(pts)[~np.atleast_1d(self.contains(pts, margin))][0]
            raise OutOfChart(f"{what} {bad.tolist()} is outside chart domain "
                             f"{self.chart_domain.tolist()} (margin {margin:g})")

    def replace(self, **changes) -> "LaplaceProblem":
        kw = {f: getattr(self, f) for f in self.__dataclass_fields__}
        kw.update(changes)
        return LaplaceProblem(**kw)


class MetricPack(NamedTuple):
    metric_inv: np.ndarray
    metric: np.ndarray
    det: float
    sqrt_det: float


def metric_pack(problem: LaplaceProblem, x) -> MetricPack:
    """Inverse metric, metric, ``det g`` and ``sqrt(det g)`` at one point."""
    x = np.asarray(x, dtype=float)
    problem.require_inside(x)
    ginv = problem.g_inv(x)
    if np.linalg.cond(ginv) > 1e12:
        raise SingularMetric(f"metric condition number exceeds 1e12 at {x.tolist()}")
    g = np.linalg.inv(ginv)
    det = float(np.linalg.det(g))
    return MetricPack(ginv, g, det, float(np.sqrt(det)))


def sqrt_det_metric(problem: LaplaceProblem, pts) -> np.ndarray:
    return 1.0 / np.sqrt(np.linalg.det(problem.g_inv(pts)))


def _christoffel_batch(problem: LaplaceProblem, pts: np.ndarray) -> np.ndarray:
    """Gamma[n, l, mu, nu] at points ``pts`` of shape (N, d); no domain guard."""
    pts = np.asarray(pts, dtype=float)
    N, d = pts.shape
    if problem.constant_metric:
        return np.zeros((N, d, d, d))
    h = problem.fd_step
    # 4th-order central differences at h and h/2, then one Richardson step
    ks = np.array([2.0, 1.0, -1.0, -2.0])
    wk = np.array([-1.0, 8.0, -8.0, 1.0]) / 12.0
    steps = np.array([h, 0.5 * h])
    eye = np.eye(d)
    offs = steps[:, None, None, None] * ks[None, :, None, None] * eye[None, None, :, :]  # (2,4,d,d)
    stencil = pts[None, None, None, :, :] + offs[..., None, :]  # (2,4,d,N,d)
    vals = problem.g_inv(stencil.reshape(-1, d)).reshape(2, 4, d, N, d, d)
    D = np.einsum("k,skrnab->srnab", wk, vals) / steps[:, None, None, None, None]
    dginv = (16.0 * D[1] - D[0]) / 15.0  # (rho, n, a, b)
    ginv = problem.g_inv(pts)
    g = np.linalg.inv(ginv)
    dg = -np.einsum("nma,rnab,nbv->nrmv", g, dginv, g)  # dg[n, r, mu, nu] = d_r g_{mu nu}
    # lowered symbols L[n, rho, mu, nu] = d_mu g_{rho nu} + d_nu g_{rho mu} - d_rho g_{mu nu}
    low = np.einsum("nmrv->nrmv", dg) + np.einsum("nvrm->nrmv", dg) - dg
    gamma = 0.5 * np.einsum("nlr,nrmv->nlmv", ginv, low)
    return 0.5 * (gamma + np.swapaxes(gamma, 2, 3))


def christoffel(problem: LaplaceProblem, x) -> np.ndarray:
    """Christoffel symbols ``Gamma[l, mu, nu]`` at ``x``.

    Metric derivatives use 4th-order central differences of step
    ``problem.fd_step`` with one Richardson refinement; the stencil must fit
    inside the chart.
    """
    x = np.asarray(x, dtype=float)
    problem.require_inside(x, margin=2 * problem.fd_step, what="christoffel stencil at")
    return _christoffel_batch(problem, x[None])[0]


# geodesics ------------------------------------------------------------------

@dataclass(frozen=True)
class Geodesic:
    """Affinely parametrised geodesic on ``lambda in [0, 1]``."""

    start: np.ndarray
    end: np.ndarray
    v0: np.ndarray
    lam: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    energy: float
    path: Callable = field(repr=False, compare=False)

    def energy_drift(self, problem: LaplaceProblem) -> float:
        g = np.linalg.inv(problem.g_inv(self.positions))
        e = np.einsum("kab,ka,kb->k", g, self.velocities, self.velocities)
        return float(np.abs(e - self.energy).max() / max(abs(self.energy), 1e-300))


class _Flow(NamedTuple):
    end_pos: np.ndarray
    end_vel: np.ndarray
    path: Callable  # lam -> (pos (N, d), vel (N, d)) for scalar lam


def _straight_flow(X0, V0) -> _Flow:
    X0 = np.array(X0, dtype=float)
    V0 = np.array(V0, dtype=float)

    def path(lam):
        return X0 + lam * V0, V0.copy()

    return _Flow(X0 + V0, V0.copy(), path)


def _flow(problem: LaplaceProblem, X0, V0, dense: bool = False) -> _Flow:
    """Integrate a batch of geodesics from ``X0`` with velocities ``V0`` to lambda = 1."""
    X0 = np.asarray(X0, dtype=float)
    V0 = np.asarray(V0, dtype=float)
    if problem.constant_metric:
        flow = _straight_flow(X0, V0)
        if not np.all(problem.contains(flow.end_pos)):
            raise LeftChart("straight geodesic leaves the chart domain")
        return flow
    N, d = X0.shape
    lo, hi = problem.chart_domain[:, 0], problem.chart_domain[:, 1]

    def rhs(_, s):
        S = s.reshape(N, 2, d)
        G = _christoffel_batch(problem, S[:, 0])
        acc = -np.einsum("nlab,na,nb->nl", G, S[:, 1], S[:, 1])
        return np.stack([S[:, 1], acc], axis=1).ravel()

    def leave(_, s):
        X = s.reshape(N, 2, d)[:, 0]
        return float(min((X - lo).min(), (hi - X).min()))

    leave.terminal = True
    leave.direction = -1
    y0 = np.stack([X0, V0], axis=1).ravel()
    tol = problem.tol.ode_tol
    sol = solve_ivp(rhs, (0.0, 1.0), y0, method="DOP853", rtol=tol, atol=tol * 1e-2,
                    events=leave, dense_output=dense)
    end = sol.y[:, -1].reshape(N, 2, d)
    if sol.status == 1 or not np.all(np.isfinite(end)):
        raise LeftChart("geodesic left the chart domain")
    if sol.status != 0:
        raise LeftChart(f"geodesic integration failed: {sol.message}")

    def path(lam):
        S = sol.sol(lam).reshape(N, 2, d)
        return S[:, 0], S[:, 1]

    return _Flow(end[:, 0], end[:, 1], path if dense else None)


class _Shot(NamedTuple):
    v0: np.ndarray
    flow: _Flow
    residual: np.ndarray  # reached endpoint minus target, (N, d)


class _GuessLeftChart(NoConvergence):
    pass


def _shoot(problem: LaplaceProblem, Y, X, dense: bool = False, V0=None, _depth: int = 0) -> _Shot:
    """Shooting with continuation: if the initial guess leaves the chart, first
    solve to the midpoints and reuse twice those velocities as the guess."""
    try:
        return _newton_shoot(problem, Y, X, dense, V0)
    except _GuessLeftChart:
        if _depth >= 6:
            raise
    Y = np.asarray(Y, dtype=float)
    X = np.asarray(X, dtype=float)
    half = _shoot(problem, Y, 0.5 * (X + Y), False, None if V0 is None else 0.5 * np.asarray(V0),
                  _depth + 1)
    return _shoot(problem, Y, X, dense, 2.0 * half.v0, _depth + 1)


def _newton_shoot(problem: LaplaceProblem, Y, X, dense: bool = False, V0=None) -> _Shot:
    """Batched shooting: Newton on the initial velocities with a finite-difference Jacobian.

    All members (and their Jacobian perturbations) are integrated together so
    they share one step sequence.  After the residual first drops below
    ``bvp_tol`` one more Newton step is taken to polish the solution.
    """
    Y = np.asarray(Y, dtype=float)
    X = np.asarray(X, dtype=float)
    N, d = Y.shape
    V = (X - Y).copy() if V0 is None else np.array(V0, dtype=float)
    if problem.constant_metric:
        flow = _flow(problem, Y, V, dense=dense)
        return _Shot(V, flow, flow.end_pos - X)
    tol = problem.tol.bvp_tol
    delta = 1e-7
    polished = False
    step = None
    damp = 1.0
    for _ in range(problem.tol.max_newton):
        Vs = np.concatenate([V] + [V + delta * np.eye(d)[j] for j in range(d)])
        try:
            ends = _flow(problem, np.tile(Y, (d + 1, 1)), Vs).end_pos
        except LeftChart:
            if step is None:
                raise _GuessLeftChart("initial shooting guess leaves the chart")
            damp *= 0.5
            V = V - damp * step
            continue
        F = ends[:N] - X
        res = np.linalg.norm(F, axis=1).max()
        if res < tol:
            if polished:
                break
            polished = True
        J = np.stack([(ends[(j + 1) * N:(j + 2) * N] - ends[:N]) / delta for j in range(d)], axis=-1)
        try:
            step = np.linalg.solve(J, -F[..., None])[..., 0]
        except np.linalg.LinAlgError as exc:
            raise NoConvergence("singular shooting Jacobian (conjugate point?)") from exc
        damp = 1.0
        V = V + step
    else:
        raise NoConvergence(f"shooting did not converge in {problem.tol.max_newton} iterations "
                            "(endpoints may lie outside a convex neighbourhood)")
    flow = _flow(problem, Y, V, dense=dense)
    return _Shot(V, flow, flow.end_pos - X)


def _make_geodesic(problem, y, v0, flow: _Flow, n_knots: int) -> Geodesic:
    lam = np.linspace(0.0, 1.0, n_knots)
    pos = np.empty((n_knots, problem.dim))
    vel = np.empty((n_knots, problem.dim))
    for i, t in enumerate(lam):
        p, v = flow.path(t)
        pos[i], vel[i] = p[0], v[0]
    g0 = np.linalg.inv(problem.g_inv(y))
    energy = float(v0 @ g0 @ v0)

    def path(t):
        p, v = flow.path(t)
        return p[0], v[0]

    return Geodesic(np.array(y, dtype=float), pos[-1].copy(), np.array(v0, dtype=float),
                    lam, pos, vel, energy, path)


def geodesic_ivp(problem: LaplaceProblem, x0, v0, n_knots: int = 33) -> Geodesic:
    """Solve the geodesic equation from ``x0`` with initial velocity ``v0`` up to lambda = 1."""
    x0 = np.asarray(x0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    problem.require_inside(x0)
    flow = _flow(problem, x0[None], v0[None], dense=True)
    return _make_geodesic(problem, x0, v0, flow, n_knots)


def geodesic_bvp(problem: LaplaceProblem, y, x, n_knots: int = 33) -> Geodesic:
    """Geodesic from ``y`` (lambda = 0) to ``x`` (lambda = 1) by shooting.

    The initial guess is the chart secant ``x - y``.  Raises
    :class:`NoConvergence` when Newton fails, which is taken as a sign that the
    pair is not inside a convex neighbourhood.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    problem.require_inside(np.stack([x, y]))
    shot = _shoot(problem, y[None], x[None], dense=True)
    return _make_geodesic(problem, y, shot.v0[0], shot.flow, n_knots)


# Wilson lines ----------------------------------------------------------------

def _wilson_batch(problem: LaplaceProblem, path: Callable, n: int, s_eval) -> np.ndarray:
    """Solve dW/ds = -gamma_dot^mu B_mu(gamma) W, W(0) = 1 for ``n`` paths at times ``s_eval``.

    Returns an array of shape (len(s_eval), n, m, m).
    """
    m = problem.fiber_dim
    s_eval = np.asarray(s_eval, dtype=float)
    eye = np.broadcast_to(np.eye(m, dtype=complex), (n, m, m))
    if problem.connection is None:
        return np.broadcast_to(eye, (len(s_eval), n, m, m)).copy()

    def rhs(s, w):
        pos, vel = path(s)
        B = problem.B(pos)
        W = w.reshape(n, m, m)
        return (-np.einsum("nd,ndab,nbc->nac", vel, B, W)).ravel()

    tol = problem.tol.ode_tol
    order = np.argsort(s_eval)
    sol = solve_ivp(rhs, (0.0, 1.0), eye.ravel().copy(), method="DOP853", rtol=tol,
                    atol=tol * 1e-2, t_eval=s_eval[order] if len(s_eval) else None)
    if sol.status != 0:
        raise LeftChart(f"Wilson line integration failed: {sol.message}")
    out = np.empty((len(s_eval), n, m, m), dtype=complex)
    out[order] = sol.y.T.reshape(len(s_eval), n, m, m)
    return out


def wilson_line(problem: LaplaceProblem, geo: Geodesic) -> np.ndarray:
    """Parallel propagator ``W(1)`` of the connection along ``geo``."""
    def path(s):
        p, v = geo.path(s)
        return np.atleast_2d(p), np.atleast_2d(v)

    return _wilson_batch(problem, path, 1, [1.0])[0, 0]


def reversed_geodesic(geo: Geodesic) -> Geodesic:
    """The same curve traversed from ``end`` to ``start``."""
    def path(s):
        p, v = geo.path(1.0 - s)
        return p, -v

    return Geodesic(geo.end.copy(), geo.start.copy(), -geo.velocities[-1], geo.lam,
                    geo.positions[::-1].copy(), -geo.velocities[::-1], geo.energy, path)
