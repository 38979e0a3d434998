"""Flat-space Feynman-Kac evaluation of the local heat kernel.

    K(x, y; tau) = e^{-|x-y|^2/4tau} (4 pi tau)^{-d/2}
                   E[ P exp int_0^1 M_tau(sqrt(tau) u(t) + y + t (x - y)) ]

with ``u`` a Brownian loop pinned at 0 whose coordinates have variance
``2 t (1 - t)``, and ``M_s = -u_dot^mu B_mu + s v``.  The ordered product puts
later times on the left, so at ``tau = 0`` it is the parallel propagator from
``y`` to ``x``.

Paths are generated in fixed blocks of ``BLOCK`` paths; block ``b`` draws from a
Philox stream keyed by the seed with ``b`` in the high counter word, so any
block can be produced independently and results do not depend on scheduling.
Block statistics are merged in block order.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterator, Optional

import numpy as np
from scipy.linalg import expm

from .errors import InvalidProblem, SupremumViolated
from .geometry import LaplaceProblem

BLOCK = 4096
DEFAULT_PATHS = 200_000
DEFAULT_STEPS = 128


@dataclass(frozen=True)
class FlatProblem:
    """Fields on all of R^d with the Euclidean metric.

    ``connection_ext`` maps ``(P, d)`` points to ``(P, d, m, m)``;
    ``potential_ext`` maps them to ``(P, m, m)``.  Either may be ``None``.
    ``potential_sup``, when given, is a declared upper bound of a scalar potential.
    The fields are assumed to grow at most polynomially at infinity.
    """
    dim: int
    fiber_dim: int = 1
    connection_ext: Optional[Callable] = None
    potential_ext: Optional[Callable] = None
    name: str = "flat"
    potential_sup: Optional[float] = None

    @classmethod
    def from_laplace(cls, problem: LaplaceProblem, potential_sup=None) -> "FlatProblem":
        """Reuse the fields of a flat-metric problem (their formulas define the extension)."""
        if not problem.constant_metric or not np.allclose(problem.g_inv(np.zeros(problem.dim)),
                                                          np.eye(problem.dim)):
            raise InvalidProblem("Monte Carlo evaluation needs the Euclidean metric")
        return cls(problem.dim, problem.fiber_dim, problem.connection, problem.potential,
                   problem.name, potential_sup)

    def B(self, pts):
        if self.connection_ext is None:
            return None
        m = self.fiber_dim
        out = np.asarray(self.connection_ext(pts), dtype=complex)
        return np.broadcast_to(out, pts.shape[:-1] + (self.dim, m, m))

    def v(self, pts):
        if self.potential_ext is None:
            return None
        m = self.fiber_dim
        out = np.asarray(self.potential_ext(pts), dtype=complex)
        return np.broadcast_to(out, pts.shape[:-1] + (m, m))

    def rescaled(self, tau: float, z) -> "FlatProblem":
        """Fields ``sqrt(tau) B(sqrt(tau) u + z)`` and ``tau v(sqrt(tau) u + z)``."""
        z = np.asarray(z, dtype=float)
        r = np.sqrt(tau)
        conn = pot = None
        if self.connection_ext is not None:
            def conn(u, f=self.connection_ext):
                return r * np.asarray(f(r * u + z), dtype=complex)
        if self.potential_ext is not None:
            def pot(u, f=self.potential_ext):
                return tau * np.asarray(f(r * u + z), dtype=complex)
        sup = None if self.potential_sup is None else tau * self.potential_sup
        return FlatProblem(self.dim, self.fiber_dim, conn, pot, self.name + "-rescaled", sup)


@dataclass(frozen=True)
class BridgeLoop:
    """Pinned loops ``u(t_i)``, ``t_i = i/n``; ``positions`` has shape ``(P, n+1, d)``."""
    n_steps: int
    times: np.ndarray
    positions: np.ndarray


@dataclass(frozen=True)
class MCEstimate:
    mean: np.ndarray
    stderr: np.ndarray
    n_paths: int
    n_steps: int
    seed: int
    tau: float
    x: np.ndarray
    y: np.ndarray


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Counter-based substream for path block ``block``."""
    return np.random.Generator(np.random.Philox(key=int(seed), counter=[0, 0, 0, int(block)]))


def sample_bridge(rng: np.random.Generator, d: int, n_steps: int, n_paths: int = 1) -> BridgeLoop:
    """Brownian loops with per-coordinate variance ``2 t (1 - t)``, pinned exactly at both ends."""
    if n_steps < 2:
        raise ValueError("n_steps must be >= 2")
    dt = 1.0 / n_steps
    t = np.arange(n_steps + 1) * dt
    inc = rng.standard_normal((n_paths, n_steps, d)) * np.sqrt(2.0 * dt)
    W = np.zeros((n_paths, n_steps + 1, d))
    np.cumsum(inc, axis=1, out=W[:, 1:])
    u = W - t[None, :, None] * W[:, -1:, :]
    u[:, 0] = 0.0
    u[:, -1] = 0.0
    return BridgeLoop(n_steps, t, u)


def _slice_exponents(loop: BridgeLoop, tau: float, x, y, problem: FlatProblem):
    """Per-slice generators ``M dt`` (P, n, m, m) and the path points (P, n+1, d)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    t = loop.times
    w = np.sqrt(tau) * loop.positions + y + t[None, :, None] * (x - y)
    P, n1, d = w.shape
    m = problem.fiber_dim
    dt = 1.0 / loop.n_steps
    M = np.zeros((P, n1 - 1, m, m), dtype=complex)
    B = problem.B(0.5 * (w[:, 1:] + w[:, :-1]))        # Stratonovich midpoint
    if B is not None:
        M -= np.einsum("pnu,pnuab->pnab", np.diff(w, axis=1), B)
    V = problem.v(w)
    if V is not None:
        M += (0.5 * tau * dt) * (V[:, 1:] + V[:, :-1])  # trapezoid in time
    return M, w, V


def _expm_batch(M: np.ndarray) -> np.ndarray:
    """Matrix exponentials of a stack ``(N, m, m)``; closed form for ``m = 2``."""
    if M.shape[-1] != 2:
        return expm(M)
    half = 0.5 * (M[:, 0, 0] + M[:, 1, 1])
    Z = M - half[:, None, None] * np.eye(2)
    s = np.sqrt(Z[:, 0, 0] ** 2 + Z[:, 0, 1] * Z[:, 1, 0] + 0j)
    small = np.abs(s) < 1e-4
    safe = np.where(small, 1.0, s)
    s2 = s * s
    shc = np.where(small, 1.0 + s2 / 6.0 + s2 * s2 / 120.0, np.sinh(safe) / safe)
    out = shc[:, None, None] * Z + np.cosh(s)[:, None, None] * np.eye(2)
    return np.exp(half)[:, None, None] * out


def _ordered_product(M: np.ndarray) -> np.ndarray:
    """``exp(M_{n-1}) ... exp(M_1) exp(M_0)`` for each path."""
    P, n, m, _ = M.shape
    if m == 1:
        return np.exp(M.sum(axis=1))
    E = _expm_batch(M.reshape(P * n, m, m)).reshape(P, n, m, m)
    out = E[:, 0]
    for i in range(1, n):
        out = E[:, i] @ out
    return out


def ordered_exponential(loop: BridgeLoop, tau: float, x, y, problem: FlatProblem) -> np.ndarray:
    """Path-ordered exponential along ``sqrt(tau) u + y + t (x - y)``; shape ``(P, m, m)``."""
    M, _, _ = _slice_exponents(loop, tau, x, y, problem)
    return _ordered_product(M)


def prefactor(x, y, tau: float) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = len(x)
    return float(np.exp(-np.sum((x - y) ** 2) / (4 * tau)) / (4 * np.pi * tau) ** (d / 2))


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("HEATLAB_THREADS", "1")))
    except ValueError:
        return 1


class _Stats:
    """Mergeable mean / sum-of-squares accumulator (Chan et al.)."""

    def __init__(self, shape):
        self.n = 0
        self.mean = np.zeros(shape, dtype=complex)
        self.m2 = np.zeros(shape)

    @staticmethod
    def of(values: np.ndarray) -> "_Stats":
        s = _Stats(values.shape[1:])
        s.n = len(values)
        if np.all(values == values[:1]):
            # path-independent functionals: keep mean exact and variance exactly zero
            s.mean = values[0].astype(complex)
            return s
        s.mean = values.mean(axis=0)
        s.m2 = (np.abs(values - s.mean) ** 2).sum(axis=0)
        return s

    def merge(self, other: "_Stats"):
        if other.n == 0:
            return
        n = self.n + other.n
        delta = other.mean - self.mean
        self.mean = self.mean + delta * (other.n / n)
        self.m2 = self.m2 + other.m2 + np.abs(delta) ** 2 * (self.n * other.n / n)
        self.n = n

    def stderr(self) -> np.ndarray:
        if self.n < 2:
            return np.zeros_like(self.m2)
        return np.sqrt(self.m2 / (self.n - 1) / self.n)


def _blocks(n_paths: int):
    nb = -(-n_paths // BLOCK)
    return [(b, min(BLOCK, n_paths - b * BLOCK)) for b in range(nb)]


def _map_blocks(fn, n_paths: int):
    blocks = _blocks(n_paths)
    workers = min(_threads(), len(blocks))
    if workers <= 1:
        return [fn(b, n) for b, n in blocks]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(lambda bn: fn(*bn), blocks))


def path_functionals(problem: FlatProblem, x, y, tau: float, n_paths: int, n_steps: int,
                     seed: int) -> Iterator[tuple]:
    """Yield ``(functionals (P, m, m), potential samples or None)`` block by block."""
    for b, n in _blocks(n_paths):
        loop = sample_bridge(block_rng(seed, b), problem.dim, n_steps, n)
        M, _, V = _slice_exponents(loop, tau, x, y, problem)
        yield _ordered_product(M), V


def kernel_mc(problem: FlatProblem, x, y, tau: float, n_paths: int = DEFAULT_PATHS,
              n_steps: int = DEFAULT_STEPS, seed: int = 0) -> MCEstimate:
    """Monte Carlo heat kernel with per-entry standard errors."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    m = problem.fiber_dim
    total = _Stats((m, m))
    if problem.connection_ext is None and problem.potential_ext is None:
        # every path functional is exactly the identity; no sampling needed
        total.n, total.mean = n_paths, np.eye(m, dtype=complex)
    else:
        def block(b, n):
            loop = sample_bridge(block_rng(seed, b), problem.dim, n_steps, n)
            return _Stats.of(ordered_exponential(loop, tau, x, y, problem))

        for s in _map_blocks(block, n_paths):
            total.merge(s)
    pref = prefactor(x, y, tau)
    return MCEstimate(pref * total.mean, pref * total.stderr(), n_paths, n_steps, seed,
                      tau, x, y)


@dataclass(frozen=True)
class ScalingResult:
    lhs: MCEstimate
    rhs: MCEstimate
    diff: np.ndarray
    diff_stderr: np.ndarray

    def agrees(self, n_sigma: float = 3.0, floor: float = 1e-12) -> bool:
        """``|lhs - rhs| <= n_sigma * stderr + floor * |lhs|`` entrywise.

        Coupled paths make the two sides equal path by path up to rounding, so
        the difference needs a relative floating-point floor.
        """
        bound = n_sigma * self.diff_stderr + floor * np.abs(self.lhs.mean)
        return bool(np.all(np.abs(self.diff) <= bound))


def scaling_check(problem: FlatProblem, x, y, z, tau: float, n_paths: int = DEFAULT_PATHS,
                  n_steps: int = DEFAULT_STEPS, seed: int = 0) -> ScalingResult:
    """Both sides of the scaling identity with the same loops.

    Left: ``K(x, y; tau)`` for the original fields.  Right:
    ``tau^{-d/2} K((x-z)/sqrt(tau), (y-z)/sqrt(tau); 1)`` for the fields
    ``sqrt(tau) B(sqrt(tau) . + z)``, ``tau v(sqrt(tau) . + z)``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    d = problem.dim
    r = np.sqrt(tau)
    xs, ys = (x - z) / r, (y - z) / r
    scaled = problem.rescaled(tau, z)
    pl, pr = prefactor(x, y, tau), prefactor(xs, ys, 1.0) * tau ** (-d / 2)

    def block(b, n):
        loop = sample_bridge(block_rng(seed, b), d, n_steps, n)
        L = pl * ordered_exponential(loop, tau, x, y, problem)
        R = pr * ordered_exponential(loop, 1.0, xs, ys, scaled)
        return _Stats.of(L), _Stats.of(R), _Stats.of(L - R)

    shape = (problem.fiber_dim,) * 2
    acc = [_Stats(shape), _Stats(shape), _Stats(shape)]
    for parts in _map_blocks(block, n_paths):
        for a, p in zip(acc, parts):
            a.merge(p)
    lhs = MCEstimate(acc[0].mean, acc[0].stderr(), n_paths, n_steps, seed, tau, x, y)
    rhs = MCEstimate(acc[1].mean, acc[1].stderr(), n_paths, n_steps, seed, 1.0, xs, ys)
    return ScalingResult(lhs, rhs, acc[2].mean, acc[2].stderr())


def diagonal_scaled_problem(problem: LaplaceProblem, tau: float) -> LaplaceProblem:
    """Fields ``B(u/sqrt(tau))/sqrt(tau)``, ``v(u/sqrt(tau))/tau`` on the chart scaled by ``sqrt(tau)``.

    At ``sqrt(tau) x`` its coincidence coefficients are ``a_k(x, x) / tau^k``.
    """
    r = np.sqrt(tau)
    conn = pot = None
    if problem.connection is not None:
        def conn(u, f=problem.connection):
            return np.asarray(f(np.asarray(u) / r), dtype=complex) / r
    if problem.potential is not None:
        def pot(u, f=problem.potential):
            return np.asarray(f(np.asarray(u) / r), dtype=complex) / tau
    if not problem.constant_metric:
        raise InvalidProblem("coefficient scaling is implemented for the Euclidean metric")
    return problem.replace(connection=conn, potential=pot, chart_domain=problem.chart_domain * r,
                           name=problem.name + "-scaled")


@dataclass(frozen=True)
class DiagonalScalingReport:
    tau: float
    original: list
    scaled: list
    residuals: list      # || tau^k a'_k - a_k || / max(1, ||a_k||)
    tolerance: float

    @property
    def passed(self) -> bool:
        return max(self.residuals) <= self.tolerance


def diagonal_scaling_check(problem: LaplaceProblem, x, tau: float, K_order: int = 2,
                           tol: Optional[float] = None) -> DiagonalScalingReport:
    """Compare ``a_k(x, x)`` with ``tau^k`` times the substituted-field coefficients."""
    from .sdw import sdw_diagonal

    x = np.asarray(x, dtype=float)
    orig = sdw_diagonal(problem, x, K_order)
    sub = sdw_diagonal(diagonal_scaled_problem(problem, tau), np.sqrt(tau) * x, K_order)
    res = [float(np.linalg.norm(tau ** k * sub[k] - orig[k]) / max(1.0, np.linalg.norm(orig[k])))
           for k in range(K_order + 1)]
    tol = problem.tol.recur_tol if tol is None else tol
    return DiagonalScalingReport(tau, orig, sub, res, tol)


@dataclass(frozen=True)
class BoundReport:
    estimate: MCEstimate
    bound: float            # (4 pi tau)^{-d/2} e^{-|x-y|^2/4tau} e^{tau c}
    max_functional: float
    paths_within: int
    n_paths: int

    @property
    def pathwise_ok(self) -> bool:
        return self.paths_within == self.n_paths

    @property
    def mean_ok(self) -> bool:
        return float(self.estimate.mean[0, 0].real) <= self.bound + 3 * float(self.estimate.stderr[0, 0])

    @property
    def passed(self) -> bool:
        return self.pathwise_ok and self.mean_ok


def bound_check(problem: FlatProblem, x, y, tau: float, c: Optional[float] = None,
                n_paths: int = DEFAULT_PATHS, n_steps: int = DEFAULT_STEPS,
                seed: int = 0) -> BoundReport:
    """Pathwise ``functional <= e^{tau c}`` and the kernel bound for a scalar ``v <= c``.

    Raises ``SupremumViolated`` if the potential is sampled above ``c``.
    """
    c = problem.potential_sup if c is None else c
    if c is None:
        raise InvalidProblem("bound_check needs a declared supremum c")
    if problem.connection_ext is not None or problem.fiber_dim != 1:
        raise InvalidProblem("bound_check applies to a scalar potential without connection")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    cap = np.exp(tau * c) * (1.0 + 1e-12)
    within, fmax = 0, -np.inf
    stats = _Stats((1, 1))
    for F, V in path_functionals(problem, x, y, tau, n_paths, n_steps, seed):
        if V is not None and np.max(V.real) > c:
            raise SupremumViolated(f"potential reaches {np.max(V.real):.6g} > declared sup {c}")
        vals = F[:, 0, 0].real
        within += int(np.count_nonzero(vals <= cap))
        fmax = max(fmax, float(vals.max()))
        stats.merge(_Stats.of(F))
    pref = prefactor(x, y, tau)
    est = MCEstimate(pref * stats.mean, pref * stats.stderr(), n_paths, n_steps, seed, tau, x, y)
    return BoundReport(est, pref * np.exp(tau * c), fmax, within, n_paths)


@dataclass(frozen=True)
class WellRatio:
    ratio: float
    stderr: float
    expected: float

    @property
    def passed(self) -> bool:
        return abs(self.ratio - self.expected) <= 3 * self.stderr + 1e-10 * abs(self.expected)


def two_well_ratio(problem: FlatProblem, centers, tau: float, c1: float, c2: float,
                   n_paths: int = 50_000, n_steps: int = DEFAULT_STEPS, seed: int = 0) -> WellRatio:
    """Ratio of diagonal kernels at the two well centres against ``e^{(c1-c2) tau}``."""
    a = kernel_mc(problem, centers[0], centers[0], tau, n_paths, n_steps, seed)
    b = kernel_mc(problem, centers[1], centers[1], tau, n_paths, n_steps, seed + 1)
    ka, kb = float(a.mean[0, 0].real), float(b.mean[0, 0].real)
    r = ka / kb
    err = abs(r) * np.hypot(float(a.stderr[0, 0]) / ka, float(b.stderr[0, 0]) / kb)
    return WellRatio(r, err, float(np.exp((c1 - c2) * tau)))
