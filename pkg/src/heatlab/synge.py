"""Synge's world function, its first derivatives and the Van Vleck-Morette determinant."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import NegativeDeterminant
from .geometry import LaplaceProblem, _shoot

COINCIDENCE = 1e-12


@dataclass(frozen=True)
class SyngeData:
    x: np.ndarray
    y: np.ndarray
    sigma: float
    sigma_lower: np.ndarray
    sigma_upper: np.ndarray
    vanvleck: Optional[float] = None


class _SigmaBatch(NamedTuple):
    sigma: np.ndarray        # (N,)
    sigma_lower: np.ndarray  # (N, d)
    sigma_upper: np.ndarray  # (N, d)
    shot: object


def sigma_batch(problem: LaplaceProblem, X, Y, dense: bool = False) -> _SigmaBatch:
    """World function for many endpoint pairs with one batched shooting solve.

    ``sigma`` is half the (conserved) energy ``g_{mu nu}(y) v0^mu v0^nu``.  The
    small mismatch between the reached endpoint and the target is removed to
    first order with ``sigma_mu``, so the values are smooth in the endpoints to
    well below the shooting tolerance.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    shot = _shoot(problem, Y, X, dense=dense)
    g_y = np.linalg.inv(problem.g_inv(Y))
    sigma = 0.5 * np.einsum("nab,na,nb->n", g_y, shot.v0, shot.v0)
    upper = shot.flow.end_vel
    g_x = np.linalg.inv(problem.g_inv(shot.flow.end_pos))
    lower = np.einsum("nab,nb->na", g_x, upper)
    sigma = sigma - np.einsum("na,na->n", lower, shot.residual)
    same = np.linalg.norm(X - Y, axis=1) < COINCIDENCE
    sigma[same] = 0.0
    upper = np.where(same[:, None], 0.0, upper)
    lower = np.where(same[:, None], 0.0, lower)
    return _SigmaBatch(sigma, lower, upper, shot)


def world_function(problem: LaplaceProblem, x, y) -> SyngeData:
    """``sigma(x, y)`` with ``sigma_mu`` and ``sigma^mu`` taken at ``x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    problem.require_inside(np.stack([x, y]))
    if np.linalg.norm(x - y) < COINCIDENCE:
        z = np.zeros(problem.dim)
        return SyngeData(x, y, 0.0, z, z.copy())
    b = sigma_batch(problem, x[None], y[None])
    return SyngeData(x, y, float(b.sigma[0]), b.sigma_lower[0], b.sigma_upper[0])


def vv_step(x, y) -> float:
    return float(np.clip(1e-2 * np.linalg.norm(np.asarray(x) - np.asarray(y)), 1e-5, 5e-2))


def van_vleck(problem: LaplaceProblem, x, y, step: Optional[float] = None) -> float:
    """``Delta(x, y) = (g(x) g(y))^{-1/2} det(-d^2 sigma / dx^mu dy^nu)``.

    The mixed Hessian uses the four-point central difference of the world
    function over endpoint displacements, at steps ``h`` and ``h/2`` combined by
    one Richardson step.  All displaced boundary-value problems are solved in a
    single batch.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = problem.dim
    problem.require_inside(np.stack([x, y]))
    if np.linalg.norm(x - y) < COINCIDENCE:
        return 1.0
    h = vv_step(x, y) if step is None else step
    problem.require_inside(np.stack([x, y]), margin=h, what="van Vleck stencil at")
    eye = np.eye(d)
    signs = [(1, 1), (1, -1), (-1, 1), (-1, -1)]
    X, Y = [], []
    for hh in (h, 0.5 * h):
        for mu in range(d):
            for nu in range(d):
                for sx, sy in signs:
                    X.append(x + sx * hh * eye[mu])
                    Y.append(y + sy * hh * eye[nu])
    sig = sigma_batch(problem, np.array(X), np.array(Y)).sigma.reshape(2, d, d, 4)
    mixed = (sig[..., 0] - sig[..., 1] - sig[..., 2] + sig[..., 3]) / (4.0 * np.array([h, 0.5 * h]) ** 2)[:, None, None]
    hess = (4.0 * mixed[1] - mixed[0]) / 3.0
    det = float(np.linalg.det(-hess))
    if det <= 0:
        raise NegativeDeterminant(f"det(-d2 sigma/dx dy) = {det:g} at x={x.tolist()}, y={y.tolist()}")
    gdet_x = 1.0 / np.linalg.det(problem.g_inv(x))
    gdet_y = 1.0 / np.linalg.det(problem.g_inv(y))
    return det / np.sqrt(gdet_x * gdet_y)


def synge_data(problem: LaplaceProblem, x, y) -> SyngeData:
    """World function, gradients and Van Vleck determinant together."""
    s = world_function(problem, x, y)
    return SyngeData(s.x, s.y, s.sigma, s.sigma_lower, s.sigma_upper, van_vleck(problem, x, y))
