"""Named problem presets.

All fields are written with numpy broadcasting so they accept point arrays of
shape ``(..., d)``.
"""
from __future__ import annotations

import numpy as np

from .geometry import LaplaceProblem

_SX = np.array([[0, 1], [1, 0]], dtype=complex)
_SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
_SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def _box(d, half):
    return np.array([[-half, half]] * d, dtype=float)


def _identity_metric(d):
    eye = np.eye(d)

    def metric_inv(x):
        return np.broadcast_to(eye, np.shape(x)[:-1] + (d, d))

    return metric_inv


def _scalar(fn):
    """Wrap a scalar function of points into a 1x1 matrix field."""
    def field(x):
        return np.asarray(fn(np.asarray(x)), dtype=complex)[..., None, None]

    return field


def flat(d: int = 2, half_width: float = 5.0, potential=None, connection=None,
         fiber_dim: int = 1, name: str = "flat") -> LaplaceProblem:
    return LaplaceProblem(d, fiber_dim, _identity_metric(d), _box(d, half_width),
                          connection=connection, potential=potential,
                          constant_metric=True, name=name)


def constant_potential(c: float = 1.0, d: int = 1, half_width: float = 5.0) -> LaplaceProblem:
    return flat(d, half_width, potential=_scalar(lambda x: np.full(x.shape[:-1], c)),
                name="constant-c")


def harmonic(omega: float = 1.0, d: int = 1, half_width: float = 4.0) -> LaplaceProblem:
    """``v(x) = -omega^2 |x|^2``, i.e. ``A = -Laplacian + omega^2 |x|^2``."""
    return flat(d, half_width, potential=_scalar(lambda x: -omega ** 2 * np.sum(x * x, axis=-1)),
                name="harmonic")


def linear_potential(coef: float = 1.0, d: int = 2, half_width: float = 5.0) -> LaplaceProblem:
    """``v(x) = coef * x_1`` in Cartesian coordinates."""
    return flat(d, half_width, potential=_scalar(lambda x: coef * x[..., 0]), name="linear")


def constant_abelian(xi=(0.3, -0.2), c: float = 0.5, anti_hermitian: bool = False,
                     half_width: float = 5.0) -> LaplaceProblem:
    """Constant Abelian connection ``B_mu = xi_mu`` (or ``i xi_mu``) and constant potential."""
    xi = np.asarray(xi, dtype=complex)
    d = len(xi)
    if anti_hermitian:
        xi = 1j * xi
    B = xi[:, None, None]

    def connection(x):
        return np.broadcast_to(B, np.shape(x)[:-1] + (d, 1, 1))

    return flat(d, half_width, potential=_scalar(lambda x: np.full(x.shape[:-1], c)),
                connection=connection, name="constant-abelian")


def non_abelian(b1: float = 0.5, b2: float = 0.3, v0: float = 0.4, v1: float = 0.2,
                half_width: float = 2.0) -> LaplaceProblem:
    """Constant anti-Hermitian su(2) connection with a Hermitian, point-dependent potential.

    ``B_1 = i b1 sigma_x``, ``B_2 = i b2 sigma_y``, ``v = v0 sigma_z + v1 x_1 sigma_x``.
    """
    B = np.stack([1j * b1 * _SX, 1j * b2 * _SY])

    def connection(x):
        return np.broadcast_to(B, np.shape(x)[:-1] + (2, 2, 2))

    def potential(x):
        x = np.asarray(x)
        return v0 * _SZ + v1 * x[..., 0, None, None] * _SX

    return flat(2, half_width, potential=potential, connection=connection, fiber_dim=2,
                name="non-abelian")


def two_well(c1: float = 1.0, c2: float = -1.0, width: float = 0.5, d: int = 1,
             half_width: float = 12.0) -> LaplaceProblem:
    """Smooth step between plateaus ``c1`` (x_1 << 0) and ``c2`` (x_1 >> 0)."""
    def v(x):
        s = 0.5 * (1.0 + np.tanh(x[..., 0] / width))
        return c1 + (c2 - c1) * s

    return flat(d, half_width, potential=_scalar(v), name="two-well")


def polar_flat(potential=None, r_range=(0.3, 4.0), theta_range=(-np.pi / 2, np.pi)) -> LaplaceProblem:
    """Flat plane in polar coordinates ``(r, theta)``: ``g^{mu nu} = diag(1, 1/r^2)``."""
    def metric_inv(x):
        x = np.asarray(x)
        out = np.zeros(x.shape[:-1] + (2, 2))
        out[..., 0, 0] = 1.0
        out[..., 1, 1] = 1.0 / x[..., 0] ** 2
        return out

    return LaplaceProblem(2, 1, metric_inv, np.array([r_range, theta_range], dtype=float),
                          potential=potential, name="polar-flat")


def polar_linear_potential(coef: float = 1.0) -> LaplaceProblem:
    """The Cartesian ``v = coef * x_1`` written in polar coordinates."""
    return polar_flat(potential=_scalar(lambda x: coef * x[..., 0] * np.cos(x[..., 1])))


def sphere_patch(theta_range=(0.4, np.pi - 0.4), phi_range=(-1.5, 1.5)) -> LaplaceProblem:
    """Unit 2-sphere in polar angles ``(theta, phi)``; scalar curvature 2."""
    def metric_inv(x):
        x = np.asarray(x)
        out = np.zeros(x.shape[:-1] + (2, 2))
        out[..., 0, 0] = 1.0
        out[..., 1, 1] = 1.0 / np.sin(x[..., 0]) ** 2
        return out

    return LaplaceProblem(2, 1, metric_inv, np.array([theta_range, phi_range], dtype=float),
                          name="sphere")


def polar_to_cartesian(p):
    p = np.asarray(p, dtype=float)
    return np.stack([p[..., 0] * np.cos(p[..., 1]), p[..., 0] * np.sin(p[..., 1])], axis=-1)


def cartesian_to_polar(q):
    q = np.asarray(q, dtype=float)
    return np.stack([np.hypot(q[..., 0], q[..., 1]), np.arctan2(q[..., 1], q[..., 0])], axis=-1)


PRESETS = {
    "flat": flat,
    "constant-c": constant_potential,
    "constant-potential": constant_potential,
    "harmonic": harmonic,
    "linear": linear_potential,
    "constant-abelian": constant_abelian,
    "non-abelian": non_abelian,
    "two-well": two_well,
    "polar-flat": polar_flat,
    "polar-linear": polar_linear_potential,
    "sphere": sphere_patch,
}


def make_preset(name: str, **params) -> LaplaceProblem:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return factory(**params)
