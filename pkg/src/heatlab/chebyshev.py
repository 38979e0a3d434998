"""Tensor-product Chebyshev interpolation on an axis-aligned box.

Transport fields are tabulated on Chebyshev-Lobatto grids and differentiated
by finite differences of the interpolant.  Coefficients below a relative
threshold are dropped, which removes the round-off plateau that finite
differences would otherwise amplify from one recursion level to the next.
"""
from __future__ import annotations

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.fft import dct


def lobatto_points(n: int) -> np.ndarray:
    """Chebyshev-Lobatto points on [-1, 1], in descending order."""
    return np.cos(np.pi * np.arange(n) / (n - 1))


def grid_nodes(box, n: int) -> np.ndarray:
    """All tensor-grid nodes of ``box`` (shape ``(d, 2)``), C-ordered, shape ``(n**d, d)``."""
    box = np.asarray(box, dtype=float)
    t = lobatto_points(n)
    axes = [0.5 * (lo + hi) + 0.5 * (hi - lo) * t for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


class ChebInterpolant:
    """Interpolant of values tabulated at :func:`grid_nodes`.

    Parameters
    ----------
    box : array_like, shape (d, 2)
    values : ndarray, shape (n**d, *vshape)
        Samples in the node order of :func:`grid_nodes`.
    chop : float
        Relative threshold below which coefficients are zeroed.
    """

    def __init__(self, box, values, chop: float = 1e-13):
        self.box = np.asarray(box, dtype=float)
        d = len(self.box)
        values = np.asarray(values)
        n = round(values.shape[0] ** (1.0 / d))
        if n ** d != values.shape[0]:
            raise ValueError("values do not fill a tensor grid")
        self.n = n
        self.vshape = values.shape[1:]
        coef = values.reshape((n,) * d + (-1,))
        for axis in range(d):
            coef = dct(coef, type=1, axis=axis) / (n - 1)
            idx = [slice(None)] * coef.ndim
            idx[axis] = 0
            coef[tuple(idx)] *= 0.5
            idx[axis] = n - 1
            coef[tuple(idx)] *= 0.5
        mag = np.abs(coef).max(axis=-1)
        if mag.max() > 0:
            coef[mag < chop * mag.max()] = 0.0
        self.coef = coef

    def _local(self, pts):
        lo, hi = self.box[:, 0], self.box[:, 1]
        return (2.0 * pts - (lo + hi)) / (hi - lo)

    def __call__(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        t = self._local(pts)
        d = len(self.box)
        P, n = len(pts), self.n
        out = C.chebvander(t[:, 0], n - 1) @ self.coef.reshape(n, -1)
        for axis in range(1, d):
            V = C.chebvander(t[:, axis], n - 1)
            out = (V[:, None, :] @ out.reshape(P, n, -1))[:, 0]
        out = out.reshape((P,) + self.vshape)
        return out[0] if single else out

    def derivative(self, axis: int) -> "ChebInterpolant":
        """Exact derivative of the interpolating polynomial along ``axis``."""
        out = object.__new__(ChebInterpolant)
        out.box, out.n, out.vshape = self.box, self.n, self.vshape
        lo, hi = self.box[axis]
        der = C.chebder(self.coef, axis=axis) * (2.0 / (hi - lo))
        pad = [(0, 0)] * der.ndim
        pad[axis] = (0, 1)
        out.coef = np.pad(der, pad)
        return out
