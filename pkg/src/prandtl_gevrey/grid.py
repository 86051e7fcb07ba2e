"""Tensor grid on the periodic strip T x [0, L_y].

The x direction is Fourier collocation on ``nx`` equispaced points. The y
direction uses the graded map ``y = L_y sinh(c s) / sinh(c)`` with ``s``
uniform on [0, 1], which clusters nodes near the wall. Derivatives in y are
finite differences (sixth-order by default) built from Fornberg weights on the actual
nodes, so the stencils stay consistent with the grading.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline


class GridError(ValueError):
    """Contract violation on grid inputs (shape, order, range)."""


def fornberg_weights(z: float, x: np.ndarray, m: int) -> np.ndarray:
    """Finite-difference weights for derivatives 0..m at ``z`` on nodes ``x``.

    Returns an array of shape ``(len(x), m + 1)``; column ``k`` holds the
    weights of the k-th derivative (Fornberg 1988, "Generation of finite
    difference formulas on arbitrarily spaced grids").
    """
    x = np.asarray(x, dtype=float)
    n = len(x) - 1
    c = np.zeros((n + 1, m + 1))
    c1 = 1.0
    c4 = x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n + 1):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c


def _fd_matrix(y: np.ndarray, order: int, accuracy: int = 4) -> sp.csr_matrix:
    # Stencils of formal accuracy ``accuracy``: centred with
    # order + accuracy - 1 nodes (one more for odd orders), one-sided with
    # order + accuracy nodes where the centred stencil does not fit.
    n = len(y)
    rows, cols, vals = [], [], []
    centred = order + accuracy - 1 + order % 2
    half = (centred - 1) // 2
    for i in range(n):
        width = centred if half <= i <= n - 1 - half else order + accuracy
        width = min(width, n)
        lo = min(max(i - (width - 1) // 2, 0), n - width)
        idx = np.arange(lo, lo + width)
        w = fornberg_weights(y[i], y[idx], order)[:, order]
        rows.extend([i] * width)
        cols.extend(idx.tolist())
        vals.extend(w.tolist())
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _gregory_weights(n: int) -> np.ndarray:
    # Fourth-order Gregory end corrections on a uniform unit-spaced grid of
    # n points on [0, 1]; every weight is positive.
    ds = 1.0 / (n - 1)
    g = np.ones(n)
    if n >= 6:
        g[:3] = g[-3:][::-1] = [3 / 8, 7 / 6, 23 / 24]
    else:
        g[0] = g[-1] = 0.5
    return g * ds


def _map_derivative(s: np.ndarray, y_max: float, c: float) -> np.ndarray:
    if c == 0:
        return np.full_like(s, y_max)
    return y_max * c * np.cosh(c * s) / np.sinh(c)


@dataclass(frozen=True)
class SpectralGrid:
    """Periodic Fourier direction x graded finite-difference direction."""

    nx: int = 64
    ny: int = 257
    y_max: float = 40.0
    grading_c: float = 4.0
    x_period: float = 2 * np.pi
    fd_accuracy: int = 6
    y_nodes: np.ndarray = field(init=False, repr=False, compare=False)
    y_weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.nx < 4 or self.nx & (self.nx - 1):
            raise GridError(f"nx must be a power of two >= 4, got {self.nx}")
        if self.ny < 5:
            raise GridError(f"ny must be >= 5, got {self.ny}")
        if not self.y_max > 0 or not self.x_period > 0:
            raise GridError("y_max and x_period must be positive")
        if self.grading_c < 0:
            raise GridError("grading_c must be >= 0")
        if self.fd_accuracy not in (2, 4, 6, 8):
            raise GridError(f"fd_accuracy must be 2, 4, 6 or 8, got {self.fd_accuracy}")
        s = np.linspace(0.0, 1.0, self.ny)
        if self.grading_c == 0:
            y = self.y_max * s
        else:
            y = self.y_max * np.sinh(self.grading_c * s) / np.sinh(self.grading_c)
        y[0], y[-1] = 0.0, self.y_max
        w = _gregory_weights(self.ny) * _map_derivative(s, self.y_max, self.grading_c)
        w *= self.y_max / w.sum()
        object.__setattr__(self, "y_nodes", y)
        object.__setattr__(self, "y_weights", w)

    # -- x direction ---------------------------------------------------------

    @cached_property
    def x_nodes(self) -> np.ndarray:
        return np.arange(self.nx) * (self.x_period / self.nx)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Nonnegative rfft wavenumbers, scaled by 2*pi/x_period."""
        return np.arange(self.nx // 2 + 1) * (2 * np.pi / self.x_period)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def dx_cell(self) -> float:
        return self.x_period / self.nx

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x_nodes, self.y_nodes, indexing="ij")

    def fourier_multiplier(self, order: int) -> np.ndarray:
        """(i k)^order on the rfft modes; Nyquist dropped for odd orders."""
        k = self.wavenumbers
        mult = (1j * k) ** order if order > 0 else np.ones_like(k, dtype=complex)
        if order % 2 == 1:
            mult = mult.copy()
            mult[-1] = 0.0
        return mult

    def check_field(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f)
        if f.shape != self.shape:
            raise GridError(f"field shape {f.shape} != grid shape {self.shape}")
        return f

    def dx(self, f: np.ndarray, order: int = 1) -> np.ndarray:
        """order-th x derivative via the Fourier multiplier (i k)^order."""
        f = self.check_field(f)
        if order < 0:
            raise GridError("derivative order must be >= 0")
        if order == 0:
            return f.copy()
        fh = np.fft.rfft(f, axis=0)
        fh *= self.fourier_multiplier(order)[:, None]
        return np.fft.irfft(fh, n=self.nx, axis=0)

    def project(self, f: np.ndarray, n: int) -> np.ndarray:
        """Galerkin projection onto Fourier modes |k| <= n (integer index)."""
        f = self.check_field(f)
        fh = np.fft.rfft(f, axis=0)
        fh[n + 1:] = 0.0
        return np.fft.irfft(fh, n=self.nx, axis=0)

    # -- y direction ---------------------------------------------------------

    @cached_property
    def _dy_cache(self) -> dict:
        return {}

    def dy_matrix(self, order: int) -> sp.csr_matrix:
        """Sparse matrix of the order-th y derivative (accuracy fd_accuracy)."""
        if order < 1:
            raise GridError("derivative order must be >= 1")
        if order + self.fd_accuracy > self.ny:
            raise GridError(f"order {order} needs ny >= {order + self.fd_accuracy}")
        cache = self._dy_cache
        if order not in cache:
            cache[order] = _fd_matrix(self.y_nodes, order, self.fd_accuracy)
        return cache[order]

    @property
    def D1(self) -> sp.csr_matrix:
        return self.dy_matrix(1)

    @property
    def D2(self) -> sp.csr_matrix:
        return self.dy_matrix(2)

    def _apply_y(self, mat: sp.csr_matrix, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f)
        if f.shape[-1] != self.ny:
            raise GridError(f"last axis must have length ny={self.ny}, got {f.shape}")
        if f.ndim == 1:
            return mat @ f
        return (mat @ f.reshape(-1, self.ny).T).T.reshape(f.shape)

    def dy(self, f: np.ndarray, order: int = 1) -> np.ndarray:
        """First or second y derivative by finite differences."""
        if order not in (1, 2):
            raise GridError(f"dy supports order 1 or 2, got {order}")
        return self._apply_y(self.dy_matrix(order), f)

    def dy_power(self, f: np.ndarray, order: int) -> np.ndarray:
        """order-th y derivative from a direct stencil.

        Direct stencils avoid the error growth of composed one-sided
        boundary rows. Roundoff still scales like eps / h^order, so orders
        above about 7 are only a few digits accurate near the wall.
        """
        if order < 0:
            raise GridError("derivative order must be >= 0")
        if order == 0:
            return np.array(f, dtype=float, copy=True)
        return self._apply_y(self.dy_matrix(order), f)

    def _check_limit(self, y):
        y = np.asarray(y, dtype=float)
        if np.any(y < 0) or np.any(y > self.y_max):
            raise GridError(f"integration limit outside [0, {self.y_max}]")
        return y

    def integrate_y(self, f, y_from: float = 0.0, y_to=None, method: str = "spline"):
        """Integrate along y from ``y_from``.

        With ``y_to=None`` the running integral at every node is returned
        (same shape as ``f``). Otherwise ``y_to`` is a scalar or one limit per
        column and the definite integrals are returned. Integrals with
        ``y_to < y_from`` are the negatives of the reversed ones.

        ``method="spline"`` (default) integrates the not-a-knot cubic spline
        interpolant, fourth order; ``method="trapezoid"`` is the second-order
        rule.
        """
        f = np.asarray(f, dtype=float)
        if f.shape[-1] != self.ny:
            raise GridError(f"last axis must have length ny={self.ny}")
        if method not in ("trapezoid", "spline"):
            raise GridError(f"unknown integration method {method!r}")
        lead = f.shape[:-1]
        f2 = f.reshape(-1, self.ny)
        y_from = np.broadcast_to(self._check_limit(y_from), lead).reshape(-1)
        if method == "trapezoid":
            cum = cumulative_trapezoid(f2, self.y_nodes, axis=-1, initial=0.0)
            anti = None
        else:
            anti = CubicSpline(self.y_nodes, f2, axis=-1).antiderivative()
            cum = anti(self.y_nodes)
            cum = cum - cum[:, :1]
        base = self._running_at(f2, cum, anti, y_from)
        if y_to is None:
            return (cum - base[:, None]).reshape(f.shape)
        y_to = np.broadcast_to(self._check_limit(y_to), lead).reshape(-1)
        out = self._running_at(f2, cum, anti, y_to) - base
        return out.reshape(lead) if lead else float(out[0])

    def _running_at(self, f2, cum, anti, z):
        # Running integral int_0^z of each row, z one point per row.
        y = self.y_nodes
        rows = np.arange(f2.shape[0])
        i = np.clip(np.searchsorted(y, z, side="right") - 1, 0, self.ny - 2)
        if anti is not None:
            c = anti.c[:, i, rows]
            dz = z - y[i]
            val = np.zeros_like(dz)
            for ck in c:
                val = val * dz + ck
            return val - anti.c[-1, 0, :]
        h = y[i + 1] - y[i]
        th = (z - y[i]) / h
        fi, fj = f2[rows, i], f2[rows, i + 1]
        return cum[rows, i] + h * th * (fi + 0.5 * th * (fj - fi))

    def weighted_l2_sq(self, f: np.ndarray, weight: np.ndarray | None = None) -> float:
        """int_T int_0^{L_y} weight(y)^2 f^2 dy dx for 2-D f (or int dy for 1-D)."""
        f = np.asarray(f, dtype=float)
        w = self.y_weights if weight is None else self.y_weights * np.asarray(weight) ** 2
        if f.ndim == 1:
            return float(np.dot(f * f, w))
        return float(self.dx_cell * np.sum((f * f) @ w))

