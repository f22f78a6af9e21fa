"""Discrete calculus on the curvilinear chart.

Fields live on a tensor grid in the computational coordinates (t, sigma), stored with
shape ``(nt, ns, *components)``. Physical derivatives with respect to the Euclidean
coordinates x of the planar domain are obtained by the chain rule through the chart
map (sigma, t) -> x, whose first and second derivatives are known in closed form.

All difference, integration and interpolation stencils are generated from Fornberg
weights, so the accuracy order is a parameter of the grid (4 by default).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import TYPE_CHECKING

import numpy as np

from .errors import ChartDegenerate, WidthTooLarge

if TYPE_CHECKING:
    from .geometry import SurfaceChart


# --------------------------------------------------------------------------- stencils

def fd_weights(z: float, x: np.ndarray, m: int) -> np.ndarray:
    """Fornberg weights: ``w[k, j]`` approximates the k-th derivative at ``z``
    as ``sum_j w[k, j] f(x[j])`` for k = 0..m."""
    x = np.asarray(x, dtype=float)
    n = x.size
    c = np.zeros((m + 1, n))
    c1 = 1.0
    c4 = x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[k, i] = c1 * (k * c[k - 1, i - 1] - c5 * c[k, i - 1]) / c2
                c[0, i] = -c1 * c5 * c[0, i - 1] / c2
            for k in range(mn, 0, -1):
                c[k, j] = (c4 * c[k, j] - k * c[k - 1, j]) / c3
            c[0, j] = c4 * c[0, j] / c3
        c1 = c2
    return c


@lru_cache(maxsize=64)
def _diff_matrix_unit(n: int, deriv: int, order: int) -> np.ndarray:
    half = (order + deriv - 1) // 2
    # one-sided closures are one order more accurate than the interior so their
    # truncation error does not jump by O(h^order) between neighbouring rows
    width = order + deriv + 1
    if n < width + 1:
        raise ValueError(f"need at least {width + 1} nodes for order {order}")
    D = np.zeros((n, n))
    nodes = np.arange(n, dtype=float)
    for i in range(n):
        if half <= i < n - half:
            idx = np.arange(i - half, i + half + 1)
        elif i < half:
            idx = np.arange(0, width)
        else:
            idx = np.arange(n - width, n)
        D[i, idx] = fd_weights(float(i), nodes[idx], deriv)[deriv]
    D.setflags(write=False)
    return D


def diff_matrix(n: int, h: float, deriv: int = 1, order: int = 2) -> np.ndarray:
    """Dense differentiation matrix on ``n`` uniform nodes of spacing ``h``: centered
    interior stencils of the given order, one-sided boundary stencils one order higher."""
    return _diff_matrix_unit(n, deriv, order) / h**deriv


@lru_cache(maxsize=64)
def _cumulative_matrix_unit(n: int, order: int) -> np.ndarray:
    p = max(order, 2)
    if n < p:
        raise ValueError(f"need at least {p} nodes for order {order}")
    Q = np.zeros((n - 1, n))
    nodes = np.arange(n, dtype=float)
    powers = np.arange(p)
    for k in range(n - 1):
        lo = min(max(k - p // 2 + 1, 0), n - p)
        idx = np.arange(lo, lo + p)
        y = nodes[idx] - k
        V = y[None, :] ** powers[:, None]
        moments = 1.0 / (powers + 1.0)  # int_0^1 y^q dy
        Q[k, idx] = np.linalg.solve(V, moments)
    C = np.vstack([np.zeros(n), np.cumsum(Q, axis=0)])
    C.setflags(write=False)
    return C


def cumulative_matrix(n: int, h: float, order: int = 2) -> np.ndarray:
    """``(C @ f)[k]`` approximates the integral of f from node 0 to node k, using
    piecewise interpolants of degree ``order - 1`` on windows centred on each cell."""
    return _cumulative_matrix_unit(n, order) * h


def interp_row(n: int, h: float, z: float, order: int = 2) -> np.ndarray:
    """Row vector interpolating nodal values at the (possibly off-grid) point ``z``."""
    m = min(order + 1, n)
    pos = z / h
    lo = int(np.clip(np.round(pos - (m - 1) / 2.0), 0, n - m))
    idx = np.arange(lo, lo + m)
    row = np.zeros(n)
    row[idx] = fd_weights(pos, idx.astype(float), 0)[0]
    return row


def apply_along(D: np.ndarray, f: np.ndarray, axis: int) -> np.ndarray:
    return np.moveaxis(np.tensordot(D, f, axes=([1], [axis])), 0, axis)


def gregory_weights(n: int, h: float) -> np.ndarray:
    """Fourth-order Gregory (end-corrected trapezoid) weights; all positive."""
    if n < 8:
        raise ValueError("Gregory weights need at least 8 nodes")
    w = np.ones(n)
    w[:3] = w[-3:][::-1] = [3 / 8, 7 / 6, 23 / 24]
    return w * h


# --------------------------------------------------------------------------- grid

@dataclass(frozen=True)
class Grid2D:
    """Tensor grid on the normalized rectangle (t, sigma) in [0, T] x [0, 1].

    The ruling coordinate is ``s(sigma, t) = -s_minus(t) + sigma (s_minus + s_plus)``.
    ``order`` is the accuracy order of every stencil built on this grid.
    """

    nt: int
    ns: int
    T: float
    order: int = 4

    def __post_init__(self):
        if self.nt < 8 or self.ns < 8:
            raise ValueError("grid needs nt, ns >= 8")
        if self.order < 2 or self.order % 2:
            raise ValueError("order must be an even integer >= 2")
        if not self.T > 0:
            raise ValueError("T must be positive")

    @cached_property
    def t_nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.nt)

    @cached_property
    def sigma_nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.ns)

    @property
    def dt(self) -> float:
        return self.T / (self.nt - 1)

    @property
    def dsigma(self) -> float:
        return 1.0 / (self.ns - 1)

    @cached_property
    def weights(self) -> np.ndarray:
        return np.outer(gregory_weights(self.nt, self.dt), gregory_weights(self.ns, self.dsigma))

    def D(self, axis: int, deriv: int = 1) -> np.ndarray:
        n, h = (self.nt, self.dt) if axis == 0 else (self.ns, self.dsigma)
        return diff_matrix(n, h, deriv, self.order)

    def C(self, axis: int) -> np.ndarray:
        n, h = (self.nt, self.dt) if axis == 0 else (self.ns, self.dsigma)
        return cumulative_matrix(n, h, self.order)

    def refined(self, factor: int = 2) -> "Grid2D":
        return Grid2D(factor * (self.nt - 1) + 1, factor * (self.ns - 1) + 1, self.T, self.order)

    def with_order(self, order: int) -> "Grid2D":
        return Grid2D(self.nt, self.ns, self.T, order)


# --------------------------------------------------------------------------- fields

@dataclass(frozen=True)
class SymFormField:
    """Symmetric 2x2 form field in x-coordinates; only b11, b12, b22 are stored."""

    b11: np.ndarray
    b12: np.ndarray
    b22: np.ndarray

    @classmethod
    def from_matrix(cls, M: np.ndarray) -> "SymFormField":
        return cls(M[..., 0, 0].copy(), 0.5 * (M[..., 0, 1] + M[..., 1, 0]), M[..., 1, 1].copy())

    @classmethod
    def zeros(cls, shape) -> "SymFormField":
        return cls(np.zeros(shape), np.zeros(shape), np.zeros(shape))

    def matrix(self) -> np.ndarray:
        return np.stack([np.stack([self.b11, self.b12], -1),
                         np.stack([self.b12, self.b22], -1)], -2)

    def __add__(self, other: "SymFormField") -> "SymFormField":
        return SymFormField(self.b11 + other.b11, self.b12 + other.b12, self.b22 + other.b22)

    def __sub__(self, other: "SymFormField") -> "SymFormField":
        return self + other * -1.0

    def __mul__(self, c) -> "SymFormField":
        c = np.asarray(c)
        return SymFormField(self.b11 * c, self.b12 * c, self.b22 * c)

    __rmul__ = __mul__

    def max_abs(self) -> float:
        return float(max(np.max(np.abs(self.b11)), np.max(np.abs(self.b12)), np.max(np.abs(self.b22))))

    def det(self) -> np.ndarray:
        return self.b11 * self.b22 - self.b12**2

    def trace(self) -> np.ndarray:
        return self.b11 + self.b22


# --------------------------------------------------------------------------- operators

def param_derivatives(f: np.ndarray, grid: Grid2D, order: int = 1):
    """Derivatives of a nodal field with respect to (sigma, t).

    Returns ``(f_sigma, f_t)`` for order 1, and additionally
    ``(f_ss, f_st, f_tt)`` for order 2.
    """
    f_s = apply_along(grid.D(1), f, 1)
    f_t = apply_along(grid.D(0), f, 0)
    if order == 1:
        return f_s, f_t
    f_ss = apply_along(grid.D(1, 2), f, 1)
    f_tt = apply_along(grid.D(0, 2), f, 0)
    f_st = apply_along(grid.D(0), f_s, 0)
    return f_s, f_t, f_ss, f_st, f_tt


def x_derivatives(f: np.ndarray, chart: "SurfaceChart", order: int = 1):
    """Gradient (order 1) or Hessian (order 2) of ``f`` in Euclidean x-coordinates.

    ``f`` has shape ``(nt, ns, *c)``; the gradient has shape ``(nt, ns, *c, 2)`` and
    the Hessian ``(nt, ns, *c, 2, 2)``. The Hessian includes the curvilinear term
    ``-grad f . d2x/dq2`` with the chart's closed-form second derivatives.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    if np.min(np.abs(chart.jac)) <= chart.jac_floor:
        raise ChartDegenerate("|det grad Phi| below floor")
    grid = chart.grid
    f = np.asarray(f, dtype=float)
    comp = f.shape[2:]
    g = f.reshape(grid.nt, grid.ns, -1)
    Jinv = chart.Jinv  # (nt, ns, 2, 2): rows (sigma, t), columns x1, x2
    derivs = param_derivatives(g, grid, order)
    dq = np.stack(derivs[:2], axis=-1)  # (nt, ns, c, 2) in (sigma, t)
    grad = np.einsum("...ca,...ak->...ck", dq, Jinv)
    if order == 1:
        return grad.reshape(*f.shape, 2)
    f_ss, f_st, f_tt = derivs[2:]
    Hq = np.stack([np.stack([f_ss, f_st], -1), np.stack([f_st, f_tt], -1)], -2)
    # subtract grad f . x_{ab}; x_ss = 0 for the chart map
    corr_st = np.einsum("...ck,...k->...c", grad, chart.x_st)
    corr_tt = np.einsum("...ck,...k->...c", grad, chart.x_tt)
    Hq[..., 0, 1] -= corr_st
    Hq[..., 1, 0] -= corr_st
    Hq[..., 1, 1] -= corr_tt
    H = np.einsum("...ak,...cab,...bl->...ckl", Jinv, Hq, Jinv)
    return H.reshape(*f.shape, 2, 2)


def sym_gradient(w: np.ndarray, chart: "SurfaceChart") -> SymFormField:
    """sym of the x-gradient of a planar vector field ``w`` of shape (nt, ns, 2)."""
    G = x_derivatives(w, chart, 1)  # G[..., i, j] = d_j w_i
    return SymFormField.from_matrix(G)


def curl_t_curl(B: SymFormField, chart: "SurfaceChart") -> np.ndarray:
    """Saint-Venant compatibility operator d11 B22 + d22 B11 - 2 d12 B12."""
    H = x_derivatives(np.stack([B.b11, B.b12, B.b22], -1), chart, 2)
    return H[..., 2, 0, 0] + H[..., 0, 1, 1] - 2.0 * H[..., 1, 0, 1]


WEIGHTS = ("1", "1-sk", "1/(1-sk)", "1/(1-sk)^3")


def integrate_M(f: np.ndarray, chart: "SurfaceChart", weight: str = "1") -> float:
    """Integral of ``f * weight`` over the ruling domain M in (s, t) coordinates.

    ``weight`` is one of ``"1"``, ``"1-sk"``, ``"1/(1-sk)"``, ``"1/(1-sk)^3"``; the
    Jacobian ``s_minus + s_plus`` of the sigma normalization is always included.
    Weight ``"1-sk"`` turns the result into the integral over the planar domain.
    """
    q = chart.one_minus_sk
    wt = {"1": 1.0, "1-sk": q, "1/(1-sk)": 1.0 / q, "1/(1-sk)^3": q**-3}
    if weight not in wt:
        raise ValueError(f"weight must be one of {sorted(wt)}")
    integrand = np.asarray(f, dtype=float) * wt[weight] * chart.width[:, None]
    return float(np.sum(chart.grid.weights * integrand))


def area_weights(chart: "SurfaceChart") -> np.ndarray:
    """Nodal quadrature weights for integrals over the planar domain (or over S)."""
    return chart.grid.weights * chart.width[:, None] * chart.one_minus_sk


def _bump(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    inside = np.abs(x) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - x[inside] ** 2))
    return out


def mollify(g: np.ndarray, width: float, T: float, reflect: str = "odd") -> np.ndarray:
    """Convolve uniform samples on [0, T] with the C-infinity bump of radius ``width``.

    The data is extended beyond both endpoints by reflection: ``"odd"`` (point
    reflection through the end value, keeps C1 and the O(width^2) error up to the
    boundary) or ``"even"`` (mirror). The sampled kernel is renormalized to unit mass,
    so a width below the grid spacing returns the input unchanged.
    """
    g = np.asarray(g, dtype=float)
    n = g.size
    if n < 8:
        raise ValueError("mollify needs at least 8 samples")
    if not width >= 0:
        raise ValueError("width must be non-negative")
    if width > T / 4:
        raise WidthTooLarge(f"width {width} exceeds T/4 = {T / 4}")
    h = T / (n - 1)
    m = int(np.ceil(width / h)) - 1 if width > 0 else 0
    if m <= 0:
        return g.copy()
    if m >= n - 1:
        raise WidthTooLarge("width covers the whole sample range")
    k = _bump(np.arange(-m, m + 1) * h / width)
    k /= k.sum()
    left = g[m:0:-1]
    right = g[-2:-m - 2:-1]
    if reflect == "odd":
        left = 2.0 * g[0] - left
        right = 2.0 * g[-1] - right
    elif reflect != "even":
        raise ValueError("reflect must be 'odd' or 'even'")
    ext = np.concatenate([left, g, right])
    return np.convolve(ext, k, mode="valid")
