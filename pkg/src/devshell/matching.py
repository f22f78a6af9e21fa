"""Higher-order isometric extension of a first-order isometry.

Given V with sym grad V = 0, the corrections w_2, ..., w_N solve

    sym grad w_i = -1/2 sum_{p=1}^{i-1} sym((grad w_p)^T grad w_{i-p}),

which makes u_eps = id + sum eps^j w_j an isometry up to O(eps^{N+1}).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .calculus import SymFormField, x_derivatives
from .errors import BelowFloor, NotAnIsometry
from .geometry import SurfaceChart
from .isometry import check_membership
from .symgrad import Displacement, PulledBackForm, bilinear_theta, solve_symgrad

DEFECT_FLOOR = 1e-13


@dataclass(frozen=True)
class AmbientDerivatives:
    """Nodal values, x-gradients (nt, ns, 3, 2) and x-Hessians of w o u."""

    values: np.ndarray
    grad: np.ndarray
    hess: np.ndarray | None = None

    @classmethod
    def of(cls, disp: Displacement, chart: SurfaceChart, hessian: bool = True) -> "AmbientDerivatives":
        W = disp.ambient(chart)
        return cls(W, x_derivatives(W, chart, 1), x_derivatives(W, chart, 2) if hessian else None)


def quadratic_source(p: AmbientDerivatives, q: AmbientDerivatives) -> PulledBackForm:
    """sym((grad p)^T grad q) in chart coordinates and its reduced source theta, which
    uses second derivatives of p and q only."""
    X = np.einsum("...ki,...kj->...ij", p.grad, q.grad)
    B = SymFormField.from_matrix(0.5 * (X + np.swapaxes(X, -1, -2)))
    theta = None
    if p.hess is not None and q.hess is not None:
        theta = 0.5 * (bilinear_theta(p.hess, q.hess) + bilinear_theta(q.hess, p.hess))
    return PulledBackForm(B, theta)


@dataclass(frozen=True, eq=False)
class MatchedFamily:
    """u_eps = u + sum_j eps^j w_j, stored through the x-gradients of the w_j."""

    order: int
    base_grad: np.ndarray
    grads: list
    corrections: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    hessians: list = field(default_factory=list)

    @classmethod
    def from_gradients(cls, base_grad: np.ndarray, grads) -> "MatchedFamily":
        """Build a family from given gradient fields (for injected test maps)."""
        return cls(len(grads), np.asarray(base_grad), [np.asarray(g) for g in grads])

    def grad_u_eps(self, eps: float) -> np.ndarray:
        G = self.base_grad.copy()
        for j, g in enumerate(self.grads, start=1):
            G = G + eps**j * g
        return G

    def deformation(self, eps: float, chart: SurfaceChart) -> np.ndarray:
        if not self.corrections:
            raise ValueError("family carries no displacement values")
        U = chart.u.copy()
        for j, w in enumerate(self.corrections, start=1):
            U = U + eps**j * w.ambient(chart)
        return U

    def truncated(self, N: int) -> "MatchedFamily":
        return MatchedFamily(N, self.base_grad, self.grads[:N], self.corrections[:N],
                             self.residuals[:N], self.hessians[:N])


@dataclass(frozen=True, eq=False)
class RotationFamily:
    """The exact rigid family u_eps = exp(eps Q) u, a reference with zero defect."""

    Q: np.ndarray
    base_grad: np.ndarray

    def grad_u_eps(self, eps: float) -> np.ndarray:
        R = expm(eps * np.asarray(self.Q, dtype=float))
        return np.einsum("ak,...ki->...ai", R, self.base_grad)

    def deformation(self, eps: float, chart: SurfaceChart) -> np.ndarray:
        R = expm(eps * np.asarray(self.Q, dtype=float))
        return np.einsum("ak,...k->...a", R, chart.u)


def match_to_order(V: Displacement, N: int, chart: SurfaceChart, *, check: bool = True,
                   membership_tol: float | None = None) -> MatchedFamily:
    """Corrections up to order N for a first-order isometry V."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if check:
        rep = check_membership(V, chart, membership_tol)
        if not rep.member:
            raise NotAnIsometry(
                f"fit residual {rep.fit_residual:.3e}, sym grad residual "
                f"{rep.symgrad_residual:.3e} exceed {rep.tolerance * rep.scale:.3e}")
    ws = [V]
    ders = [AmbientDerivatives.of(V, chart)]
    residuals = [V.residual]
    for i in range(2, N + 1):
        B = SymFormField.zeros(chart.shape)
        theta = np.zeros(chart.shape)
        for p in range(1, i):
            src = quadratic_source(ders[p - 1], ders[i - p - 1])
            B = B + src.B * -0.5
            theta = theta - 0.5 * src.theta
        w = solve_symgrad(B, chart, theta=theta, check=False)
        ws.append(w)
        ders.append(AmbientDerivatives.of(w, chart))
        residuals.append(w.residual)
    return MatchedFamily(N, chart.grad_u, [d.grad for d in ders], ws, residuals,
                         [d.hess for d in ders])


def metric_defect(family, eps: float) -> float:
    """max over nodes of the spectral norm of (grad u_eps)^T grad u_eps - I."""
    G = family.grad_u_eps(eps)
    M = np.einsum("...ki,...kj->...ij", G, G) - np.eye(2)
    return float(np.max(np.linalg.norm(M, ord=2, axis=(-2, -1))))


@dataclass(frozen=True)
class OrderEstimate:
    slope: float
    intercept: float
    residual: float
    n_points: int
    excluded: tuple = ()


def estimate_order(data, floor: float = DEFECT_FLOOR) -> OrderEstimate:
    """Least-squares slope of log(defect) against log(eps).

    Points below ``floor`` are dropped with a warning; fewer than three remaining
    points raise BelowFloor. ``residual`` is the RMS deviation from the fitted line.
    """
    pts = [(float(e), float(d)) for e, d in data]
    keep = [(e, d) for e, d in pts if d >= floor]
    dropped = tuple(e for e, d in pts if d < floor)
    if dropped:
        warnings.warn(f"defects below {floor:g} excluded at eps = {dropped}", RuntimeWarning, stacklevel=2)
    if len(keep) < 3:
        raise BelowFloor(f"only {len(keep)} points above the floor {floor:g}")
    x = np.log([e for e, _ in keep])
    y = np.log([d for _, d in keep])
    A = np.stack([x, np.ones_like(x)], -1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    r = y - A @ coef
    return OrderEstimate(float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(r**2))), len(keep), dropped)


def defect_sweep(family, eps_list) -> list[tuple[float, float]]:
    return [(float(e), metric_defect(family, e)) for e in eps_list]


def discretization_floor(family: MatchedFamily, eps: float) -> float:
    """Estimate of the defect caused by the solver residuals alone: 2 sum eps^j r_j."""
    r = [x for x in family.residuals if np.isfinite(x)]
    return 2.0 * sum(eps**j * rj for j, rj in enumerate(r, start=1))


@dataclass(frozen=True)
class ResolvedSweep:
    family: MatchedFamily
    chart: SurfaceChart
    defects: list
    baseline: list
    floor: float


def resolved_sweep(build, N: int, eps_list, grid: tuple[int, int], *, max_nodes: int = 512,
                   margin: float = 100.0) -> ResolvedSweep:
    """Refine the grid until the first-order defect at the smallest eps exceeds
    ``margin`` times the discretization floor.

    ``build(nt, ns)`` returns ``(chart, V)``. Raises BelowFloor when the grid limit is
    reached first, e.g. when V is numerically a rigid motion and has no defect to measure.
    """
    nt, ns = grid
    eps_min = min(eps_list)
    while True:
        chart, V = build(nt, ns)
        fam = match_to_order(V, N, chart)
        base = metric_defect(fam.truncated(1), eps_min)
        floor = discretization_floor(fam, eps_min)
        if base > margin * floor:
            return ResolvedSweep(fam, chart, defect_sweep(fam, eps_list),
                                 defect_sweep(fam.truncated(1), eps_list), floor)
        if 2 * max(nt, ns) > max_nodes:
            raise BelowFloor(
                f"first-order defect {base:.3e} at eps = {eps_min} does not exceed "
                f"{margin:g} x discretization floor {floor:.3e} on a {nt}x{ns} grid")
        nt, ns = 2 * nt, 2 * ns
