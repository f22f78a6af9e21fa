"""First-order infinitesimal isometries of a developable surface.

Every V with sym grad V = 0 has normal part a(t) + s b(t) along the rulings. Conversely,
such a normal part determines the tangential part up to a rigid planar motion through

    sym grad V_tan = (a + s b) kappa_n / (1 - s kappa) Gamma' (x) Gamma'.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .calculus import area_weights, diff_matrix, integrate_M, mollify, x_derivatives
from .geometry import SurfaceChart
from .profiles import Profile
from .symgrad import Displacement, apply_gauge, recover_tangential


@dataclass(frozen=True, eq=False)
class IsometryAB:
    """Profiles a, b sampled at the chart t-nodes with first and second derivatives."""

    t: np.ndarray
    a: np.ndarray
    b: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    J1: float | None = None
    J2: float | None = None

    @classmethod
    def from_samples(cls, t, a, b, order: int = 4) -> "IsometryAB":
        """Derivatives by finite differences on the (uniform) t samples."""
        t = np.asarray(t, dtype=float)
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        h = t[1] - t[0]
        if not np.allclose(np.diff(t), h, rtol=1e-9, atol=0):
            raise ValueError("t samples must be uniform")
        D1, D2 = diff_matrix(t.size, h, 1, order), diff_matrix(t.size, h, 2, order)
        return cls(t, a, b, D1 @ a, D2 @ a, D1 @ b, D2 @ b)

    @classmethod
    def from_profiles(cls, a: Profile | float, b: Profile | float, t) -> "IsometryAB":
        a = a if isinstance(a, Profile) else Profile.const(a)
        b = b if isinstance(b, Profile) else Profile.const(b)
        t = np.asarray(t, dtype=float)
        return cls(t, a(t), b(t), a(t, 1), a(t, 2), b(t, 1), b(t, 2))

    def __add__(self, other: "IsometryAB") -> "IsometryAB":
        return IsometryAB(self.t, *(getattr(self, k) + getattr(other, k) for k in _FIELDS))

    def __sub__(self, other: "IsometryAB") -> "IsometryAB":
        return self + other * -1.0

    def __mul__(self, c: float) -> "IsometryAB":
        return IsometryAB(self.t, *(c * getattr(self, k) for k in _FIELDS))

    __rmul__ = __mul__

    def with_J(self, chart: SurfaceChart) -> "IsometryAB":
        J1, J2 = sobolev_J(self, chart)
        return replace(self, J1=J1, J2=J2)


_FIELDS = ("a", "b", "a1", "a2", "b1", "b2")


def normal_part(ab: IsometryAB, chart: SurfaceChart) -> np.ndarray:
    return ab.a[:, None] + chart.s * ab.b[:, None]


def build_V_from_ab(ab: IsometryAB, chart: SurfaceChart, *, path: str = "t-first") -> Displacement:
    """Assemble V with normal part a + s b; the tangential part is gauged.

    The stored residual is max |sym grad V| in chart coordinates.
    """
    if ab.t.size != chart.grid.nt:
        raise ValueError("profiles must be sampled at the chart t-nodes")
    V3 = normal_part(ab, chart)
    E = chart.a * V3
    tan = recover_tangential(E, chart, path=path, check=False)
    disp = Displacement(tan.w_prime, V3, tan.omega)
    res = disp.sym_grad(chart).max_abs()
    return Displacement(tan.w_prime, V3, tan.omega, res, {"kind": "isometry"})


@dataclass(frozen=True)
class ABFit:
    ab: IsometryAB
    residual: float


def extract_ab(V3: np.ndarray, chart: SurfaceChart, order: int | None = None) -> ABFit:
    """Per-t least-squares line fit of V3 in s; the maximum fit residual diagnoses
    whether V3 has the structure of an infinitesimal isometry."""
    s = chart.s
    sbar = s.mean(axis=1, keepdims=True)
    vbar = V3.mean(axis=1, keepdims=True)
    ds = s - sbar
    b = np.sum(ds * (V3 - vbar), axis=1) / np.sum(ds * ds, axis=1)
    a = vbar[:, 0] - b * sbar[:, 0]
    resid = float(np.max(np.abs(V3 - a[:, None] - b[:, None] * s)))
    ab = IsometryAB.from_samples(chart.grid.t_nodes, a, b, chart.grid.order if order is None else order)
    return ABFit(ab, resid)


def sobolev_J(ab: IsometryAB, chart: SurfaceChart) -> tuple[float, float]:
    """The two integrals controlling the second derivatives of the normal part:

    J1 = int (b' + kappa (a' + s b') / (1 - s kappa))^2 / (1 - s kappa) ds dt,
    J2 = int (a'' + s b'' - kappa (1 - s kappa) b + s kappa' (a' + s b') / (1 - s kappa))^2
         / (1 - s kappa)^3 ds dt.
    """
    s, q = chart.s, chart.one_minus_sk
    k = chart.kappa[:, None]
    kp = chart.kappa_prime[:, None]
    a1, a2 = ab.a1[:, None], ab.a2[:, None]
    b, b1, b2 = ab.b[:, None], ab.b1[:, None], ab.b2[:, None]
    slope = a1 + s * b1
    f1 = b1 + k * slope / q
    f2 = a2 + s * b2 - k * q * b + s * kp * slope / q
    return integrate_M(f1**2, chart, "1/(1-sk)"), integrate_M(f2**2, chart, "1/(1-sk)^3")


def smooth_ab(ab: IsometryAB, width: float, order: int = 4, reflect: str = "odd") -> IsometryAB:
    """Mollify a and b at scale ``width`` and recompute derivatives by differences."""
    T = ab.t[-1] - ab.t[0]
    a = mollify(ab.a, width, T, reflect)
    b = mollify(ab.b, width, T, reflect)
    if a is ab.a and b is ab.b:
        return ab
    return IsometryAB.from_samples(ab.t, a, b, order)


def sobolev_distance(ab1: IsometryAB, ab2: IsometryAB) -> float:
    """Discrete W^{2,2}(0, T) distance between the a and b profiles."""
    h = ab1.t[1] - ab1.t[0]
    d = ab1 - ab2
    return float(np.sqrt(h * sum(np.sum(getattr(d, k) ** 2) for k in _FIELDS)))


def membership_tolerance(chart: SurfaceChart) -> float:
    g = chart.grid
    h = max(g.dt, g.dsigma * float(np.max(chart.width)))
    return 10.0 * h**2


@dataclass(frozen=True)
class MembershipReport:
    fit_residual: float
    symgrad_residual: float
    tolerance: float
    scale: float

    @property
    def member(self) -> bool:
        return max(self.fit_residual, self.symgrad_residual) <= self.tolerance * self.scale


def check_membership(V: Displacement, chart: SurfaceChart, tol: float | None = None) -> MembershipReport:
    """Both residuals are compared to ``tol`` times the size max(1, |V|_inf)."""
    fit = extract_ab(V.w3, chart)
    res = V.sym_grad(chart).max_abs()
    scale = max(1.0, float(np.max(np.abs(V.w3))), float(np.max(np.abs(V.w_prime))))
    return MembershipReport(fit.residual, res, membership_tolerance(chart) if tol is None else tol, scale)


def rigid_displacement(Q: np.ndarray, c: np.ndarray, chart: SurfaceChart) -> Displacement:
    """The infinitesimal rigid motion x -> c + Q x restricted to the surface."""
    Q = np.asarray(Q, dtype=float)
    if np.max(np.abs(Q + Q.T)) > 1e-12:
        raise ValueError("Q must be skew")
    W = np.asarray(c, dtype=float) + np.einsum("kl,...l->...k", Q, chart.u)
    return Displacement.from_ambient(W, chart)


def skew(axis) -> np.ndarray:
    x, y, z = np.asarray(axis, dtype=float)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def gauged(V: Displacement, chart: SurfaceChart) -> Displacement:
    """Apply the mean-rotation and mean gauge to the tangential part of V."""
    g = x_derivatives(V.w_prime, chart, 1)
    omega = 0.5 * (g[..., 1, 0] - g[..., 0, 1])
    wp, om = apply_gauge(V.w_prime, omega, chart)
    return Displacement(wp, V.w3, om)


def hessian_normal_energy(V3: np.ndarray, chart: SurfaceChart) -> float:
    """int |grad^2 V3|^2 dx by finite differences; equals 2 J1 + J2 for members."""
    H = x_derivatives(V3, chart, 2)
    return float(np.sum(area_weights(chart) * np.sum(H**2, axis=(-1, -2))))


__all__ = [
    "IsometryAB", "ABFit", "MembershipReport", "build_V_from_ab", "extract_ab", "sobolev_J",
    "smooth_ab", "sobolev_distance", "check_membership", "membership_tolerance",
    "rigid_displacement", "skew", "gauged", "normal_part", "hessian_normal_energy",
]
