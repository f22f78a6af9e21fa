"""Solver for the linearized metric equation sym grad w = B on a developable surface.

Pulled back to the planar domain the equation reads

    [B_ij] = sym grad w' - w3 [a_ij],

with w' the tangential part in u-coordinates and w3 the normal part. Applying the
compatibility operator removes w', and because a_ij has rank one the remaining
equation for w3 is a second-order ODE along each ruling:

    d^2/ds^2 w3(Phi(s, t)) = -(1 - s kappa) / kappa_n * curl^T curl [B_ij].

Once w3 is known, w' is reconstructed from its symmetric gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .calculus import (SymFormField, apply_along, area_weights, curl_t_curl, interp_row,
                       sym_gradient, x_derivatives)
from .errors import IncompatibleRHS, MeanCurvatureVanishes
from .geometry import SurfaceChart


@dataclass(frozen=True, eq=False)
class Displacement:
    """A displacement of the surface split as w = (grad u) w' + w3 n.

    ``w_prime`` has shape (nt, ns, 2), ``w3`` shape (nt, ns). ``omega`` is the
    infinitesimal rotation 0.5 (d1 w'_2 - d2 w'_1) when known.
    """

    w_prime: np.ndarray
    w3: np.ndarray
    omega: np.ndarray | None = None
    residual: float = float("nan")
    info: dict = field(default_factory=dict)

    @classmethod
    def zeros(cls, chart: SurfaceChart) -> "Displacement":
        return cls(np.zeros(chart.shape + (2,)), np.zeros(chart.shape), np.zeros(chart.shape), 0.0)

    @classmethod
    def from_ambient(cls, W: np.ndarray, chart: SurfaceChart) -> "Displacement":
        """Split an ambient vector field sampled at the nodes (shape (nt, ns, 3))."""
        wp = np.einsum("...ki,...k->...i", chart.grad_u, W)
        w3 = np.einsum("...k,...k->...", chart.normal, W)
        return cls(wp, w3)

    def ambient(self, chart: SurfaceChart) -> np.ndarray:
        return np.einsum("...ki,...i->...k", chart.grad_u, self.w_prime) + self.w3[..., None] * chart.normal

    def frame_gradient(self, chart: SurfaceChart) -> np.ndarray:
        """G[..., k, i] = e_k . d_i w in the orthonormal frame (d1 u, d2 u, n).

        Tangential rows: d_i w'_k - w3 a_ik; normal row: d_i w3 + a_ij w'_j.
        """
        a = chart.a_matrix
        gw = x_derivatives(self.w_prime, chart, 1)  # [..., k, i] = d_i w'_k
        g3 = x_derivatives(self.w3, chart, 1)
        tan = gw - self.w3[..., None, None] * a
        nrm = g3 + np.einsum("...ij,...j->...i", a, self.w_prime)
        return np.concatenate([tan, nrm[..., None, :]], axis=-2)

    def ambient_gradient(self, chart: SurfaceChart) -> np.ndarray:
        """d_i w as ambient vectors, shape (nt, ns, 3, 2)."""
        return np.einsum("...ak,...ki->...ai", chart.frame_matrix, self.frame_gradient(chart))

    def sym_grad(self, chart: SurfaceChart) -> SymFormField:
        """Pulled-back sym grad w, i.e. sym grad w' - w3 [a_ij]."""
        return sym_gradient(self.w_prime, chart) - chart.a * self.w3

    def __add__(self, other: "Displacement") -> "Displacement":
        return Displacement(self.w_prime + other.w_prime, self.w3 + other.w3)

    def __mul__(self, c: float) -> "Displacement":
        return Displacement(c * self.w_prime, c * self.w3)

    __rmul__ = __mul__


# --------------------------------------------------------------------------- pullback

@dataclass(frozen=True)
class PulledBackForm:
    B: SymFormField
    theta: np.ndarray | None = None


def pullback_form(chart: SurfaceChart, *, form: SymFormField | None = None,
                  ambient: np.ndarray | None = None, phi: np.ndarray | None = None,
                  psi: np.ndarray | None = None) -> PulledBackForm:
    """Pull a bilinear form on S back to u-coordinates.

    Exactly one input route is used:

    * ``form``: already in u-coordinates, returned as is;
    * ``ambient``: a (nt, ns, 3, 3) field M with B_ij = d_i u . M d_j u (symmetrized);
    * ``phi``, ``psi``: nodal values of phi o u and psi o u (shape (nt, ns, 3)) for
      B = sym((grad phi)^T grad psi). Here theta is also returned, computed from second
      derivatives only: theta = 2 phi_12.psi_12 - phi_11.psi_22 - phi_22.psi_11.
    """
    if sum(x is not None for x in (form, ambient, phi)) != 1:
        raise ValueError("give exactly one of form, ambient, (phi, psi)")
    if form is not None:
        return PulledBackForm(form)
    if ambient is not None:
        M = np.einsum("...ki,...kl,...lj->...ij", chart.grad_u, ambient, chart.grad_u)
        return PulledBackForm(SymFormField.from_matrix(M))
    psi = phi if psi is None else psi
    gp = x_derivatives(phi, chart, 1)
    gq = x_derivatives(psi, chart, 1)
    X = np.einsum("...ki,...kj->...ij", gp, gq)
    B = SymFormField.from_matrix(0.5 * (X + np.swapaxes(X, -1, -2)))
    Hp = x_derivatives(phi, chart, 2)
    Hq = Hp if psi is phi else x_derivatives(psi, chart, 2)
    return PulledBackForm(B, bilinear_theta(Hp, Hq))


def bilinear_theta(Hp: np.ndarray, Hq: np.ndarray) -> np.ndarray:
    """Reduced source of sym((grad p)^T grad q) from ambient Hessians (..., 3, 2, 2)."""
    p11, p12, p22 = Hp[..., 0, 0], Hp[..., 0, 1], Hp[..., 1, 1]
    q11, q12, q22 = Hq[..., 0, 0], Hq[..., 0, 1], Hq[..., 1, 1]
    return np.sum(2.0 * p12 * q12 - (p11 * q22 + p22 * q11), axis=-1)


# --------------------------------------------------------------------------- normal part

def _sigma_of_s(chart: SurfaceChart, s0: float) -> np.ndarray:
    sm = -chart.s[:, 0]
    sig0 = (s0 + sm) / chart.width
    if np.any(sig0 < 0) or np.any(sig0 > 1):
        raise ValueError(f"initial line s = {s0} leaves the chart")
    return sig0


def solve_w3(theta: np.ndarray, chart: SurfaceChart, s0: float = 0.0,
             kappa_n_floor: float | None = None) -> np.ndarray:
    """Integrate the ruling ODE twice from the line s = s0 with zero value and slope."""
    floor = chart.spec.kappa_n_floor if kappa_n_floor is None else kappa_n_floor
    if np.min(np.abs(chart.kappa_n)) < floor:
        raise MeanCurvatureVanishes("|kappa_n| below floor")
    grid = chart.grid
    rhs = -(chart.one_minus_sk / chart.kappa_n[:, None]) * theta
    rhs = rhs * chart.width[:, None] ** 2  # d/ds = (1/width) d/dsigma
    C = grid.C(1)
    G1 = apply_along(C, rhs, 1)
    G2 = apply_along(C, G1, 1)
    sig0 = _sigma_of_s(chart, s0)
    rows = np.stack([interp_row(grid.ns, grid.dsigma, z, grid.order) for z in sig0])
    g1_0 = np.sum(rows * G1, axis=1)
    g2_0 = np.sum(rows * G2, axis=1)
    sig = grid.sigma_nodes[None, :]
    return G2 - g2_0[:, None] - g1_0[:, None] * (sig - sig0[:, None])


def ruling_ode_residual(w3: np.ndarray, theta: np.ndarray, chart: SurfaceChart) -> float:
    """max | d2 w3 / ds2 + (1 - s kappa) theta / kappa_n | with finite differences in s."""
    d2 = apply_along(chart.grid.D(1, 2), w3, 1) / chart.width[:, None] ** 2
    return float(np.max(np.abs(d2 + chart.one_minus_sk / chart.kappa_n[:, None] * theta)))


# --------------------------------------------------------------------------- tangential part

@dataclass(frozen=True, eq=False)
class TangentialSolution:
    w_prime: np.ndarray
    omega: np.ndarray
    compat_residual: float


def compatibility_ratio(E: SymFormField, chart: SurfaceChart) -> float:
    """Dimensionless size of curl^T curl E: max|curl^T curl E| L^2 / max|E|,
    with L^2 the area of the planar domain."""
    scale = E.max_abs()
    if scale == 0.0:
        return 0.0
    L2 = float(np.sum(area_weights(chart)))
    return float(np.max(np.abs(curl_t_curl(E, chart)))) * L2 / scale


def default_compat_tol(chart: SurfaceChart) -> float:
    """1e-4, relaxed as (h / L)^order on coarse grids where discrete compatibility is
    only satisfied to truncation order."""
    g = chart.grid
    L = np.sqrt(float(np.sum(area_weights(chart))))
    h = max(g.dt, g.dsigma * float(np.max(chart.width)))
    return max(1e-4, 1e3 * (h / L) ** g.order)


def _path_integrate(d_sig: np.ndarray, d_t: np.ndarray, chart: SurfaceChart, path: str) -> np.ndarray:
    """Integrate a gradient given in (sigma, t) components from the grid centre."""
    g = chart.grid
    ic, jc = g.nt // 2, g.ns // 2
    Ct, Cs = g.C(0), g.C(1)
    if path == "t-first":
        spine = apply_along(Ct, d_t[:, jc], 0)
        spine = spine - spine[ic]
        lines = apply_along(Cs, d_sig, 1)
        lines = lines - lines[:, jc : jc + 1]
        return spine[:, None] + lines
    if path == "sigma-first":
        spine = apply_along(Cs, d_sig[ic], 0)
        spine = spine - spine[jc]
        lines = apply_along(Ct, d_t, 0)
        lines = lines - lines[ic : ic + 1]
        return spine[None, :] + lines
    raise ValueError("path must be 't-first' or 'sigma-first'")


def _to_param(grad_x: np.ndarray, chart: SurfaceChart):
    """Convert x-gradients (..., 2) to (d/dsigma, d/dt) components."""
    dq = np.einsum("...k,...ka->...a", grad_x, chart.J)
    return dq[..., 0], dq[..., 1]


def apply_gauge(w_prime: np.ndarray, omega: np.ndarray, chart: SurfaceChart):
    """Remove the mean infinitesimal rotation and the mean translation (area means)."""
    W = area_weights(chart)
    total = W.sum()
    om_bar = float(np.sum(W * omega) / total)
    x = chart.Phi
    rot = om_bar * np.stack([-x[..., 1], x[..., 0]], -1)
    wp = w_prime - rot
    mean = np.einsum("ij,ijk->k", W, wp) / total
    return wp - mean, omega - om_bar


def recover_tangential(E: SymFormField, chart: SurfaceChart, *, compat_tol: float | None = None,
                       path: str = "t-first", check: bool = True) -> TangentialSolution:
    """Reconstruct w' with sym grad w' = E by two path integrations.

    First the rotation omega from grad omega = (d1 E21 - d2 E11, d1 E22 - d2 E12), then
    w' from grad w' = E + omega [[0, -1], [1, 0]]. Paths run along grid lines from the
    grid centre. The result is gauged to zero mean rotation and zero mean.
    """
    ratio = compatibility_ratio(E, chart) if check else float("nan")
    tol = default_compat_tol(chart) if compat_tol is None else compat_tol
    if check and ratio > tol:
        raise IncompatibleRHS(f"compatibility residual {ratio:.3e} exceeds {tol:.3e}")
    dE = x_derivatives(np.stack([E.b11, E.b12, E.b22], -1), chart, 1)  # [..., c, k]
    dE11, dE12, dE22 = dE[..., 0, :], dE[..., 1, :], dE[..., 2, :]
    grad_om = np.stack([dE12[..., 0] - dE11[..., 1], dE22[..., 0] - dE12[..., 1]], -1)
    omega = _path_integrate(*_to_param(grad_om, chart), chart, path)
    Gw = E.matrix() + omega[..., None, None] * np.array([[0.0, -1.0], [1.0, 0.0]])
    dq = np.einsum("...ik,...ka->...ia", Gw, chart.J)
    w = np.stack([_path_integrate(dq[..., i, 0], dq[..., i, 1], chart, path) for i in range(2)], -1)
    w, omega = apply_gauge(w, omega, chart)
    return TangentialSolution(w, omega, ratio)


# --------------------------------------------------------------------------- full solve

def symgrad_residual(disp: Displacement, B: SymFormField, chart: SurfaceChart) -> float:
    return (disp.sym_grad(chart) - B).max_abs()


def solve_symgrad(B: SymFormField | PulledBackForm, chart: SurfaceChart, *,
                  theta: np.ndarray | None = None, s0: float = 0.0,
                  compat_tol: float | None = None, check: bool = True) -> Displacement:
    """Solve sym grad w = B (pulled back) with w3 = d_s w3 = 0 on the line s = s0.

    ``theta`` overrides curl^T curl B, e.g. the second-derivative form available for
    bilinear right-hand sides. The residual max|sym grad w - B| is stored on the result.
    """
    if isinstance(B, PulledBackForm):
        theta = B.theta if theta is None else theta
        B = B.B
    if theta is None:
        theta = curl_t_curl(B, chart)
    w3 = solve_w3(theta, chart, s0)
    E = B + chart.a * w3
    tan = recover_tangential(E, chart, compat_tol=compat_tol, check=check)
    disp = Displacement(tan.w_prime, w3, tan.omega)
    res = symgrad_residual(disp, B, chart)
    return Displacement(tan.w_prime, w3, tan.omega, res,
                        {"compat_residual": tan.compat_residual,
                         "theta_max": float(np.max(np.abs(theta)))})


# --------------------------------------------------------------------------- manufactured data

def manufactured_solution(chart: SurfaceChart, amplitude: float = 1.0) -> tuple[Displacement, SymFormField]:
    """A smooth w with w3 = d_s w3 = 0 on s = 0 and its exact pulled-back sym grad.

    w' = (sin x1 cos x2, x1 x2^2) in planar coordinates and
    w3 = s^2 (1 + s / 2) cos(2 pi t / T).
    """
    x1, x2 = chart.Phi[..., 0], chart.Phi[..., 1]
    t = chart.grid.t_nodes[:, None]
    s = chart.s
    wp = np.stack([np.sin(x1) * np.cos(x2), x1 * x2**2], -1)
    w3 = s**2 * (1.0 + 0.5 * s) * np.cos(2.0 * np.pi * t / chart.spec.T)
    g11 = np.cos(x1) * np.cos(x2)
    g12 = -np.sin(x1) * np.sin(x2)
    g21 = x2**2
    g22 = 2.0 * x1 * x2
    B = SymFormField(g11, 0.5 * (g12 + g21), g22) - chart.a * w3
    return Displacement(amplitude * wp, amplitude * w3), B * amplitude
