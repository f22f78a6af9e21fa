"""Thin-shell energies and the bending limit functional on infinitesimal isometries.

Shell points are written p + tau n(p) with |tau| < h/2; energies use the rescaled
thickness variable r = tau / h in (-1/2, 1/2). The recovery deformation is

    u^h(p + tau n) = u_eps(p) + tau n_eps(p) + tau^2 / 2 eps d(p),   eps = sqrt(e^h) / h,

with u_eps an N-th order isometry extending V and d = 2 zeta the warp field.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .calculus import area_weights, x_derivatives
from .errors import DegenerateModel, NotAnIsometry, ScalingViolation, ThicknessTooLarge
from .geometry import SurfaceChart
from .isometry import membership_tolerance
from .matching import MatchedFamily, RotationFamily
from .symgrad import Displacement

GAP_FLOOR = 1e-12


# --------------------------------------------------------------------------- material

def _sym(F):
    return 0.5 * (F + np.swapaxes(F, -1, -2))


def _tr(F):
    return np.trace(F, axis1=-2, axis2=-1)


@dataclass(frozen=True)
class MaterialModel:
    """W(F) = mu/4 |F^T F - I|^2 + lam/8 tr(F^T F - I)^2 (frame indifferent, W(SO(3)) = 0).

    Its Hessian at the identity is Q3(F) = 2 mu |sym F|^2 + lam (tr F)^2.
    """

    mu: float = 1.0
    lam: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.mu) and np.isfinite(self.lam)):
            raise DegenerateModel("moduli must be finite")

    def W(self, F: np.ndarray) -> np.ndarray:
        E = np.einsum("...ki,...kj->...ij", F, F) - np.eye(F.shape[-1])
        return 0.25 * self.mu * np.sum(E * E, axis=(-1, -2)) + 0.125 * self.lam * _tr(E) ** 2

    def W_from_strain(self, K: np.ndarray) -> np.ndarray:
        """W as a function of K = F^T F - I; exactly Q3(K / 2) / 2 for this model."""
        return 0.25 * self.mu * np.sum(K * K, axis=(-1, -2)) + 0.125 * self.lam * _tr(K) ** 2

    def Q3(self, F: np.ndarray) -> np.ndarray:
        S = _sym(np.asarray(F, dtype=float))
        return 2.0 * self.mu * np.sum(S * S, axis=(-1, -2)) + self.lam * _tr(S) ** 2

    def Q3_bilinear(self, F: np.ndarray, G: np.ndarray) -> np.ndarray:
        return 0.25 * (self.Q3(F + G) - self.Q3(F - G))

    @property
    def plate_modulus(self) -> float:
        """The coefficient 2 mu lam / (2 mu + lam) of (tr)^2 in Q2."""
        return 2.0 * self.mu * self.lam / (2.0 * self.mu + self.lam)


def _normal_basis() -> np.ndarray:
    """Symmetric matrices c (x) e3 + e3 (x) c for c = e1, e2, e3 in frame coordinates."""
    B = np.zeros((3, 3, 3))
    for a in range(3):
        B[a, a, 2] += 1.0
        B[a, 2, a] += 1.0
    return B


def _embed(F_tan: np.ndarray) -> np.ndarray:
    F = np.zeros(F_tan.shape[:-2] + (3, 3))
    F[..., :2, :2] = F_tan
    return F


def quadratic_forms(model: MaterialModel, F: np.ndarray, *, closed_form: bool = False):
    """Q3(F) for 3x3 input; (Q2(F_tan), c) for 2x2 tangential input in frame coordinates.

    Q2 minimizes Q3(F_tan + c (x) n + n (x) c) over c by solving the 3x3 normal
    equations built from the bilinear form. ``closed_form`` uses the explicit formula
    available for this model instead.
    """
    F = np.asarray(F, dtype=float)
    if F.shape[-2:] == (3, 3):
        return model.Q3(F)
    if F.shape[-2:] != (2, 2):
        raise ValueError("F must be 3x3 or 2x2")
    S = _sym(F)
    if closed_form:
        denom = 2.0 * model.mu + model.lam
        if denom == 0 or model.mu == 0:
            raise DegenerateModel("closed form needs mu != 0 and 2 mu + lam != 0")
        q2 = 2.0 * model.mu * np.sum(S * S, axis=(-1, -2)) + model.plate_modulus * _tr(S) ** 2
        c = np.zeros(S.shape[:-2] + (3,))
        c[..., 2] = -model.lam * _tr(S) / (2.0 * denom)
        return q2, c
    basis = _normal_basis()
    M = np.array([[model.Q3_bilinear(basis[a], basis[b]) for b in range(3)] for a in range(3)])
    if abs(np.linalg.det(M)) < 1e-14 * max(1.0, np.max(np.abs(M))) ** 3:
        raise DegenerateModel("normal-component system is singular")
    if np.min(np.linalg.eigvalsh(M)) <= 0:
        raise DegenerateModel("Q3 is not positive on normal components")
    F3 = _embed(S)
    rhs = np.stack([model.Q3_bilinear(F3, basis[a]) for a in range(3)], -1)
    c = -np.linalg.solve(M, rhs[..., None])[..., 0]
    Ft = F3 + np.einsum("...a,aij->...ij", c, basis)
    return model.Q3(Ft), c


def check_axioms(model: MaterialModel, n_samples: int = 50, seed: int = 0, radius: float = 1e-2):
    """Sampled checks: W(R) = 0, W(QF) = W(F), W(F) >= C dist^2(F, SO(3)) near SO(3).

    Returns (max |W(R)|, max |W(QF) - W(F)|, min W / dist^2).
    """
    rng = np.random.default_rng(seed)
    R = np.array([expm(_skew3(rng.normal(size=3))) for _ in range(n_samples)])
    Q = np.array([expm(_skew3(rng.normal(size=3))) for _ in range(n_samples)])
    F = R @ (np.eye(3) + radius * rng.normal(size=(n_samples, 3, 3)))
    w_rot = float(np.max(np.abs(model.W(R))))
    wF = model.W(F)
    w_frame = float(np.max(np.abs(model.W(Q @ F) - wF)))
    U, _, Vt = np.linalg.svd(F)
    D = np.ones((n_samples, 3))
    D[:, 2] = np.sign(np.linalg.det(U @ Vt))
    P = U @ (D[:, :, None] * Vt)
    dist2 = np.sum((F - P) ** 2, axis=(-1, -2))
    return w_rot, w_frame, float(np.min(wF / dist2))


def _skew3(v):
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


# --------------------------------------------------------------------------- limit functional

@dataclass(frozen=True, eq=False)
class AField:
    """The skew field A with d_tau V = A tau, in frame coordinates (d1 u, d2 u, n).

    ``A`` has shape (nt, ns, 3, 3); ``skew_defect`` is max |A + A^T| before the normal
    column was fixed by skewness.
    """

    A: np.ndarray
    skew_defect: float

    def ambient(self, chart: SurfaceChart) -> np.ndarray:
        P = chart.frame_matrix
        return np.einsum("...ak,...kl,...bl->...ab", P, self.A, P)


def A_field(V: Displacement, chart: SurfaceChart, *, tol: float | None = None) -> AField:
    G = V.frame_gradient(chart)
    A = np.zeros(chart.shape + (3, 3))
    A[..., :, :2] = G
    A[..., 0, 2] = -G[..., 2, 0]
    A[..., 1, 2] = -G[..., 2, 1]
    defect = float(np.max(np.abs(A + np.swapaxes(A, -1, -2))))
    limit = membership_tolerance(chart) if tol is None else tol
    scale = max(1.0, float(np.max(np.abs(G))))
    if defect > limit * scale:
        raise NotAnIsometry(f"skew defect {defect:.3e} exceeds {limit * scale:.3e}")
    return AField(A, defect)


@dataclass(frozen=True, eq=False)
class BendingStrain:
    """K_tan = sym(grad(A n) - A Pi)_tan (2x2, frame coordinates), Q2(K) and the
    minimizing normal vector zeta = c(K) (frame coordinates)."""

    K: np.ndarray
    q2: np.ndarray
    zeta: np.ndarray
    A: AField

    def zeta_ambient(self, chart: SurfaceChart) -> np.ndarray:
        return np.einsum("...ak,...k->...a", chart.frame_matrix, self.zeta)


def bending_strain(V: Displacement, chart: SurfaceChart, model: MaterialModel, *,
                   A: AField | None = None, method: str = "hessian") -> BendingStrain:
    """K_tan, Q2(K_tan) and zeta for V.

    ``method="A"`` differentiates A n and applies A to the shape operator as written.
    ``method="hessian"`` (default) uses the identity K_ij = -n . d_ij V, valid because
    d_i V = A d_i u with A skew; it needs no derivative of A, so rigid motions, whose
    nodal Hessians are smooth, contribute only at roundoff-amplified truncation level.
    """
    A = A_field(V, chart) if A is None else A
    if method == "hessian":
        H = x_derivatives(V.ambient(chart), chart, 2)
        K = -_sym(np.einsum("...a,...aij->...ij", chart.normal, H))
    elif method == "A":
        P = chart.frame_matrix
        An = np.einsum("...ak,...k->...a", P, A.A[..., :, 2])
        dAn = x_derivatives(An, chart, 1)  # [..., a, j] = d_j (A n)_a
        grad_V = np.einsum("...ak,...kl->...al", P, A.A[..., :, :2])  # d_l V
        # A d_j n = -sum_l a_jl d_l V
        X = np.einsum("...ai,...aj->...ij", chart.grad_u, dAn)
        X = X + np.einsum("...ai,...al,...jl->...ij", chart.grad_u, grad_V, chart.a_matrix)
        K = _sym(X)
    else:
        raise ValueError("method must be 'hessian' or 'A'")
    q2, zeta = quadratic_forms(model, K)
    return BendingStrain(K, q2, zeta, A)


def limit_energy(V: Displacement, chart: SurfaceChart, model: MaterialModel,
                 strain: BendingStrain | None = None) -> float:
    """I(V) = 1/24 int_S Q2(K_tan) dp."""
    strain = bending_strain(V, chart, model) if strain is None else strain
    return float(np.sum(area_weights(chart) * strain.q2)) / 24.0


# --------------------------------------------------------------------------- recovery sequence

@dataclass(frozen=True)
class ShellSweep:
    h_list: tuple
    beta: float = 3.5
    h0: float = 1.0
    gl_order: int = 5
    e_scale: float = 1.0

    def __post_init__(self):
        h = np.asarray(self.h_list, dtype=float)
        object.__setattr__(self, "h_list", tuple(float(x) for x in h))
        if h.size == 0 or np.any(h <= 0) or np.any(h >= self.h0):
            raise ValueError("thicknesses must lie in (0, h0)")
        if np.any(np.diff(h) >= 0):
            raise ValueError("h_list must be strictly decreasing")
        if not 2.0 < self.beta < 4.0:
            raise ScalingViolation(f"beta = {self.beta} outside (2, 4)")
        if self.gl_order < 1:
            raise ValueError("gl_order must be positive")

    def e_h(self, h: float) -> float:
        return self.e_scale * h**self.beta

    def eps(self, h: float) -> float:
        return np.sqrt(self.e_h(h)) / h

    def check_order(self, N: int | None):
        """N-th order families need e^h = o(h^(2 + 2/N)), i.e. beta > 2 + 2/N."""
        if N is not None and self.beta <= 2.0 + 2.0 / N:
            raise ScalingViolation(f"beta = {self.beta} <= 2 + 2/{N}")

    def nodes(self):
        x, w = np.polynomial.legendre.leggauss(self.gl_order)
        return 0.5 * x, 0.5 * w  # rescaled thickness r in (-1/2, 1/2), weights sum to 1


def _unit_normal_and_gradient(g: np.ndarray, dg: np.ndarray):
    """n = g1 x g2 / |g1 x g2| and its x-gradient from dg[..., :, i, j] = d_j g_i."""
    c = np.cross(g[..., :, 0], g[..., :, 1])
    dc = (np.cross(dg[..., :, 0, :], g[..., :, 1, None], axisa=-2, axisb=-2, axisc=-2)
          + np.cross(g[..., :, 0, None], dg[..., :, 1, :], axisa=-2, axisb=-2, axisc=-2))
    norm = np.linalg.norm(c, axis=-1)
    n = c / norm[..., None]
    dn = (dc - n[..., :, None] * np.einsum("...a,...aj->...j", n, dc)[..., None, :]) / norm[..., None, None]
    return n, dn


@dataclass(frozen=True, eq=False)
class RecoveryDeformation:
    """Fields defining u^h on the shell around S; arrays in ambient coordinates.

    ``grad_*`` arrays have shape (nt, ns, 3, 2) with column i the derivative along d_i u.
    ``disp_over_eps`` is (u_eps - u) / eps, kept separately to avoid cancellation.
    """

    h: float
    eps: float
    e_h: float
    u_eps: np.ndarray
    grad_u_eps: np.ndarray
    n_eps: np.ndarray
    grad_n_eps: np.ndarray
    d: np.ndarray
    grad_d: np.ndarray
    disp_over_eps: np.ndarray
    a: np.ndarray
    frame: np.ndarray
    meta: dict = field(default_factory=dict)

    @classmethod
    def rigid(cls, R: np.ndarray, c: np.ndarray, chart: SurfaceChart, h: float, e_h: float = 1.0):
        """u^h(z) = R z + c, a rigid motion of the whole shell."""
        R = np.asarray(R, dtype=float)
        c = np.asarray(c, dtype=float)
        eps = np.sqrt(e_h) / h
        z = np.zeros(chart.shape + (3,))
        u_eps = np.einsum("ak,...k->...a", R, chart.u) + c
        return cls(h, eps, e_h, u_eps, np.einsum("ak,...ki->...ai", R, chart.grad_u),
                   np.einsum("ak,...k->...a", R, chart.normal),
                   np.einsum("ak,...ki->...ai", R, chart.grad_normal), z, np.zeros(chart.shape + (3, 2)),
                   (u_eps - chart.u) / eps, chart.a_matrix, chart.frame_matrix)

    def check_thickness(self):
        """Id + tau Pi must stay invertible for |tau| <= h/2."""
        tr = np.abs(np.trace(self.a, axis1=-2, axis2=-1))
        worst = float(np.min(1.0 - 0.5 * self.h * tr))
        if worst <= 1e-3:
            raise ThicknessTooLarge(f"det(Id + tau Pi) reaches {worst:.3e} for h = {self.h}")
        return worst

    def det_factor(self, r: float) -> np.ndarray:
        tau = r * self.h
        a = self.a
        return (1.0 - tau * a[..., 0, 0]) * (1.0 - tau * a[..., 1, 1]) - tau**2 * a[..., 0, 1] ** 2

    def gradient(self, r: float, rotation: np.ndarray | None = None) -> np.ndarray:
        """grad u^h at p + r h n, as a 3x3 matrix acting on frame coordinates."""
        tau = r * self.h
        M = self.grad_u_eps + tau * self.grad_n_eps + 0.5 * tau**2 * self.eps * self.grad_d
        Inv = np.linalg.inv(np.eye(2) - tau * self.a)
        Ft = np.einsum("...ai,...ij->...aj", M, Inv)
        Fn = self.n_eps + tau * self.eps * self.d
        F = np.concatenate([Ft, Fn[..., None]], axis=-1)
        if rotation is not None:
            F = np.einsum("ab,...bj->...aj", rotation, F)
        return F

    def strain(self, r: float, rotation: np.ndarray | None = None) -> np.ndarray:
        F = self.gradient(r, rotation)
        return np.einsum("...ki,...kj->...ij", F, F) - np.eye(3)

    def position(self, r: float) -> np.ndarray:
        tau = r * self.h
        return self.u_eps + tau * self.n_eps + 0.5 * tau**2 * self.eps * self.d

    def averaged_displacement(self, sweep: ShellSweep) -> np.ndarray:
        """V^h = h / sqrt(e^h) mean_r (y^h(p + r n) - p), with the thickness mean exact."""
        return self.disp_over_eps + (self.h**2 / 24.0) * self.d


def _as_family(family):
    if isinstance(family, Displacement):
        raise TypeError("pass a MatchedFamily or RotationFamily")
    return family


def first_order_field(family, chart: SurfaceChart) -> Displacement:
    if isinstance(family, RotationFamily):
        return Displacement.from_ambient(np.einsum("ak,...k->...a", family.Q, chart.u), chart)
    return family.corrections[0]


def recovery_deformation(family, h: float, sweep: ShellSweep, model: MaterialModel,
                         chart: SurfaceChart, *, strain: BendingStrain | None = None,
                         check: bool = True) -> RecoveryDeformation:
    """Build u^h from a matched (or exactly rigid) family at thickness h."""
    family = _as_family(family)
    if isinstance(family, MatchedFamily):
        sweep.check_order(family.order)
    e_h = sweep.e_h(h)
    eps = sweep.eps(h)
    V = first_order_field(family, chart)
    if strain is None:
        strain = bending_strain(V, chart, model)
    zeta = strain.zeta_ambient(chart)
    d = 2.0 * zeta
    grad_d = x_derivatives(d, chart, 1)
    if isinstance(family, RotationFamily):
        R = expm(eps * np.asarray(family.Q, dtype=float))
        u_eps = np.einsum("ak,...k->...a", R, chart.u)
        g = np.einsum("ak,...ki->...ai", R, chart.grad_u)
        n_eps = np.einsum("ak,...k->...a", R, chart.normal)
        dn = np.einsum("ak,...ki->...ai", R, chart.grad_normal)
        disp = np.einsum("ak,...k->...a", (R - np.eye(3)) / eps, chart.u)
    else:
        if len(family.hessians) != len(family.grads) or any(H is None for H in family.hessians):
            raise ValueError("family lacks Hessians of its corrections")
        W = [w.ambient(chart) for w in family.corrections]
        disp = sum(eps ** (j - 1) * Wj for j, Wj in enumerate(W, start=1))
        u_eps = chart.u + eps * disp
        g = family.grad_u_eps(eps)
        # d_j d_i u = a_ij n for the isometric chart
        dg = chart.a_matrix[..., None, :, :] * chart.normal[..., :, None, None]
        for j, H in enumerate(family.hessians, start=1):
            dg = dg + eps**j * H
        n_eps, dn = _unit_normal_and_gradient(g, dg)
    rec = RecoveryDeformation(h, eps, e_h, u_eps, g, n_eps, dn, d, grad_d, disp,
                              chart.a_matrix, chart.frame_matrix,
                              {"family": type(family).__name__})
    if check:
        rec.check_thickness()
    return rec


def shell_energy(rec: RecoveryDeformation, model: MaterialModel, chart: SurfaceChart,
                 sweep: ShellSweep, *, rotation: np.ndarray | None = None) -> float:
    """E^h(u^h) = 1/h int_{S^h} W(grad u^h), with Gauss-Legendre quadrature in the thickness."""
    r_nodes, r_weights = sweep.nodes()
    area = area_weights(chart)
    total = 0.0
    for r, wr in zip(r_nodes, r_weights):
        K = rec.strain(r, rotation)
        total += wr * float(np.sum(area * model.W_from_strain(K) * rec.det_factor(r)))
    return total


def strain_limit(strain: BendingStrain, r: float) -> np.ndarray:
    """The limit of K^h / (2 sqrt(e^h)) at rescaled thickness r, in frame coordinates."""
    L = np.zeros(strain.K.shape[:-2] + (3, 3))
    L[..., :2, :2] = strain.K
    L[..., :, 2] += strain.zeta
    L[..., 2, :] += strain.zeta
    return r * L


def strain_error(rec: RecoveryDeformation, strain: BendingStrain, sweep: ShellSweep) -> float:
    """max over nodes and thickness points of |K^h / (2 sqrt e^h) - limit|."""
    err = 0.0
    for r in sweep.nodes()[0]:
        Kf = rec.strain(r) / (2.0 * np.sqrt(rec.e_h))
        err = max(err, float(np.max(np.abs(Kf - strain_limit(strain, r)))))
    return err


@dataclass(frozen=True)
class GammaRow:
    h: float
    e_h: float
    eps: float
    energy: float
    ratio: float
    I: float
    gap: float
    abs_gap: float
    Vh_err: float
    strain_err: float

    def as_dict(self):
        return dict(self.__dict__)


def gamma_gap(family, sweep: ShellSweep, model: MaterialModel, chart: SurfaceChart,
              *, rotation: np.ndarray | None = None) -> list[GammaRow]:
    """Rescaled energies, the limit I(V), relative gaps and V^h errors along the sweep.

    The gap is |ratio - I| / max(I, 1e-12); ``Vh_err`` is max |V^h - V| relative to
    max |V| (absolute when V = 0).
    """
    V = first_order_field(family, chart)
    strain = bending_strain(V, chart, model)
    I = limit_energy(V, chart, model, strain)
    Vamb = V.ambient(chart)
    vscale = float(np.max(np.linalg.norm(Vamb, axis=-1)))
    rows = []
    for h in sweep.h_list:
        rec = recovery_deformation(family, h, sweep, model, chart, strain=strain)
        E = shell_energy(rec, model, chart, sweep, rotation=rotation)
        ratio = E / rec.e_h
        Vh = rec.averaged_displacement(sweep)
        verr = float(np.max(np.linalg.norm(Vh - Vamb, axis=-1)))
        if vscale > 0:
            verr /= vscale
        rows.append(GammaRow(h, rec.e_h, rec.eps, E, ratio, I, abs(ratio - I) / max(I, GAP_FLOOR),
                             abs(ratio - I), verr, strain_error(rec, strain, sweep)))
    return rows
