"""Developable surfaces built from curvature data along a line of curvature.

The generating data are the geodesic curvature kappa(t) of the planar preimage
Gamma, the normal curvature kappa_n(t) and the ruling half-widths s_minus, s_plus.
The Darboux frame (gamma', v, n) solves r' = Omega(kappa, kappa_n) r with r(0) = Id,
and the immersion is u(Gamma(t) + s N(t)) = gamma(t) + s v(t).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .calculus import Grid2D, SymFormField, integrate_M, x_derivatives
from .errors import ChartDegenerate, NonAdmissibleCurve, StepTooCoarse
from .profiles import Profile

ORTHO_TOL = 1e-10


def _as_profile(p) -> Profile:
    if isinstance(p, Profile):
        return p
    if np.isscalar(p):
        return Profile.const(float(p))
    raise TypeError(f"cannot interpret {p!r} as a profile")


@dataclass(frozen=True)
class CurveSpec:
    """Generating data of a developable chart.

    ``kappa``, ``kappa_n``, ``s_minus``, ``s_plus`` are profiles (or constants);
    ``delta`` is the margin of the admissibility band, defaulting to
    ``0.05 * min(1/s_plus, 1/s_minus)``.
    """

    T: float
    kappa: Profile
    kappa_n: Profile
    s_minus: Profile
    s_plus: Profile
    delta: float | None = None
    kappa_n_floor: float = 1e-8

    def __post_init__(self):
        for name in ("kappa", "kappa_n", "s_minus", "s_plus"):
            object.__setattr__(self, name, _as_profile(getattr(self, name)))
        if self.delta is None:
            t = np.linspace(0.0, self.T, 257)
            smax = max(np.max(self.s_minus(t)), np.max(self.s_plus(t)))
            object.__setattr__(self, "delta", 0.05 / smax)

    @classmethod
    def cylinder(cls, R: float = 1.0, T: float = 2 * np.pi, s_minus: float = 0.5,
                 s_plus: float = 0.5, delta: float | None = None) -> "CurveSpec":
        return cls(T, Profile.const(0.0), Profile.const(1.0 / R), Profile.const(s_minus),
                   Profile.const(s_plus), delta)

    def violations(self, n: int = 513) -> list[str]:
        """Human-readable list of failed invariants (empty if admissible)."""
        t = np.linspace(0.0, self.T, n)
        sm, sp, k, kn = self.s_minus(t), self.s_plus(t), self.kappa(t), self.kappa_n(t)
        out = []
        if not self.T > 0:
            out.append("T must be positive")
        if np.any(sm <= 0) or np.any(sp <= 0):
            out.append("ruling half-widths must be positive")
            return out
        if not self.delta > 0:
            out.append("delta must be positive")
        lo, hi = self.delta - 1.0 / sm, 1.0 / sp - self.delta
        if np.any(k < lo) or np.any(k > hi):
            out.append("kappa leaves the admissible band [delta - 1/s-, 1/s+ - delta]")
        if np.min(np.abs(kn)) < self.kappa_n_floor:
            out.append("normal curvature vanishes (mean-curvature condition)")
        return out

    def to_json(self) -> dict:
        return {"T": self.T, "kappa": self.kappa.to_json(), "kappa_n": self.kappa_n.to_json(),
                "s_minus": self.s_minus.to_json(), "s_plus": self.s_plus.to_json(),
                "delta": self.delta}


@dataclass(frozen=True)
class DarbouxFrame:
    """Frame samples: ``r[k]`` has rows (gamma', v, n) at ``t[k]``."""

    t: np.ndarray
    r: np.ndarray
    gamma: np.ndarray
    phi: np.ndarray
    Gamma: np.ndarray
    N: np.ndarray
    kappa: np.ndarray
    kappa_n: np.ndarray

    @property
    def tangent(self) -> np.ndarray:
        return self.r[:, 0]

    @property
    def v(self) -> np.ndarray:
        return self.r[:, 1]

    @property
    def normal(self) -> np.ndarray:
        return self.r[:, 2]

    @property
    def Gamma_prime(self) -> np.ndarray:
        return np.stack([np.cos(self.phi), np.sin(self.phi)], -1)

    def orthogonality_defect(self) -> float:
        rtr = np.einsum("kji,kjl->kil", self.r, self.r)
        return float(np.max(np.abs(rtr - np.eye(3))))


def generator(kappa, kappa_n) -> np.ndarray:
    kappa, kappa_n = np.broadcast_arrays(np.asarray(kappa, float), np.asarray(kappa_n, float))
    z = np.zeros_like(kappa)
    return np.stack([np.stack([z, kappa, kappa_n], -1),
                     np.stack([-kappa, z, z], -1),
                     np.stack([-kappa_n, z, z], -1)], -2)


def expm_skew(W: np.ndarray) -> np.ndarray:
    """Rodrigues formula for the exponential of 3x3 skew matrices (batched)."""
    w = np.stack([W[..., 2, 1], W[..., 0, 2], W[..., 1, 0]], -1)
    th = np.linalg.norm(w, axis=-1)[..., None, None]
    small = th < 1e-8
    th_safe = np.where(small, 1.0, th)
    a = np.where(small, 1.0 - th**2 / 6.0, np.sin(th_safe) / th_safe)
    b = np.where(small, 0.5 - th**2 / 24.0, (1.0 - np.cos(th_safe)) / th_safe**2)
    return np.eye(3) + a * W + b * (W @ W)


def _reproject(r: np.ndarray) -> np.ndarray:
    U, _, Vt = np.linalg.svd(r)
    return U @ Vt


def integrate_darboux(spec: CurveSpec, n_steps: int, *, max_substep: float = 5e-3,
                      validate: bool = True) -> DarbouxFrame:
    """Integrate the Darboux frame and the planar curve on ``n_steps`` uniform intervals.

    Each interval is split into substeps advanced by the fourth-order Magnus
    exponential update, which keeps r in SO(3). gamma and Gamma are accumulated by
    two-point Hermite quadrature of sixth order; the turning angle of Gamma by
    three-point Gauss-Legendre quadrature of kappa.
    """
    if n_steps < 2:
        raise ValueError("n_steps must be >= 2")
    if validate:
        bad = spec.violations()
        if bad:
            raise NonAdmissibleCurve("; ".join(bad))
    T = spec.T
    t_probe = np.linspace(0.0, T, 1025)
    kmax = float(np.max(np.abs(spec.kappa(t_probe)) + np.abs(spec.kappa_n(t_probe))))
    total = max(n_steps, int(np.ceil(16 * T * kmax)), int(np.ceil(T / max_substep)))
    m = int(np.ceil(total / n_steps))
    tn = np.linspace(0.0, T, n_steps + 1)
    h = T / (n_steps * m)
    ts = np.linspace(0.0, T, n_steps * m + 1)

    # Magnus-4 at the Gauss points of every substep
    c = np.sqrt(3.0) / 6.0
    t1, t2 = ts[:-1] + (0.5 - c) * h, ts[:-1] + (0.5 + c) * h
    O1 = generator(spec.kappa(t1), spec.kappa_n(t1))
    O2 = generator(spec.kappa(t2), spec.kappa_n(t2))
    theta = 0.5 * h * (O1 + O2) + (np.sqrt(3.0) / 12.0) * h**2 * (O2 @ O1 - O1 @ O2)
    steps = expm_skew(theta)

    r = np.empty((ts.size, 3, 3))
    r[0] = np.eye(3)
    for k in range(ts.size - 1):
        r[k + 1] = steps[k] @ r[k]
        if (k + 1) % m == 0:
            r[k + 1] = _reproject(r[k + 1])

    kap, kapn = spec.kappa(ts), spec.kappa_n(ts)
    dkap, dkapn = spec.kappa(ts, 1), spec.kappa_n(ts, 1)
    f0 = r[:, 0]
    f1 = kap[:, None] * r[:, 1] + kapn[:, None] * r[:, 2]
    f2 = (dkap[:, None] * r[:, 1] + dkapn[:, None] * r[:, 2]
          - (kap**2 + kapn**2)[:, None] * r[:, 0])
    gamma = np.vstack([np.zeros(3), np.cumsum(_hermite6(f0, f1, f2, h), axis=0)])

    xg, wg = np.polynomial.legendre.leggauss(3)
    tq = ts[:-1, None] + 0.5 * h * (xg[None, :] + 1.0)
    dphi = 0.5 * h * (spec.kappa(tq) @ wg)
    phi = np.concatenate([[0.0], np.cumsum(dphi)])
    Gp = np.stack([np.cos(phi), np.sin(phi)], -1)
    Nn = np.stack([-np.sin(phi), np.cos(phi)], -1)
    g1 = kap[:, None] * Nn
    g2 = spec.kappa(ts, 1)[:, None] * Nn - (kap**2)[:, None] * Gp
    Gamma = np.vstack([np.zeros(2), np.cumsum(_hermite6(Gp, g1, g2, h), axis=0)])

    sel = slice(None, None, m)
    frame = DarbouxFrame(t=tn, r=r[sel].copy(), gamma=gamma[sel].copy(), phi=phi[sel].copy(),
                         Gamma=Gamma[sel].copy(), N=Nn[sel].copy(),
                         kappa=spec.kappa(tn), kappa_n=spec.kappa_n(tn))
    drift = frame.orthogonality_defect()
    if drift > ORTHO_TOL:
        raise StepTooCoarse(f"frame orthogonality drift {drift:.2e} exceeds {ORTHO_TOL:.0e}")
    return frame


def _hermite6(f, df, d2f, h):
    """Integrals of f over consecutive substeps from endpoint values and derivatives."""
    return (0.5 * h * (f[:-1] + f[1:]) + (h**2 / 10.0) * (df[:-1] - df[1:])
            + (h**3 / 120.0) * (d2f[:-1] + d2f[1:]))


@dataclass(frozen=True, eq=False)
class SurfaceChart:
    """The immersion u and its closed-form differential geometry on a grid.

    Arrays are indexed ``[it, isigma]``. ``grad_u[..., :, i]`` is d_i u (x-derivative),
    ``frame[..., :, :]`` has columns (d_1 u, d_2 u, n). ``J`` holds the Jacobian of
    (sigma, t) -> x with columns (x_sigma, x_t); ``jac`` is det grad Phi in (s, t).
    """

    spec: CurveSpec
    frame: DarbouxFrame
    grid: Grid2D
    s: np.ndarray
    width: np.ndarray
    one_minus_sk: np.ndarray
    Phi: np.ndarray
    J: np.ndarray
    Jinv: np.ndarray
    x_st: np.ndarray
    x_tt: np.ndarray
    u: np.ndarray
    grad_u: np.ndarray
    normal: np.ndarray
    a: SymFormField
    kappa: np.ndarray
    kappa_n: np.ndarray
    kappa_prime: np.ndarray
    jac_floor: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.s.shape

    @property
    def jac(self) -> np.ndarray:
        return -self.one_minus_sk

    @cached_property
    def frame_matrix(self) -> np.ndarray:
        return np.concatenate([self.grad_u, self.normal[..., None]], axis=-1)

    @cached_property
    def a_matrix(self) -> np.ndarray:
        return self.a.matrix()

    @cached_property
    def grad_normal(self) -> np.ndarray:
        """x-derivatives of the unit normal: d_i n = -sum_j a_ij d_j u."""
        return -np.einsum("...kj,...ij->...ki", self.grad_u, self.a_matrix)

    def isometry_defect(self) -> float:
        gtg = np.einsum("...ki,...kj->...ij", self.grad_u, self.grad_u)
        return float(np.max(np.abs(gtg - np.eye(2))))

    def gauss_defect(self) -> float:
        return float(np.max(np.abs(self.a.det())))

    def with_grid_order(self, order: int) -> "SurfaceChart":
        from dataclasses import replace

        return replace(self, grid=self.grid.with_order(order))


def build_chart(spec: CurveSpec, frame: DarbouxFrame, grid: Grid2D) -> SurfaceChart:
    """Evaluate u, grad u and a_ij on the grid from the closed-form chart formulas."""
    if frame.t.size != grid.nt or not np.allclose(frame.t, grid.t_nodes, rtol=0, atol=1e-12 * spec.T):
        raise ValueError("frame samples must coincide with the grid t-nodes")
    t, sig = grid.t_nodes, grid.sigma_nodes
    sm, sp = spec.s_minus(t), spec.s_plus(t)
    dsm, dsp = spec.s_minus(t, 1), spec.s_plus(t, 1)
    d2sm, d2sp = spec.s_minus(t, 2), spec.s_plus(t, 2)
    w, dw, d2w = sm + sp, dsm + dsp, d2sm + d2sp
    S = -sm[:, None] + sig[None, :] * w[:, None]
    s_t = -dsm[:, None] + sig[None, :] * dw[:, None]
    s_tt = -d2sm[:, None] + sig[None, :] * d2w[:, None]

    k = frame.kappa[:, None]
    kp = spec.kappa(t, 1)[:, None]
    kn = frame.kappa_n[:, None]
    q = 1.0 - S * k
    floor = spec.delta * np.minimum(sm, sp)[:, None]
    if np.any(q < floor * (1.0 - 1e-12)):
        raise ChartDegenerate("1 - s kappa falls below the delta floor")

    Gp = frame.Gamma_prime[:, None, :]
    Nv = frame.N[:, None, :]
    Phi = frame.Gamma[:, None, :] + S[..., None] * Nv
    x_sigma = w[:, None, None] * Nv * np.ones_like(S)[..., None]
    x_t = q[..., None] * Gp + s_t[..., None] * Nv
    J = np.stack([x_sigma, x_t], axis=-1)
    Jinv = np.linalg.inv(J)
    x_st = dw[:, None, None] * Nv - (w[:, None] * k)[..., None] * Gp
    x_st = np.broadcast_to(x_st, Phi.shape).copy()
    x_tt = ((-2.0 * s_t * k - S * kp)[..., None] * Gp
            + (k - S * k**2 + s_tt)[..., None] * Nv)

    gp3, v3, n3 = frame.tangent[:, None, :], frame.v[:, None, :], frame.normal[:, None, :]
    u = frame.gamma[:, None, :] + S[..., None] * v3
    grad_u = (gp3[..., :, None] * Gp[..., None, :] + v3[..., :, None] * Nv[..., None, :])
    grad_u = np.broadcast_to(grad_u, S.shape + (3, 2)).copy()
    normal = np.broadcast_to(n3, S.shape + (3,)).copy()
    coef = kn / q
    a = SymFormField(coef * Gp[..., 0] ** 2, coef * Gp[..., 0] * Gp[..., 1], coef * Gp[..., 1] ** 2)

    return SurfaceChart(spec=spec, frame=frame, grid=grid, s=S, width=w, one_minus_sk=q,
                        Phi=Phi, J=J, Jinv=Jinv, x_st=x_st, x_tt=x_tt, u=u, grad_u=grad_u,
                        normal=normal, a=a, kappa=frame.kappa, kappa_n=frame.kappa_n,
                        kappa_prime=spec.kappa(t, 1), jac_floor=0.0)


def make_chart(spec: CurveSpec, nt: int = 128, ns: int = 64, order: int = 4) -> SurfaceChart:
    grid = Grid2D(nt, ns, spec.T, order)
    frame = integrate_darboux(spec, nt - 1)
    return build_chart(spec, frame, grid)


# --------------------------------------------------------------------------- admissibility

@dataclass(frozen=True)
class AdmissibilityReport:
    rulings_disjoint: bool
    n_crossings: int
    band_ok: bool
    delta_max: float
    delta: float
    mean_curvature_ok: bool
    kappa_n_min: float
    widths_positive: bool

    @property
    def passed(self) -> bool:
        return self.rulings_disjoint and self.band_ok and self.mean_curvature_ok and self.widths_positive

    def to_json(self) -> dict:
        return {"passed": self.passed, "rulings_disjoint": self.rulings_disjoint,
                "n_crossings": self.n_crossings, "band_ok": self.band_ok,
                "delta_max": self.delta_max, "delta": self.delta,
                "mean_curvature_ok": self.mean_curvature_ok, "kappa_n_min": self.kappa_n_min,
                "widths_positive": self.widths_positive}


def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def count_segment_crossings(P: np.ndarray, Q: np.ndarray, exclude: int = 0) -> int:
    """Number of pairs (i < j, j - i > exclude) whose open segments [P_i, Q_i] and
    [P_j, Q_j] intersect. Exhaustive pairwise orientation test."""
    n = P.shape[0]
    i, j = np.triu_indices(n, k=exclude + 1)
    p1x, p1y, q1x, q1y = P[i, 0], P[i, 1], Q[i, 0], Q[i, 1]
    p2x, p2y, q2x, q2y = P[j, 0], P[j, 1], Q[j, 0], Q[j, 1]
    d1 = _orient(p2x, p2y, q2x, q2y, p1x, p1y)
    d2 = _orient(p2x, p2y, q2x, q2y, q1x, q1y)
    d3 = _orient(p1x, p1y, q1x, q1y, p2x, p2y)
    d4 = _orient(p1x, p1y, q1x, q1y, q2x, q2y)
    hit = (d1 * d2 < 0) & (d3 * d4 < 0)
    return int(np.count_nonzero(hit))


def check_admissibility(spec: CurveSpec, frame: DarbouxFrame) -> AdmissibilityReport:
    t = frame.t
    sm, sp = spec.s_minus(t), spec.s_plus(t)
    positive = bool(np.all(sm > 0) and np.all(sp > 0))
    P = frame.Gamma - sm[:, None] * frame.N
    Q = frame.Gamma + sp[:, None] * frame.N
    crossings = count_segment_crossings(P, Q, exclude=0)
    with np.errstate(divide="ignore"):
        margin = np.minimum(frame.kappa + 1.0 / sm, 1.0 / sp - frame.kappa)
    delta_max = float(np.min(margin))
    kn_min = float(np.min(np.abs(frame.kappa_n)))
    return AdmissibilityReport(rulings_disjoint=crossings == 0, n_crossings=crossings,
                               band_ok=bool(delta_max >= spec.delta), delta_max=delta_max,
                               delta=float(spec.delta),
                               mean_curvature_ok=bool(kn_min >= spec.kappa_n_floor),
                               kappa_n_min=kn_min, widths_positive=positive)


# --------------------------------------------------------------------------- energy

@dataclass(frozen=True)
class BendingEnergy:
    closed_form: float
    hessian: float

    @property
    def rel_diff(self) -> float:
        return abs(self.closed_form - self.hessian) / max(abs(self.closed_form), 1e-300)


def bending_energy(chart: SurfaceChart, oracle_order: int | None = 4) -> BendingEnergy:
    """Integral of |grad^2 u|^2 over the planar domain, evaluated twice: from
    kappa_n^2 / (1 - s kappa) over M, and from finite-difference Hessians of u.

    The Hessian check uses stencils of ``oracle_order`` (None keeps the grid's order).
    """
    if np.any(chart.one_minus_sk <= 0):
        raise ChartDegenerate("1 - s kappa is not positive")
    closed = integrate_M(chart.kappa_n[:, None] ** 2 * np.ones(chart.shape), chart, "1/(1-sk)")
    probe = chart if oracle_order is None else chart.with_grid_order(max(oracle_order, chart.grid.order))
    H = x_derivatives(chart.u, probe, 2)
    hess = integrate_M(np.sum(H**2, axis=(-3, -2, -1)), chart, "1-sk")
    return BendingEnergy(closed, hess)
