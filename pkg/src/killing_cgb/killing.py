"""Killing-field deformation of the Levi-Civita connection and transgression 3-forms.

Forms are stored as fully antisymmetric component arrays with the
determinant convention ``(dx^1 ^ dx^2)(d_1, d_2) = 1``, so a k-form is
``sum_{i<j<...} w_ij... dx^i ^ dx^j ^ ...``.  Endomorphism-valued forms
carry two lowered endomorphism indices before the form indices:
``F[..., p, q, i, j] = <R(d_i, d_j) d_q, d_p>``.

With ``N`` the endomorphism ``w -> nabla_w X`` (lowered, ``N_pq = nabla_q X_p``)
the deformation is ``K = |X|^-2 X_flat (x) N`` and the deformed connections
``nabla - t K`` have curvature ``F_t = F - t DK``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .tensor_core import (
    DEFAULT_TOL,
    EPS4,
    CurvatureData,
    DomainError,
    GeometryError,
    MetricChart,
    Tolerances,
    curvature_from,
    fd_gradient,
    fd_hessian,
)

EULER = "euler"
PONTRYAGIN = "pontryagin"


@dataclass(frozen=True)
class KillingField:
    """Vector field given by coordinate components and (optionally exact) derivatives."""

    name: str
    X: Callable[[np.ndarray], np.ndarray]
    dX: Optional[Callable] = None  # [..., k, a] = d_k X^a
    d2X: Optional[Callable] = None  # [..., k, l, a]

    def derivatives(self, x: np.ndarray, h: float = 1e-4):
        if self.dX is not None and self.d2X is not None:
            return self.X(x), self.dX(x), self.d2X(x)
        return self.X(x), fd_gradient(self.X, x, h), fd_hessian(self.X, x, h)


@dataclass
class KillingData:
    X: np.ndarray
    X_flat: np.ndarray
    norm_X: np.ndarray
    nabla_X: np.ndarray  # [..., i, j] = nabla_i X_j = <nabla_{d_i} X, d_j>
    nabla2_X: np.ndarray  # [..., i, j, a] = (nabla^2_{d_i, d_j} X)_a via the Killing identity
    nabla2_X_direct: np.ndarray  # same, from second derivatives of metric and X

    @property
    def dX_flat(self) -> np.ndarray:
        return 2.0 * self.nabla_X

    @property
    def endo(self) -> np.ndarray:
        """``N_pq = nabla_q X_p``: the endomorphism ``w -> nabla_w X`` with lowered indices."""
        return np.swapaxes(self.nabla_X, -1, -2)


@dataclass
class ConnectionDeformation:
    K: np.ndarray  # [..., p, q, i]
    DK: np.ndarray  # [..., p, q, i, j]
    F: np.ndarray  # [..., p, q, i, j]

    def F_t(self, t: float) -> np.ndarray:
        return self.F - t * self.DK


@dataclass
class Transgression3Form:
    components: np.ndarray  # [..., i, j, k]
    kind: str

    def antisymmetry_residual(self) -> float:
        c = self.components
        perms = [np.swapaxes(c, -1, -2), np.swapaxes(c, -2, -3), np.swapaxes(c, -1, -3)]
        return float(max(np.max(np.abs(c + p)) for p in perms))

    def norm(self, ginv: np.ndarray) -> np.ndarray:
        """Pointwise norm as a 3-form (sum over increasing index triples)."""
        c = self.components
        return np.sqrt(np.einsum("...ijk,...abc,...ia,...jb,...kc->...", c, c, ginv, ginv, ginv) / 6.0)


# --------------------------------------------------------------------- forms


def wedge_1_2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """1-form ^ 2-form on trailing axes ``(i)`` and ``(j, k)``."""
    return (
        np.einsum("...i,...jk->...ijk", a, b)
        + np.einsum("...j,...ki->...ijk", a, b)
        + np.einsum("...k,...ij->...ijk", a, b)
    )


def wedge_2_2_density(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Coordinate component ``(a ^ b)_{1234}`` of two 2-forms in dimension four."""
    return 0.25 * np.einsum("ijkl,...ij,...kl->...", EPS4, a, b)


def epsilon_upper(g: np.ndarray, orientation: int) -> np.ndarray:
    """Contravariant volume tensor ``eps^{pqrs} = o [pqrs] / sqrt(det g)``."""
    return orientation * EPS4 / np.sqrt(np.linalg.det(g))[..., None, None, None, None]


# ------------------------------------------------------------------ Killing data


def killing_data(metric: MetricChart, field: KillingField, x, curv: Optional[CurvatureData] = None) -> KillingData:
    x = np.asarray(x, dtype=float)
    g, dg, d2g = metric.derivatives(x)
    if curv is None:
        curv = curvature_from(g, dg, d2g, metric.orientation)
    from .tensor_core import christoffel_derivative

    X, dX, d2X = field.derivatives(x, 1e-4 * metric.length_scale)
    gam = curv.gamma
    cov = dX + np.einsum("...aic,...c->...ia", gam, X)  # nabla_i X^a
    nabla_low = np.einsum("...ia,...aj->...ij", cov, g)
    X_flat = np.einsum("...ij,...j->...i", g, X)
    norm = np.sqrt(np.maximum(np.einsum("...i,...i->...", X, X_flat), 0.0))

    # nabla^2_{i,j} X^a from derivatives, for cross-checking the Killing identity
    dgam = christoffel_derivative(g, dg, d2g, curv.ginv)
    d_cov = (
        d2X
        + np.einsum("...iajc,...c->...ija", dgam, X)
        + np.einsum("...ajc,...ic->...ija", gam, dX)
    )
    direct_up = d_cov + np.einsum("...aic,...jc->...ija", gam, cov) - np.einsum("...cij,...ca->...ija", gam, cov)
    direct = np.einsum("...ija,...ab->...ijb", direct_up, g)
    # Killing identity: nabla^2_{A,W} X = R(A, X) W, i.e. nabla_i nabla_j X_a = R_{a j i c} X^c
    identity = np.einsum("...ajic,...c->...ija", curv.riemann, X)
    return KillingData(X=X, X_flat=X_flat, norm_X=norm, nabla_X=nabla_low, nabla2_X=identity, nabla2_X_direct=direct)


def killing_residual(metric: MetricChart, field: KillingField, x) -> np.ndarray:
    """``|sym nabla X| = |L_X g| / 2`` in the metric norm; zero for Killing fields."""
    x = np.asarray(x, dtype=float)
    g, dg, d2g = metric.derivatives(x)
    curv = curvature_from(g, dg, d2g, metric.orientation) if metric.dimension == 4 else None
    if curv is None:
        from .tensor_core import christoffel_from

        gam = christoffel_from(g, dg)
        ginv = np.linalg.inv(g)
    else:
        gam, ginv = curv.gamma, curv.ginv
    X, dX, _ = field.derivatives(x, 1e-4 * metric.length_scale)
    cov = dX + np.einsum("...aic,...c->...ia", gam, X)
    low = np.einsum("...ia,...aj->...ij", cov, g)
    sym = 0.5 * (low + np.swapaxes(low, -1, -2))
    return np.sqrt(np.einsum("...ab,...cd,...ac,...bd->...", sym, sym, ginv, ginv))


def _guard(kd: KillingData, metric: MetricChart, tol: Tolerances) -> None:
    if np.any(kd.norm_X < tol.null * metric.length_scale * metric.metric_scale):
        raise GeometryError("Killing field vanishes (null set) at an evaluation point")


def deformation(metric: MetricChart, killing: KillingData, curv: CurvatureData, tol: Tolerances = DEFAULT_TOL,
                use_identity: bool = True) -> ConnectionDeformation:
    """``K``, ``DK`` and ``F`` at the points carried by ``killing``/``curv``."""
    _guard(killing, metric, tol)
    N = killing.endo
    inv2 = 1.0 / killing.norm_X**2
    Xf = killing.X_flat
    K = inv2[..., None, None, None] * np.einsum("...pq,...i->...pqi", N, Xf)

    H = killing.nabla2_X if use_identity else killing.nabla2_X_direct  # [i, j, a] = nabla_i nabla_j X_a
    # nabla_i (|X|^-2 X_j)
    grad_sq = 2.0 * np.einsum("...c,...ic->...i", killing.X, killing.nabla_X)  # d_i |X|^2
    d_coef = -(inv2**2)[..., None, None] * np.einsum("...i,...j->...ij", grad_sq, Xf) + inv2[..., None, None] * killing.nabla_X
    # nabla_i N_pq = nabla_i nabla_q X_p = H[i, q, p]
    dN = np.einsum("...iqp->...ipq", H)
    nabla_K = np.einsum("...ij,...pq->...ipqj", d_coef, N) + inv2[..., None, None, None, None] * np.einsum("...j,...ipq->...ipqj", Xf, dN)
    DK = np.einsum("...ipqj->...pqij", nabla_K) - np.einsum("...jpqi->...pqij", nabla_K)
    return ConnectionDeformation(K=K, DK=DK, F=curv.riemann.copy())


def dk_closed_form(killing: KillingData) -> np.ndarray:
    """``DK = (|X|^-4 i_X dX_flat ^ X_flat + |X|^-2 dX_flat) (x) N - |X|^-2 X_flat ^ nabla^2 X``."""
    N = killing.endo
    Xf = killing.X_flat
    inv2 = 1.0 / killing.norm_X**2
    dXf = killing.dX_flat
    iX = np.einsum("...i,...ij->...j", killing.X, dXf)
    two = (inv2**2)[..., None, None] * (np.einsum("...i,...j->...ij", iX, Xf) - np.einsum("...j,...i->...ij", iX, Xf))
    two = two + inv2[..., None, None] * dXf
    dN = np.einsum("...iqp->...ipq", killing.nabla2_X)
    hess = np.einsum("...i,...jpq->...pqij", Xf, dN) - np.einsum("...j,...ipq->...pqij", Xf, dN)
    return np.einsum("...ij,...pq->...pqij", two, N) - inv2[..., None, None, None, None] * hess


def covariant_constancy_residual(killing: KillingData, deform: ConnectionDeformation) -> np.ndarray:
    """Residual of ``nabla X - K(X) = 0``: the form slot of ``K`` contracted with ``X`` returns ``nabla X``."""
    KX = np.einsum("...pqi,...i->...pq", deform.K, killing.X)
    return np.max(np.abs(KX - killing.endo), axis=(-1, -2))


def null_vector_residual(killing: KillingData, deform: ConnectionDeformation, t: float = 1.0) -> np.ndarray:
    """``|i_X F_t|`` (max component); vanishes at ``t = 1``."""
    iF = np.einsum("...i,...pqij->...pqj", killing.X, deform.F_t(t))
    return np.max(np.abs(iF), axis=(-1, -2, -3))


def trace_k_dk(curv: CurvatureData, deform: ConnectionDeformation) -> np.ndarray:
    """Endomorphism trace of ``K ^ DK`` as a 3-form."""
    gi = curv.ginv
    prod = np.einsum("...aqi,...ap,...qb,...bpjk->...ijk", deform.K, gi, gi, deform.DK)
    return (
        prod
        + np.einsum("...jki->...ijk", prod)
        + np.einsum("...kij->...ijk", prod)
    )


def trace_k_dk_closed_form(curv: CurvatureData, killing: KillingData) -> np.ndarray:
    """``tr(K ^ DK) = -|nabla X|^2 |X|^-4 X_flat ^ dX_flat``."""
    gi = curv.ginv
    nab2 = np.einsum("...ij,...kl,...ik,...jl->...", killing.nabla_X, killing.nabla_X, gi, gi)
    coef = -nab2 / killing.norm_X**4
    return coef[..., None, None, None] * wedge_1_2(killing.X_flat, killing.dX_flat)


# ------------------------------------------------------------- polynomials


def pairing(kind: str, curv: CurvatureData, a1: np.ndarray, b2: np.ndarray) -> np.ndarray:
    """Invariant polynomial on (1-form, 2-form) endomorphism-valued arguments -> 3-form.

    Euler: ``(32 pi^2)^-1 eps^{pqrs} a_pq ^ b_rs`` (the Pfaffian pairing).
    Pontryagin: ``(24 pi^2)^-1 a_pq ^ b^pq``.
    """
    if kind == EULER:
        eps = epsilon_upper(curv.g, curv.orientation)
        a = np.einsum("...pqrs,...pqi->...rsi", eps, a1)
        c = 1.0 / (32 * np.pi**2)
    elif kind == PONTRYAGIN:
        a = np.einsum("...pqi,...pr,...qs->...rsi", a1, curv.ginv, curv.ginv)
        c = 1.0 / (24 * np.pi**2)
    else:
        raise ValueError(f"unknown polynomial kind {kind!r}")
    t = np.einsum("...rsi,...rsjk->...ijk", a, b2)
    return c * (t + np.einsum("...jki->...ijk", t) + np.einsum("...kij->...ijk", t))


def density_4form(kind: str, curv: CurvatureData, a2: np.ndarray, b2: np.ndarray) -> np.ndarray:
    """The same polynomial on two endomorphism-valued 2-forms, as a dVol coefficient."""
    if kind == EULER:
        eps = epsilon_upper(curv.g, curv.orientation)
        a = np.einsum("...pqrs,...pqij->...rsij", eps, a2)
        c = 1.0 / (32 * np.pi**2)
    else:
        a = np.einsum("...pqij,...pr,...qs->...rsij", a2, curv.ginv, curv.ginv)
        c = 1.0 / (24 * np.pi**2)
    comp = c * 0.25 * np.einsum("abcd,...rsab,...rscd->...", EPS4, a, b2)
    return comp / (curv.orientation * curv.vol_density)


def transgression_form(kind: str, deform: ConnectionDeformation, curv: CurvatureData) -> Transgression3Form:
    """``TP = 2 P(K, F) - P(K, DK)``."""
    comp = 2.0 * pairing(kind, curv, deform.K, deform.F) - pairing(kind, curv, deform.K, deform.DK)
    return Transgression3Form(comp, kind)


def transgression_via_t_integral(kind: str, deform: ConnectionDeformation, curv: CurvatureData, n_quad: int = 8) -> Transgression3Form:
    """``TP = 2 int_0^1 P(K, F_t) dt`` by Gauss-Legendre quadrature in ``t``."""
    nodes, weights = np.polynomial.legendre.leggauss(n_quad)
    t = 0.5 * (nodes + 1.0)
    w = 0.5 * weights
    comp = sum(wi * 2.0 * pairing(kind, curv, deform.K, deform.F_t(ti)) for ti, wi in zip(t, w))
    return Transgression3Form(comp, kind)


def transgression_closed_form(kind: str, curv: CurvatureData, killing: KillingData) -> Transgression3Form:
    """Explicit expression in ``X``, ``nabla X`` and ``Rm``.

    Euler:      ``(8 pi^2)^-1 [2|X|^-2 X_flat ^ <Rm, *N> - |X|^-4 <N, *N> X_flat ^ dX_flat]``
    Pontryagin: ``(24 pi^2)^-1 [4|X|^-2 X_flat ^ <Rm, N> - |X|^-4 |N|^2 X_flat ^ dX_flat]``

    where ``<A, B> = A^{pq} B_pq / 2`` is the 2-form inner product.
    """
    N = killing.endo
    gi = curv.ginv
    N_up = np.einsum("...pq,...pa,...qb->...ab", N, gi, gi)
    if kind == EULER:
        eps = epsilon_upper(curv.g, curv.orientation)
        starN_up = 0.5 * np.einsum("...pqrs,...pq->...rs", eps, N)  # (*N)^{rs}
        rm_pair = 0.5 * np.einsum("...rs,...rsij->...ij", starN_up, curv.riemann)
        nn = 0.5 * np.einsum("...rs,...rs->...", starN_up, N)
        pref, c_rm, c_nn = 1.0 / (8 * np.pi**2), 2.0, 1.0
    else:
        rm_pair = 0.5 * np.einsum("...rs,...rsij->...ij", N_up, curv.riemann)
        nn = np.einsum("...rs,...rs->...", N_up, N)
        pref, c_rm, c_nn = 1.0 / (24 * np.pi**2), 4.0, 1.0
    inv2 = 1.0 / killing.norm_X**2
    comp = c_rm * inv2[..., None, None, None] * wedge_1_2(killing.X_flat, rm_pair)
    comp = comp - c_nn * (nn * inv2**2)[..., None, None, None] * wedge_1_2(killing.X_flat, killing.dX_flat)
    return Transgression3Form(pref * comp, kind)


# ------------------------------------------------------------- point evaluator


def transgression_at(metric: MetricChart, field: KillingField, x, kind: str = EULER,
                     tol: Tolerances = DEFAULT_TOL) -> Transgression3Form:
    x = np.asarray(x, dtype=float)
    g, dg, d2g = metric.derivatives(x)
    curv = curvature_from(g, dg, d2g, metric.orientation)
    kd = killing_data(metric, field, x, curv)
    return transgression_form(kind, deformation(metric, kd, curv, tol), curv)


def exterior_derivative_3form(form_field: Callable[[np.ndarray], np.ndarray], x, h: float) -> np.ndarray:
    """Central-difference ``d`` of a 3-form field in dimension four.

    ``form_field`` maps points ``(M, 4)`` to components ``(M, 4, 4, 4)``; the
    return value is the coordinate component ``(d tau)_{1234}`` at each point.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    m = x.shape[0]
    offsets = np.concatenate([h * np.eye(4), -h * np.eye(4)])
    stencil = (x[:, None, :] + offsets[None, :, :]).reshape(-1, 4)
    vals = np.asarray(form_field(stencil)).reshape(m, 8, 4, 4, 4)
    if not np.all(np.isfinite(vals)):
        raise DomainError("3-form is not finite on the stencil")
    deriv = (vals[:, :4] - vals[:, 4:]) / (2 * h)  # [m, direction, i, j, k]
    others = [(1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2)]
    out = np.zeros(m)
    for k, (a, b, c) in enumerate(others):
        out += (-1) ** k * deriv[:, k, a, b, c]
    return out
