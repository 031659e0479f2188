"""Metric charts, curvature from metric derivatives, and 2-form algebra in dimension four.

Arrays are batched: a set of points has shape ``(..., n)`` and every tensor
carries the batch axes first.  Index conventions:

* ``dg[..., k, i, j] = d_k g_ij`` and ``d2g[..., k, l, i, j] = d_k d_l g_ij``
* ``gamma[..., k, i, j] = Gamma^k_ij``
* ``riemann[..., a, b, c, d] = <R(d_c, d_d) d_b, d_a>`` with
  ``R(U, V) = [nabla_U, nabla_V] - nabla_[U,V]``, so the round sphere has
  positive sectional curvature ``R_abab > 0``.

Norms are full metric contractions unless stated otherwise.  The curvature
operator norm on 2-forms, ``energy_density = |Rm|^2 / 4``, is the quantity
whose integral over a Ricci-flat manifold equals ``8 pi^2`` times the Euler
integral.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

ArrayFn = Callable[[np.ndarray], np.ndarray]

PAIRS_4 = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]


class DomainError(ValueError):
    """A point (or its finite-difference stencil) leaves the chart domain."""


class GeometryError(ValueError):
    """Degenerate metric, frame or Killing data at an evaluation point."""


@dataclass(frozen=True)
class Tolerances:
    exact: float = 1e-8
    numeric: float = 1e-5
    null: float = 1e-6


DEFAULT_TOL = Tolerances()


def levi_civita(n: int) -> np.ndarray:
    """Permutation symbol with ``eps[0, 1, ..., n-1] = 1``."""
    eps = np.zeros((n,) * n)
    for perm in itertools.permutations(range(n)):
        inversions = sum(1 for i in range(n) for j in range(i + 1, n) if perm[i] > perm[j])
        eps[perm] = -1.0 if inversions % 2 else 1.0
    return eps


EPS4 = levi_civita(4)


@dataclass(frozen=True)
class ChartPoint:
    chart_id: str
    coords: tuple

    def array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)


@dataclass(frozen=True)
class MetricChart:
    """Coordinate chart on an open box with metric component functions.

    ``g`` maps points ``(..., n)`` to ``(..., n, n)``.  When ``dg``/``d2g``
    are omitted, derivatives come from Richardson-extrapolated central
    differences with step ``1e-4 * length_scale``.
    """

    name: str
    dimension: int
    lower: tuple
    upper: tuple
    g: ArrayFn
    dg: Optional[ArrayFn] = None
    d2g: Optional[ArrayFn] = None
    orientation: int = 1
    length_scale: float = 1.0
    metric_scale: float = 1.0
    # coordinate axes that are periodic angles (identified at the box ends)
    periodic: tuple = field(default_factory=tuple)

    @property
    def exact(self) -> bool:
        return self.dg is not None and self.d2g is not None

    def scaled(self, lam: float) -> "MetricChart":
        """The same chart carrying the metric ``lam**2 * g``."""
        c = lam * lam
        g, dg, d2g = self.g, self.dg, self.d2g
        return replace(
            self,
            name=f"{self.name}*{lam:g}^2",
            g=lambda x: c * g(x),
            dg=None if dg is None else (lambda x: c * dg(x)),
            d2g=None if d2g is None else (lambda x: c * d2g(x)),
            metric_scale=self.metric_scale * lam,
        )

    def check_domain(self, x: np.ndarray, margin: float = 0.0) -> None:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dimension:
            raise DomainError(f"{self.name}: expected {self.dimension} coordinates, got {x.shape[-1]}")
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        bad = np.any((x - margin <= lo) | (x + margin >= hi), axis=-1)
        if np.any(bad):
            where = np.asarray(x)[bad] if x.ndim > 1 else x
            raise DomainError(f"{self.name}: point(s) outside open domain (margin {margin:g}): {where[:3]}")

    def derivatives(self, x: np.ndarray, margin: Optional[float] = None):
        """Return ``(g, dg, d2g)`` at points ``x``."""
        x = np.asarray(x, dtype=float)
        if self.exact:
            self.check_domain(x, 0.0 if margin is None else margin)
            return self.g(x), self.dg(x), self.d2g(x)
        h = 1e-4 * self.length_scale
        self.check_domain(x, 4 * h if margin is None else margin)
        return self.g(x), fd_gradient(self.g, x, h), fd_hessian(self.g, x, h)


def fd_gradient(f: ArrayFn, x: np.ndarray, h: float) -> np.ndarray:
    """Central differences with one Richardson step, O(h^4); derivative axis first."""
    n = x.shape[-1]
    parts = []
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        d1 = (f(x + h * e) - f(x - h * e)) / (2 * h)
        d2 = (f(x + 2 * h * e) - f(x - 2 * h * e)) / (4 * h)
        parts.append((4 * d1 - d2) / 3)
    return np.stack(parts, axis=x.ndim - 1)


def fd_hessian(f: ArrayFn, x: np.ndarray, h: float) -> np.ndarray:
    n = x.shape[-1]
    f0 = f(x)
    out = np.empty(x.shape[:-1] + (n, n) + f0.shape[x.ndim - 1:])
    ax = x.ndim - 1

    def second(k, l, step):
        ek = np.zeros(n)
        el = np.zeros(n)
        ek[k] = step
        el[l] = step
        if k == l:
            return (f(x + ek) - 2 * f0 + f(x - ek)) / step**2
        return (f(x + ek + el) - f(x + ek - el) - f(x - ek + el) + f(x - ek - el)) / (4 * step**2)

    for k in range(n):
        for l in range(k, n):
            val = (4 * second(k, l, h) - second(k, l, 2 * h)) / 3
            idx = (slice(None),) * ax + (k, l)
            out[idx] = val
            out[(slice(None),) * ax + (l, k)] = val
    return out


def _inverse(g: np.ndarray) -> np.ndarray:
    det = np.linalg.det(g)
    if np.any(~np.isfinite(det)) or np.any(np.abs(det) < 1e-300):
        raise GeometryError("metric matrix is not invertible")
    return np.linalg.inv(g)


def christoffel_from(g: np.ndarray, dg: np.ndarray, ginv: Optional[np.ndarray] = None) -> np.ndarray:
    if ginv is None:
        ginv = _inverse(g)
    # Gamma_{l ij} = 1/2 (d_i g_lj + d_j g_li - d_l g_ij)
    lower = 0.5 * (np.swapaxes(dg, -3, -2) + np.moveaxis(dg, -3, -1) - dg)
    return np.einsum("...kl,...lij->...kij", ginv, lower)


def christoffel(metric: MetricChart, x) -> np.ndarray:
    """Christoffel symbols ``Gamma^k_ij`` at ``x`` (shape ``(..., n, n, n)``)."""
    g, dg, _ = metric.derivatives(np.asarray(x, dtype=float))
    return christoffel_from(g, dg)


def christoffel_derivative(g, dg, d2g, ginv=None) -> np.ndarray:
    """``dgamma[..., m, k, i, j] = d_m Gamma^k_ij``."""
    if ginv is None:
        ginv = _inverse(g)
    lower = 0.5 * (np.swapaxes(dg, -3, -2) + np.moveaxis(dg, -3, -1) - dg)
    # d_m of the lowered symbols; d2g[..., m, k, i, j]
    d_lower = 0.5 * (
        np.einsum("...milj->...mlij", d2g)
        + np.einsum("...mjli->...mlij", d2g)
        - np.einsum("...mlij->...mlij", d2g)
    )
    dginv = -np.einsum("...ka,...mab,...bl->...mkl", ginv, dg, ginv)
    return np.einsum("...mkl,...lij->...mkij", dginv, lower) + np.einsum("...kl,...mlij->...mkij", ginv, d_lower)


@dataclass
class CurvatureData:
    """Curvature at a batch of points.

    ``weyl_plus``/``weyl_minus`` are 6x6 matrices on the orthonormal
    2-form basis ``e_a ^ e_b`` (a < b, ordered as ``PAIRS_4``); they are
    only populated in dimension four.
    """

    g: np.ndarray
    ginv: np.ndarray
    gamma: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    scalar: np.ndarray
    ricci_tracefree: np.ndarray
    weyl: Optional[np.ndarray]
    weyl_plus: Optional[np.ndarray]
    weyl_minus: Optional[np.ndarray]
    norm_rm_sq: np.ndarray
    frame: Optional[np.ndarray] = None
    orientation: int = 1

    @property
    def energy_density(self) -> np.ndarray:
        """Squared curvature-operator norm on 2-forms, ``|Rm|^2 / 4``."""
        return 0.25 * self.norm_rm_sq

    @property
    def vol_density(self) -> np.ndarray:
        return np.sqrt(np.linalg.det(self.g))

    def norm_sq(self, t: np.ndarray) -> np.ndarray:
        """Full contraction of a covariant tensor of rank 2 or 4."""
        gi = self.ginv
        if t.ndim - gi.ndim + 2 == 2:
            return np.einsum("...ab,...cd,...ac,...bd->...", t, t, gi, gi)
        return np.einsum("...abcd,...efgh,...ae,...bf,...cg,...dh->...", t, t, gi, gi, gi, gi, optimize=True)

    def ricci_norm_sq(self) -> np.ndarray:
        return self.norm_sq(self.ricci_tracefree)

    def weyl_norms_sq(self):
        """Full-contraction norms ``(|W|^2, |W+|^2, |W-|^2)``."""
        wp = 4.0 * np.sum(self.weyl_plus**2, axis=(-1, -2))
        wm = 4.0 * np.sum(self.weyl_minus**2, axis=(-1, -2))
        return self.norm_sq(self.weyl), wp, wm

    def bianchi_residual(self) -> np.ndarray:
        r = self.riemann
        cyc = r + np.einsum("...abcd->...acdb", r) + np.einsum("...abcd->...adbc", r)
        return np.max(np.abs(cyc), axis=(-1, -2, -3, -4))

    def symmetry_residual(self) -> np.ndarray:
        r = self.riemann
        res = [
            r + np.swapaxes(r, -4, -3),
            r + np.swapaxes(r, -2, -1),
            r - np.einsum("...abcd->...cdab", r),
        ]
        return np.max([np.max(np.abs(t), axis=(-1, -2, -3, -4)) for t in res], axis=0)


def kulkarni_nomizu(h: np.ndarray, k: np.ndarray) -> np.ndarray:
    return (
        np.einsum("...ac,...bd->...abcd", h, k)
        + np.einsum("...bd,...ac->...abcd", h, k)
        - np.einsum("...ad,...bc->...abcd", h, k)
        - np.einsum("...bc,...ad->...abcd", h, k)
    )


def orthonormal_frame(g: np.ndarray, orientation: int = 1) -> np.ndarray:
    """Gram-Schmidt on coordinate vectors in index order.

    Returns ``E`` with ``E[..., i, a]`` the i-th coordinate component of frame
    vector ``e_a``.  The last vector is flipped for negatively oriented charts.
    """
    n = g.shape[-1]
    E = np.zeros(g.shape)
    for a in range(n):
        v = np.zeros(g.shape[:-1])
        v[..., a] = 1.0
        for b in range(a):
            eb = E[..., :, b]
            v = v - np.einsum("...i,...ij,...j->...", v, g, eb)[..., None] * eb
        nrm = np.sqrt(np.einsum("...i,...ij,...j->...", v, g, v))
        if np.any(nrm < 1e-14):
            raise GeometryError("degenerate frame in Gram-Schmidt")
        E[..., :, a] = v / nrm[..., None]
    if orientation < 0:
        E[..., :, n - 1] *= -1
    return E


def _to_two_form_matrix(t: np.ndarray) -> np.ndarray:
    """Rank-4 orthonormal-frame tensor to 6x6 matrix on the 2-form basis."""
    out = np.empty(t.shape[:-4] + (6, 6))
    for I, (a, b) in enumerate(PAIRS_4):
        for J, (c, d) in enumerate(PAIRS_4):
            out[..., I, J] = t[..., a, b, c, d]
    return out


def star_matrix() -> np.ndarray:
    """Hodge star on 2-forms of oriented orthonormal 4-space, in ``PAIRS_4`` basis."""
    S = np.zeros((6, 6))
    for J, (c, d) in enumerate(PAIRS_4):
        for I, (a, b) in enumerate(PAIRS_4):
            # (*w)_ab = 1/2 eps_abcd w_cd, restricted to a<b, c<d
            S[I, J] = EPS4[a, b, c, d]
    return S


STAR = star_matrix()


def curvature_from(g, dg, d2g, orientation: int = 1) -> CurvatureData:
    ginv = _inverse(g)
    gamma = christoffel_from(g, dg, ginv)
    dgamma = christoffel_derivative(g, dg, d2g, ginv)
    # R^a_bij = d_i Gamma^a_jb - d_j Gamma^a_ib + Gamma^a_ic Gamma^c_jb - Gamma^a_jc Gamma^c_ib
    d_term = np.einsum("...iajb->...abij", dgamma)
    up = (
        d_term
        - np.swapaxes(d_term, -1, -2)
        + np.einsum("...aic,...cjb->...abij", gamma, gamma)
        - np.einsum("...ajc,...cib->...abij", gamma, gamma)
    )
    riem = np.einsum("...ac,...cbij->...abij", g, up)
    ricci = np.einsum("...abaj->...bj", up)
    scalar = np.einsum("...bj,...bj->...", ginv, ricci)
    n = g.shape[-1]
    ric0 = ricci - scalar[..., None, None] / n * g
    norm_rm = np.einsum("...abcd,...ae,...bf,...cg,...dh,...efgh->...", riem, ginv, ginv, ginv, ginv, riem, optimize=True)

    weyl = wp = wm = frame = None
    if n == 4:
        weyl = riem - 0.5 * kulkarni_nomizu(ric0, g) - scalar[..., None, None, None, None] / 24.0 * kulkarni_nomizu(g, g)
        frame = orthonormal_frame(g, orientation)
        wf = np.einsum("...ijkl,...ia,...jb,...kc,...ld->...abcd", weyl, frame, frame, frame, frame, optimize=True)
        W = _to_two_form_matrix(wf)
        Pp = 0.5 * (np.eye(6) + STAR)
        Pm = 0.5 * (np.eye(6) - STAR)
        wp = Pp @ W @ Pp
        wm = Pm @ W @ Pm
    return CurvatureData(
        g=g,
        ginv=ginv,
        gamma=gamma,
        riemann=riem,
        ricci=ricci,
        scalar=scalar,
        ricci_tracefree=ric0,
        weyl=weyl,
        weyl_plus=wp,
        weyl_minus=wm,
        norm_rm_sq=norm_rm,
        frame=frame,
        orientation=orientation,
    )


def riemann(metric: MetricChart, x, tol: Tolerances = DEFAULT_TOL, check: bool = True) -> CurvatureData:
    """Full curvature data at ``x``; validates the algebraic symmetries."""
    g, dg, d2g = metric.derivatives(np.asarray(x, dtype=float))
    curv = curvature_from(g, dg, d2g, metric.orientation)
    if check:
        scale = np.maximum(np.sqrt(curv.norm_rm_sq), 1.0)
        limit = tol.exact if metric.exact else tol.numeric
        res = np.maximum(curv.symmetry_residual(), curv.bianchi_residual()) / scale
        if np.any(res > limit * 1e2):
            raise GeometryError(f"curvature symmetry residual {np.max(res):.3g} exceeds tolerance")
    return curv


def characteristic_densities(c: CurvatureData):
    """Euler and Pontryagin densities (coefficients of dVol).

    ``8 pi^2 e = R^2/24 - |Ric0|^2/2 + |W|^2/4`` and
    ``12 pi^2 p = (|W+|^2 - |W-|^2)/4``.
    """
    w2, wp2, wm2 = c.weyl_norms_sq()
    euler = (c.scalar**2 / 24.0 - 0.5 * c.ricci_norm_sq() + 0.25 * w2) / (8 * np.pi**2)
    pont = 0.25 * (wp2 - wm2) / (12 * np.pi**2)
    return euler, pont


def decomposition_residual(c: CurvatureData) -> np.ndarray:
    """Relative residual of ``|Rm|^2 = R^2/6 + 2|Ric0|^2 + |W|^2``."""
    w2, wp2, wm2 = c.weyl_norms_sq()
    rhs = c.scalar**2 / 6.0 + 2 * c.ricci_norm_sq() + w2
    split = np.abs(w2 - wp2 - wm2)
    return (np.abs(c.norm_rm_sq - rhs) + split) / np.maximum(c.norm_rm_sq, 1e-300)


@dataclass(frozen=True)
class TwoFormAlgebra:
    """Oriented orthonormal frame at a point together with the 2-form star."""

    frame: np.ndarray
    g: np.ndarray

    @classmethod
    def at(cls, g: np.ndarray, orientation: int = 1) -> "TwoFormAlgebra":
        return cls(orthonormal_frame(g, orientation), g)

    def gram_residual(self) -> float:
        G = np.einsum("...ia,...ij,...jb->...ab", self.frame, self.g, self.frame)
        return float(np.max(np.abs(G - np.eye(4))))

    @staticmethod
    def basis():
        return list(PAIRS_4)

    @staticmethod
    def from_antisymmetric(w: np.ndarray) -> np.ndarray:
        return np.stack([w[..., a, b] for a, b in PAIRS_4], axis=-1)

    @staticmethod
    def to_antisymmetric(v: np.ndarray) -> np.ndarray:
        out = np.zeros(v.shape[:-1] + (4, 4))
        for I, (a, b) in enumerate(PAIRS_4):
            out[..., a, b] = v[..., I]
            out[..., b, a] = -v[..., I]
        return out


def hodge_star_2form(frame: TwoFormAlgebra, omega: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Hodge star of a 2-form given by frame components.

    ``omega`` is either a 6-vector on ``PAIRS_4`` or an antisymmetric 4x4
    array; the result has the same layout.
    """
    if frame.gram_residual() > tol.exact:
        raise GeometryError("frame is not orthonormal")
    omega = np.asarray(omega, dtype=float)
    if omega.shape[-1] == 6:
        return omega @ STAR.T
    return 0.5 * np.einsum("abcd,...cd->...ab", EPS4, omega)
