"""Radial quadrature on cohomogeneity-one catalog manifolds.

Integrals run over the radial coordinate ``rc`` of an entry's
:class:`~killing_cgb.catalog.RadialStructure`, reparametrized as

    rc = center + L * (t / (1 - t))**2,   0 <= t < 1,

which removes the square-root behaviour of the radial speed at a bolt or
nut and maps the infinite end to ``t = 1``.  Orbit integrals use
Gauss-Legendre nodes in the polar angle and midpoint rules in periodic
angles.  "Balls" are sublevel sets of the geodesic distance to the centre
orbit.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .killing import EULER, killing_data, deformation, transgression_form
from .tensor_core import DomainError, curvature_from

DEFAULT_RADIAL_NODES = 96


@dataclass(frozen=True)
class AngularGrid:
    nodes: np.ndarray  # (M, k)
    weights: np.ndarray  # (M,)


def angular_grid(box, n_polar: int = 16, n_periodic: int = 8) -> AngularGrid:
    axes, wts = [], []
    for lo, hi, periodic in box:
        if periodic:
            n = n_periodic
            x = lo + (hi - lo) * (np.arange(n) + 0.5) / n
            w = np.full(n, (hi - lo) / n)
        else:
            z, w = np.polynomial.legendre.leggauss(n_polar)
            x = lo + 0.5 * (hi - lo) * (z + 1)
            w = 0.5 * (hi - lo) * w
        axes.append(x)
        wts.append(w)
    mesh = np.meshgrid(*axes, indexing="ij")
    wmesh = np.meshgrid(*wts, indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=-1)
    weights = np.prod(np.stack([m.ravel() for m in wmesh], axis=-1), axis=-1)
    return AngularGrid(nodes, weights)


class RadialIntegrator:
    """Radial/orbit integrals for one catalog entry."""

    def __init__(self, entry, n_polar: int = 16, n_periodic: int = 8):
        if entry.radial is None:
            raise ValueError(f"{entry.name} has no radial structure")
        self.entry = entry
        self.radial = entry.radial
        self.metric = entry.metric
        self.L = float(entry.metric.length_scale)
        box = self.radial.angular_box[: self.metric.dimension - 1]
        self.grid = angular_grid(box, n_polar, n_periodic)

    # -- coordinate map -------------------------------------------------
    def rc_of_t(self, t):
        t = np.asarray(t, dtype=float)
        return self.radial.center + self.L * (t / (1.0 - t)) ** 2

    def drc_dt(self, t):
        t = np.asarray(t, dtype=float)
        return 2.0 * self.L * t / (1.0 - t) ** 3

    def t_of_rc(self, rc):
        v = np.sqrt(np.maximum(np.asarray(rc, dtype=float) - self.radial.center, 0.0) / self.L)
        return v / (1.0 + v)

    # -- pointwise radial quantities ---------------------------------------
    def _reference(self, rc):
        rc = np.atleast_1d(np.asarray(rc, dtype=float))
        u = np.broadcast_to(np.asarray(self.radial.reference_u, dtype=float), rc.shape + (len(self.radial.reference_u),))
        return self.radial.embed(rc, u)

    def speed(self, rc) -> np.ndarray:
        x, d_rc, _ = self._reference(rc)
        g = self.metric.g(x)
        return np.sqrt(np.einsum("...i,...ij,...j->...", d_rc, g, d_rc))

    def orbit_volume(self, rc) -> np.ndarray:
        """Induced 3-volume (or length, in dimension two) of the orbit through ``rc``."""
        rc = np.atleast_1d(np.asarray(rc, dtype=float))
        M = len(self.grid.weights)
        u = np.broadcast_to(self.grid.nodes, rc.shape + self.grid.nodes.shape)
        rr = np.broadcast_to(rc[..., None], rc.shape + (M,))
        x, _, J = self.radial.embed(rr, u)
        g = self.metric.g(x)
        h = np.einsum("...ai,...ij,...bj->...ab", J, g, J)
        dens = np.sqrt(np.maximum(np.linalg.det(h), 0.0))
        return dens @ self.grid.weights

    def energy_density(self, rc) -> np.ndarray:
        """Curvature-operator ``|Rm|^2`` on the orbit (constant along it)."""
        x, _, _ = self._reference(rc)
        g, dg, d2g = self.metric.derivatives(x)
        return curvature_from(g, dg, d2g, self.metric.orientation).energy_density

    # -- integrals in t -----------------------------------------------------
    def _nodes(self, t_hi: float, n: int):
        z, w = np.polynomial.legendre.leggauss(n)
        t = 0.5 * t_hi * (z + 1.0)
        return t, 0.5 * t_hi * w

    def geodesic_distance(self, rc, n: int = DEFAULT_RADIAL_NODES) -> float:
        rc = float(rc)
        if rc <= self.radial.center:
            return 0.0
        t, w = self._nodes(float(self.t_of_rc(rc)), n)
        r = self.rc_of_t(t)
        return float(np.sum(w * self.speed(r) * self.drc_dt(t)))

    def rc_at_distance(self, s: float, n: int = DEFAULT_RADIAL_NODES) -> float:
        if s <= 0:
            return self.radial.center
        f = lambda rc: self.geodesic_distance(rc, n) - s
        hi = self.radial.center + max(s, self.L)
        while f(hi) < 0:
            hi = self.radial.center + 2.0 * (hi - self.radial.center)
            if hi > 1e12 * self.L:
                raise DomainError(f"geodesic radius {s} not reached")
        return brentq(f, self.radial.center, hi, xtol=1e-14 * max(hi, 1.0), rtol=1e-15)

    def _radial_integral(self, integrand: Callable, t_hi: float, n: int) -> float:
        t, w = self._nodes(t_hi, n)
        r = self.rc_of_t(t)
        return float(np.sum(w * integrand(r) * self.orbit_volume(r) * self.speed(r) * self.drc_dt(t)))

    def volume_to_rc(self, rc, n: int = DEFAULT_RADIAL_NODES) -> float:
        return self._radial_integral(lambda r: 1.0, float(self.t_of_rc(rc)), n)

    def energy_to_rc(self, rc, n: int = DEFAULT_RADIAL_NODES) -> float:
        if self.metric.dimension != 4:
            return 0.0
        t_hi = 1.0 if np.isinf(rc) else float(self.t_of_rc(rc))
        if t_hi >= 1.0:
            t_hi = 1.0 - 1e-12
        return self._radial_integral(self.energy_density, t_hi, n)


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error_estimate: float
    radial_coordinate: float

    def __float__(self):
        return self.value


def _with_error(fn: Callable[[int], float], n: int):
    a, b = fn(n), fn(2 * n)
    return b, abs(b - a)


def ball_volume(entry, s: float, n: int = DEFAULT_RADIAL_NODES) -> QuadratureResult:
    """4-volume of the geodesic ball of radius ``s`` about the centre orbit."""
    q = RadialIntegrator(entry)
    rc = q.rc_at_distance(s, n)
    v, err = _with_error(lambda m: q.volume_to_rc(rc, m), n)
    return QuadratureResult(v, err, rc)


def energy_in_ball(entry, s: float, n: int = DEFAULT_RADIAL_NODES) -> QuadratureResult:
    """``int_{B(s)} |Rm|^2 dVol`` (curvature-operator norm); ``s = inf`` integrates everything."""
    q = RadialIntegrator(entry)
    rc = np.inf if np.isinf(s) else q.rc_at_distance(s, n)
    v, err = _with_error(lambda m: q.energy_to_rc(rc, m), n)
    return QuadratureResult(v, err, float(rc))


def sphere_integral_3form(entry, form_field: Callable[[np.ndarray], np.ndarray], s: float,
                          n_polar: int = 16, n_periodic: int = 8, rc: Optional[float] = None) -> float:
    """Integral of a 3-form over the geodesic sphere of radius ``s``, outward-normal orientation.

    ``form_field`` maps chart points ``(M, 4)`` to components ``(M, 4, 4, 4)``.
    """
    q = RadialIntegrator(entry, n_polar, n_periodic)
    if rc is None:
        rc = q.rc_at_distance(s)
    u = q.grid.nodes
    x, d_rc, J = q.radial.embed(np.full(len(u), rc), u)
    comps = np.asarray(form_field(x))
    pulled = np.einsum("mijk,mi,mj,mk->m", comps, J[:, 0], J[:, 1], J[:, 2])
    frame = np.concatenate([d_rc[:, None, :], J], axis=1)
    sign = np.sign(entry.metric.orientation * np.linalg.det(frame))
    return float(np.sum(q.grid.weights * sign * pulled))


def transgression_field(entry, kind: str = EULER):
    metric, field = entry.metric, entry.killing

    def tp(x):
        g, dg, d2g = metric.derivatives(x)
        curv = curvature_from(g, dg, d2g, metric.orientation)
        kd = killing_data(metric, field, x, curv)
        return transgression_form(kind, deformation(metric, kd, curv), curv).components

    return tp


# ---------------------------------------------------------------- profiles


@dataclass
class RadialProfile:
    r_grid: np.ndarray
    geodesic_r: np.ndarray
    shell_volume_density: np.ndarray
    shell_energy_density: np.ndarray
    cumulative_volume: np.ndarray
    cumulative_energy: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.geodesic_r) <= 0):
            raise ValueError("geodesic_r must be strictly increasing")
        if np.any(self.shell_volume_density < 0) or np.any(self.shell_energy_density < 0):
            raise ValueError("densities must be non-negative")

    def rc_at(self, u):
        return PchipInterpolator(self.geodesic_r, self.r_grid)(u)

    def volume_within(self, u):
        return PchipInterpolator(self.geodesic_r, self.cumulative_volume)(u)

    def energy_within(self, u):
        return PchipInterpolator(self.geodesic_r, self.cumulative_energy)(u)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "geodesic_r", "shell_volume", "shell_energy"])
            for row in zip(self.r_grid, self.geodesic_r, self.shell_volume_density, self.shell_energy_density):
                w.writerow([f"{v:.12g}" for v in row])


def radial_profile(entry, s_max: float, n_radial: int = 200, per_cell: int = 4) -> RadialProfile:
    """Tabulate radial data on ``n_radial`` cells from the centre to geodesic radius ``s_max``.

    Cumulative columns are exact up to a ``per_cell``-point Gauss rule in
    each cell.
    """
    if n_radial < 2:
        raise ValueError("n_radial must be at least 2")
    q = RadialIntegrator(entry)
    rc_max = q.rc_at_distance(s_max)
    t_edges = np.linspace(0.0, float(q.t_of_rc(rc_max)), n_radial + 1)
    z, wz = np.polynomial.legendre.leggauss(per_cell)
    a, b = t_edges[:-1, None], t_edges[1:, None]
    t = 0.5 * (b - a) * (z + 1) + a
    w = 0.5 * (b - a) * wz
    r = q.rc_of_t(t)
    shape = r.shape
    flat = r.ravel()
    jac = (q.speed(flat) * q.drc_dt(t.ravel())).reshape(shape)
    vol = q.orbit_volume(flat).reshape(shape)
    en = (q.energy_density(flat) if entry.metric.dimension == 4 else np.zeros(flat.shape)).reshape(shape)
    cum = lambda v: np.concatenate([[0.0], np.cumsum(np.sum(w * v, axis=1))])
    geo = cum(jac)
    r_nodes = q.rc_of_t(t_edges)
    # nodes carry the invariant densities at the cell edges
    vol_nodes = q.orbit_volume(np.maximum(r_nodes, q.radial.center + 1e-300))
    en_nodes = q.energy_density(np.where(r_nodes > q.radial.center, r_nodes, r_nodes + 1e-9 * q.L)) \
        if entry.metric.dimension == 4 else np.zeros(r_nodes.shape)
    return RadialProfile(
        r_grid=r_nodes,
        geodesic_r=geo,
        shell_volume_density=vol_nodes,
        shell_energy_density=en_nodes * vol_nodes,
        cumulative_volume=cum(jac * vol),
        cumulative_energy=cum(jac * vol * en),
    )


# ---------------------------------------------------------------- cutoffs


def _smoothstep(x):
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        b = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return a / (a + b)


def _smoothstep_slope(x):
    x = np.asarray(x, dtype=float)
    inside = (x > 0) & (x < 1)
    xs = np.where(inside, x, 0.5)
    a, b = np.exp(-1.0 / xs), np.exp(-1.0 / (1.0 - xs))
    d = a * b * (1 / xs**2 + 1 / (1 - xs) ** 2) / (a + b) ** 2
    return np.where(inside, d, 0.0)


@dataclass(frozen=True)
class CutoffProfile:
    """``1`` up to ``inner``, ``0`` from ``outer`` on, C-infinity and monotone between.

    The slope of the transition never exceeds ``2 / (outer - inner)``.
    """

    inner: float
    outer: float

    @property
    def derivative_bound(self) -> float:
        return 2.0 / (self.outer - self.inner)

    def __call__(self, u):
        return 1.0 - _smoothstep((np.asarray(u, dtype=float) - self.inner) / (self.outer - self.inner))

    def derivative(self, u):
        w = self.outer - self.inner
        return -_smoothstep_slope((np.asarray(u, dtype=float) - self.inner) / w) / w

    def sampled_slope(self, n: int = 20001) -> float:
        u = np.linspace(self.inner, self.outer, n)
        return float(np.max(np.abs(self.derivative(u))))


def cutoff_profile(inner: float, outer: float) -> CutoffProfile:
    if not (0 <= inner < outer) or not np.isfinite(outer):
        raise ValueError(f"cutoff needs 0 <= inner < outer, got ({inner}, {outer})")
    return CutoffProfile(float(inner), float(outer))


# ---------------------------------------------------------------- volume growth


def richardson(values, ratio: float = 2.0, order_start: int = 1):
    """Richardson table for ``a(s) = a_inf + c_1/s + c_2/s^2 + ...`` sampled at ``s_k = s_0 ratio^k``.

    Returns the extrapolated value and the difference of the last two
    diagonal entries as an error indicator.
    """
    T = [np.asarray(values, dtype=float)]
    p = order_start
    while len(T[-1]) > 1:
        prev = T[-1]
        f = ratio**p
        T.append((f * prev[1:] - prev[:-1]) / (f - 1.0))
        p += 1
    diag = [row[-1] for row in T]
    err = abs(diag[-1] - diag[-2]) if len(diag) > 1 else np.inf
    return float(diag[-1]), float(err)


@dataclass(frozen=True)
class VolumeGrowth:
    radii: np.ndarray
    ratios: np.ndarray  # s^-4 Vol B(s)
    extrapolated: float
    error: float
    growth_exponent: float

    @property
    def limit(self) -> float:
        """Asymptotic ``s^-4 Vol``; sub-quartic growth forces zero."""
        return 0.0 if self.growth_exponent < 3.5 else self.extrapolated


def volume_growth(entry, s0: Optional[float] = None, ratio: float = 2.0, rungs: int = 5,
                  n: int = DEFAULT_RADIAL_NODES) -> VolumeGrowth:
    L = entry.metric.length_scale * entry.metric.metric_scale
    s0 = 10.0 * L if s0 is None else s0
    radii = s0 * ratio ** np.arange(rungs)
    vols = np.array([ball_volume(entry, s, n).value for s in radii])
    ratios = vols / radii**4
    ext, err = richardson(ratios, ratio)
    slope = float(np.polyfit(np.log(radii[-2:]), np.log(vols[-2:]), 1)[0])
    return VolumeGrowth(radii, ratios, ext, err, slope)
