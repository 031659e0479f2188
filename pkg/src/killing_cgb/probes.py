"""Scale-local probes: curvature radius, energy radius, local variation of |X|, maximal function.

Curvature norms here are curvature-operator norms (``|Rm|^2`` means
``CurvatureData.energy_density``).  Balls are handled by one of two models:

* radial entries (Eguchi-Hanson, Taub-NUT): functions invariant under the
  isometry group depend only on the distance ``u`` to the centre orbit, and
  ``B(p, r)`` meets exactly the orbits with ``u`` in
  ``[max(0, d - r), d + r]`` where ``d = u(p)``.  Sup and inf of invariant
  functions are therefore exact.  Ball averages weight each orbit by its
  full 3-volume, which is exact only when ``r >= d``.
* flat and hyperbolic charts: geodesic balls are Euclidean coordinate balls;
  they are sampled with a scrambled Sobol set plus boundary directions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.stats import qmc

from .quadrature import RadialIntegrator
from .tensor_core import DomainError, curvature_from

INF = float("inf")


@dataclass(frozen=True)
class ProbeConfig:
    n_radial: int = 600
    n_angular: int = 4096
    s_cap: float = 10.0
    excised_domain: Optional[tuple] = None  # (centre point, radius); radius measured from the centre orbit for radial entries
    bracket_tol: float = 1e-11
    eps0: float = 1e-2
    seed: int = 0
    ladder_rungs: int = 5

    def __post_init__(self):
        if self.n_radial < 2 or self.n_angular < 2:
            raise ValueError("resolutions must be at least 2")
        if not self.s_cap > 0:
            raise ValueError("s_cap must be positive")


@dataclass
class Bracket:
    value: float
    lower: float
    upper: float

    def as_dict(self):
        return {"value": self.value, "lower": self.lower, "upper": self.upper}


@dataclass
class ProbeResult:
    r_curv: float
    rho: float
    m_x: float
    m_x_omega_s: Optional[float]
    m_x_infty_estimate: list
    maximal: float
    brackets: dict = field(default_factory=dict)


# ------------------------------------------------------------------ ball models


class RadialBalls:
    """Orbit-distance model for cohomogeneity-one entries."""

    def __init__(self, entry, u_max: float, n_cells: int = 600):
        self.entry = entry
        self.n_cells = n_cells
        # orbit integrands are invariant, so a coarse periodic grid is exact
        self.q = RadialIntegrator(entry, n_polar=16, n_periodic=2)
        self._build(u_max)

    def _build(self, u_max):
        q = self.q
        rc_max = q.rc_at_distance(1.05 * u_max)
        t_edges = np.linspace(0.0, float(q.t_of_rc(rc_max)), self.n_cells + 1)
        z, wz = np.polynomial.legendre.leggauss(4)
        a, b = t_edges[:-1, None], t_edges[1:, None]
        self._cell_t = 0.5 * (b - a) * (z + 1) + a
        self._cell_w = 0.5 * (b - a) * wz
        rc_cells = q.rc_of_t(self._cell_t)
        jac = (q.speed(rc_cells.ravel()) * q.drc_dt(self._cell_t.ravel())).reshape(rc_cells.shape)
        self._cell_dvol = jac * q.orbit_volume(rc_cells.ravel()).reshape(rc_cells.shape) * self._cell_w
        self.t_nodes = t_edges
        self.u_nodes = np.concatenate([[0.0], np.cumsum(np.sum(jac * self._cell_w, axis=1))])
        self.cum_vol = np.concatenate([[0.0], np.cumsum(np.sum(self._cell_dvol, axis=1))])
        self.u_max = float(self.u_nodes[-1])
        self._t_of_u = PchipInterpolator(self.u_nodes, self.t_nodes)
        self._cum_vol = PchipInterpolator(self.u_nodes, self.cum_vol)
        self._cache = {}

    def ensure(self, u):
        if u > self.u_max:
            self._build(2.0 * u)

    # invariant functions on the orbit at distance u
    def points(self, u):
        rc = self.rc_of_u(u)
        return self.q._reference(rc)[0]

    def rc_of_u(self, u):
        u = np.asarray(u, dtype=float)
        rc = self.q.rc_of_t(self._t_of_u(u))
        # stay off the degenerate centre orbit of the chart
        return np.maximum(rc, self.q.radial.center + 1e-9 * self.q.L)

    def distance_of(self, p) -> float:
        rc = float(self.q.radial.rc_of(np.asarray(p, dtype=float)))
        return self.q.geodesic_distance(rc, 128)

    def _node_values(self, key, fn):
        if key not in self._cache:
            self._cache[key] = np.asarray(fn(self.points(self.u_nodes)), dtype=float)
        return self._cache[key]

    def curvature_norm(self, x):
        g, dg, d2g = self.entry.metric.derivatives(x)
        return np.sqrt(curvature_from(g, dg, d2g, self.entry.metric.orientation).energy_density)

    def killing_norm(self, x):
        g = self.entry.metric.g(x)
        X = self.entry.killing.X(x)
        return np.sqrt(np.maximum(np.einsum("...i,...ij,...j->...", X, g, X), 0.0))

    def interval(self, d, r, excise: float = 0.0):
        lo = max(0.0, d - r, excise)
        hi = d + r
        self.ensure(hi)
        return lo, hi

    def extremes(self, key, fn, lo, hi):
        """``(sup, inf, sup_upper, inf_lower)`` of an invariant function over orbits ``u in [lo, hi]``."""
        vals = self._node_values(key, fn)
        inside = (self.u_nodes > lo) & (self.u_nodes < hi)
        ends = np.asarray(fn(self.points(np.array([lo, hi]))), dtype=float)
        if lo <= 0.0 and self.entry.zero_set and key == "x":
            ends[0] = 0.0
        cand = np.concatenate([vals[inside], ends])
        idx = np.flatnonzero(inside)
        span = 0.0
        if idx.size:
            seg = vals[max(idx[0] - 1, 0): idx[-1] + 2]
            span = float(np.max(np.abs(np.diff(seg)))) if seg.size > 1 else 0.0
        sup, inf = float(np.max(cand)), float(np.min(cand))
        return sup, inf, sup + span, max(inf - span, 0.0)

    def average(self, key, fn, lo, hi, d):
        """Orbit-volume weighted mean of an invariant function on ``[lo, hi]``."""
        if hi - lo < 1e-9 * max(self.u_max, 1.0):
            return float(np.asarray(fn(self.points(np.array([d]))))[0])
        ck = ("cum", key)
        if ck not in self._cache:
            vals = np.asarray(fn(self.points(self._cell_u()))).reshape(self._cell_dvol.shape)
            cum = np.concatenate([[0.0], np.cumsum(np.sum(vals * self._cell_dvol, axis=1))])
            self._cache[ck] = PchipInterpolator(self.u_nodes, cum)
        f_int = self._cache[ck]
        v = float(self._cum_vol(hi) - self._cum_vol(lo))
        return float(f_int(hi) - f_int(lo)) / v

    def _cell_u(self):
        if "cell_u" not in self._cache:
            u_of_t = PchipInterpolator(self.t_nodes, self.u_nodes)
            self._cache["cell_u"] = u_of_t(self._cell_t.ravel())
        return self._cache["cell_u"]


class SampledBalls:
    """Coordinate-ball model for flat and hyperbolic charts."""

    def __init__(self, entry, n_samples: int = 4096, seed: int = 0):
        self.entry = entry
        dim = entry.metric.dimension
        self.dim = dim
        m = int(np.ceil(np.log2(n_samples * (2**dim) / _unit_ball_volume(dim) * 1.2)))
        cube = 2.0 * qmc.Sobol(dim, scramble=True, seed=seed).random_base2(m) - 1.0
        inner = cube[np.sum(cube**2, axis=1) < 1.0][:n_samples]
        gauss = qmc.MultivariateNormalQMC(np.zeros(dim), seed=seed + 1).random(max(n_samples // 4, 64))
        bnd = gauss / np.linalg.norm(gauss, axis=1, keepdims=True)
        if dim == 2:
            ang = 2 * np.pi * (np.arange(max(n_samples // 4, 64)) + 0.5) / max(n_samples // 4, 64)
            bnd = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        self.interior = inner
        self.boundary = bnd
        self.lam = float(entry.metric.metric_scale)

    def distance_of(self, p) -> float:
        return 0.0

    def coordinate_ball(self, p, r):
        p = np.asarray(p, dtype=float)
        if self.entry.ball_model == "hyperbolic":
            R = self.entry.params["R"] * self.lam
            c = p.copy()
            c[-1] = p[-1] * np.cosh(r / R)
            return c, p[-1] * np.sinh(r / R)
        return p, r / self.lam

    def samples(self, p, r, boundary=True):
        c, rad = self.coordinate_ball(p, r)
        pts = c + rad * self.interior
        if boundary:
            pts = np.concatenate([pts, c + rad * self.boundary])
        return pts

    def curvature_norm(self, x):
        if self.entry.ball_model == "euclidean":
            return np.zeros(x.shape[:-1])
        g, dg, d2g = self.entry.metric.derivatives(x)
        return np.sqrt(curvature_from(g, dg, d2g, self.entry.metric.orientation).energy_density)

    def killing_norm(self, x):
        g = self.entry.metric.g(x)
        X = self.entry.killing.X(x)
        return np.sqrt(np.maximum(np.einsum("...i,...ij,...j->...", X, g, X), 0.0))

    def weights(self, x):
        return np.sqrt(np.linalg.det(self.entry.metric.g(x)))


def _unit_ball_volume(dim):
    from math import gamma, pi

    return pi ** (dim / 2) / gamma(dim / 2 + 1)


def ball_model(entry, cfg: ProbeConfig, u_needed: float = 0.0):
    if entry.ball_model == "radial":
        return RadialBalls(entry, max(u_needed, 2.0 * cfg.s_cap, entry.metric.length_scale), cfg.n_radial)
    return SampledBalls(entry, cfg.n_angular, cfg.seed)


# ------------------------------------------------------------------ curvature radius


def _sup_curvature(model, p, r, d):
    if isinstance(model, RadialBalls):
        lo, hi = model.interval(d, r)
        sup, _, upper, _ = model.extremes("k", model.curvature_norm, lo, hi)
        return sup, upper
    vals = model.curvature_norm(model.samples(p, r))
    return float(np.max(vals)), float(np.max(vals))


def curvature_radius(entry, p, s: float, cfg: ProbeConfig = ProbeConfig(), model=None) -> Bracket:
    """``sup{0 < r < s : |Rm| < r^-2 on B(p, r)}`` by bisection."""
    model = model or ball_model(entry, cfg, 0.0)
    d = model.distance_of(p)
    if isinstance(model, RadialBalls):
        model.ensure(d + s)
    ok = lambda r: _sup_curvature(model, p, r, d)[0] < r**-2
    if ok(s):
        return Bracket(s, s, s)
    lo, hi = 0.0, s
    # the condition holds for small r whenever |Rm|(p) is finite
    while hi - lo > cfg.bracket_tol * s:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return Bracket(0.5 * (lo + hi), lo, hi)


# ------------------------------------------------------------------ energy radius and maximal function


def _ball_average(model, fn, p, r, d, key=None):
    if isinstance(model, RadialBalls):
        lo, hi = model.interval(d, r)
        return model.average(fn if key is None else key, fn, lo, hi, d)
    x = model.samples(p, r, boundary=False)
    w = model.weights(x)
    return float(np.sum(w * fn(x)) / np.sum(w))


def _energy_fn(model):
    return lambda x: model.curvature_norm(x) ** 2


def _r_ladder(s, unit, per_octave=8):
    lo = np.floor(np.log2(1e-4 * unit) * per_octave)
    hi = np.ceil(np.log2(s) * per_octave)
    r = 2.0 ** (np.arange(lo, hi + 1) / per_octave)
    return np.concatenate([r[r < s], [s]])


def energy_radius(entry, p, s: float, cfg: ProbeConfig = ProbeConfig(), model=None) -> Bracket:
    """``sup{0 < r < s : r^4 * (mean of |Rm|^2 over B(p, r)) <= eps0}``."""
    model = model or ball_model(entry, cfg, 0.0)
    d = model.distance_of(p)
    if isinstance(model, RadialBalls):
        model.ensure(d + s)
    fn = _energy_fn(model)
    h = lambda r: r**4 * _ball_average(model, fn, p, r, d, "energy") - cfg.eps0
    unit = entry.metric.length_scale * entry.metric.metric_scale
    ladder = _r_ladder(s, unit)
    vals = np.array([h(r) for r in ladder])
    good = np.flatnonzero(vals <= 0)
    if good.size == 0:
        return Bracket(0.0, 0.0, float(ladder[0]))
    i = good[-1]
    if i == len(ladder) - 1:
        return Bracket(s, s, s)
    lo, hi = float(ladder[i]), float(ladder[i + 1])
    while hi - lo > cfg.bracket_tol * s:
        mid = 0.5 * (lo + hi)
        if h(mid) <= 0:
            lo = mid
        else:
            hi = mid
    return Bracket(0.5 * (lo + hi), lo, hi)


def maximal_function(entry, f: Callable, p, s: float, cfg: ProbeConfig = ProbeConfig(), model=None,
                     key=None) -> float:
    """``sup_{0<r<s}`` of the ball average of ``|f|``; for radial entries ``f`` must be invariant."""
    model = model or ball_model(entry, cfg, 0.0)
    d = model.distance_of(p)
    if isinstance(model, RadialBalls):
        model.ensure(d + s)
    absf = lambda x: np.abs(np.asarray(f(x), dtype=float))
    unit = entry.metric.length_scale * entry.metric.metric_scale
    ladder = _r_ladder(s, unit)
    p_arr = np.asarray(p, dtype=float)
    best = float(absf(p_arr[None, :])[0]) if not isinstance(model, RadialBalls) else \
        float(absf(model.points(np.array([d])))[0])
    for r in ladder:
        best = max(best, _ball_average(model, absf, p, r, d, key))
    return best


def curvature_maximal_function(entry, p, s, cfg: ProbeConfig = ProbeConfig(), model=None) -> float:
    model = model or ball_model(entry, cfg, 0.0)
    return maximal_function(entry, _energy_fn(model), p, s, cfg, model, key="energy")


# ------------------------------------------------------------------ local variation


@dataclass
class VariationResult:
    ratio: float
    sup: float
    inf: float
    ratio_upper: float
    infinite: bool

    def as_dict(self):
        return {
            "ratio": None if self.infinite else self.ratio,
            "infinite": self.infinite,
            "sup": self.sup,
            "inf": self.inf,
            "ratio_upper": None if not np.isfinite(self.ratio_upper) else self.ratio_upper,
        }


def _ratio(sup, inf, sup_hi, inf_lo, null):
    if inf <= null:
        return VariationResult(INF, sup, inf, INF, True)
    upper = sup_hi / inf_lo if inf_lo > null else INF
    return VariationResult(sup / inf, sup, inf, upper, False)


def _null(entry):
    return 1e-6 * entry.metric.length_scale * entry.metric.metric_scale


def _variation_on_ball(model, entry, p, r, d, omega=None):
    """sup/inf of ``|X|`` over ``B(p, r)`` minus the excised ball ``omega``."""
    null = _null(entry)
    if isinstance(model, RadialBalls):
        excise = 0.0 if omega is None else omega[1]
        lo, hi = model.interval(d, r, excise)
        sup, inf, sup_hi, inf_lo = model.extremes("x", model.killing_norm, lo, hi)
        return _ratio(sup, inf, sup_hi, inf_lo, null)
    x = model.samples(p, r)
    if omega is not None:
        c, rad = model.coordinate_ball(omega[0], omega[1])
        x = x[np.linalg.norm(x - c, axis=1) >= rad]
        if x.shape[0] == 0:
            raise DomainError("ball lies inside the excised domain")
    vals = model.killing_norm(x)
    sup, inf = float(np.max(vals)), float(np.min(vals))
    if omega is None and entry.zero_distance is not None:
        c, rad = model.coordinate_ball(p, r)
        if float(entry.zero_distance(c)) < rad:
            inf = 0.0
    return _ratio(sup, inf, sup, inf, null)


def local_variation(entry, p, s: float, cfg: ProbeConfig = ProbeConfig(), model=None) -> VariationResult:
    """Pointwise ratio ``sup|X| / inf|X|`` over ``B(p, r_R^s(p))``."""
    model = model or ball_model(entry, cfg, 0.0)
    r = curvature_radius(entry, p, s, cfg, model).value
    return _variation_on_ball(model, entry, p, r, model.distance_of(p))


def excised_variation(entry, omega, s: float, cfg: ProbeConfig = ProbeConfig(), n_offsets: int = 161,
                      n_directions: int = 16, model=None) -> VariationResult:
    """``sup over p outside omega`` of the ratio over ``B(p, r_R^s(p))`` minus ``omega``.

    ``omega = (centre, radius)``.  Points ``p`` range over distances
    ``[radius, radius + 8 s]`` from the centre (along ``n_directions`` rays for
    sampled models; radial models need only the distance).
    """
    model = model or ball_model(entry, cfg, omega[1] + 10 * s)
    centre = np.asarray(omega[0], dtype=float)
    R = float(omega[1])
    offsets = np.linspace(R, R + 8.0 * s, n_offsets)
    best = None
    if isinstance(model, RadialBalls):
        for d in offsets:
            p = model.points(np.array([d]))[0]
            r = _radius_at_distance(entry, model, p, d, s, cfg)
            res = _variation_on_ball(model, entry, p, r, d, omega)
            best = res if best is None or _worse(res, best) else best
        return best
    dirs = qmc.MultivariateNormalQMC(np.zeros(entry.metric.dimension), seed=cfg.seed + 7).random(n_directions)
    dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    if entry.metric.dimension == 2:
        ang = 2 * np.pi * np.arange(n_directions) / n_directions
        dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    lam = entry.metric.metric_scale
    for u in dirs:
        for d in offsets:
            p = centre + (d / lam) * u
            r = curvature_radius(entry, p, s, cfg, model).value
            res = _variation_on_ball(model, entry, p, r, 0.0, omega)
            best = res if best is None or _worse(res, best) else best
    return best


def _radius_at_distance(entry, model, p, d, s, cfg):
    ok = lambda r: _sup_curvature(model, p, r, d)[0] < r**-2
    if ok(s):
        return s
    lo, hi = 0.0, s
    while hi - lo > 1e-9 * s:
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if ok(mid) else (lo, mid)
    return 0.5 * (lo + hi)


def _worse(a: VariationResult, b: VariationResult) -> bool:
    if a.infinite:
        return not b.infinite
    return not b.infinite and a.ratio > b.ratio


def asymptotic_variation(entry, p, s0: float, cfg: ProbeConfig = ProbeConfig(), ratio: float = 2.0) -> list:
    """Sequence of excised ratios with ``omega = B(p, s)`` over a geometric ladder of ``s``."""
    out = []
    for k in range(cfg.ladder_rungs):
        s = s0 * ratio**k
        res = excised_variation(entry, (p, s), s, cfg)
        out.append({"s": s, **res.as_dict()})
    return out


# ------------------------------------------------------------------ weak estimate


@dataclass
class WeakEstimate:
    k: float
    lhs: float
    rhs: float
    r_curv: float
    maximal: float
    passed: bool

    @property
    def margin(self) -> float:
        return self.rhs / self.lhs if self.lhs > 0 else INF


def weak_estimate_check(entry, p, s: float, k: float, cfg: ProbeConfig = ProbeConfig(), model=None) -> WeakEstimate:
    """Compare ``r_R^s(p)^-k`` with ``max(2^k s^-k, (16 M^s_{|Rm|^2}(p) / eps0)^(k/4))``."""
    model = model or ball_model(entry, cfg, 0.0)
    r = curvature_radius(entry, p, s, cfg, model)
    m = curvature_maximal_function(entry, p, s, cfg, model)
    lhs = r.lower ** (-k) if r.lower > 0 else INF
    rhs = max(2.0**k * s ** (-k), (16.0 * m / cfg.eps0) ** (k / 4.0))
    return WeakEstimate(k, lhs, rhs, r.value, m, bool(lhs <= rhs * (1 + 1e-12)))


def probe(entry, p, s: float, cfg: ProbeConfig = ProbeConfig()) -> ProbeResult:
    model = ball_model(entry, cfg, 0.0)
    rc = curvature_radius(entry, p, s, cfg, model)
    rho = energy_radius(entry, p, s, cfg, model)
    mx = local_variation(entry, p, s, cfg, model)
    omega = None
    if cfg.excised_domain is not None:
        omega = excised_variation(entry, cfg.excised_domain, s, cfg)
    m = curvature_maximal_function(entry, p, s, cfg, model)
    return ProbeResult(
        r_curv=rc.value,
        rho=rho.value,
        m_x=mx.ratio,
        m_x_omega_s=None if omega is None else omega.ratio,
        m_x_infty_estimate=[],
        maximal=m,
        brackets={"r_curv": rc.as_dict(), "rho": rho.as_dict(), "m_x": mx.as_dict(),
                  "m_x_omega_s": None if omega is None else omega.as_dict()},
    )
